"""Loss, risk, Bayes risk and Bayes rules over posterior-threshold rules.

A rule looks at the findings ``x``, computes ``P(disease = state | x)``
under its own model (by default the model being evaluated) and takes
``above`` when that probability reaches the threshold, ``below`` otherwise.

``risk`` is the expected loss of a rule when the world follows ``theta``:
the sum over finding configurations ``x`` and world states ``s`` of
``P(x, s | theta) * L(s, rule(x))``. Small finding spaces are enumerated
exactly; larger ones need Monte Carlo, which must be asked for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..cases import simulate, substream
from ..exceptions import EstimationError, OracleSizeError
from ..inference import computation_cost, posterior, posterior_many
from ..network import CHANCE, DECISION, Network

#: Largest number of finding configurations enumerated exactly.
MAX_CONFIGS = 4096


@dataclass(frozen=True)
class LossSpec:
    """Loss per (world state, action).

    Attributes
    ----------
    states : tuple of str
        World-state variables; the table's leading axes follow them.
    actions : tuple of str
    table : ndarray, shape (*state cards, n_actions)
    kappa : float
        Optional weight on the computation cost of the rule's model.
    """

    states: tuple[str, ...]
    actions: tuple[str, ...]
    table: np.ndarray
    kappa: float = 0.0

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        if t.ndim != len(self.states) + 1 or t.shape[-1] != len(self.actions):
            raise ValueError(f"loss table shape {t.shape} does not match {len(self.states)} states x {len(self.actions)} actions")
        if not np.all(np.isfinite(t)):
            raise ValueError("loss entries must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @classmethod
    def from_network(cls, net: Network, value: str | None = None) -> "LossSpec":
        """Negated utilities of a value node whose parents are chance nodes and one decision."""
        if value is None:
            if len(net.value_nodes) != 1:
                raise EstimationError("network must have exactly one value node")
            value = net.value_nodes[0]
        parents = net.parents(value)
        decisions = [p for p in parents if net.nodes[p].kind == DECISION]
        if len(decisions) != 1:
            raise EstimationError(f"value node {value!r} must depend on exactly one decision")
        d = decisions[0]
        table = net.loss(value).reshape(net.parent_cards(value))
        order = [k for k, p in enumerate(parents) if p != d] + [parents.index(d)]
        states = tuple(p for p in parents if p != d)
        return cls(states, net.variable(d).states, np.transpose(table, order))

    def rescale(self, scale: float, shift: float = 0.0) -> "LossSpec":
        """``scale * L + shift`` (``scale > 0``)."""
        if not scale > 0:
            raise ValueError("scale must be positive")
        return LossSpec(self.states, self.actions, scale * self.table + shift, self.kappa)

    @property
    def flat(self) -> np.ndarray:
        """Table with the world states flattened, shape (n_states, n_actions)."""
        return self.table.reshape(-1, len(self.actions))

    def action_index(self, action) -> int:
        if isinstance(action, (int, np.integer)):
            return int(action)
        return self.actions.index(action)


@dataclass(frozen=True)
class ThresholdRule:
    """Take ``above`` iff ``P(disease = state | findings) >= threshold``.

    A threshold of 0 always takes ``above``; one above 1 always takes
    ``below``. Findings configurations the rule's model deems impossible
    get ``below``.
    """

    disease: str
    state: object
    threshold: float
    above: str
    below: str
    model: Network | None = None

    @classmethod
    def always(cls, action: str, disease: str, state, other: str) -> "ThresholdRule":
        """Constant rule: ``action`` regardless of the findings."""
        return cls(disease, state, 0.0, action, other)

    @property
    def label(self) -> str:
        return f"P({self.disease}={self.state})>={self.threshold:g}?{self.above}:{self.below}"

    def act(self, p) -> np.ndarray:
        """Action choice (True = ``above``) for posterior probabilities ``p``."""
        p = np.asarray(p, dtype=float)
        return np.where(np.isnan(p), False, p >= self.threshold)


def threshold_family(
    disease: str, state, above: str, below: str, thresholds: Sequence[float] = tuple(np.round(np.arange(1, 10) / 10, 1))
) -> list[ThresholdRule]:
    """One rule per threshold (default 0.1 .. 0.9)."""
    return [ThresholdRule(disease, state, float(t), above, below) for t in thresholds]


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    stderr: float
    method: str
    samples: int = 0


def _bn(net: Network) -> Network:
    return net.bn_portion() if (net.decision_nodes or net.value_nodes) else net


def _findings(net: Network, findings) -> tuple[str, ...]:
    if findings is None:
        return tuple(i for i in net.tagged("finding") if net.nodes[i].kind == CHANCE)
    return tuple(findings)


def _actions_of(loss: LossSpec, rule: ThresholdRule):
    return loss.action_index(rule.above), loss.action_index(rule.below)


def _exact(loss: LossSpec, rule: ThresholdRule, theta: Network, xs: tuple[str, ...]) -> float:
    states = loss.states
    joint_vars = list(dict.fromkeys(xs + states))
    joint = posterior(theta, None, joint_vars).probs
    # move to (x..., s...) with s axes in loss order
    joint = joint.reshape([theta.card(v) for v in joint_vars])
    nx_ = int(np.prod([theta.card(v) for v in xs])) if xs else 1
    ns = int(np.prod([theta.card(v) for v in states])) if states else 1
    # states that are also findings: expand through a diagonal
    cols = []
    for v in xs + states:
        cols.append(joint_vars.index(v))
    p_xs = np.einsum(joint, list(range(len(joint_vars))), cols).reshape(nx_, ns)

    rule_net = _bn(rule.model) if rule.model is not None else theta
    rvars = list(dict.fromkeys(xs + (rule.disease,)))
    q = posterior(rule_net, None, rvars).probs.reshape([rule_net.card(v) for v in rvars])
    q = np.einsum(q, list(range(len(rvars))), [rvars.index(v) for v in xs + (rule.disease,)])
    q = q.reshape(nx_, rule_net.card(rule.disease))
    s = rule_net.variable(rule.disease).index(rule.state)
    with np.errstate(invalid="ignore", divide="ignore"):
        pd = q[:, s] / q.sum(axis=1)
    above, below = _actions_of(loss, rule)
    act = np.where(rule.act(pd), above, below)
    return float(np.sum(p_xs * loss.flat[:, act].T))


def _monte_carlo(loss: LossSpec, rule: ThresholdRule, theta: Network, xs, samples: int, seed) -> RiskEstimate:
    cases = simulate(theta, samples, seed)
    rule_net = _bn(rule.model) if rule.model is not None else theta
    ev = cases.select(list(xs))
    probs, _ = posterior_many(rule_net, ev.columns, ev.data, rule.disease)
    s = rule_net.variable(rule.disease).index(rule.state)
    above, below = _actions_of(loss, rule)
    act = np.where(rule.act(probs[:, s]), above, below)
    if loss.states:
        sidx = np.ravel_multi_index(tuple(cases.column(v) for v in loss.states), loss.table.shape[:-1])
    else:
        sidx = np.zeros(samples, dtype=np.intp)
    losses = loss.flat[sidx, act]
    se = float(losses.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("inf")
    return RiskEstimate(float(losses.mean()), se, "monte-carlo", samples)


def risk_estimate(
    loss: LossSpec,
    rule: ThresholdRule,
    theta_model: Network,
    findings: Sequence[str] | None = None,
    method: str = "auto",
    samples: int | None = None,
    seed: int = 0,
    max_configs: int = MAX_CONFIGS,
) -> RiskEstimate:
    """Risk of ``rule`` under ``theta_model`` with its error estimate.

    Parameters
    ----------
    findings : sequence of str, optional
        Observable variables; defaults to the finding-tagged chance nodes.
    method : {"auto", "exact", "mc"}
        ``auto`` enumerates when the finding space has at most
        ``max_configs`` configurations and otherwise uses Monte Carlo if
        ``samples`` is given.
    samples : int, optional
        Monte Carlo sample count (the sub-stream ``("risk",)`` of ``seed``).

    Raises
    ------
    OracleSizeError
        Enumeration is too large and Monte Carlo was not enabled.
    """
    theta = _bn(theta_model)
    xs = _findings(theta, findings)
    for v in xs + loss.states + (rule.disease,):
        if v not in theta.nodes:
            raise EstimationError(f"variable {v!r} is not in the model")
    for v, c in zip(loss.states, loss.table.shape[:-1]):
        if theta.card(v) != c:
            raise EstimationError(f"loss table axis for {v!r} has {c} entries, variable has {theta.card(v)} states")
    n_configs = math.prod(theta.card(v) for v in xs)
    kappa = loss.kappa * computation_cost(_bn(rule.model) if rule.model is not None else theta) if loss.kappa else 0.0
    if method not in ("auto", "exact", "mc"):
        raise ValueError(f"unknown method {method!r}")
    if method == "exact" or (method == "auto" and n_configs <= max_configs):
        if n_configs > max_configs:
            raise OracleSizeError(f"{n_configs} finding configurations exceed the enumeration guard ({max_configs})")
        return RiskEstimate(_exact(loss, rule, theta, xs) + kappa, 0.0, "exact")
    if samples is None:
        raise OracleSizeError(
            f"{n_configs} finding configurations exceed the enumeration guard ({max_configs}); pass samples= for Monte Carlo"
        )
    est = _monte_carlo(loss, rule, theta, xs, int(samples), substream(seed, "risk"))
    return RiskEstimate(est.value + kappa, est.stderr, est.method, est.samples)


def risk(loss: LossSpec, rule: ThresholdRule, theta_model: Network, **kwargs) -> float:
    """``R(theta, rule)``: expected loss over the findings (see :func:`risk_estimate`)."""
    return risk_estimate(loss, rule, theta_model, **kwargs).value


def _check_prior(prior) -> list[tuple[float, Network]]:
    prior = [(float(w), net) for w, net in prior]
    if not prior:
        raise EstimationError("prior is empty")
    weights = np.array([w for w, _ in prior])
    if np.any(weights < 0) or not math.isclose(weights.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
        raise EstimationError(f"prior weights must be non-negative and sum to 1 (sum = {weights.sum():.12g})")
    return prior


def bayes_risk(loss: LossSpec, rule: ThresholdRule, prior, **kwargs) -> float:
    """``r(pi, rule)``: prior-weighted average risk.

    ``prior`` is a sequence of ``(weight, network)`` pairs.
    """
    return float(sum(w * risk(loss, rule, net, **kwargs) for w, net in _check_prior(prior)))


def bayes_risks(loss: LossSpec, prior, rules: Sequence[ThresholdRule], **kwargs) -> list[float]:
    prior = _check_prior(prior)
    return [bayes_risk(loss, r, prior, **kwargs) for r in rules]


def bayes_rule(loss: LossSpec, prior, rules: Sequence[ThresholdRule], **kwargs) -> ThresholdRule:
    """The rule with the smallest Bayes risk.

    Risks equal up to floating-point noise (relative 1e-12) count as ties,
    which go to the lowest threshold.
    """
    if not rules:
        raise EstimationError("no rules to choose from")
    values = np.array(bayes_risks(loss, prior, rules, **kwargs))
    best = values.min()
    tol = 1e-12 * max(1.0, float(np.abs(values).max()))
    tied = [r for r, v in zip(rules, values) if v <= best + tol]
    return min(tied, key=lambda r: r.threshold)
