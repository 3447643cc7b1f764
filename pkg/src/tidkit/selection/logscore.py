"""Sequential log score.

Each case contributes ``-log P(y | e)`` where ``y`` is the case's target
values and ``e`` its evidence values. With no evidence columns and every
column as target, the score is the plain negative log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..cases import CaseSet
from ..exceptions import EstimationError
from ..inference import log_likelihood_many
from ..network import Network


def _network(model) -> Network:
    return model if isinstance(model, Network) else model.network


@dataclass(frozen=True)
class LogScore:
    """Result of :func:`sequential_log_score`.

    Attributes
    ----------
    total : float
        ``S``; ``inf`` when any case is impossible.
    per_case : ndarray
        ``-log P_m(y | e)`` for each case, in order.
    impossible : ndarray of bool
        Cases the model gives probability zero.
    """

    total: float
    per_case: np.ndarray
    impossible: np.ndarray

    @property
    def trace(self) -> np.ndarray:
        """Running totals ``S_1 .. S_M``."""
        return np.cumsum(self.per_case)

    @property
    def flagged(self) -> bool:
        return bool(self.impossible.any())

    def __len__(self):
        return self.per_case.shape[0]


def case_scores(
    model,
    cases: CaseSet,
    target: Sequence[str] | None = None,
    evidence: Sequence[str] | None = None,
) -> np.ndarray:
    """Per-case ``-log P(y | e)`` (``inf`` for impossible cases).

    ``target`` defaults to every column not listed in ``evidence``.
    Unobserved target or evidence entries are summed out.
    """
    net = _network(model)
    evidence = tuple(evidence or ())
    if target is None:
        target = tuple(c for c in cases.columns if c not in set(evidence))
    else:
        target = tuple(target)
    overlap = set(target) & set(evidence)
    if overlap:
        raise EstimationError(f"columns {sorted(overlap)} are both target and evidence")
    for c in target + evidence:
        if c not in cases.columns:
            raise EstimationError(f"column {c!r} is not in the case set")
        if c not in net.nodes:
            raise EstimationError(f"column {c!r} is not a node of the model")
    joint_cols = list(target + evidence)
    joint = cases.select(joint_cols)
    with np.errstate(invalid="ignore"):
        logp_joint = log_likelihood_many(net, joint.columns, joint.data)
        if evidence:
            ev = cases.select(list(evidence))
            logp_ev = log_likelihood_many(net, ev.columns, ev.data)
        else:
            logp_ev = np.zeros(len(cases))
        scores = -(logp_joint - logp_ev)
    # P(y|e) <= 1 exactly; clip rounding noise
    scores = np.where(np.isfinite(logp_joint) & np.isfinite(logp_ev), np.maximum(scores, 0.0), np.inf)
    return scores


def sequential_log_score(
    model,
    cases: CaseSet,
    target: Sequence[str] | None = None,
    evidence: Sequence[str] | None = None,
) -> LogScore:
    """Total and per-case log score of ``model`` over an ordered case stream.

    Parameters
    ----------
    model : Network or CandidateModel
    cases : CaseSet
    target : sequence of str, optional
        Columns predicted (for example the disease nodes).
    evidence : sequence of str, optional
        Columns conditioned on (for example the findings).

    Returns
    -------
    LogScore
        ``total`` is ``inf`` and ``flagged`` is true when some case has
        probability zero under the model.
    """
    per_case = case_scores(model, cases, target, evidence)
    impossible = ~np.isfinite(per_case)
    total = float(per_case.sum()) if not impossible.any() else float("inf")
    return LogScore(total, per_case, impossible)


class LogScoreMonitor:
    """Running log score as new cases arrive.

    Examples
    --------
    >>> from tidkit.fixtures import mini_aap_id
    >>> from tidkit.cases import simulate
    >>> net = mini_aap_id().bn_portion()
    >>> cases = simulate(net, 10, seed=0)
    >>> mon = LogScoreMonitor(net)
    >>> _ = mon.update(cases[:4]); _ = mon.update(cases[4:])
    >>> bool(abs(mon.total - sequential_log_score(net, cases).total) < 1e-12)
    True
    """

    def __init__(self, model, target: Sequence[str] | None = None, evidence: Sequence[str] | None = None):
        self.model = model
        self.target = None if target is None else tuple(target)
        self.evidence = None if evidence is None else tuple(evidence)
        self._scores: list[np.ndarray] = []

    def update(self, cases: CaseSet) -> np.ndarray:
        """Score and append ``cases``; returns their per-case scores."""
        s = case_scores(self.model, cases, self.target, self.evidence)
        self._scores.append(s)
        return s

    @property
    def per_case(self) -> np.ndarray:
        return np.concatenate(self._scores) if self._scores else np.zeros(0)

    @property
    def trace(self) -> np.ndarray:
        return np.cumsum(self.per_case)

    @property
    def flagged(self) -> bool:
        return bool(np.any(~np.isfinite(self.per_case)))

    @property
    def total(self) -> float:
        s = self.per_case
        return float("inf") if np.any(~np.isfinite(s)) else float(s.sum())

    def result(self) -> LogScore:
        s = self.per_case
        return LogScore(self.total, s, ~np.isfinite(s))


__all__ = ["LogScore", "LogScoreMonitor", "case_scores", "sequential_log_score"]
