"""Exact inference on discrete networks.

:func:`posterior` runs variable elimination with a min-fill elimination
order (ties broken by lowest node id) after pruning nodes that are not
ancestors of the query or the evidence. :func:`enumerate_posterior` is the
independent oracle: it materializes the full joint table and sums it.

Decision nodes that matter to a query are treated as parentless nodes with
a uniform distribution, so conditioning on a decision is the same as setting
it. Zero-probability evidence raises :class:`InconsistentEvidenceError`;
nothing is renormalized silently.

The ``*_many`` functions evaluate a batch of cases in one elimination pass
by carrying the case index as an extra, never-eliminated dimension.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import (
    InconsistentEvidenceError,
    InferenceError,
    OracleSizeError,
    UnknownVariableError,
)
from .network import CHANCE, DECISION, VALUE, Network, joint_probability, state_indices

BATCH = "#batch"

#: Largest joint table (in cells) :func:`enumerate_posterior` will build.
ORACLE_MAX_CELLS = 2**24


class Factor:
    """A non-negative table over an ordered scope of variables."""

    __slots__ = ("scope", "values")

    def __init__(self, scope: Sequence[str], values: np.ndarray):
        self.scope = tuple(scope)
        self.values = values
        if values.ndim != len(self.scope):
            raise ValueError(f"factor over {self.scope} has {values.ndim} axes")

    def __repr__(self):
        return f"Factor({self.scope}, shape={self.values.shape})"

    def __mul__(self, other: "Factor") -> "Factor":
        scope = self.scope + tuple(v for v in other.scope if v not in self.scope)
        return product([self, other], scope)

    def sum_out(self, var: str) -> "Factor":
        axis = self.scope.index(var)
        return Factor(self.scope[:axis] + self.scope[axis + 1 :], self.values.sum(axis=axis))

    def transpose(self, scope: Sequence[str]) -> "Factor":
        return Factor(scope, np.transpose(self.values, [self.scope.index(v) for v in scope]))


def product(factors: Sequence[Factor], out_scope: Sequence[str]) -> Factor:
    """Multiply ``factors`` and sum out every variable not in ``out_scope``."""
    if not factors:
        return Factor((), np.array(1.0))
    labels: dict[str, int] = {}
    args: list = []
    for f in factors:
        args.append(f.values)
        args.append([labels.setdefault(v, len(labels)) for v in f.scope])
    args.append([labels[v] for v in out_scope])
    return Factor(out_scope, np.einsum(*args))


@dataclass(frozen=True)
class Distribution:
    """A (conditional) joint distribution over ``variables``.

    ``probs`` has one axis per variable, in order.
    """

    variables: tuple[str, ...]
    states: tuple[tuple[str, ...], ...]
    probs: np.ndarray

    def marginal(self, var: str) -> np.ndarray:
        axis = self.variables.index(var)
        others = tuple(i for i in range(len(self.variables)) if i != axis)
        return self.probs.sum(axis=others) if others else self.probs

    def prob(self, assignment: Mapping[str, object]) -> float:
        """Probability of a (partial) assignment of the distribution's variables."""
        index = []
        for var, states in zip(self.variables, self.states):
            if var in assignment:
                s = assignment[var]
                index.append(s if isinstance(s, (int, np.integer)) else states.index(str(s)))
            else:
                index.append(slice(None))
        return float(np.sum(self.probs[tuple(index)]))

    def as_dict(self) -> dict:
        if len(self.variables) == 1:
            return dict(zip(self.states[0], map(float, self.probs)))
        out = {}
        for idx in np.ndindex(*self.probs.shape):
            key = tuple(self.states[k][i] for k, i in enumerate(idx))
            out[key] = float(self.probs[idx])
        return out


# -- elimination ordering ---------------------------------------------------


def min_fill_order(scopes: Iterable[Sequence[str]], eliminate: Iterable[str]) -> list[str]:
    """Greedy min-fill elimination order over the interaction graph.

    Ties go to the lowest variable id. Variables not in ``eliminate`` (query
    or batch variables) stay in the graph as neighbours.
    """
    adj: dict[str, set[str]] = {}
    for scope in scopes:
        for a in scope:
            adj.setdefault(a, set()).update(b for b in scope if b != a)
    remaining = set(eliminate)
    for v in remaining:
        adj.setdefault(v, set())
    order = []
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            nbrs = adj[v]
            fill = 0
            for u in nbrs:
                fill += len(nbrs - adj[u]) - 1
            fill //= 2
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
                if fill == 0:
                    break
        nbrs = adj.pop(best)
        for u in nbrs:
            adj[u].discard(best)
            adj[u].update(nbrs - {u})
        remaining.discard(best)
        order.append(best)
    return order


_PLAN_CACHE: "OrderedDict[tuple, tuple]" = OrderedDict()
_PLAN_CACHE_SIZE = 512


def _plan(net: Network, evidence_vars: frozenset, query: tuple, batched: bool):
    """Relevant nodes and elimination order, memoized per structure."""
    key = (net.signature, evidence_vars, query, batched)
    hit = _PLAN_CACHE.get(key)
    if hit is not None:
        _PLAN_CACHE.move_to_end(key)
        return hit
    relevant = net.ancestors(set(query) | evidence_vars)
    relevant_order = tuple(i for i in net.topological_order if i in relevant)
    scopes = []
    for i in relevant_order:
        node = net.nodes[i]
        scope = (node.parents + (i,)) if node.kind == CHANCE else (i,)
        reduced = tuple(v for v in scope if not (v in evidence_vars and v not in query))
        if batched and len(reduced) < len(scope):
            reduced = (BATCH,) + reduced
        scopes.append(reduced)
    eliminate = [i for i in relevant_order if i not in query and i not in evidence_vars]
    order = min_fill_order(scopes, eliminate)
    plan = (relevant_order, tuple(order))
    _PLAN_CACHE[key] = plan
    if len(_PLAN_CACHE) > _PLAN_CACHE_SIZE:
        _PLAN_CACHE.popitem(last=False)
    return plan


def _node_factor(net: Network, node_id: str) -> Factor:
    node = net.nodes[node_id]
    if node.kind == CHANCE:
        shape = net.parent_cards(node_id) + (node.variable.card,)
        return Factor(node.parents + (node_id,), net.cpt(node_id).reshape(shape))
    card = node.variable.card
    return Factor((node_id,), np.full(card, 1.0 / card))


def _eliminate(
    net: Network,
    evidence: Mapping[str, object],
    query: tuple[str, ...],
    batch: int | None,
) -> Factor:
    """Unnormalized factor over ``(BATCH?,) + query`` after conditioning.

    ``evidence`` maps node ids to state indices: ints, or int arrays of
    length ``batch`` when batching.
    """
    batched = batch is not None
    ev_vars = frozenset(evidence)
    relevant, order = _plan(net, ev_vars, query, batched)

    factors: list[Factor] = []
    for i in relevant:
        f = _node_factor(net, i)
        reduce_vars = [v for v in f.scope if v in ev_vars and v not in query]
        if reduce_vars:
            rest = [v for v in f.scope if v not in reduce_vars]
            vals = np.transpose(f.values, [f.scope.index(v) for v in reduce_vars + rest])
            vals = vals[tuple(evidence[v] for v in reduce_vars)]
            f = Factor(((BATCH,) if batched else ()) + tuple(rest), vals)
        factors.append(f)
    for q in query:
        if q in ev_vars:
            card = net.card(q)
            if batched:
                ind = np.zeros((batch, card))
                ind[np.arange(batch), evidence[q]] = 1.0
                factors.append(Factor((BATCH, q), ind))
            else:
                ind = np.zeros(card)
                ind[evidence[q]] = 1.0
                factors.append(Factor((q,), ind))

    for var in order:
        bucket = [f for f in factors if var in f.scope]
        if not bucket:
            continue
        factors = [f for f in factors if var not in f.scope]
        scope: list[str] = []
        for f in bucket:
            scope.extend(v for v in f.scope if v != var and v not in scope)
        factors.append(product(bucket, scope))

    has_batch = any(BATCH in f.scope for f in factors)
    out_scope = ((BATCH,) if has_batch else ()) + query
    result = product(factors, out_scope)
    if batched and not has_batch:
        result = Factor((BATCH,) + query, np.broadcast_to(result.values, (batch,) + result.values.shape).copy())
    return result


def _resolve_evidence(net: Network, evidence: Mapping[str, object] | None) -> dict[str, int]:
    evidence = evidence or {}
    idx = state_indices(net, evidence)
    for key in idx:
        if net.nodes[key].kind == VALUE:
            raise UnknownVariableError(f"value node {key!r} cannot be observed")
    return idx


def _as_query(query) -> tuple[str, ...]:
    if isinstance(query, str):
        return (query,)
    return tuple(query)


def _check_query(net: Network, query: tuple[str, ...]):
    if len(set(query)) != len(query):
        raise ValueError(f"query repeats a variable: {query}")
    for q in query:
        if net.node(q).kind != CHANCE:
            raise UnknownVariableError(f"query variable {q!r} is not a chance node")


def posterior(net: Network, evidence: Mapping[str, object] | None, query) -> Distribution:
    """``P(query | evidence)`` by variable elimination.

    Parameters
    ----------
    net : Network
        A valid network.
    evidence : mapping of node id to state label (or index)
    query : str or sequence of str
        Chance node ids; the result has one axis per query variable.

    Raises
    ------
    InconsistentEvidenceError
        If the evidence has probability zero.
    """
    net.check()
    query = _as_query(query)
    _check_query(net, query)
    idx = _resolve_evidence(net, evidence)
    f = _eliminate(net, idx, query, None)
    z = float(f.values.sum())
    if not z > 0.0:
        raise InconsistentEvidenceError(f"evidence {dict(evidence or {})} has probability zero")
    return Distribution(query, tuple(net.variable(q).states for q in query), f.values / z)


def posterior_many(
    net: Network,
    columns: Sequence[str],
    data: np.ndarray,
    query,
) -> tuple[np.ndarray, np.ndarray]:
    """Posteriors for many cases at once.

    Parameters
    ----------
    columns : sequence of node ids labelling the columns of ``data``
    data : int array, shape (n_cases, n_columns)
        State indices; ``-1`` marks an unobserved entry.
    query : str or sequence of str

    Returns
    -------
    probs : array, shape (n_cases, *query_cards)
        Normalized posteriors; rows whose evidence is impossible are NaN.
    evidence_prob : array, shape (n_cases,)
        ``P(evidence)`` of each case.
    """
    net.check()
    query = _as_query(query)
    _check_query(net, query)
    data = np.asarray(data)
    n = data.shape[0]
    cards = tuple(net.card(q) for q in query)
    probs = np.full((n,) + cards, np.nan)
    z_all = np.zeros(n)
    keep_cols = [j for j, c in enumerate(columns) if c in net.nodes and net.nodes[c].kind != VALUE]
    if n == 0:
        return probs, z_all
    observed = data[:, keep_cols] >= 0
    patterns, inverse = np.unique(observed, axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    for k, pattern in enumerate(patterns):
        rows = np.flatnonzero(inverse == k)
        ev = {columns[keep_cols[j]]: data[rows, keep_cols[j]] for j in np.flatnonzero(pattern)}
        f = _eliminate(net, ev, query, len(rows))
        flat = f.values.reshape(len(rows), -1)
        z = flat.sum(axis=1)
        z_all[rows] = z
        ok = z > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            normed = flat / z[:, None]
        normed[~ok] = np.nan
        probs[rows] = normed.reshape((len(rows),) + cards)
    return probs, z_all


def enumerate_posterior(net: Network, evidence: Mapping[str, object] | None, query) -> Distribution:
    """``P(query | evidence)`` by summing the explicit full joint table.

    Reference implementation for tests; it shares no elimination machinery
    with :func:`posterior`.

    Raises
    ------
    OracleSizeError
        If the joint table would exceed :data:`ORACLE_MAX_CELLS` cells.
    """
    net.check()
    query = _as_query(query)
    _check_query(net, query)
    idx = _resolve_evidence(net, evidence)
    variables = [n.id for n in net if n.kind != VALUE]
    cards = [net.card(v) for v in variables]
    size = math.prod(cards)
    if size > ORACLE_MAX_CELLS:
        raise OracleSizeError(f"joint table has {size} cells (> {ORACLE_MAX_CELLS})")
    axis = {v: k for k, v in enumerate(variables)}
    joint = np.ones(cards)
    for v in variables:
        node = net.nodes[v]
        shape = [1] * len(variables)
        if node.kind == CHANCE:
            table = net.cpt(v).reshape(net.parent_cards(v) + (node.variable.card,))
            scope = list(node.parents) + [v]
            # place each table axis on its variable's joint axis
            order = sorted(range(len(scope)), key=lambda k: axis[scope[k]])
            table = np.transpose(table, order)
            for k in order:
                shape[axis[scope[k]]] = cards[axis[scope[k]]]
            joint = joint * table.reshape(shape)
        else:
            shape[axis[v]] = cards[axis[v]]
            joint = joint * np.full(shape, 1.0 / cards[axis[v]])
    # zero the cells that disagree with the evidence; axes keep their length
    for v, s in idx.items():
        mask = np.zeros(cards[axis[v]])
        mask[s] = 1.0
        shape = [1] * len(variables)
        shape[axis[v]] = cards[axis[v]]
        joint = joint * mask.reshape(shape)
    sum_axes = tuple(k for k, v in enumerate(variables) if v not in query)
    marg = joint.sum(axis=sum_axes)
    kept = [v for v in variables if v in query]
    marg = np.transpose(marg, [kept.index(q) for q in query]) if kept else marg
    z = float(marg.sum())
    if not z > 0.0:
        raise InconsistentEvidenceError(f"evidence {dict(evidence or {})} has probability zero")
    return Distribution(query, tuple(net.variable(q).states for q in query), marg / z)


# -- likelihoods --------------------------------------------------------------


def log_likelihood(net: Network, case: Mapping[str, object] | None) -> float:
    """``log P(case)`` with unobserved variables summed out.

    An empty case has probability one and returns ``0.0``. A case with
    probability zero returns ``-inf``, the documented "impossible case"
    value; callers that aggregate scores flag it (see
    :func:`tidkit.selection.sequential_log_score`).
    """
    net.check()
    idx = _resolve_evidence(net, case)
    if not idx:
        return 0.0
    covered = all(i in idx for i in net.chance_nodes) and all(
        q in idx for i in net.chance_nodes for q in net.parents(i) if net.nodes[q].kind == DECISION
    )
    if covered:
        p = joint_probability(net, idx)
    else:
        p = float(_eliminate(net, idx, (), None).values)
    return math.log(p) if p > 0.0 else -math.inf


def log_likelihood_many(net: Network, columns: Sequence[str], data: np.ndarray) -> np.ndarray:
    """``log P(case)`` for every row of ``data`` (``-1`` = unobserved).

    Rows that observe every chance node are scored by a vectorized product
    of CPT entries; the rest are grouped by missingness pattern and scored by
    batched elimination. Impossible rows get ``-inf``.
    """
    net.check()
    data = np.asarray(data)
    col = {c: j for j, c in enumerate(columns) if c in net.nodes and net.nodes[c].kind != VALUE}
    n = data.shape[0]
    out = np.zeros(n)
    if n == 0:
        return out
    chance = net.chance_nodes
    decision_parents = {q for i in chance for q in net.parents(i) if net.nodes[q].kind == DECISION}
    needed = [c for c in chance] + sorted(decision_parents)
    if all(c in col for c in needed):
        complete = np.all(data[:, [col[c] for c in needed]] >= 0, axis=1)
    else:
        complete = np.zeros(n, dtype=bool)
    if complete.any():
        rows = data[complete]
        logp = np.zeros(rows.shape[0])
        with np.errstate(divide="ignore"):
            for i in chance:
                parents = net.parents(i)
                if parents:
                    r = np.ravel_multi_index(tuple(rows[:, col[p]] for p in parents), net.parent_cards(i))
                else:
                    r = np.zeros(rows.shape[0], dtype=np.intp)
                logp += np.log(net.cpt(i)[r, rows[:, col[i]]])
        out[complete] = logp
    partial = np.flatnonzero(~complete)
    if partial.size:
        keep = list(col.values())
        names = list(col.keys())
        sub = data[np.ix_(partial, keep)]
        patterns, inverse = np.unique(sub >= 0, axis=0, return_inverse=True)
        inverse = np.ravel(inverse)
        for k, pattern in enumerate(patterns):
            rows = partial[inverse == k]
            ev = {names[j]: data[rows, keep[j]] for j in np.flatnonzero(pattern)}
            if not ev:
                continue
            z = _eliminate(net, ev, (), len(rows)).values.reshape(len(rows))
            with np.errstate(divide="ignore"):
                out[rows] = np.log(z)
    return out


# -- decisions ----------------------------------------------------------------


@dataclass(frozen=True)
class DecisionResult:
    """Outcome of :func:`evaluate_decision`."""

    decision: str
    actions: tuple[str, ...]
    expected_loss: np.ndarray
    action_index: int

    @property
    def action(self) -> str:
        return self.actions[self.action_index]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.actions, map(float, self.expected_loss)))


def evaluate_decision(net: Network, evidence: Mapping[str, object] | None = None) -> DecisionResult:
    """Expected loss of every action of the (single) decision node.

    Loss is the negated utility of the value node. For action ``a`` the
    expected loss is ``sum_s P(s | evidence, a) * loss(s, a)`` over the
    chance parents ``s`` of the value node. The chosen action minimizes it;
    ties go to the lowest action index.
    """
    net.check()
    if len(net.decision_nodes) != 1 or len(net.value_nodes) != 1:
        raise InferenceError(
            f"expected one decision and one value node, found {len(net.decision_nodes)} and {len(net.value_nodes)}"
        )
    d = net.decision_nodes[0]
    u = net.value_nodes[0]
    evidence = dict(evidence or {})
    if d in evidence:
        raise InferenceError(f"decision {d!r} cannot be part of the evidence")
    value_parents = net.parents(u)
    for p in value_parents:
        if net.nodes[p].kind not in (CHANCE, DECISION):
            raise InferenceError(f"value node parent {p!r} must be a chance or decision node")
    state_parents = tuple(p for p in value_parents if p != d)
    loss = net.loss(u).reshape(net.parent_cards(u))
    actions = net.variable(d).states
    expected = np.zeros(len(actions))
    for a in range(len(actions)):
        table = loss.take(a, axis=value_parents.index(d)) if d in value_parents else loss
        if state_parents:
            dist = posterior(net, {**evidence, d: a}, state_parents)
            expected[a] = float(np.sum(dist.probs * table))
        else:
            posterior_check = _eliminate(net, _resolve_evidence(net, evidence), (), None)
            if not float(posterior_check.values) > 0:
                raise InconsistentEvidenceError(f"evidence {evidence} has probability zero")
            expected[a] = float(table)
    return DecisionResult(d, actions, expected, int(np.argmin(expected)))


def computation_cost(net: Network) -> float:
    """log2 of the total table size created when eliminating every chance node.

    A deterministic stand-in for the resources needed to evaluate ``net``,
    used as the optional computation penalty.
    """
    net.check()
    nodes = [i for i in net.topological_order if net.nodes[i].kind != VALUE]
    scopes = [(net.parents(i) + (i,)) if net.nodes[i].kind == CHANCE else (i,) for i in nodes]
    order = min_fill_order(scopes, nodes)
    cards = {i: net.card(i) for i in nodes}
    live = [set(s) for s in scopes]
    total = 0
    for var in order:
        bucket = [s for s in live if var in s]
        live = [s for s in live if var not in s]
        union = set().union(*bucket) if bucket else {var}
        total += math.prod(cards[v] for v in union)
        live.append(union - {var})
    return math.log2(max(total, 1))
