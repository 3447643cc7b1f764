"""Temporal networks: slice sequences joined by forward temporal arcs.

Flattened node ids follow the scheme ``<variable>@<slice>``. A temporal arc
runs from ``source@(t - lag)`` to ``target@t``. The non-custom policies
(markov, driving, observable) only generate self-arcs ``v@(t-j) -> v@t``,
``1 <= j <= order``; cross-variable arcs need a custom policy.

A temporal child's CPT in the flattened network conditions jointly on its
within-slice parents followed by its temporal parents (ordered by lag, then
source id). Those joint tables are supplied as :class:`Transition` objects;
no combination rule is applied implicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .exceptions import ConfigError, InvalidNetworkError, UnknownVariableError
from .network import CHANCE, Network, Node, Variable

POLICY_KINDS = ("markov", "driving", "observable", "custom")


def node_id(variable: str, t: int) -> str:
    return f"{variable}@{t}"


def split_node_id(nid: str) -> tuple[str, int]:
    variable, _, t = nid.rpartition("@")
    if not variable:
        raise ValueError(f"{nid!r} is not a slice-qualified id")
    return variable, int(t)


class SliceSequence(tuple):
    """Ordered per-slice networks ``G_0 .. G_N``; each must be valid."""

    def __new__(cls, slices: Iterable[Network]):
        return super().__new__(cls, slices)

    def check(self) -> "SliceSequence":
        if not self:
            raise ValueError("a slice sequence needs at least one slice")
        for t, net in enumerate(self):
            if net.violations:
                raise InvalidNetworkError(net.violations, f"slice {t} is invalid: {net.violations[0]}")
        return self

    def variables(self, t: int) -> set[str]:
        return set(self[t].nodes)

    @property
    def all_variables(self) -> set[str]:
        out: set[str] = set()
        for net in self:
            out |= net.nodes.keys()
        return out

    @classmethod
    def copies(cls, net: Network, n_slices: int) -> "SliceSequence":
        return cls([net] * n_slices)


def as_slices(slices) -> SliceSequence:
    return slices if isinstance(slices, SliceSequence) else SliceSequence(slices)


@dataclass(frozen=True, order=True)
class TemporalArc:
    """Arc from ``source@(slice - lag)`` to ``target@slice``."""

    slice: int
    target: str
    lag: int
    source: str

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError("temporal arcs must point forward in time (lag >= 1)")
        if self.slice - self.lag < 0:
            raise ValueError(f"arc into slice {self.slice} with lag {self.lag} starts before slice 0")

    @property
    def tail(self) -> str:
        return node_id(self.source, self.slice - self.lag)

    @property
    def head(self) -> str:
        return node_id(self.target, self.slice)

    @property
    def block(self) -> tuple[str, str, int]:
        """The parameter block (source, target, lag) this arc belongs to."""
        return (self.source, self.target, self.lag)


@dataclass(frozen=True)
class TemporalArcPolicy:
    """Rule generating the temporal arcs between slices.

    Use the constructors :meth:`markov`, :meth:`driving`, :meth:`observable`
    and :meth:`custom` rather than building instances directly.
    """

    kind: str
    order: int = 1
    scope: tuple[str, ...] | None = None
    arcs: tuple[tuple[str, str, int], ...] = ()

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind != "custom" and self.order < 1:
            raise ValueError("policy order must be >= 1")
        if self.kind == "driving" and not self.scope:
            raise ValueError("a driving policy needs its set of dynamic variables")
        if self.scope is not None:
            object.__setattr__(self, "scope", tuple(sorted(set(self.scope))))
        object.__setattr__(self, "arcs", tuple(sorted((s, t, int(k)) for s, t, k in self.arcs)))
        for _, _, lag in self.arcs:
            if lag < 1:
                raise ValueError("custom arcs need lag >= 1")

    @classmethod
    def markov(cls, order: int = 1) -> "TemporalArcPolicy":
        return cls("markov", order)

    @classmethod
    def driving(cls, variables: Iterable[str], order: int = 1) -> "TemporalArcPolicy":
        return cls("driving", order, tuple(variables))

    @classmethod
    def observable(cls, variables: Iterable[str] | None = None, order: int = 1) -> "TemporalArcPolicy":
        """Self-arcs on findings; ``variables=None`` means every finding-tagged node."""
        return cls("observable", order, None if variables is None else tuple(variables))

    @classmethod
    def custom(cls, arcs: Iterable[tuple[str, str, int]]) -> "TemporalArcPolicy":
        arcs = tuple(arcs)
        order = max((a[2] for a in arcs), default=1)
        return cls("custom", order, None, arcs)

    @property
    def max_lag(self) -> int:
        return max((a[2] for a in self.arcs), default=0) if self.kind == "custom" else self.order

    def describe(self) -> str:
        if self.kind == "markov":
            return f"markov(order={self.order})"
        if self.kind == "custom":
            return f"custom({len(self.arcs)} arcs)"
        scope = "findings" if self.scope is None else ",".join(self.scope)
        return f"{self.kind}(order={self.order}, scope={scope})"

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "order": self.order, "scope": None if self.scope is None else list(self.scope)}
        if self.kind == "custom":
            out["arcs"] = [list(a) for a in self.arcs]
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "TemporalArcPolicy":
        try:
            kind = d["kind"]
            if kind == "custom":
                return cls.custom(tuple((s, t, int(k)) for s, t, k in d.get("arcs", [])))
            scope = d.get("scope")
            return cls(kind, int(d.get("order", 1)), None if scope is None else tuple(scope))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad temporal policy {dict(d)!r}: {exc}") from exc


def _policy_scope(policy: TemporalArcPolicy, slices: SliceSequence) -> set[str] | None:
    """Variables that get self-arcs (None for custom policies)."""
    known = slices.all_variables
    if policy.kind == "custom":
        return None
    if policy.kind == "markov":
        return {v for net in slices for v in net.chance_nodes}
    if policy.kind == "observable" and policy.scope is None:
        return {v for net in slices for v in net.tagged("finding")}
    unknown = set(policy.scope) - known
    if unknown:
        raise UnknownVariableError(f"policy scope names unknown variables {sorted(unknown)}")
    return set(policy.scope)


def generate_arcs(policy: TemporalArcPolicy, slices) -> list[TemporalArc]:
    """All temporal arcs the policy induces over ``slices``, sorted.

    A self-arc ``v@(t-j) -> v@t`` exists for every in-scope ``v`` present in
    both slices; variables missing from an earlier slice simply get no arc
    for that lag.

    Raises
    ------
    UnknownVariableError
        A scope variable (or custom arc endpoint) appears in no slice.
    ValueError
        The policy's lag exceeds the number of slices.
    """
    slices = as_slices(slices)
    if policy.max_lag > len(slices):
        raise ValueError(f"lag {policy.max_lag} exceeds the number of slices ({len(slices)})")
    scope = _policy_scope(policy, slices)
    present = [set(net.chance_nodes) for net in slices]
    arcs = []
    if scope is None:
        known = slices.all_variables
        for s, tg, lag in policy.arcs:
            for v in (s, tg):
                if v not in known:
                    raise UnknownVariableError(f"custom arc names unknown variable {v!r}")
        for t in range(1, len(slices)):
            for s, tg, lag in policy.arcs:
                if t - lag >= 0 and s in slices[t - lag].nodes and tg in present[t]:
                    arcs.append(TemporalArc(t, tg, lag, s))
    else:
        for t in range(1, len(slices)):
            for v in scope:
                for lag in range(1, policy.order + 1):
                    if t - lag >= 0 and v in present[t - lag] and v in present[t]:
                        arcs.append(TemporalArc(t, v, lag, v))
    return sorted(arcs)


@dataclass(frozen=True, eq=False)
class Transition:
    """Joint transition table for a temporal child.

    ``parents`` lists the temporal parents as ``(source, lag)`` pairs in
    canonical order (lag, then source). ``rows`` ranges over the child's
    within-slice parents followed by these temporal parents.
    """

    variable: str
    parents: tuple[tuple[str, int], ...]
    rows: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple((s, int(k)) for s, k in self.parents))
        arr = np.array(self.rows, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    @property
    def key(self):
        return (self.variable, self.parents)

    def __eq__(self, other):
        if not isinstance(other, Transition):
            return NotImplemented
        return self.key == other.key and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash(self.key)

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "parents": [[s, k] for s, k in self.parents],
            "rows": [[float(x) for x in r] for r in self.rows],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Transition":
        return cls(d["variable"], tuple((s, int(k)) for s, k in d["parents"]), d["rows"])


def _temporal_parent_key(arc: TemporalArc):
    return (arc.lag, arc.source)


@dataclass(frozen=True)
class TemporalSpec:
    """Policy plus transition tables: the ``temporal`` section of a network file."""

    policy: TemporalArcPolicy
    transitions: tuple[Transition, ...] = ()

    def to_dict(self) -> dict:
        d = self.policy.to_dict()
        d["transitions"] = [t.to_dict() for t in self.transitions]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "TemporalSpec":
        try:
            return cls(
                TemporalArcPolicy.from_dict(d),
                tuple(Transition.from_dict(t) for t in d.get("transitions", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad temporal section: {exc}") from exc


@dataclass(frozen=True)
class TemporalNetwork:
    """A slice sequence, its temporal arcs and the flattened network."""

    slices: SliceSequence
    temporal_arcs: tuple[TemporalArc, ...]
    flattened: Network

    def arcs_into(self, t: int) -> list[TemporalArc]:
        return [a for a in self.temporal_arcs if a.slice == t]

    @property
    def temporal_children(self) -> list[str]:
        return sorted({a.head for a in self.temporal_arcs})


def flatten_structure(slices, arcs: Sequence[TemporalArc]) -> list[Node]:
    """Nodes of the flattened network (structure only, no tables)."""
    slices = as_slices(slices)
    into: dict[str, list[TemporalArc]] = {}
    for a in arcs:
        into.setdefault(a.head, []).append(a)
    nodes = []
    for t, net in enumerate(slices):
        for n in net:
            nid = node_id(n.id, t)
            temporal = sorted(into.get(nid, []), key=_temporal_parent_key)
            parents = tuple(node_id(p, t) for p in n.parents) + tuple(a.tail for a in temporal)
            v = n.variable
            nodes.append(Node(Variable(nid, v.states, v.name, v.tag), n.kind, parents))
    return nodes


def temporal_parents(tn_arcs: Sequence[TemporalArc], head: str) -> tuple[tuple[str, int], ...]:
    return tuple((a.source, a.lag) for a in sorted((a for a in tn_arcs if a.head == head), key=_temporal_parent_key))


def unroll(slices, policy: TemporalArcPolicy, transitions: Iterable[Transition] | Mapping = ()) -> TemporalNetwork:
    """Build the full temporal network over ``slices``.

    Within-slice arcs and tables are kept; every temporal child gets its
    joint transition table, looked up by ``(variable, temporal parents)``.
    A mapping keyed by flattened node id (``"v@t"``) overrides the lookup
    for individual slices.

    Raises
    ------
    ConfigError
        A temporal child has no transition table, or its table does not
        match the parent domains.
    """
    slices = as_slices(slices).check()
    arcs = generate_arcs(policy, slices)
    by_key: dict = {}
    by_node: dict = {}
    if isinstance(transitions, Mapping):
        for k, tr in transitions.items():
            (by_node if isinstance(k, str) else by_key)[k] = tr
    else:
        for tr in transitions:
            by_key[tr.key] = tr
    nodes = flatten_structure(slices, arcs)
    heads = {a.head for a in arcs}
    cpts, utilities = {}, {}
    cards = {n.id: n.variable.card for n in nodes}
    for t, net in enumerate(slices):
        for n in net:
            nid = node_id(n.id, t)
            if n.id in net.utilities:
                utilities[nid] = net.utilities[n.id]
            if n.kind != CHANCE:
                continue
            if nid not in heads:
                cpts[nid] = net.cpt(n.id)
                continue
            tparents = temporal_parents(arcs, nid)
            tr = by_node[nid] if nid in by_node else by_key.get((n.id, tparents))
            if tr is None:
                raise ConfigError(f"no transition table for {nid} with temporal parents {list(tparents)}")
            rows = tr.rows if isinstance(tr, Transition) else np.asarray(tr, dtype=float)
            parents = [node_id(p, t) for p in n.parents] + [node_id(s, t - k) for s, k in tparents]
            expected = (math.prod(cards[p] for p in parents), n.variable.card)
            if rows.shape != expected:
                raise ConfigError(f"transition table for {nid} has shape {rows.shape}, expected {expected}")
            cpts[nid] = rows
    flat = Network(nodes, cpts, utilities, name=f"{slices[0].name}x{len(slices)}")
    return TemporalNetwork(slices, tuple(arcs), flat)


@dataclass(frozen=True)
class ElementCounts:
    n_nodes: int
    n_arcs: int
    temporal_arcs: tuple[int, ...]

    def __iter__(self):
        return iter((self.n_nodes, self.n_arcs, list(self.temporal_arcs)))


def count_elements(tn: TemporalNetwork) -> ElementCounts:
    """``(|V^N|, |A^N|, [|A_tau(t)| for t = 1..N])``.

    Counted from the parts, independently of the flattened network.
    """
    n_nodes = sum(len(net) for net in tn.slices)
    within = sum(len(net.arcs) for net in tn.slices)
    per_slice = tuple(len(tn.arcs_into(t)) for t in range(1, len(tn.slices)))
    return ElementCounts(n_nodes, within + sum(per_slice), per_slice)


@dataclass(frozen=True)
class Partition:
    """Split of a slice's chance variables into dynamic, static and independent."""

    dynamic: frozenset[str]
    static: frozenset[str]
    independent: frozenset[str]


def partition(slice_net: Network, dynamic_ids: Iterable[str]) -> Partition:
    """Classify chance variables relative to a chosen dynamic set.

    Variables with no directed path to or from any dynamic variable are
    independent; everything else that is not dynamic is static (constant, or
    changing only through a dynamic variable).
    """
    dynamic = frozenset(dynamic_ids)
    chance = set(slice_net.chance_nodes)
    unknown = dynamic - chance
    if unknown:
        raise UnknownVariableError(f"unknown or non-chance variables {sorted(unknown)}")
    g = slice_net.graph.subgraph(chance)
    linked: set[str] = set()
    for d in dynamic:
        linked |= nx.ancestors(g, d) | nx.descendants(g, d)
    linked -= dynamic
    independent = frozenset(chance - dynamic - linked)
    return Partition(dynamic, frozenset(linked), independent)


def persistence_transitions(
    slice_net: Network,
    arcs: Sequence[TemporalArc],
    persistence: Mapping[str, float] | float,
    decimals: int | None = None,
) -> list[Transition]:
    """Explicit transition tables of the form ``rho * stay + (1 - rho) * slice CPT``.

    For a self-arc child with temporal parents ``(v, 1), (v, 2), ...`` the row
    for parent configuration ``(pa, s_1, s_2, ...)`` is
    ``rho * onehot(s_1) + (1 - rho) * P(v | pa)``: the variable keeps its
    previous state with probability ``rho``. Deeper lags do not change the
    row; callers wanting genuine higher-order effects write their own tables.

    This is a table *generator* for synthetic models; :func:`unroll` never
    mixes tables on its own.
    """
    out: dict[tuple, Transition] = {}
    for arc in arcs:
        if arc.source != arc.target:
            raise ValueError("persistence tables are defined for self-arcs only")
    for arc in arcs:
        v = arc.target
        tparents = temporal_parents(arcs, arc.head)
        key = (v, tparents)
        if key in out:
            continue
        rho = persistence[v] if isinstance(persistence, Mapping) else float(persistence)
        base = slice_net.cpt(v)
        card = slice_net.card(v)
        tcards = [card] * len(tparents)
        rows = []
        for r in range(base.shape[0]):
            for combo in np.ndindex(*tcards):
                row = (1.0 - rho) * base[r]
                row = row.copy()
                row[combo[0]] += rho
                if decimals is not None:
                    row = _round_row(row, decimals)
                rows.append(row)
        out[key] = Transition(v, tparents, np.array(rows))
    return list(out.values())


def _round_row(row: np.ndarray, decimals: int) -> np.ndarray:
    """Round a probability row, putting the rounding slack on its largest entry."""
    r = np.round(row, decimals)
    k = int(np.argmax(r))
    r[k] = 0.0
    r[k] = round(1.0 - float(r.sum()), decimals)
    return r
