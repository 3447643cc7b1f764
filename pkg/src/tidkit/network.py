"""Discrete directed-graph models: variables, nodes, CPTs and validation.

A :class:`Network` holds chance, decision and value nodes. Chance nodes carry
a conditional probability table (CPT) stored as a 2-D array of shape
``(n_parent_configs, card)``. Rows are indexed in lexicographic order of the
parent states with the *first* parent varying slowest, i.e. the row of a
parent assignment ``(s_1, ..., s_k)`` is ``np.ravel_multi_index((s_1, ...,
s_k), (c_1, ..., c_k))``.

Value nodes carry a utility vector over their parent configurations (same
row order). All decision machinery works with losses, obtained by negating
utilities (see :meth:`Network.loss`).

Networks are immutable once built; arrays are stored read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

from .exceptions import InvalidNetworkError, MissingVariableError, UnknownVariableError

CHANCE = "chance"
DECISION = "decision"
VALUE = "value"
NODE_KINDS = (CHANCE, DECISION, VALUE)

TAGS = ("finding", "latent", "disease", "other")

#: CPT rows must sum to one within this tolerance.
ROW_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Variable:
    """A discrete variable with an ordered, finite domain of state labels."""

    id: str
    states: tuple[str, ...]
    name: str = ""
    tag: str = "other"

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if self.tag not in TAGS:
            raise ValueError(f"variable {self.id!r}: unknown tag {self.tag!r}")

    @property
    def card(self) -> int:
        return len(self.states)

    def index(self, state) -> int:
        """Return the position of ``state`` (a label or an integer index)."""
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if 0 <= state < self.card:
                return int(state)
            raise UnknownVariableError(f"state index {state} out of range for {self.id!r}")
        try:
            return self.states.index(str(state))
        except ValueError:
            raise UnknownVariableError(
                f"{state!r} is not a state of {self.id!r} (domain {list(self.states)})"
            ) from None


@dataclass(frozen=True)
class Node:
    variable: Variable
    kind: str = CHANCE
    parents: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise ValueError(f"node {self.variable.id!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "parents", tuple(self.parents))

    @property
    def id(self) -> str:
        return self.variable.id


@dataclass(frozen=True)
class Violation:
    """One structural problem found by :func:`validate`."""

    kind: str
    nodes: tuple[str, ...]
    message: str
    row: int | None = None

    def __str__(self):
        return f"[{self.kind}] {self.message}"

    @property
    def sort_key(self):
        return (self.nodes[0] if self.nodes else "", self.kind, -1 if self.row is None else self.row)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


class Network:
    """An immutable directed graphical model over discrete variables.

    Parameters
    ----------
    nodes : iterable of Node
        Nodes in their canonical order. Ids should be unique; duplicates are
        kept out of the node map and reported by :func:`validate`.
    cpts : mapping of node id to array-like, optional
        One table per chance node, shape ``(n_parent_configs, card)``. A 1-D
        table is accepted for parentless nodes.
    utilities : mapping of node id to array-like, optional
        One vector per value node, indexed by parent configuration.
    name : str
    """

    def __init__(
        self,
        nodes: Iterable[Node],
        cpts: Mapping[str, object] | None = None,
        utilities: Mapping[str, object] | None = None,
        name: str = "",
    ):
        self.name = name
        self._nodes: dict[str, Node] = {}
        self._duplicates: list[str] = []
        for node in nodes:
            if node.id in self._nodes:
                self._duplicates.append(node.id)
                continue
            self._nodes[node.id] = node
        self._cpts: dict[str, np.ndarray] = {}
        for key, table in (cpts or {}).items():
            arr = np.array(table, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            arr.setflags(write=False)
            self._cpts[key] = arr
        self._utilities: dict[str, np.ndarray] = {
            key: _frozen_array(np.ravel(np.array(u, dtype=float)))
            for key, u in (utilities or {}).items()
        }

    # -- basic access -----------------------------------------------------

    @property
    def nodes(self) -> Mapping[str, Node]:
        return self._nodes

    @property
    def cpts(self) -> Mapping[str, np.ndarray]:
        return self._cpts

    @property
    def utilities(self) -> Mapping[str, np.ndarray]:
        return self._utilities

    def __contains__(self, node_id) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def __iter__(self):
        return iter(self._nodes.values())

    def __repr__(self):
        return (
            f"Network({self.name!r}, {len(self.chance_nodes)} chance, "
            f"{len(self.decision_nodes)} decision, {len(self.value_nodes)} value)"
        )

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        if list(self._nodes.values()) != list(other._nodes.values()):
            return False
        for mine, theirs in ((self._cpts, other._cpts), (self._utilities, other._utilities)):
            if mine.keys() != theirs.keys():
                return False
            if any(not np.array_equal(mine[k], theirs[k]) for k in mine):
                return False
        return True

    __hash__ = None

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownVariableError(f"unknown node {node_id!r}") from None

    def variable(self, node_id: str) -> Variable:
        return self.node(node_id).variable

    def card(self, node_id: str) -> int:
        return self.node(node_id).variable.card

    def parents(self, node_id: str) -> tuple[str, ...]:
        return self.node(node_id).parents

    def cpt(self, node_id: str) -> np.ndarray:
        return self._cpts[node_id]

    def loss(self, node_id: str) -> np.ndarray:
        """Loss table of a value node: the negated utility vector."""
        return 0.0 - self._utilities[node_id]

    def _ids_of_kind(self, kind):
        return tuple(n.id for n in self._nodes.values() if n.kind == kind)

    @cached_property
    def chance_nodes(self) -> tuple[str, ...]:
        return self._ids_of_kind(CHANCE)

    @cached_property
    def decision_nodes(self) -> tuple[str, ...]:
        return self._ids_of_kind(DECISION)

    @cached_property
    def value_nodes(self) -> tuple[str, ...]:
        return self._ids_of_kind(VALUE)

    def tagged(self, tag: str) -> tuple[str, ...]:
        """Chance nodes carrying ``tag``, in network order."""
        return tuple(i for i in self.chance_nodes if self._nodes[i].variable.tag == tag)

    @property
    def arcs(self) -> list[tuple[str, str]]:
        return [(p, n.id) for n in self._nodes.values() for p in n.parents]

    @cached_property
    def children(self) -> Mapping[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {i: [] for i in self._nodes}
        for parent, child in self.arcs:
            if parent in out:
                out[parent].append(child)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self._nodes)
        g.add_edges_from(a for a in self.arcs if a[0] in self._nodes)
        return g

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        """Lexicographic topological order (requires an acyclic graph)."""
        return tuple(nx.lexicographical_topological_sort(self.graph))

    def ancestors(self, ids: Iterable[str]) -> set[str]:
        """``ids`` together with all their ancestors."""
        out: set[str] = set()
        for i in ids:
            if i not in out:
                out.add(i)
                out |= nx.ancestors(self.graph, i)
        return out

    def parent_cards(self, node_id: str) -> tuple[int, ...]:
        return tuple(self.card(p) for p in self.parents(node_id))

    def n_rows(self, node_id: str) -> int:
        return int(np.prod(self.parent_cards(node_id), dtype=np.int64))

    def row_index(self, node_id: str, parent_states: Iterable[int]) -> int:
        cards = self.parent_cards(node_id)
        if not cards:
            return 0
        return int(np.ravel_multi_index(tuple(parent_states), cards))

    @cached_property
    def signature(self) -> tuple:
        """Hashable description of the structure (ids, kinds, parents, cards)."""
        return tuple((n.id, n.kind, n.parents, n.variable.card) for n in self._nodes.values())

    @cached_property
    def free_param_count(self) -> int:
        """Sum over chance nodes of ``rows * (card - 1)``."""
        return int(sum(self.n_rows(i) * (self.card(i) - 1) for i in self.chance_nodes))

    # -- derivation -------------------------------------------------------

    def replace(self, nodes=None, cpts=None, utilities=None, name=None) -> "Network":
        """Copy with some components swapped out."""
        return Network(
            self._nodes.values() if nodes is None else nodes,
            self._cpts if cpts is None else cpts,
            self._utilities if utilities is None else utilities,
            self.name if name is None else name,
        )

    def subnetwork(self, keep: Iterable[str], name: str | None = None) -> "Network":
        """Induced subnetwork over ``keep``.

        Chance and value nodes must keep all their parents (e.g. ``keep`` is
        ancestor-closed), so their tables carry over unchanged. Decision nodes
        lose informational parents that are dropped.
        """
        keep = set(keep)
        unknown = keep - self._nodes.keys()
        if unknown:
            raise UnknownVariableError(f"unknown nodes {sorted(unknown)}")
        nodes = []
        for n in self._nodes.values():
            if n.id not in keep:
                continue
            missing = [p for p in n.parents if p not in keep]
            if missing and n.kind != DECISION:
                raise ValueError(f"cannot drop parents {missing} of {n.kind} node {n.id!r}")
            if missing:
                n = Node(n.variable, n.kind, tuple(p for p in n.parents if p in keep))
            nodes.append(n)
        return Network(
            nodes,
            {k: v for k, v in self._cpts.items() if k in keep},
            {k: v for k, v in self._utilities.items() if k in keep},
            self.name if name is None else name,
        )

    def bn_portion(self) -> "Network":
        """The chance-node part, dropping decision and value nodes."""
        return self.subnetwork(self.chance_nodes)

    def relabel(self, mapping: Mapping[str, str], name: str | None = None) -> "Network":
        """Rename node ids through ``mapping`` (ids not in it are kept)."""
        rn = lambda i: mapping.get(i, i)  # noqa: E731
        nodes = [
            Node(
                Variable(rn(n.id), n.variable.states, n.variable.name, n.variable.tag),
                n.kind,
                tuple(rn(p) for p in n.parents),
            )
            for n in self._nodes.values()
        ]
        return Network(
            nodes,
            {rn(k): v for k, v in self._cpts.items()},
            {rn(k): v for k, v in self._utilities.items()},
            self.name if name is None else name,
        )

    # -- validation cache -------------------------------------------------

    @cached_property
    def violations(self) -> tuple[Violation, ...]:
        return tuple(_validate(self))

    def check(self) -> "Network":
        """Raise :class:`InvalidNetworkError` unless the network is valid."""
        if self.violations:
            raise InvalidNetworkError(self.violations)
        return self


def validate(net: Network) -> list[Violation]:
    """Return every structural violation of ``net``, sorted by node id.

    An empty list means the network is valid. Violations are data, so this
    never raises.
    """
    return list(net.violations)


def _validate(net: Network) -> list[Violation]:
    out: list[Violation] = []
    add = lambda kind, nodes, msg, row=None: out.append(Violation(kind, tuple(nodes), msg, row))  # noqa: E731

    for dup in sorted(set(net._duplicates)):
        add("duplicate-id", [dup], f"node id {dup!r} is used more than once")

    for n in net.nodes.values():
        v = n.variable
        if n.kind != VALUE:
            if v.card == 0:
                add("empty-domain", [n.id], f"{n.id!r} has an empty domain")
            elif n.kind == CHANCE and v.card < 2:
                add("small-domain", [n.id], f"{n.id!r} needs at least two states")
            if len(set(v.states)) != len(v.states):
                add("duplicate-state", [n.id], f"{n.id!r} repeats a state label")
        for p in n.parents:
            if p not in net.nodes:
                add("unknown-parent", [n.id], f"{n.id!r} names unknown parent {p!r}")
        if len(set(n.parents)) != len(n.parents):
            add("duplicate-parent", [n.id], f"{n.id!r} lists a parent twice")
        if n.kind == VALUE and net.children[n.id]:
            add("value-has-children", [n.id], f"value node {n.id!r} has children {list(net.children[n.id])}")
        if n.kind == DECISION and n.id in net.cpts:
            add("decision-has-cpt", [n.id], f"decision node {n.id!r} carries a CPT")
        if n.kind != CHANCE and n.kind != DECISION and n.id in net.cpts:
            add("value-has-cpt", [n.id], f"value node {n.id!r} carries a CPT")
        if n.kind == CHANCE:
            for p in n.parents:
                if p in net.nodes and net.nodes[p].kind == VALUE:
                    add("value-parent", [n.id], f"chance node {n.id!r} has value-node parent {p!r}")

    for key in sorted(set(net.cpts) - set(net.nodes)):
        add("orphan-cpt", [key], f"CPT given for unknown node {key!r}")
    for key in sorted(set(net.utilities) - set(net.nodes)):
        add("orphan-utility", [key], f"utility table given for unknown node {key!r}")

    # cycles: one violation per strongly connected component with a cycle
    g = net.graph
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(c, c) for c in comp):
            members = tuple(sorted(comp))
            add("cycle", members, f"directed cycle through {{{', '.join(members)}}}")

    structural_ok = all(p in net.nodes for n in net.nodes.values() for p in n.parents)
    for n in net.nodes.values():
        if not structural_ok:
            break
        rows = net.n_rows(n.id)
        if n.kind == CHANCE:
            if n.id not in net.cpts:
                add("missing-cpt", [n.id], f"chance node {n.id!r} has no CPT")
                continue
            table = net.cpts[n.id]
            if table.ndim != 2 or table.shape[0] != rows:
                add("row-count", [n.id], f"{n.id!r}: CPT has {table.shape[0] if table.ndim else 0} rows, expected {rows}")
                continue
            if table.shape[1] != n.variable.card:
                add("row-width", [n.id], f"{n.id!r}: CPT rows have {table.shape[1]} entries, expected {n.variable.card}")
                continue
            bad_range = np.flatnonzero(((table < 0) | (table > 1) | ~np.isfinite(table)).any(axis=1))
            for r in bad_range:
                add("entry-out-of-range", [n.id], f"{n.id!r}: row {r} has entries outside [0, 1]", int(r))
            sums = table.sum(axis=1)
            for r in np.flatnonzero(np.abs(sums - 1.0) > ROW_TOLERANCE):
                add("row-not-normalized", [n.id], f"{n.id!r}: row {r} sums to {sums[r]!r}", int(r))
        elif n.kind == VALUE:
            if n.id not in net.utilities:
                add("missing-utility", [n.id], f"value node {n.id!r} has no utility table")
                continue
            u = net.utilities[n.id]
            if u.shape != (rows,):
                add("utility-shape", [n.id], f"{n.id!r}: utility table has {u.size} entries, expected {rows}")
            elif not np.all(np.isfinite(u)):
                add("utility-not-finite", [n.id], f"{n.id!r}: utility table has non-finite entries")

    out.sort(key=lambda v: v.sort_key)
    return out


def state_indices(net: Network, assignment: Mapping[str, object]) -> dict[str, int]:
    """Resolve state labels (or indices) in ``assignment`` to integer indices."""
    out = {}
    for key, state in assignment.items():
        out[key] = net.variable(key).index(state)
    return out


def joint_probability(net: Network, assignment: Mapping[str, object]) -> float:
    """Probability of a full assignment of the chance nodes.

    The product over chance nodes of the CPT entry selected by the
    assignment. Entries for decision nodes are accepted and ignored; value
    nodes are not allowed.

    Raises
    ------
    MissingVariableError
        If some chance node is not assigned.
    """
    net.check()
    idx = state_indices(net, assignment)
    missing = [i for i in net.chance_nodes if i not in idx]
    if missing:
        raise MissingVariableError(f"assignment is missing chance nodes {missing}")
    for key in idx:
        if net.nodes[key].kind == VALUE:
            raise UnknownVariableError(f"value node {key!r} cannot be assigned")
    p = 1.0
    for i in net.chance_nodes:
        parents = net.parents(i)
        if any(net.nodes[q].kind == DECISION and q not in idx for q in parents):
            raise MissingVariableError(f"{i!r} depends on an unassigned decision")
        row = net.row_index(i, [idx[q] for q in parents])
        p *= float(net.cpt(i)[row, idx[i]])
    return p


def chance_variables(net: Network) -> list[Variable]:
    return [net.variable(i) for i in net.chance_nodes]
