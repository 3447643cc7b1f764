"""Indicator vectors over temporal blocks and complete-data estimation.

A *block* is one temporal-arc family ``(source, target, lag)``: all arcs
``source@(t-lag) -> target@t`` over the horizon. A candidate's indicator
vector switches blocks on or off; a switched-off block is realized by
removing its arcs, so the child keeps only its within-slice parents (a row
of zeros is not a valid conditional table).

Tables are estimated per flattened node (untied across slices) by relative
frequency with add-``alpha`` smoothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from ..cases import CaseSet, check_cases
from ..exceptions import EstimationError
from ..network import CHANCE, Network
from ..temporal import (
    TemporalArc,
    TemporalArcPolicy,
    TemporalNetwork,
    as_slices,
    flatten_structure,
    generate_arcs,
    node_id,
)

Block = tuple  # (source, target, lag)


def block_registry(policy: TemporalArcPolicy, slices) -> tuple[Block, ...]:
    """Ordered blocks the policy can generate over ``slices``."""
    return tuple(sorted({a.block for a in generate_arcs(policy, slices)}, key=lambda b: (b[2], b[1], b[0])))


@dataclass(frozen=True)
class IndicatorVector:
    """Bits over an ordered block registry (``1`` = block estimated).

    Examples
    --------
    >>> g = IndicatorVector((("X", "X", 1), ("X", "X", 2)), (1, 0))
    >>> g.size, g.active
    (1, (('X', 'X', 1),))
    """

    registry: tuple[Block, ...]
    bits: tuple[int, ...]

    def __post_init__(self):
        reg = tuple(tuple(b) for b in self.registry)
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != len(reg):
            raise ValueError(f"indicator has {len(bits)} bits for a registry of {len(reg)} blocks")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("indicator bits must be 0 or 1")
        object.__setattr__(self, "registry", reg)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def full(cls, registry: Sequence[Block]) -> "IndicatorVector":
        return cls(tuple(registry), (1,) * len(registry))

    @classmethod
    def empty(cls, registry: Sequence[Block]) -> "IndicatorVector":
        return cls(tuple(registry), (0,) * len(registry))

    @property
    def size(self) -> int:
        """``|gamma|``: number of set bits."""
        return sum(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def active(self) -> tuple[Block, ...]:
        return tuple(b for b, on in zip(self.registry, self.bits) if on)

    def __str__(self):
        return "".join(map(str, self.bits))


@dataclass(frozen=True)
class CandidateSpec:
    """What to estimate: a label, a temporal policy and optional indicator bits."""

    label: str
    policy: TemporalArcPolicy
    gamma: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        d = {"label": self.label, "policy": self.policy.to_dict()}
        if self.gamma is not None:
            d["gamma"] = list(self.gamma)
        return d

    @classmethod
    def from_dict(cls, d) -> "CandidateSpec":
        gamma = d.get("gamma")
        return cls(str(d["label"]), TemporalArcPolicy.from_dict(d["policy"]), None if gamma is None else tuple(gamma))


@dataclass(frozen=True)
class CandidateModel:
    """An estimated candidate.

    Attributes
    ----------
    label : str
    policy : TemporalArcPolicy
    gamma : IndicatorVector
    temporal : TemporalNetwork
        Slices, retained temporal arcs, and the estimated flattened network.
    n_cases : int
        Size of the training set.
    """

    label: str
    policy: TemporalArcPolicy
    gamma: IndicatorVector
    temporal: TemporalNetwork
    n_cases: int = 0
    alpha: float = field(default=1.0, compare=False)

    @property
    def network(self) -> Network:
        return self.temporal.flattened

    @cached_property
    def theta_hat(self) -> np.ndarray:
        """All chance-node table entries, node by node in network order."""
        net = self.network
        return np.concatenate([net.cpt(i).ravel() for i in net.chance_nodes])

    @property
    def free_param_count(self) -> int:
        return self.network.free_param_count


def _resolve_gamma(policy, slices, gamma) -> tuple[IndicatorVector, list[TemporalArc]]:
    arcs = generate_arcs(policy, slices)
    registry = block_registry(policy, slices)
    if gamma is None:
        g = IndicatorVector.full(registry)
    elif isinstance(gamma, IndicatorVector):
        if gamma.registry != registry:
            raise EstimationError("indicator registry does not match the blocks of the policy")
        g = gamma
    else:
        try:
            g = IndicatorVector(registry, tuple(gamma))
        except ValueError as exc:
            raise EstimationError(f"{exc}; policy blocks are {list(registry)}") from exc
    on = set(g.active)
    return g, [a for a in arcs if a.block in on]


def fit_tables(net_structure: Sequence, cases: CaseSet, alpha: float = 1.0) -> dict[str, np.ndarray]:
    """Smoothed relative-frequency tables for every chance node of a structure.

    ``net_structure`` is a list of :class:`~tidkit.network.Node`; ``cases``
    must observe every chance node and all of its parents.
    """
    if alpha < 0:
        raise EstimationError("alpha must be non-negative")
    pos = {c: j for j, c in enumerate(cases.columns)}
    cards = {n.id: n.variable.card for n in net_structure}
    tables = {}
    for node in net_structure:
        if node.kind != CHANCE:
            continue
        needed = (node.id,) + node.parents
        missing = [c for c in needed if c not in pos]
        if missing:
            raise EstimationError(f"cases do not cover {missing} (needed for {node.id!r})")
        cols = cases.data[:, [pos[c] for c in needed]]
        if np.any(cols < 0):
            raise EstimationError(
                f"cases have unobserved values for {node.id!r} or its parents; only complete data is supported"
            )
        card = cards[node.id]
        pcards = tuple(cards[p] for p in node.parents)
        n_rows = int(np.prod(pcards)) if pcards else 1
        rows = np.ravel_multi_index(tuple(cols[:, 1:].T), pcards) if pcards else np.zeros(len(cases), dtype=np.intp)
        counts = np.bincount(rows * card + cols[:, 0], minlength=n_rows * card).reshape(n_rows, card)
        counts = counts + alpha
        totals = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            table = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), 1.0 / card)
        tables[node.id] = table
    return tables


def estimate(
    policy: TemporalArcPolicy,
    gamma,
    data: CaseSet,
    slices,
    alpha: float = 1.0,
    label: str | None = None,
) -> CandidateModel:
    """Estimate a candidate from complete cases.

    Parameters
    ----------
    policy : TemporalArcPolicy
    gamma : IndicatorVector, sequence of 0/1, or None
        Which temporal blocks to keep; ``None`` keeps all of them.
    data : CaseSet
        Complete cases over the flattened node ids (``"v@t"``).
    slices : sequence of Network
        Per-slice structures (their tables are not used).
    alpha : float
        Additive smoothing pseudo-count.

    Raises
    ------
    EstimationError
        Vocabulary mismatch, missing values, or an indicator that does not
        fit the policy.
    """
    slices = as_slices(slices).check()
    g, arcs = _resolve_gamma(policy, slices, gamma)
    nodes = flatten_structure(slices, arcs)
    skeleton = Network(nodes, {}, {})
    aligned = check_cases(data, skeleton)
    tables = fit_tables(nodes, aligned, alpha)
    utilities = {}
    for t, net in enumerate(slices):
        for u, tab in net.utilities.items():
            utilities[node_id(u, t)] = tab
    flat = Network(nodes, tables, utilities, name=f"{slices[0].name}x{len(slices)}")
    flat.check()
    return CandidateModel(
        label if label is not None else policy.describe(),
        policy,
        g,
        TemporalNetwork(slices, tuple(arcs), flat),
        n_cases=len(data),
        alpha=alpha,
    )


def estimate_spec(spec: CandidateSpec, data: CaseSet, slices, alpha: float = 1.0) -> CandidateModel:
    return estimate(spec.policy, spec.gamma, data, slices, alpha=alpha, label=spec.label)


def estimate_all(specs: Iterable[CandidateSpec], data: CaseSet, slices, alpha: float = 1.0) -> list[CandidateModel]:
    return [estimate_spec(s, data, slices, alpha) for s in specs]
