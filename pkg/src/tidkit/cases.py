"""Case sets: observed trajectories, their file format and simulation.

A :class:`CaseSet` is a dense integer matrix with one row per case and one
column per (flattened) node id; ``-1`` marks an unobserved entry.

On disk a case file is UTF-8 CSV with a mandatory header
``case_id,slice,variable,state``, one observed value per line; lines
starting with ``#`` are comments. For a temporal network the column of a
record is ``<variable>@<slice>``; for a single-slice network the slice must
be 0 and the column is the variable id itself.
"""

from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import ConfigError, EstimationError, UnknownVariableError
from .network import CHANCE, DECISION, Network
from .temporal import TemporalNetwork, node_id, split_node_id

HEADER = ("case_id", "slice", "variable", "state")
MISSING = -1


@dataclass(frozen=True)
class CaseSet:
    """Observed cases over a fixed column vocabulary.

    Attributes
    ----------
    columns : tuple of str
        Node ids, one per column of ``data``.
    data : ndarray of int, shape (n_cases, n_columns)
        State indices, ``-1`` where unobserved.
    domains : tuple of tuple of str
        State labels per column (for writing files).
    case_ids : tuple of str
    """

    columns: tuple[str, ...]
    data: np.ndarray
    domains: tuple[tuple[str, ...], ...]
    case_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.int64)
        if data.ndim != 2 or data.shape[1] != len(self.columns):
            raise ValueError(f"case data must have shape (n, {len(self.columns)}), got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "domains", tuple(tuple(d) for d in self.domains))
        if not self.case_ids:
            object.__setattr__(self, "case_ids", tuple(f"c{i:05d}" for i in range(data.shape[0])))
        elif len(self.case_ids) != data.shape[0]:
            raise ValueError("one case id per row is required")

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, rows) -> "CaseSet":
        if isinstance(rows, (int, np.integer)):
            rows = [int(rows)]
        idx = np.arange(len(self))[rows]
        return CaseSet(self.columns, self.data[idx], self.domains, tuple(self.case_ids[i] for i in idx))

    def __add__(self, other: "CaseSet") -> "CaseSet":
        if other.columns != self.columns:
            raise ValueError("cannot concatenate case sets over different columns")
        return CaseSet(self.columns, np.vstack([self.data, other.data]), self.domains, self.case_ids + other.case_ids)

    def __eq__(self, other):
        if not isinstance(other, CaseSet):
            return NotImplemented
        return (
            self.columns == other.columns
            and self.domains == other.domains
            and self.case_ids == other.case_ids
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None

    def column(self, nid: str) -> np.ndarray:
        return self.data[:, self.columns.index(nid)]

    def select(self, columns: Sequence[str]) -> "CaseSet":
        """Keep only ``columns`` (in the given order)."""
        idx = [self.columns.index(c) for c in columns]
        return CaseSet(tuple(columns), self.data[:, idx], tuple(self.domains[i] for i in idx), self.case_ids)

    def mask(self, columns: Iterable[str]) -> "CaseSet":
        """Copy with everything outside ``columns`` marked unobserved."""
        keep = set(columns)
        data = np.array(self.data)
        for j, c in enumerate(self.columns):
            if c not in keep:
                data[:, j] = MISSING
        return CaseSet(self.columns, data, self.domains, self.case_ids)

    def record(self, i: int) -> dict[str, str]:
        """Observed entries of case ``i`` as ``{node id: state label}``."""
        row = self.data[i]
        return {c: self.domains[j][row[j]] for j, c in enumerate(self.columns) if row[j] >= 0}

    @property
    def complete(self) -> bool:
        return bool(np.all(self.data >= 0))


def check_cases(cases: CaseSet, net: Network, require: Iterable[str] | None = None) -> CaseSet:
    """Validate ``cases`` against ``net`` and return them aligned to its nodes.

    Columns the network does not know are an error. The result has one
    column per non-value node of ``net`` (in network order); nodes absent
    from ``cases`` become unobserved columns. ``require`` lists nodes that
    must be observed in every case.

    Raises
    ------
    EstimationError
        Unknown columns, out-of-range states, or missing required values.
    """
    if not isinstance(cases, CaseSet):
        raise EstimationError(f"expected a CaseSet, got {type(cases).__name__}")
    unknown = [c for c in cases.columns if c not in net.nodes]
    if unknown:
        raise EstimationError(f"case columns not in the network: {unknown[:5]}")
    cols = tuple(n.id for n in net if n.kind != "value")
    pos = {c: j for j, c in enumerate(cases.columns)}
    data = np.full((len(cases), len(cols)), MISSING, dtype=np.int64)
    for k, c in enumerate(cols):
        if c in pos:
            col = cases.data[:, pos[c]]
            if np.any(col >= net.card(c)) or np.any(col < MISSING):
                raise EstimationError(f"column {c!r} has states outside its domain")
            data[:, k] = col
    out = CaseSet(cols, data, tuple(net.variable(c).states for c in cols), cases.case_ids)
    for c in require or ():
        if c not in pos or np.any(out.column(c) < 0):
            raise EstimationError(f"every case must observe {c!r}")
    return out


def from_records(net: Network, records: Sequence[Mapping[str, object]], case_ids: Sequence[str] | None = None) -> CaseSet:
    """Build a case set from ``{node id: state}`` dictionaries."""
    cols = tuple(n.id for n in net if n.kind != "value")
    pos = {c: j for j, c in enumerate(cols)}
    data = np.full((len(records), len(cols)), MISSING, dtype=np.int64)
    for i, rec in enumerate(records):
        for key, state in rec.items():
            if key not in pos:
                raise UnknownVariableError(f"unknown variable {key!r} in case {i}")
            data[i, pos[key]] = net.variable(key).index(state)
    return CaseSet(cols, data, tuple(net.variable(c).states for c in cols), tuple(case_ids or ()))


# -- file format ---------------------------------------------------------------


def _column_for(net: Network, variable: str, t: int) -> str:
    nid = node_id(variable, t)
    if nid in net.nodes:
        return nid
    if t == 0 and variable in net.nodes:
        return variable
    raise UnknownVariableError(f"no node for variable {variable!r} at slice {t}")


def dumps_cases(cases: CaseSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for i in range(len(cases)):
        row = cases.data[i]
        for j, c in enumerate(cases.columns):
            if row[j] < 0:
                continue
            try:
                var, t = split_node_id(c)
            except ValueError:
                var, t = c, 0
            w.writerow((cases.case_ids[i], t, var, cases.domains[j][row[j]]))
    return buf.getvalue()


def loads_cases(text: str, net: Network) -> CaseSet:
    """Parse case-file text against ``net``.

    Raises
    ------
    ConfigError
        Missing header, malformed lines, unknown variables or states, or a
        value given twice for the same case and node.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError("case file is empty (header row is mandatory)") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise ConfigError(f"case file header must be {','.join(HEADER)}")
    cols = tuple(n.id for n in net if n.kind != "value")
    pos = {c: j for j, c in enumerate(cols)}
    order: dict[str, int] = {}
    entries = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != 4:
            raise ConfigError(f"case file line {lineno}: expected 4 fields, got {len(rec)}")
        cid, t, var, state = (x.strip() for x in rec)
        try:
            col = _column_for(net, var, int(t))
            s = net.variable(col).index(state)
        except (ValueError, UnknownVariableError) as exc:
            raise ConfigError(f"case file line {lineno}: {exc}") from exc
        order.setdefault(cid, len(order))
        entries.append((order[cid], pos[col], s, lineno))
    data = np.full((len(order), len(cols)), MISSING, dtype=np.int64)
    for i, j, s, lineno in entries:
        if data[i, j] != MISSING:
            raise ConfigError(f"case file line {lineno}: duplicate value for {cols[j]!r}")
        data[i, j] = s
    return CaseSet(cols, data, tuple(net.variable(c).states for c in cols), tuple(order))


def read_cases(path, net: Network) -> CaseSet:
    return loads_cases(Path(path).read_text(encoding="utf-8"), net)


def write_cases(path, cases: CaseSet) -> None:
    Path(path).write_text(dumps_cases(cases), encoding="utf-8")


# -- randomness and simulation ---------------------------------------------------


def substream(seed: int, *names) -> np.random.Generator:
    """Independent generator for the named sub-stream of ``seed``.

    Streams are keyed by name, so adding a consumer never shifts the draws
    of another one.
    """
    key = tuple(zlib.crc32(str(n).encode("utf-8")) for n in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def simulate(net, count: int, seed) -> CaseSet:
    """Forward (ancestral) sampling of ``count`` complete cases.

    ``net`` may be a :class:`Network` or a :class:`TemporalNetwork`.
    Every chance node is recorded, so disease labels come with the findings.
    Identical ``(net, count, seed)`` gives identical cases.
    """
    if isinstance(net, TemporalNetwork):
        net = net.flattened
    net.check()
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = _rng(seed)
    for i in net.chance_nodes:
        if any(net.nodes[p].kind == DECISION for p in net.parents(i)):
            raise EstimationError(f"cannot simulate {i!r}: it depends on a decision")
    cols = net.chance_nodes
    pos = {c: j for j, c in enumerate(cols)}
    data = np.zeros((count, len(cols)), dtype=np.int64)
    for i in net.topological_order:
        if net.nodes[i].kind != CHANCE:
            continue
        parents = net.parents(i)
        if parents:
            rows = np.ravel_multi_index(tuple(data[:, pos[p]] for p in parents), net.parent_cards(i))
        else:
            rows = np.zeros(count, dtype=np.intp)
        cum = np.cumsum(net.cpt(i), axis=1)[rows]
        u = rng.random(count)
        draw = (u[:, None] >= cum).sum(axis=1)
        data[:, pos[i]] = np.minimum(draw, net.card(i) - 1)
    return CaseSet(cols, data, tuple(net.variable(c).states for c in cols))
