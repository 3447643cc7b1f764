"""Experiment configuration, the pilot runner and report formats.

The pilot tailors one slice from the knowledge base, copies it over the
horizon, joins the copies with the knowledge base's canonical temporal
model, simulates cases from that model, estimates every candidate and
scores every (candidate, criterion) pair.

Randomness comes from the config seed through named sub-streams
(``simulation``, ``evaluation``, ``ri-theta``, ``risk``), so adding a
candidate never changes another candidate's draws.
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .cases import CaseSet, simulate, substream
from .exceptions import ConfigError, TidkitError
from .fixtures import AAP_DRIVING, FIG1_OBSERVATIONS, aap_kb_path
from .kb import KnowledgeBase, tailor
from .network import Network
from .selection.criteria import Criterion, ScoringContext, criterion_value, select
from .selection.estimate import CandidateModel, CandidateSpec, estimate_spec
from .selection.risk import ReferenceQuery, perturb_temporal, risk_table
from .temporal import SliceSequence, TemporalArcPolicy, TemporalNetwork, count_elements, node_id, unroll

REPORT_FORMAT = "tidkit-report/1"
LABEL_RE = re.compile(r"^[A-Za-z0-9_\-]+$")
PRESENTATIONS = {"fig1": FIG1_OBSERVATIONS}


@dataclass(frozen=True)
class RiskSettings:
    """Monte Carlo sizes for predictive risk and risk inflation.

    ``thetas`` parameter samples (the canonical model plus Dirichlet
    perturbations of it), ``datasets`` simulated training sets per sample,
    ``cases`` cases per training set.
    """

    thetas: int = 16
    datasets: int = 64
    cases: int = 200
    concentration: float = 50.0

    def __post_init__(self):
        if self.thetas < 1 or self.datasets < 1 or self.cases < 1:
            raise ConfigError("risk settings need thetas, datasets and cases >= 1")
        if not self.concentration > 0:
            raise ConfigError("concentration must be positive")


def default_candidates() -> tuple[CandidateSpec, ...]:
    return (
        CandidateSpec("markov1", TemporalArcPolicy.markov(1)),
        CandidateSpec("markov2", TemporalArcPolicy.markov(2)),
        CandidateSpec("driving", TemporalArcPolicy.driving(AAP_DRIVING, 1)),
        CandidateSpec("observable", TemporalArcPolicy.observable(None, 1)),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a pilot run depends on.

    Attributes
    ----------
    kb : str or None
        Knowledge-base file; ``None`` uses the bundled one.
    presentation : str or mapping
        Observed findings used to tailor the slice (``"fig1"`` or a mapping).
    n_slices : int
    candidates : tuple of CandidateSpec
    criteria : tuple of Criterion
    canonical : str
        Label of the candidate that matches the generating model.
    cases, seed : int
    eval_cases : int
        Evaluation cases for reference vectors.
    query : ReferenceQuery or None
        ``None``: the value node's chance parents at the last slice, given
        every finding at every slice.
    risk : RiskSettings
    sigma2, alpha : float
    """

    kb: str | None = None
    presentation: object = "fig1"
    n_slices: int = 5
    candidates: tuple[CandidateSpec, ...] = field(default_factory=default_candidates)
    criteria: tuple[Criterion, ...] = field(
        default_factory=lambda: tuple(Criterion.from_dict(n) for n in ("AIC", "BIC", "RI", "LOGSCORE0"))
    )
    canonical: str = "markov1"
    cases: int = 2000
    seed: int = 1993
    eval_cases: int = 32
    query: ReferenceQuery | None = None
    risk: RiskSettings = field(default_factory=RiskSettings)
    sigma2: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "criteria", tuple(self.criteria))
        labels = [c.label for c in self.candidates]
        for lab in labels:
            if not LABEL_RE.match(lab):
                raise ConfigError(f"candidate label {lab!r} must match {LABEL_RE.pattern}")
        if len(set(labels)) != len(labels):
            raise ConfigError("candidate labels must be unique")
        names = [c.name for c in self.criteria]
        for name in names:
            if not re.match(r"^[A-Za-z0-9_\-=.]+$", name):
                raise ConfigError(f"criterion name {name!r} contains unsupported characters")
        if len(set(names)) != len(names):
            raise ConfigError("criterion names must be unique")
        if self.canonical not in labels:
            raise ConfigError(f"canonical label {self.canonical!r} is not among the candidates {labels}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        for name in ("n_slices", "cases", "eval_cases"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if isinstance(self.presentation, str) and self.presentation not in PRESENTATIONS:
            raise ConfigError(f"unknown presentation {self.presentation!r}; known: {sorted(PRESENTATIONS)}")

    def to_dict(self) -> dict:
        return {
            "kb": self.kb,
            "presentation": self.presentation if isinstance(self.presentation, str) else dict(self.presentation),
            "n_slices": self.n_slices,
            "candidates": [c.to_dict() for c in self.candidates],
            "criteria": [c.to_dict() for c in self.criteria],
            "canonical": self.canonical,
            "cases": self.cases,
            "seed": self.seed,
            "eval_cases": self.eval_cases,
            "query": None if self.query is None else self.query.to_dict(),
            "risk": {
                "thetas": self.risk.thetas,
                "datasets": self.risk.datasets,
                "cases": self.risk.cases,
                "concentration": self.risk.concentration,
            },
            "sigma2": self.sigma2,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: Mapping, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Config from a mapping; absent keys keep the values of ``base``."""
        base = base or cls()
        known = set(base.to_dict())
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            kw = {}
            for key in ("kb", "presentation", "canonical"):
                if key in d:
                    kw[key] = d[key]
            for key in ("n_slices", "cases", "seed", "eval_cases"):
                if key in d:
                    if isinstance(d[key], bool) or not isinstance(d[key], int):
                        raise ConfigError(f"{key} must be an integer")
                    kw[key] = d[key]
            for key in ("sigma2", "alpha"):
                if key in d:
                    kw[key] = float(d[key])
            if "candidates" in d:
                kw["candidates"] = tuple(CandidateSpec.from_dict(c) for c in d["candidates"])
            if "criteria" in d:
                kw["criteria"] = tuple(Criterion.from_dict(c) for c in d["criteria"])
            if "query" in d:
                q = d["query"]
                kw["query"] = None if q is None else ReferenceQuery(tuple(q["targets"]), tuple(q["evidence"]))
            if "risk" in d:
                r = dict(base.to_dict()["risk"])
                extra = set(d["risk"]) - set(r)
                if extra:
                    raise ConfigError(f"unknown risk keys {sorted(extra)}")
                r.update(d["risk"])
                kw["risk"] = RiskSettings(int(r["thetas"]), int(r["datasets"]), int(r["cases"]), float(r["concentration"]))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        return replace(base, **kw)

    @classmethod
    def load(cls, path, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(d, base)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @property
    def hash(self) -> str:
        """Short digest of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# -- report -----------------------------------------------------------------------


@dataclass(frozen=True)
class CandidateInfo:
    label: str
    policy: str
    n_nodes: int
    n_arcs: int
    temporal_arcs: tuple[int, ...]
    free_params: int
    wall_time: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class Report:
    """Scores of every candidate under every criterion.

    ``scores[i][j]`` is criterion ``criteria[i]`` for candidate
    ``candidates[j]``. Wall times are informational and excluded from
    equality and from the machine-readable format.
    """

    criteria: tuple[str, ...]
    candidates: tuple[CandidateInfo, ...]
    scores: tuple[tuple[float, ...], ...]
    selected: tuple[str, ...]
    provenance: tuple[tuple[str, str], ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.candidates)

    def score(self, criterion: str, label: str) -> float:
        return self.scores[self.criteria.index(criterion)][self.labels.index(label)]

    def selection(self) -> dict[str, str]:
        return dict(zip(self.criteria, self.selected))


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(report: Report, format: str = "table") -> str:
    """Render a report as a human table or as machine-readable ``key=value`` lines."""
    if format == "machine":
        lines = [f"format={REPORT_FORMAT}"]
        lines += [f"provenance.{k}={v}" for k, v in report.provenance]
        lines.append("criteria=" + ",".join(report.criteria))
        lines.append("candidates=" + ",".join(report.labels))
        for c in report.candidates:
            p = f"candidate.{c.label}"
            lines += [
                f"{p}.policy={c.policy}",
                f"{p}.nodes={c.n_nodes}",
                f"{p}.arcs={c.n_arcs}",
                f"{p}.temporal_arcs=" + ",".join(map(str, c.temporal_arcs)),
                f"{p}.free_params={c.free_params}",
            ]
        for name, row, sel in zip(report.criteria, report.scores, report.selected):
            lines += [f"score.{name}.{lab}={_fmt(v)}" for lab, v in zip(report.labels, row)]
            lines.append(f"selected.{name}={sel}")
        return "\n".join(lines) + "\n"
    if format != "table":
        raise ConfigError(f"unknown report format {format!r}")
    width = max([len("criterion")] + [len(n) for n in report.criteria])
    colw = [max(len(lab), 14) for lab in report.labels]
    head = "criterion".ljust(width) + "".join("  " + lab.rjust(w) for lab, w in zip(report.labels, colw)) + "  selected"
    out = [head, "-" * len(head)]
    for name, row, sel in zip(report.criteria, report.scores, report.selected):
        out.append(name.ljust(width) + "".join("  " + f"{v:.6g}".rjust(w) for v, w in zip(row, colw)) + f"  {sel}")
    if report.candidates:
        out.append("")
        out.append(f"{'candidate':<12} {'nodes':>6} {'arcs':>6} {'params':>7} {'time[s]':>8}  policy")
        for c in report.candidates:
            out.append(f"{c.label:<12} {c.n_nodes:>6} {c.n_arcs:>6} {c.free_params:>7} {c.wall_time:>8.3f}  {c.policy}")
    return "\n".join(out) + "\n"


def parse_report(text: str) -> Report:
    """Inverse of ``emit_report(report, "machine")``."""
    kv: dict[str, str] = {}
    order: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise ConfigError(f"report line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        kv[k] = v
        order.append(k)
    if kv.get("format") != REPORT_FORMAT:
        raise ConfigError(f"not a {REPORT_FORMAT} report")
    split = lambda s: tuple(x for x in s.split(",") if x)  # noqa: E731
    try:
        criteria = split(kv["criteria"])
        labels = split(kv["candidates"])
        cands = []
        for lab in labels:
            p = f"candidate.{lab}"
            cands.append(
                CandidateInfo(
                    lab,
                    kv[f"{p}.policy"],
                    int(kv[f"{p}.nodes"]),
                    int(kv[f"{p}.arcs"]),
                    tuple(int(x) for x in split(kv[f"{p}.temporal_arcs"])),
                    int(kv[f"{p}.free_params"]),
                )
            )
        scores = tuple(tuple(float(kv[f"score.{c}.{lab}"]) for lab in labels) for c in criteria)
        selected = tuple(kv[f"selected.{c}"] for c in criteria)
    except KeyError as exc:
        raise ConfigError(f"report is missing field {exc}") from None
    prov = tuple((k[len("provenance."):], kv[k]) for k in order if k.startswith("provenance."))
    return Report(criteria, tuple(cands), scores, selected, prov)


# -- pilot ------------------------------------------------------------------------


@dataclass(frozen=True)
class PilotSetup:
    """Intermediate products of a pilot run (useful for tests and the CLI)."""

    kb: KnowledgeBase
    slices: SliceSequence
    truth: TemporalNetwork
    data: CaseSet
    eval_cases: CaseSet
    query: ReferenceQuery


def load_kb(config: ExperimentConfig) -> KnowledgeBase:
    return KnowledgeBase.load(config.kb if config.kb is not None else aap_kb_path())


def pilot_slice(kb: KnowledgeBase, config: ExperimentConfig) -> Network:
    obs = PRESENTATIONS[config.presentation] if isinstance(config.presentation, str) else config.presentation
    return tailor(kb, obs).bn_portion()


def default_query(slices: SliceSequence, kb: KnowledgeBase) -> ReferenceQuery:
    last = len(slices) - 1
    targets = tuple(node_id(d, last) for d in kb.scaffold_diseases if d in slices[last].nodes)
    if not targets:
        targets = tuple(node_id(d, last) for d in slices[last].tagged("disease"))
    evidence = tuple(node_id(f, t) for t, net in enumerate(slices) for f in net.tagged("finding"))
    return ReferenceQuery(targets, evidence)


def prepare(config: ExperimentConfig) -> PilotSetup:
    """Build the canonical model and simulate the scoring and evaluation cases."""
    kb = load_kb(config)
    if kb.temporal is None:
        raise ConfigError("the knowledge base has no canonical temporal model")
    slices = SliceSequence.copies(pilot_slice(kb, config), config.n_slices)
    truth = unroll(slices, kb.temporal.policy, kb.temporal.transitions)
    data = simulate(truth, config.cases, substream(config.seed, "simulation"))
    eval_cases = simulate(truth, config.eval_cases, substream(config.seed, "evaluation"))
    query = config.query or default_query(slices, kb)
    return PilotSetup(kb, slices, truth, data, eval_cases, query)


def _restrict(spec: CandidateSpec, slices: SliceSequence) -> CandidateSpec:
    """Drop scope variables absent from every slice (tailoring may remove them)."""
    pol = spec.policy
    if pol.kind in ("driving", "observable") and pol.scope is not None:
        present = slices.all_variables
        scope = tuple(v for v in pol.scope if v in present)
        pol = TemporalArcPolicy(pol.kind, pol.order, scope)
    return CandidateSpec(spec.label, pol, spec.gamma)


def _tag(exc: TidkitError, where: str) -> TidkitError:
    if exc.args and isinstance(exc.args[0], str):
        exc.args = (f"[{where}] {exc.args[0]}",) + exc.args[1:]
    return exc


def run_pilot(config: ExperimentConfig | None = None, setup: PilotSetup | None = None) -> Report:
    """Estimate and score every candidate; see the module docstring."""
    config = config or ExperimentConfig()
    setup = setup or prepare(config)
    specs = [_restrict(s, setup.slices) for s in config.candidates]
    models: list[CandidateModel] = []
    infos = []
    for spec in specs:
        t0 = time.perf_counter()
        try:
            model = estimate_spec(spec, setup.data, setup.slices, config.alpha)
        except TidkitError as exc:
            raise _tag(exc, f"candidate={spec.label}")
        elapsed = time.perf_counter() - t0
        counts = count_elements(model.temporal)
        models.append(model)
        infos.append(
            CandidateInfo(
                spec.label,
                spec.policy.describe(),
                counts.n_nodes,
                counts.n_arcs,
                counts.temporal_arcs,
                model.free_param_count,
                elapsed,
            )
        )
    context = ScoringContext(reference=setup.truth, query=setup.query, eval_cases=setup.eval_cases)
    needs_risk = any(c.error in ("risk_inflation", "predictive_risk") for c in config.criteria)
    if needs_risk:
        r = config.risk
        thetas = [setup.truth] + [
            perturb_temporal(setup.truth, substream(config.seed, "ri-theta", i), r.concentration) for i in range(1, r.thetas)
        ]
        reference = next(s for s in specs if s.label == config.canonical)
        try:
            table = risk_table(
                specs, reference, thetas, setup.slices, setup.query, r.cases, r.datasets,
                config.seed, config.eval_cases, config.alpha,
            )
        except TidkitError as exc:
            raise _tag(exc, "criterion=risk")
        risks = {lab: float(table.risks[0, j]) for j, lab in enumerate(table.labels)}
        context = replace(context, predictive_risk=risks, risk_inflation=table.inflation)
    scores, selected = [], []
    for crit in config.criteria:
        row = []
        for model in models:
            try:
                row.append(criterion_value(model, setup.data, crit, config.sigma2, context=context))
            except TidkitError as exc:
                raise _tag(exc, f"candidate={model.label}, criterion={crit.name}")
        best = min(range(len(models)), key=lambda j: (row[j], models[j].free_param_count, models[j].label))
        scores.append(tuple(row))
        selected.append(models[best].label)
    provenance = (
        ("config_hash", config.hash),
        ("seed", str(config.seed)),
        ("cases", str(config.cases)),
        ("tidkit", __version__),
        ("numpy", np.__version__),
        ("python", ".".join(map(str, sys.version_info[:3]))),
    )
    return Report(tuple(c.name for c in config.criteria), tuple(infos), tuple(scores), tuple(selected), provenance)


def penalty_sweep(
    models: Sequence[CandidateModel], data: CaseSet, penalties: Sequence[float], sigma2: float = 1.0
) -> list[CandidateModel]:
    """Selected model for each penalty coefficient (likelihood error measure)."""
    return [select(models, data, Criterion.generic(pi, sigma2=sigma2)) for pi in penalties]
