"""Predictive error on a reference query, predictive risk and risk inflation.

Candidates with different temporal structures have parameter vectors of
different shapes, so they are compared on a *reference vector*: for each
evaluation case, the posterior marginals of the target variables given the
case's evidence columns, concatenated. :func:`sse` is the mean squared
Euclidean distance between two such vectors.

Risk inflation is approximated by a finite maximum over a supplied set of
parameter samples; each predictive risk is a Monte Carlo mean over ``M``
simulated datasets. All candidates see the same datasets for a given
sample (common random numbers), so a candidate identical to the reference
has ratio exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..cases import CaseSet, simulate, substream
from ..exceptions import DegenerateReferenceError, EstimationError, InferenceError
from ..inference import posterior_many
from ..network import Network
from ..temporal import TemporalNetwork
from .estimate import CandidateSpec, estimate_spec


@dataclass(frozen=True)
class ReferenceQuery:
    """Targets predicted from evidence columns.

    Attributes
    ----------
    targets : tuple of str
        Node ids whose marginals form the reference vector.
    evidence : tuple of str
        Node ids read from each evaluation case.
    """

    targets: tuple[str, ...]
    evidence: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "evidence", tuple(self.evidence))
        if not self.targets:
            raise ValueError("a reference query needs at least one target")
        clash = set(self.targets) & set(self.evidence)
        if clash:
            raise ValueError(f"{sorted(clash)} cannot be both target and evidence")

    def to_dict(self) -> dict:
        return {"targets": list(self.targets), "evidence": list(self.evidence)}


def _net(model) -> Network:
    if isinstance(model, Network):
        return model
    if isinstance(model, TemporalNetwork):
        return model.flattened
    return model.network


def reference_vector(model, query: ReferenceQuery, cases: CaseSet) -> np.ndarray:
    """Concatenated target marginals, one row per evaluation case.

    Returns
    -------
    ndarray, shape (n_cases, sum of target cardinalities)

    Raises
    ------
    InferenceError
        Some case's evidence has probability zero under ``model``.
    """
    net = _net(model)
    ev = cases.select(list(query.evidence))
    probs, _ = posterior_many(net, ev.columns, ev.data, query.targets)
    if np.isnan(probs).any():
        bad = int(np.flatnonzero(np.isnan(probs.reshape(len(cases), -1)).any(axis=1))[0])
        raise InferenceError(f"evaluation case {cases.case_ids[bad]!r} is impossible under the model")
    n = len(cases)
    parts = []
    for k in range(len(query.targets)):
        axes = tuple(1 + j for j in range(len(query.targets)) if j != k)
        parts.append(probs.sum(axis=axes).reshape(n, -1))
    return np.concatenate(parts, axis=1)


def sse(estimate, reference) -> float:
    """Squared Euclidean distance between reference vectors.

    One-dimensional inputs give ``|a - b|^2``; two-dimensional inputs (one
    row per evaluation case) give the mean of the per-row distances.

    Examples
    --------
    >>> sse([1.0, 0.0], [0.0, 1.0])
    2.0
    """
    a = np.asarray(estimate, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise EstimationError(f"reference vectors differ in shape: {a.shape} vs {b.shape}")
    d = (a - b) ** 2
    if d.ndim <= 1:
        return float(d.sum())
    return float(d.reshape(d.shape[0], -1).sum(axis=1).mean())


def model_sse(model, reference_model, query: ReferenceQuery, cases: CaseSet) -> float:
    """:func:`sse` between two models' reference vectors on ``cases``."""
    return sse(reference_vector(model, query, cases), reference_vector(reference_model, query, cases))


def _spec_key(spec: CandidateSpec):
    return (spec.policy, spec.gamma)


def _degenerate(data: CaseSet) -> bool:
    return bool(np.all(data.data == data.data[:1]))


@dataclass(frozen=True)
class RiskTable:
    """Predictive risks of several candidates over a set of parameter samples.

    Attributes
    ----------
    labels : tuple of str
        Candidate labels (columns of ``risks``).
    risks : ndarray, shape (n_samples, n_candidates)
    reference_risks : ndarray, shape (n_samples,)
    """

    labels: tuple[str, ...]
    risks: np.ndarray
    reference_risks: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return self.risks / self.reference_risks[:, None]

    @property
    def inflation(self) -> dict[str, float]:
        """``RI`` per candidate: the maximum ratio over samples."""
        r = self.ratios
        return {lab: float(r[:, j].max()) for j, lab in enumerate(self.labels)}


def predictive_risk_table(
    specs: Sequence[CandidateSpec],
    theta_samples: Sequence,
    slices,
    query: ReferenceQuery,
    n_cases: int,
    n_datasets: int,
    seed: int,
    n_eval: int = 32,
    alpha: float = 1.0,
    stream: str = "predictive-risk",
) -> np.ndarray:
    """``E_theta sse(theta_hat, theta)`` for every (sample, candidate) pair.

    For sample ``i`` the evaluation cases and the ``n_datasets`` training
    sets come from sub-streams keyed by ``(stream, i)``, shared by all
    candidates. Identical specs are estimated once.

    Raises
    ------
    EstimationError
        ``n_datasets < 1`` or a generator whose datasets never vary.
    """
    if n_datasets < 1:
        raise EstimationError("the number of Monte Carlo datasets must be >= 1")
    if not theta_samples:
        raise EstimationError("at least one parameter sample is required")
    unique: dict = {}
    for s in specs:
        unique.setdefault(_spec_key(s), s)
    keys = list(unique)
    out = np.zeros((len(theta_samples), len(specs)))
    for i, theta in enumerate(theta_samples):
        truth = _net(theta)
        eval_cases = simulate(truth, n_eval, substream(seed, stream, i, "eval"))
        target = reference_vector(truth, query, eval_cases)
        acc = np.zeros(len(keys))
        varied = False
        for m in range(n_datasets):
            data = simulate(truth, n_cases, substream(seed, stream, i, "data", m))
            varied = varied or not _degenerate(data)
            for k, key in enumerate(keys):
                model = estimate_spec(unique[key], data, slices, alpha)
                acc[k] += sse(reference_vector(model, query, eval_cases), target)
        if not varied:
            raise EstimationError(f"degenerate generator: parameter sample {i} produced zero-variance data")
        mean = acc / n_datasets
        for j, s in enumerate(specs):
            out[i, j] = mean[keys.index(_spec_key(s))]
    return out


def predictive_risk(
    candidate: CandidateSpec,
    theta_true,
    slices,
    query: ReferenceQuery,
    n_cases: int,
    n_datasets: int,
    seed: int,
    n_eval: int = 32,
    alpha: float = 1.0,
) -> float:
    """Monte Carlo ``E_theta |theta_hat - theta|^2`` on the reference query."""
    table = predictive_risk_table([candidate], [theta_true], slices, query, n_cases, n_datasets, seed, n_eval, alpha)
    return float(table[0, 0])


def risk_table(
    candidates: Sequence[CandidateSpec],
    reference: CandidateSpec,
    theta_samples: Sequence,
    slices,
    query: ReferenceQuery,
    n_cases: int,
    n_datasets: int,
    seed: int,
    n_eval: int = 32,
    alpha: float = 1.0,
) -> RiskTable:
    """Predictive risks of ``candidates`` and of ``reference`` on each sample.

    Raises
    ------
    DegenerateReferenceError
        The reference has zero risk on some sample, so the ratio is undefined.
    """
    specs = list(candidates) + [reference]
    table = predictive_risk_table(specs, theta_samples, slices, query, n_cases, n_datasets, seed, n_eval, alpha)
    ref = table[:, -1]
    zero = np.flatnonzero(ref <= 0.0)
    if zero.size:
        raise DegenerateReferenceError(
            f"degenerate reference: {reference.label!r} has zero risk on parameter sample {int(zero[0])}"
        )
    return RiskTable(tuple(c.label for c in candidates), table[:, :-1], ref)


def risk_inflation(
    candidate: CandidateSpec,
    reference: CandidateSpec,
    theta_samples: Sequence,
    slices,
    query: ReferenceQuery,
    n_cases: int,
    n_datasets: int,
    seed: int,
    n_eval: int = 32,
    alpha: float = 1.0,
) -> float:
    """``max_theta R(theta, candidate) / R(theta, reference)`` over ``theta_samples``."""
    t = risk_table([candidate], reference, theta_samples, slices, query, n_cases, n_datasets, seed, n_eval, alpha)
    return t.inflation[candidate.label]


def perturb(net: Network, rng: np.random.Generator, concentration: float = 50.0) -> Network:
    """Parameter sample near ``net``: each table row redrawn from a Dirichlet.

    Row ``p`` is replaced by a draw from ``Dirichlet(concentration * p +
    0.5)``, so samples scatter around ``net`` and never collapse to zero.
    """
    cpts = {}
    for i in net.chance_nodes:
        table = net.cpt(i)
        cpts[i] = np.vstack([rng.dirichlet(concentration * row + 0.5) for row in table])
    return net.replace(cpts={**dict(net.cpts), **cpts})


def perturb_temporal(tn: TemporalNetwork, rng: np.random.Generator, concentration: float = 50.0) -> TemporalNetwork:
    return TemporalNetwork(tn.slices, tn.temporal_arcs, perturb(tn.flattened, rng, concentration))

