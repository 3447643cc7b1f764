"""Penalized selection criteria.

A criterion value is ``f + k * sigma2 * Pi`` where ``f`` is a predictive
error, ``k`` the candidate's free parameter count and ``Pi >= 0`` the
penalty coefficient. ``f`` is one of

``neg_log_likelihood``
    ``-sum log P(case)`` over the scoring data (the sequential log score
    with every column as target).
``sse``
    Mean squared distance between the candidate's and the reference
    model's reference vectors (see :mod:`tidkit.selection.risk`).
``predictive_risk``
    Monte Carlo predictive risk, looked up in the scoring context.
``risk_inflation``
    Ratio form: the candidate's risk inflation, looked up in the context.

An optional ``kappa`` adds ``kappa * computation_cost(network)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..cases import CaseSet, check_cases
from ..exceptions import ConfigError, EstimationError
from ..inference import computation_cost, log_likelihood_many
from .estimate import CandidateModel
from .logscore import sequential_log_score
from .risk import ReferenceQuery, reference_vector, sse

ERROR_MEASURES = ("neg_log_likelihood", "sse", "predictive_risk", "risk_inflation")
LOG_N = "log n"


@dataclass(frozen=True)
class Criterion:
    """Error measure plus parameter-count penalty.

    Attributes
    ----------
    name : str
    error : str
        One of :data:`ERROR_MEASURES`.
    penalty : float or "log n"
        The coefficient ``Pi``; the string ``"log n"`` resolves to the log
        of the case count at scoring time.
    sigma2 : float
        Scale of the penalty.
    kappa : float
        Weight of the computation-cost term (0 disables it).
    """

    name: str
    error: str = "neg_log_likelihood"
    penalty: float | str = 0.0
    sigma2: float = 1.0
    kappa: float = 0.0

    def __post_init__(self):
        if self.error not in ERROR_MEASURES:
            raise ConfigError(f"unknown error measure {self.error!r}; expected one of {ERROR_MEASURES}")
        if isinstance(self.penalty, str):
            if self.penalty != LOG_N:
                raise ConfigError(f"penalty must be a number or {LOG_N!r}, got {self.penalty!r}")
        else:
            p = float(self.penalty)
            if not (p >= 0 and math.isfinite(p)):
                raise ConfigError(f"penalty coefficient must be a finite number >= 0, got {self.penalty!r}")
            object.__setattr__(self, "penalty", p)
        if not self.sigma2 >= 0:
            raise ConfigError(f"sigma2 must be >= 0, got {self.sigma2!r}")
        if not self.kappa >= 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa!r}")

    @classmethod
    def generic(cls, penalty, error: str = "neg_log_likelihood", sigma2: float = 1.0) -> "Criterion":
        label = penalty if isinstance(penalty, str) else f"{float(penalty):g}"
        return cls(f"Pi={label}", error, penalty, sigma2)

    def coefficient(self, n: int) -> float:
        """``Pi`` for a data set of ``n`` cases."""
        if n < 1:
            raise EstimationError(f"case count must be >= 1, got {n}")
        return math.log(n) if self.penalty == LOG_N else float(self.penalty)

    def to_dict(self) -> dict:
        return {"name": self.name, "error": self.error, "penalty": self.penalty, "sigma2": self.sigma2, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d) -> "Criterion":
        if isinstance(d, str):
            return preset(d)
        try:
            base = PRESETS.get(str(d.get("name", "")).upper())
            if base is not None and set(d) <= {"name", "sigma2", "kappa"}:
                return cls(base.name, base.error, base.penalty, float(d.get("sigma2", 1.0)), float(d.get("kappa", 0.0)))
            return cls(
                str(d["name"]),
                str(d.get("error", "neg_log_likelihood")),
                d.get("penalty", 0.0),
                float(d.get("sigma2", 1.0)),
                float(d.get("kappa", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad criterion {d!r}: {exc}") from exc


AIC = Criterion("AIC", "neg_log_likelihood", 2.0)
BIC = Criterion("BIC", "neg_log_likelihood", LOG_N)
LOGSCORE0 = Criterion("LOGSCORE0", "neg_log_likelihood", 0.0)
RI = Criterion("RI", "risk_inflation", 0.0)
PRESETS = {c.name: c for c in (AIC, BIC, LOGSCORE0, RI)}


def preset(name: str) -> Criterion:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown criterion {name!r}; presets are {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class ScoringContext:
    """Everything beyond the data that some error measures need.

    Attributes
    ----------
    reference : Network or CandidateModel, optional
        Model the ``sse`` measure compares against.
    query : ReferenceQuery, optional
    eval_cases : CaseSet, optional
        Cases whose evidence defines the reference vectors.
    predictive_risk : mapping of label to float
    risk_inflation : mapping of label to float
    """

    reference: object = None
    query: ReferenceQuery | None = None
    eval_cases: CaseSet | None = None
    predictive_risk: Mapping[str, float] = field(default_factory=dict)
    risk_inflation: Mapping[str, float] = field(default_factory=dict)


def neg_log_likelihood(model: CandidateModel, data: CaseSet) -> float:
    """``-sum log P(case)`` of ``data`` under ``model``."""
    aligned = check_cases(data, model.network)
    return sequential_log_score(model, aligned).total


def error_value(model: CandidateModel, data: CaseSet, criterion: Criterion, context: ScoringContext | None) -> float:
    ctx = context or ScoringContext()
    if criterion.error == "neg_log_likelihood":
        return neg_log_likelihood(model, data)
    if criterion.error == "sse":
        if ctx.reference is None or ctx.query is None or ctx.eval_cases is None:
            raise EstimationError("the sse measure needs a reference model, a query and evaluation cases")
        return sse(reference_vector(model, ctx.query, ctx.eval_cases), reference_vector(ctx.reference, ctx.query, ctx.eval_cases))
    table = ctx.predictive_risk if criterion.error == "predictive_risk" else ctx.risk_inflation
    if model.label not in table:
        raise EstimationError(f"no {criterion.error.replace('_', ' ')} value for candidate {model.label!r}")
    return float(table[model.label])


def criterion_value(
    model: CandidateModel,
    data: CaseSet,
    criterion: Criterion,
    sigma2: float | None = None,
    n: int | None = None,
    context: ScoringContext | None = None,
) -> float:
    """``f + free_param_count * sigma2 * Pi`` (plus the optional cost term).

    Parameters
    ----------
    sigma2 : float, optional
        Overrides ``criterion.sigma2``.
    n : int, optional
        Case count used for ``Pi = log n``; defaults to ``len(data)``.

    Raises
    ------
    EstimationError
        ``n < 1``, negative ``sigma2``, or missing context.
    """
    n = len(data) if n is None else int(n)
    if n < 1:
        raise EstimationError(f"case count must be >= 1, got {n}")
    s2 = criterion.sigma2 if sigma2 is None else float(sigma2)
    if s2 < 0:
        raise EstimationError(f"sigma2 must be >= 0, got {s2}")
    value = error_value(model, data, criterion, context)
    pi = criterion.coefficient(n)
    if pi:
        value += model.free_param_count * s2 * pi
    if criterion.kappa:
        value += criterion.kappa * computation_cost(model.network)
    return float(value)


def aic(model: CandidateModel, data: CaseSet, sigma2: float = 1.0) -> float:
    """``-sum log P + 2 * sigma2 * k``, computed directly from the tables."""
    aligned = check_cases(data, model.network)
    ll = log_likelihood_many(model.network, aligned.columns, aligned.data)
    return float(-np.sum(ll) + 2.0 * sigma2 * model.free_param_count)


def bic(model: CandidateModel, data: CaseSet, sigma2: float = 1.0) -> float:
    """``-sum log P + log(n) * sigma2 * k``, computed directly from the tables."""
    aligned = check_cases(data, model.network)
    ll = log_likelihood_many(model.network, aligned.columns, aligned.data)
    return float(-np.sum(ll) + math.log(len(aligned)) * sigma2 * model.free_param_count)


def _order_key(value: float, model: CandidateModel):
    return (value, model.free_param_count, model.label)


def rank(
    candidates: Sequence[CandidateModel],
    data: CaseSet,
    criterion: Criterion,
    sigma2: float | None = None,
    n: int | None = None,
    context: ScoringContext | None = None,
) -> list[tuple[float, CandidateModel]]:
    """Candidates with their criterion values, best first.

    Ties on the value go to fewer free parameters, then to the smaller label.
    """
    if not candidates:
        raise EstimationError("no candidates to select from")
    scored = [(criterion_value(m, data, criterion, sigma2, n, context), m) for m in candidates]
    if any(math.isnan(v) for v, _ in scored):
        raise EstimationError(f"criterion {criterion.name} produced NaN")
    return sorted(scored, key=lambda vm: _order_key(*vm))


def select(
    candidates: Sequence[CandidateModel],
    data: CaseSet,
    criterion: Criterion,
    sigma2: float | None = None,
    n: int | None = None,
    context: ScoringContext | None = None,
) -> CandidateModel:
    """The candidate minimizing ``criterion`` (see :func:`rank` for ties)."""
    return rank(candidates, data, criterion, sigma2, n, context)[0][1]
