"""scikit-learn style wrappers around estimation and selection.

The functional API in :mod:`tidkit.selection` is the primary interface;
these classes adapt it to ``fit`` / ``score`` / ``get_params`` so the models
work with tools that expect estimators (``clone``, parameter grids).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .cases import CaseSet
from .exceptions import EstimationError
from .inference import posterior_many
from .selection.criteria import Criterion, criterion_value, rank
from .selection.estimate import CandidateSpec, estimate
from .selection.logscore import LogScore, sequential_log_score
from .temporal import TemporalArcPolicy, as_slices


def _as_policy(policy) -> TemporalArcPolicy:
    if isinstance(policy, TemporalArcPolicy):
        return policy
    if isinstance(policy, dict):
        return TemporalArcPolicy.from_dict(policy)
    raise EstimationError(f"policy must be a TemporalArcPolicy or a mapping, got {type(policy).__name__}")


def check_cases_input(X, columns: Sequence[str] | None, domains=None) -> CaseSet:
    """Accept a :class:`CaseSet` or an integer array with column names."""
    if isinstance(X, CaseSet):
        return X
    if columns is None:
        raise EstimationError("array input needs the column names (pass columns=...)")
    arr = check_array(X, dtype=np.int64, ensure_all_finite=True)
    if arr.shape[1] != len(columns):
        raise EstimationError(f"X has {arr.shape[1]} columns, expected {len(columns)}")
    if np.any(arr < -1):
        raise EstimationError("state indices must be >= -1 (-1 = unobserved)")
    doms = domains or tuple(tuple(str(k) for k in range(int(arr[:, j].max(initial=0)) + 1)) for j in range(arr.shape[1]))
    return CaseSet(tuple(columns), arr, doms)


class TemporalModel(BaseEstimator):
    """One candidate: a temporal policy estimated from complete cases.

    Parameters
    ----------
    slices : sequence of Network
        Per-slice structures.
    policy : TemporalArcPolicy or dict
    gamma : sequence of 0/1, optional
        Indicator bits over the policy's blocks (all on by default).
    alpha : float
        Smoothing pseudo-count.
    label : str, optional
    columns : sequence of str, optional
        Column names when ``X`` is a plain array.
    """

    def __init__(self, slices=None, policy=None, gamma=None, alpha=1.0, label=None, columns=None):
        self.slices = slices
        self.policy = policy
        self.gamma = gamma
        self.alpha = alpha
        self.label = label
        self.columns = columns

    def fit(self, X, y=None):
        cases = check_cases_input(X, self.columns)
        policy = _as_policy(self.policy if self.policy is not None else TemporalArcPolicy.markov(1))
        self.model_ = estimate(policy, self.gamma, cases, as_slices(self.slices), self.alpha, self.label)
        self.network_ = self.model_.network
        self.free_param_count_ = self.model_.free_param_count
        self.n_features_in_ = len(cases.columns)
        return self

    def log_score(self, X, target=None, evidence=None) -> LogScore:
        check_is_fitted(self, "model_")
        return sequential_log_score(self.model_, check_cases_input(X, self.columns), target, evidence)

    def score(self, X, y=None) -> float:
        """Mean log-likelihood per case (higher is better)."""
        s = self.log_score(X)
        return -s.total / max(len(s), 1)

    def predict_proba(self, X, query: str) -> np.ndarray:
        """``P(query | observed entries of each row)``, shape (n, card)."""
        check_is_fitted(self, "model_")
        cases = check_cases_input(X, self.columns)
        cols = [c for c in cases.columns if c != query]
        ev = cases.select(cols)
        probs, _ = posterior_many(self.network_, ev.columns, ev.data, query)
        return probs


class ModelSelector(BaseEstimator):
    """Estimate several candidates and keep the one a criterion prefers.

    Parameters
    ----------
    slices : sequence of Network
    candidates : sequence of CandidateSpec
    criterion : str, dict or Criterion
        Preset name (``"AIC"``, ``"BIC"``, ``"LOGSCORE0"``) or a criterion.
    sigma2, alpha : float
    columns : sequence of str, optional
    """

    def __init__(self, slices=None, candidates=(), criterion="AIC", sigma2=1.0, alpha=1.0, columns=None):
        self.slices = slices
        self.candidates = candidates
        self.criterion = criterion
        self.sigma2 = sigma2
        self.alpha = alpha
        self.columns = columns

    def fit(self, X, y=None):
        cases = check_cases_input(X, self.columns)
        crit = self.criterion if isinstance(self.criterion, Criterion) else Criterion.from_dict(self.criterion)
        specs = [c if isinstance(c, CandidateSpec) else CandidateSpec.from_dict(c) for c in self.candidates]
        if not specs:
            raise EstimationError("no candidates to select from")
        slices = as_slices(self.slices)
        self.models_ = [estimate(s.policy, s.gamma, cases, slices, self.alpha, s.label) for s in specs]
        ranked = rank(self.models_, cases, crit, self.sigma2)
        self.scores_ = {m.label: criterion_value(m, cases, crit, self.sigma2) for m in self.models_}
        self.best_ = ranked[0][1]
        self.best_label_ = self.best_.label
        self.n_features_in_ = len(cases.columns)
        return self

    def score(self, X, y=None) -> float:
        check_is_fitted(self, "best_")
        s = sequential_log_score(self.best_, check_cases_input(X, self.columns))
        return -s.total / max(len(s), 1)
