import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tidkit.cases import simulate
from tidkit.estimators import ModelSelector, TemporalModel
from tidkit.exceptions import EstimationError
from tidkit.selection import LOGSCORE0, CandidateSpec, estimate, sequential_log_score
from tidkit.temporal import TemporalArcPolicy

from helpers import second_order_chain


@pytest.fixture(scope="module")
def chain_data():
    tn = second_order_chain(0.15)
    return tn, simulate(tn, 500, 8)


class TestTemporalModel:
    """Estimator wrapper for a single candidate."""

    def test_matches_functional_estimate(self, chain_data):
        tn, data = chain_data
        est = TemporalModel(tn.slices, TemporalArcPolicy.markov(2)).fit(data)
        ref = estimate(TemporalArcPolicy.markov(2), None, data, tn.slices)
        np.testing.assert_array_equal(est.model_.theta_hat, ref.theta_hat)
        assert est.free_param_count_ == ref.free_param_count

    def test_array_input_with_columns(self, chain_data):
        tn, data = chain_data
        est = TemporalModel(tn.slices, {"kind": "markov", "order": 1}, columns=data.columns).fit(np.asarray(data.data))
        assert est.n_features_in_ == len(data.columns)
        assert est.score(np.asarray(data.data)) == pytest.approx(-sequential_log_score(est.model_, data).total / len(data))

    def test_array_input_needs_columns(self, chain_data):
        tn, data = chain_data
        with pytest.raises(EstimationError):
            TemporalModel(tn.slices).fit(np.asarray(data.data))

    def test_predict_proba(self, chain_data):
        tn, data = chain_data
        est = TemporalModel(tn.slices, TemporalArcPolicy.markov(1)).fit(data)
        p = est.predict_proba(data[:10], "X@3")
        assert p.shape == (10, 2)
        np.testing.assert_allclose(p.sum(axis=1), 1.0)

    def test_not_fitted(self, chain_data):
        tn, data = chain_data
        with pytest.raises(NotFittedError):
            TemporalModel(tn.slices).score(data)

    def test_clone_keeps_params(self, chain_data):
        tn, _ = chain_data
        est = TemporalModel(tn.slices, TemporalArcPolicy.markov(2), alpha=0.5, label="m2")
        c = clone(est)
        assert c.get_params()["alpha"] == 0.5 and c.get_params()["label"] == "m2"
        assert not hasattr(c, "model_")


class TestModelSelector:
    """Estimator wrapper for criterion-based selection."""

    SPECS = [CandidateSpec("m1", TemporalArcPolicy.markov(1)), CandidateSpec("m2", TemporalArcPolicy.markov(2))]

    def test_logscore_picks_second_order(self, chain_data):
        tn, data = chain_data
        sel = ModelSelector(tn.slices, self.SPECS, criterion=LOGSCORE0).fit(data)
        assert sel.best_label_ == "m2"
        assert set(sel.scores_) == {"m1", "m2"}

    def test_heavy_penalty_picks_first_order(self, chain_data):
        tn, data = chain_data
        sel = ModelSelector(tn.slices, [s.to_dict() for s in self.SPECS], criterion={"name": "p10", "penalty": 10}).fit(data)
        assert sel.best_label_ == "m1"
        assert sel.score(data) < 0

    def test_needs_candidates(self, chain_data):
        tn, data = chain_data
        with pytest.raises(EstimationError):
            ModelSelector(tn.slices, []).fit(data)
