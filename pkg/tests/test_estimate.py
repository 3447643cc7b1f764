import numpy as np
import pytest

from tidkit.cases import CaseSet, simulate
from tidkit.exceptions import EstimationError
from tidkit.network import Network, Node, Variable
from tidkit.selection import CandidateSpec, IndicatorVector, block_registry, estimate, estimate_all
from tidkit.temporal import SliceSequence, TemporalArcPolicy

from helpers import BIN, chain_slice, markov_chain, second_order_chain


class TestIndicatorVector:
    """The indicator registry over temporal blocks."""

    def test_registry_order(self):
        sl = SliceSequence.copies(chain_slice(), 3)
        reg = block_registry(TemporalArcPolicy.markov(2), sl)
        assert reg == (("X", "X", 1), ("Y", "Y", 1), ("X", "X", 2), ("Y", "Y", 2))

    def test_size_and_active(self):
        reg = (("X", "X", 1), ("Y", "Y", 1))
        g = IndicatorVector(reg, (0, 1))
        assert g.size == 1 and g.active == (("Y", "Y", 1),) and str(g) == "01"
        assert IndicatorVector.full(reg).size == 2 and IndicatorVector.empty(reg).size == 0

    def test_bad_bits(self):
        with pytest.raises(ValueError):
            IndicatorVector((("X", "X", 1),), (1, 0))
        with pytest.raises(ValueError):
            IndicatorVector((("X", "X", 1),), (2,))


class TestEstimate:
    """Smoothed estimation of candidate parameters."""

    def test_laplace_counts_on_a_root(self):
        net = Network([Node(Variable("a", BIN))], {"a": [[0.5, 0.5]]})
        data = CaseSet(("a@0",), [[1], [1], [1], [0]], (BIN,))
        m = estimate(TemporalArcPolicy.markov(1), None, data, [net])
        np.testing.assert_allclose(m.network.cpt("a@0"), [[2 / 6, 4 / 6]])
        assert m.free_param_count == 1

    def test_empty_gamma_gives_independent_slices(self):
        tn = second_order_chain(0.1)
        data = simulate(tn, 200, 1)
        policy = TemporalArcPolicy.markov(2)
        reg = block_registry(policy, tn.slices)
        m = estimate(policy, IndicatorVector.empty(reg), data, tn.slices)
        assert m.temporal.temporal_arcs == ()
        assert m.free_param_count == sum(s.free_param_count for s in tn.slices)

    def test_gamma_bit_zero_removes_exactly_that_block(self):
        tn = second_order_chain(0.1)
        data = simulate(tn, 200, 1)
        policy = TemporalArcPolicy.markov(2)
        m = estimate(policy, (1, 1, 0, 1), data, tn.slices)
        blocks = {a.block for a in m.temporal.temporal_arcs}
        assert blocks == {("X", "X", 1), ("Y", "Y", 1), ("Y", "Y", 2)}
        assert m.gamma.size == 3

    def test_transition_estimates_concentrate(self):
        T = np.array([[0.8, 0.2], [0.35, 0.65]])
        tn = markov_chain([0.5, 0.5], T, 2)
        data = simulate(tn, 100, 2)
        m = estimate(TemporalArcPolicy.markov(1), None, data, tn.slices)
        est = m.network.cpt("S@1")
        prev = data.column("S@0")
        for i in range(2):
            n_i = int((prev == i).sum())
            sd = np.sqrt(T[i, 0] * T[i, 1] / n_i)
            assert abs(est[i, 1] - T[i, 1]) <= 3 * sd

    def test_rows_are_normalized(self, rng):
        tn = second_order_chain(0.2)
        m = estimate(TemporalArcPolicy.markov(2), None, simulate(tn, 50, 0), tn.slices, alpha=0.5)
        for i in m.network.chance_nodes:
            np.testing.assert_allclose(m.network.cpt(i).sum(axis=1), 1.0, atol=1e-12)
        assert m.theta_hat.size == sum(m.network.cpt(i).size for i in m.network.chance_nodes)

    def test_incomplete_data_rejected(self):
        tn = second_order_chain(0.1)
        data = simulate(tn, 20, 0).mask(["X@0"])
        with pytest.raises(EstimationError):
            estimate(TemporalArcPolicy.markov(1), None, data, tn.slices)

    def test_wrong_vocabulary(self):
        tn = second_order_chain(0.1)
        data = CaseSet(("Z@0",), [[0]], (BIN,))
        with pytest.raises(EstimationError):
            estimate(TemporalArcPolicy.markov(1), None, data, tn.slices)

    def test_wrong_gamma_length(self):
        tn = second_order_chain(0.1)
        with pytest.raises(EstimationError):
            estimate(TemporalArcPolicy.markov(1), (1,), simulate(tn, 10, 0), tn.slices)

    def test_estimate_all_keeps_labels(self):
        tn = second_order_chain(0.1)
        specs = [CandidateSpec("m1", TemporalArcPolicy.markov(1)), CandidateSpec("m2", TemporalArcPolicy.markov(2))]
        models = estimate_all(specs, simulate(tn, 30, 0), tn.slices)
        assert [m.label for m in models] == ["m1", "m2"]
        assert models[0].free_param_count < models[1].free_param_count

    def test_spec_round_trip(self):
        spec = CandidateSpec("d", TemporalArcPolicy.driving(["X"], 2), (1, 0))
        assert CandidateSpec.from_dict(spec.to_dict()) == spec
