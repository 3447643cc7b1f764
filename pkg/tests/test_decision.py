import itertools

import numpy as np
import pytest

from tidkit.exceptions import EstimationError, OracleSizeError
from tidkit.fixtures import mini_aap_id
from tidkit.inference import enumerate_posterior
from tidkit.network import joint_probability
from tidkit.selection import (
    LossSpec,
    ThresholdRule,
    bayes_risk,
    bayes_risks,
    bayes_rule,
    risk,
    risk_estimate,
    threshold_family,
)
from tidkit.selection.risk import perturb

FINDINGS = ("V", "RLQ-T", "WBC")


@pytest.fixture
def bn(mini_id):
    return mini_id.bn_portion()


@pytest.fixture
def loss(mini_id):
    return LossSpec.from_network(mini_id)


def brute_force_risk(net, loss, rule):
    """Sum over every full assignment of P(assignment) * loss(App, rule(findings))."""
    ids = net.chance_nodes
    total = 0.0
    cache = {}
    for combo in itertools.product(*(range(net.card(i)) for i in ids)):
        a = dict(zip(ids, combo))
        x = tuple(a[f] for f in FINDINGS)
        if x not in cache:
            p = enumerate_posterior(net, dict(zip(FINDINGS, x)), rule.disease).probs
            s = net.variable(rule.disease).index(rule.state)
            cache[x] = rule.above if p[s] >= rule.threshold else rule.below
        act = loss.action_index(cache[x])
        total += joint_probability(net, a) * loss.table[a["App"], act]
    return total


def point_mass(bn, present):
    p = [0.0, 1.0] if present else [1.0, 0.0]
    return bn.replace(cpts={**bn.cpts, "App": [p]})


class TestLossSpec:
    """Loss specifications taken from value nodes."""

    def test_from_network_negates_utilities(self, mini_id, loss):
        assert loss.states == ("App",) and loss.actions == ("operate", "observe")
        np.testing.assert_array_equal(loss.table, [[4.0, 0.0], [1.0, 12.0]])

    def test_rejects_bad_tables(self):
        with pytest.raises(ValueError):
            LossSpec(("App",), ("a", "b"), [1.0, 2.0])
        with pytest.raises(ValueError):
            LossSpec(("App",), ("a", "b"), [[1.0, np.nan], [0.0, 0.0]])

    def test_rescale(self, loss):
        np.testing.assert_array_equal(loss.rescale(2.0, 1.0).table, 2 * loss.table + 1)
        with pytest.raises(ValueError):
            loss.rescale(0.0)


class TestRisk:
    """Frequentist risk of decision rules."""

    def test_constant_loss(self, bn):
        const = LossSpec(("App",), ("operate", "observe"), np.full((2, 2), 3.5))
        rule = ThresholdRule("App", "present", 0.5, "operate", "observe")
        assert risk(const, rule, bn) == pytest.approx(3.5, abs=1e-12)

    def test_deterministic_world_zero_loss_rule(self, bn, loss):
        world = point_mass(bn, present=True)
        rule = ThresholdRule.always("operate", "App", "present", "observe")
        shifted = LossSpec(loss.states, loss.actions, loss.table - loss.table[1, 0])
        assert risk(shifted, rule, world) == 0.0

    def test_threshold_rule_matches_brute_force(self, bn, loss):
        for tau in (0.1, 0.5, 0.9):
            rule = ThresholdRule("App", "present", tau, "operate", "observe")
            assert risk(loss, rule, bn) == pytest.approx(brute_force_risk(bn, loss, rule), abs=1e-12)

    def test_monte_carlo_agrees_with_exact(self, bn, loss):
        for tau in (0.2, 0.5, 0.7):
            rule = ThresholdRule("App", "present", tau, "operate", "observe")
            exact = risk_estimate(loss, rule, bn)
            mc = risk_estimate(loss, rule, bn, method="mc", samples=20000, seed=int(tau * 10))
            assert exact.method == "exact" and mc.method == "monte-carlo"
            assert abs(mc.value - exact.value) <= 4 * mc.stderr

    def test_guard_without_monte_carlo(self, bn, loss):
        rule = ThresholdRule("App", "present", 0.5, "operate", "observe")
        with pytest.raises(OracleSizeError):
            risk_estimate(loss, rule, bn, max_configs=4)
        with pytest.raises(OracleSizeError):
            risk_estimate(loss, rule, bn, method="exact", max_configs=4)
        est = risk_estimate(loss, rule, bn, max_configs=4, samples=500)
        assert est.method == "monte-carlo" and est.samples == 500

    def test_break_even_threshold_is_optimal(self, bn, loss, rng):
        # operate iff 4 (1 - p) + p < 12 p, i.e. p > 4 / 15
        best = risk(loss, ThresholdRule("App", "present", 4 / 15, "operate", "observe"), bn)
        for _ in range(10):
            wrong = perturb(bn, rng, 5.0)
            tau = float(rng.uniform(0, 1))
            rule = ThresholdRule("App", "present", tau, "operate", "observe", model=wrong)
            assert risk(loss, rule, bn) >= best - 1e-12

    def test_unknown_variable(self, bn, loss):
        with pytest.raises(EstimationError):
            risk(loss, ThresholdRule("Chol", "present", 0.5, "operate", "observe"), bn)


class TestBayes:
    """Bayes risk and Bayes rules over rule families."""

    def test_single_point_prior(self, bn, loss):
        rule = ThresholdRule("App", "present", 0.3, "operate", "observe")
        assert bayes_risk(loss, rule, [(1.0, bn)]) == risk(loss, rule, bn)

    def test_two_point_prior(self, bn):
        table = np.array([[1.0, 0.0], [3.0, 0.0]])
        loss = LossSpec(("App",), ("operate", "observe"), table)
        rule = ThresholdRule.always("operate", "App", "present", "observe")
        prior = [(0.5, point_mass(bn, False)), (0.5, point_mass(bn, True))]
        assert bayes_risk(loss, rule, prior) == pytest.approx(2.0, abs=1e-12)

    def test_random_prior_is_weighted_sum(self, bn, loss, rng):
        nets = [perturb(bn, rng) for _ in range(3)]
        w = rng.dirichlet(np.ones(3))
        w = w / w.sum()
        rule = ThresholdRule("App", "present", 0.6, "operate", "observe")
        expected = sum(wi * risk(loss, rule, n) for wi, n in zip(w, nets))
        assert bayes_risk(loss, rule, list(zip(w, nets))) == pytest.approx(expected, abs=1e-12)

    def test_unnormalized_prior(self, bn, loss):
        rule = ThresholdRule("App", "present", 0.6, "operate", "observe")
        with pytest.raises(EstimationError):
            bayes_risk(loss, rule, [(0.5, bn), (0.6, bn)])
        with pytest.raises(EstimationError):
            bayes_risk(loss, rule, [])

    def test_one_rule(self, bn, loss):
        rule = ThresholdRule("App", "present", 0.6, "operate", "observe")
        assert bayes_rule(loss, [(1.0, bn)], [rule]) is rule
        with pytest.raises(EstimationError):
            bayes_rule(loss, [(1.0, bn)], [])

    def test_dominance(self, bn, loss):
        treat = ThresholdRule.always("operate", "App", "present", "observe")
        wait = ThresholdRule.always("observe", "App", "present", "operate")
        assert bayes_rule(loss, [(1.0, point_mass(bn, True))], [wait, treat]) is treat

    def test_threshold_sweep_matches_table(self, bn, loss, rng):
        rules = threshold_family("App", "present", "operate", "observe")
        assert [r.threshold for r in rules] == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        prior = [(0.6, bn), (0.4, perturb(bn, rng))]
        table = bayes_risks(loss, prior, rules)
        best = min(table)
        expected = min(r.threshold for r, v in zip(rules, table) if v <= best + 1e-12)
        assert bayes_rule(loss, prior, rules).threshold == expected

    def test_affine_invariance(self, bn, loss, rng):
        rules = threshold_family("App", "present", "operate", "observe")
        prior = [(1.0, bn)]
        base = bayes_rule(loss, prior, rules).threshold
        for _ in range(10):
            scaled = loss.rescale(float(rng.uniform(0.05, 50)), float(rng.uniform(-100, 100)))
            assert bayes_rule(scaled, prior, rules).threshold == base


def test_mini_net_is_the_fixture():
    net = mini_aap_id()
    assert set(FINDINGS) == set(net.tagged("finding"))
