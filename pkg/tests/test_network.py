import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tidkit.exceptions import InvalidNetworkError, MissingVariableError, UnknownVariableError
from tidkit.fixtures import random_network
from tidkit.network import Network, Node, Variable, joint_probability, validate

from helpers import BIN


def two_chain(**cpts):
    tables = {"a": [[0.4, 0.6]], "b": [[0.9, 0.1], [0.2, 0.8]]}
    tables.update(cpts)
    return Network([Node(Variable("a", BIN)), Node(Variable("b", BIN), parents=("a",))], tables)


def kinds(net):
    return [v.kind for v in validate(net)]


class TestValidate:
    """Structural and numerical validation."""

    def test_well_formed_chain_is_clean(self):
        assert validate(two_chain()) == []

    def test_two_cycle_reported_once_with_both_members(self):
        net = Network(
            [Node(Variable("a", BIN), parents=("b",)), Node(Variable("b", BIN), parents=("a",))],
            {"a": [[0.5, 0.5]] * 2, "b": [[0.5, 0.5]] * 2},
        )
        cycles = [v for v in validate(net) if v.kind == "cycle"]
        assert len(cycles) == 1
        assert set(cycles[0].nodes) == {"a", "b"}

    def test_unnormalized_row_names_the_row(self):
        net = two_chain(b=[[0.9, 0.1], [0.6, 0.6]])
        (v,) = validate(net)
        assert v.kind == "row-not-normalized"
        assert v.row == 1 and v.nodes == ("b",)

    def test_tolerance_is_tight(self):
        ok = two_chain(a=[[0.4, 0.6 + 5e-13]])
        bad = two_chain(a=[[0.4, 0.6 + 5e-12]])
        assert validate(ok) == []
        assert kinds(bad) == ["row-not-normalized"]

    @pytest.mark.parametrize(
        "net, kind",
        [
            (Network([Node(Variable("a", ()))], {}), "empty-domain"),
            (Network([Node(Variable("a", ("x",)))], {"a": [[1.0]]}), "small-domain"),
            (Network([Node(Variable("a", ("x", "x")))], {"a": [[0.5, 0.5]]}), "duplicate-state"),
            (Network([Node(Variable("a", BIN), parents=("z",))], {"a": [[0.5, 0.5]] * 2}), "unknown-parent"),
            (Network([Node(Variable("a", BIN))], {"a": [[0.5, 0.5]], "ghost": [[1.0]]}), "orphan-cpt"),
            (Network([Node(Variable("a", BIN))], {}), "missing-cpt"),
            (Network([Node(Variable("a", BIN))], {"a": [[0.5, 0.5]] * 2}), "row-count"),
            (Network([Node(Variable("a", BIN))], {"a": [[0.2, 0.3, 0.5]]}), "row-width"),
            (Network([Node(Variable("a", BIN))], {"a": [[1.5, -0.5]]}), "entry-out-of-range"),
            (Network([Node(Variable("a", BIN)), Node(Variable("a", BIN))], {"a": [[0.5, 0.5]]}), "duplicate-id"),
            (Network([Node(Variable("d", BIN), "decision")], {"d": [[0.5, 0.5]]}), "decision-has-cpt"),
            (Network([Node(Variable("u", ()), "value")], {}), "missing-utility"),
            (Network([Node(Variable("u", ()), "value")], {}, {"u": [1.0, 2.0]}), "utility-shape"),
            (Network([Node(Variable("u", ()), "value")], {}, {"u": [np.inf]}), "utility-not-finite"),
        ],
    )
    def test_each_violation_kind(self, net, kind):
        assert kind in kinds(net)
        with pytest.raises(InvalidNetworkError) as err:
            net.check()
        assert any(v.kind == kind for v in err.value.violations)

    def test_value_node_children_are_rejected(self):
        net = Network(
            [Node(Variable("u", ()), "value"), Node(Variable("a", BIN), parents=("u",))],
            {"a": [[0.5, 0.5]]},
            {"u": [0.0]},
        )
        assert {"value-has-children", "value-parent"} <= set(kinds(net))

    def test_report_is_sorted_by_node(self):
        net = Network(
            [Node(Variable("z", BIN)), Node(Variable("a", BIN))],
            {"z": [[0.7, 0.7]], "a": [[0.7, 0.7]]},
        )
        assert [v.nodes[0] for v in validate(net)] == ["a", "z"]


class TestJointProbability:
    """Chain-rule joint probabilities."""

    def test_single_root(self):
        net = Network([Node(Variable("a", BIN))], {"a": [[0.3, 0.7]]})
        assert joint_probability(net, {"a": "0"}) == pytest.approx(0.3)

    def test_independent_uniform_roots(self):
        net = Network([Node(Variable("a", BIN)), Node(Variable("b", BIN))], {"a": [0.5, 0.5], "b": [0.5, 0.5]})
        for a, b in itertools.product(BIN, BIN):
            assert joint_probability(net, {"a": a, "b": b}) == 0.25

    def test_chain_against_explicit_table(self):
        net = Network(
            [Node(Variable("a", BIN)), Node(Variable("b", BIN), parents=("a",)), Node(Variable("c", BIN), parents=("b",))],
            {"a": [[0.3, 0.7]], "b": [[0.9, 0.1], [0.25, 0.75]], "c": [[0.6, 0.4], [0.15, 0.85]]},
        )
        pa = np.array([0.3, 0.7])
        pb = np.array([[0.9, 0.1], [0.25, 0.75]])
        pc = np.array([[0.6, 0.4], [0.15, 0.85]])
        table = pa[:, None, None] * pb[:, :, None] * pc[None, :, :]
        for a, b, c in itertools.product(range(2), repeat=3):
            assert joint_probability(net, {"a": a, "b": b, "c": c}) == pytest.approx(table[a, b, c], abs=1e-15)

    def test_missing_variable(self):
        with pytest.raises(MissingVariableError):
            joint_probability(two_chain(), {"a": "0"})

    def test_unknown_state(self):
        with pytest.raises(UnknownVariableError):
            joint_probability(two_chain(), {"a": "maybe", "b": "0"})

    def test_sums_to_one_exhaustively(self):
        rng = np.random.default_rng(5)
        for trial in range(25):
            net = random_network(rng, int(rng.integers(1, 15)), max_parents=3)
            ids = net.chance_nodes
            cards = [net.card(i) for i in ids]
            if np.prod(cards) > 2**14:
                continue
            total = sum(joint_probability(net, dict(zip(ids, combo))) for combo in itertools.product(*map(range, cards)))
            assert total == pytest.approx(1.0, abs=1e-9), trial

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 8))
    def test_renaming_preserves_joint(self, seed, n):
        rng = np.random.default_rng(seed)
        net = random_network(rng, n, max_card=3)
        mapping = {i: f"r{k}_{i[::-1]}" for k, i in enumerate(reversed(net.chance_nodes))}
        renamed = net.relabel(mapping)
        for _ in range(5):
            a = {i: int(rng.integers(net.card(i))) for i in net.chance_nodes}
            b = {mapping[i]: s for i, s in a.items()}
            assert joint_probability(renamed, b) == joint_probability(net, a)


class TestNetworkObject:
    """Network accessors and derived views."""

    def test_tables_are_read_only(self):
        net = two_chain()
        with pytest.raises(ValueError):
            net.cpt("a")[0, 0] = 1.0

    def test_free_params(self):
        assert two_chain().free_param_count == 1 + 2

    def test_loss_negates_utility(self, mini_id):
        np.testing.assert_array_equal(mini_id.loss("U"), -mini_id.utilities["U"])

    def test_bn_portion_drops_scaffolding(self, mini_id):
        bn = mini_id.bn_portion()
        assert bn.decision_nodes == () and bn.value_nodes == ()
        assert len(bn.chance_nodes) == 6

    def test_subnetwork_requires_parents_of_chance_nodes(self):
        with pytest.raises(ValueError):
            two_chain().subnetwork({"b"})

    def test_topological_order_is_deterministic(self):
        rng = np.random.default_rng(0)
        net = random_network(rng, 10)
        order = net.topological_order
        pos = {v: k for k, v in enumerate(order)}
        assert all(pos[p] < pos[c] for p, c in net.arcs)
