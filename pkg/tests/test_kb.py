import numpy as np
import pytest

from tidkit.exceptions import InvalidNetworkError, UnknownVariableError
from tidkit.fixtures import FIG1_OBSERVATIONS, FIG2_SLICE2_OBSERVATIONS
from tidkit.inference import enumerate_posterior, posterior
from tidkit.kb import KnowledgeBase, relevant_nodes, summarize, tailor, tailor_sequence
from tidkit.network import Network, Node, Variable

from helpers import BIN


def random_observations(rng, kb, max_size=None):
    findings = kb.findings
    k = int(rng.integers(0, (max_size or len(findings)) + 1))
    picked = rng.choice(len(findings), size=k, replace=False)
    return {findings[i]: kb.template.variable(findings[i]).states[int(rng.integers(2))] for i in picked}


class TestBundledKB:
    """Structure of the bundled knowledge base."""

    def test_structural_counts(self, aap_kb):
        assert (len(aap_kb.findings), len(aap_kb.latents), len(aap_kb.diseases)) == (52, 20, 4)

    def test_fig1_counts(self, aap_kb):
        s = summarize(tailor(aap_kb, FIG1_OBSERVATIONS))
        assert (s["finding"], s["latent"], s["disease"]) == (7, 4, 2)
        assert s["decision"] == 1 and s["value"] == 1

    def test_every_finding_is_explained(self, aap_kb):
        g = aap_kb.template.graph
        import networkx as nx

        for f in aap_kb.findings:
            assert nx.ancestors(g, f) & (set(aap_kb.diseases) | set(aap_kb.latents))


class TestTailor:
    """Tailoring a slice to observed findings."""

    def test_empty_observations_keep_only_scaffolding(self, aap_kb):
        net = tailor(aap_kb, {})
        assert net.tagged("finding") == ()
        assert set(aap_kb.scaffold_diseases) <= set(net.chance_nodes)
        assert set(aap_kb.scaffolding) <= set(net.nodes)

    def test_rejects_non_finding(self, aap_kb):
        with pytest.raises(UnknownVariableError):
            tailor(aap_kb, {"App": "present"})
        with pytest.raises(UnknownVariableError):
            tailor(aap_kb, {"Nope": "present"})

    def test_rejects_bad_state(self, aap_kb):
        with pytest.raises(UnknownVariableError):
            tailor(aap_kb, {"V": "sometimes"})

    def test_result_is_valid(self, aap_kb, rng):
        for _ in range(20):
            assert tailor(aap_kb, random_observations(rng, aap_kb)).violations == ()

    def test_disease_posteriors_match_full_template(self, small_kb, rng):
        full = small_kb.template
        for _ in range(30):
            obs = random_observations(rng, small_kb)
            net = tailor(small_kb, obs)
            for d in small_kb.scaffold_diseases:
                expected = enumerate_posterior(full, obs, d).probs
                np.testing.assert_allclose(enumerate_posterior(net, obs, d).probs, expected, atol=1e-9)
                np.testing.assert_allclose(posterior(net, obs, d).probs, expected, atol=1e-9)

    def test_monotone_in_observations(self, aap_kb, rng):
        for _ in range(20):
            big = random_observations(rng, aap_kb)
            keys = list(big)
            small = {k: big[k] for k in keys[: len(keys) // 2]}
            a, b = tailor(aap_kb, small), tailor(aap_kb, big)
            assert set(a.nodes) <= set(b.nodes)
            assert set(a.arcs) <= set(b.arcs)

    def test_invalid_template_rejected(self):
        orphan = Network(
            [Node(Variable("f", BIN, tag="finding")), Node(Variable("d", BIN, tag="disease"))],
            {"f": [[0.5, 0.5]], "d": [[0.5, 0.5]]},
        )
        with pytest.raises(InvalidNetworkError):
            KnowledgeBase(orphan)


class TestTailorSequence:
    """Tailoring across several slices."""

    def test_identical_observations_give_identical_slices(self, aap_kb):
        seq = tailor_sequence(aap_kb, [FIG1_OBSERVATIONS] * 3)
        assert seq[0].signature == seq[1].signature == seq[2].signature

    def test_new_findings_extend_the_slice(self, aap_kb):
        g1, g2 = tailor_sequence(aap_kb, [FIG1_OBSERVATIONS, FIG2_SLICE2_OBSERVATIONS])
        assert set(g1.nodes) < set(g2.nodes)
        assert set(g2.tagged("finding")) - set(g1.tagged("finding")) == {"A", "G"}
        extra = set(g2.nodes) - set(g1.nodes)
        assert extra == relevant_nodes(aap_kb, FIG2_SLICE2_OBSERVATIONS) - relevant_nodes(aap_kb, FIG1_OBSERVATIONS)

    def test_union_of_slices_equals_tailor_of_union(self, aap_kb, rng):
        for _ in range(20):
            obs = [random_observations(rng, aap_kb, 10) for _ in range(3)]
            seq = tailor_sequence(aap_kb, obs)
            union = {k: v for o in obs for k, v in o.items()}
            assert set().union(*(set(s.nodes) for s in seq)) == set(tailor(aap_kb, union).nodes)
