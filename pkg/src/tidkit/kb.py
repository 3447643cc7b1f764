"""Knowledge bases and observation-tailored slice networks.

Instead of copying one large network into every time slice, a slice network
is cut from the knowledge base around what was actually observed: the
observed findings, everything upstream of them, and the decision
scaffolding (decision node, value node and the chance variables the value
node depends on, together with their ancestors). Unobserved findings and
other nodes with no path into that set are barren for every query on the
retained diseases, so their posteriors are unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .exceptions import InvalidNetworkError, UnknownVariableError
from .network import CHANCE, DECISION, Network, Violation
from .temporal import SliceSequence, TemporalSpec


@dataclass(frozen=True)
class KnowledgeBase:
    """A template network over the whole domain vocabulary.

    Attributes
    ----------
    template : Network
        Chance nodes tagged finding / latent / disease, plus optional
        decision and value nodes.
    temporal : TemporalSpec, optional
        Canonical temporal model (policy and transition tables).
    """

    template: Network
    temporal: TemporalSpec | None = None

    def __post_init__(self):
        problems = list(self.template.violations)
        g = self.template.graph
        sources = set(self.diseases) | set(self.latents)
        for f in self.findings:
            if not (nx.ancestors(g, f) & sources):
                problems.append(Violation("unexplained-finding", (f,), f"finding {f!r} has no disease or latent ancestor"))
        if len(self.template.decision_nodes) > 1 or len(self.template.value_nodes) > 1:
            problems.append(Violation("scaffolding", (), "at most one decision and one value node are supported"))
        if problems:
            raise InvalidNetworkError(problems)

    @property
    def findings(self) -> tuple[str, ...]:
        return self.template.tagged("finding")

    @property
    def latents(self) -> tuple[str, ...]:
        return self.template.tagged("latent")

    @property
    def diseases(self) -> tuple[str, ...]:
        return self.template.tagged("disease")

    @property
    def scaffolding(self) -> tuple[str, ...]:
        """Decision and value nodes."""
        return self.template.decision_nodes + self.template.value_nodes

    @property
    def scaffold_diseases(self) -> tuple[str, ...]:
        """Chance nodes the value node depends on (kept in every slice)."""
        out = []
        for u in self.template.value_nodes:
            out.extend(p for p in self.template.parents(u) if self.template.nodes[p].kind == CHANCE)
        return tuple(dict.fromkeys(out))

    @classmethod
    def load(cls, path) -> "KnowledgeBase":
        from .netio import read_network

        doc = read_network(path)
        return cls(doc.network, doc.temporal)

    def check_observations(self, obs: Mapping[str, object]) -> None:
        findings = set(self.findings)
        for key, state in obs.items():
            if key not in self.template.nodes:
                raise UnknownVariableError(f"observation names unknown variable {key!r}")
            if key not in findings:
                raise UnknownVariableError(f"observation {key!r} is not a finding (tag {self.template.variable(key).tag!r})")
            self.template.variable(key).index(state)


def relevant_nodes(kb: KnowledgeBase, observed: Iterable[str]) -> set[str]:
    """Ancestor closure of the observed findings and the scaffold diseases."""
    keep = kb.template.ancestors(set(observed) | set(kb.scaffold_diseases))
    for d in kb.template.decision_nodes:
        keep.add(d)
    for u in kb.template.value_nodes:
        keep.add(u)
        keep |= kb.template.ancestors(p for p in kb.template.parents(u) if kb.template.nodes[p].kind != DECISION)
    return keep


def tailor(kb: KnowledgeBase, obs_t: Mapping[str, object], name: str | None = None) -> Network:
    """Slice network tailored to one set of observed findings.

    Raises
    ------
    UnknownVariableError
        An observation names a variable that is unknown or not a finding.
    """
    kb.check_observations(obs_t)
    keep = relevant_nodes(kb, obs_t)
    return kb.template.subnetwork(keep, name=name if name is not None else kb.template.name)


def tailor_sequence(kb: KnowledgeBase, obs: Sequence[Mapping[str, object]]) -> SliceSequence:
    """One tailored network per slice of observations, ready for unrolling."""
    return SliceSequence(tailor(kb, o, name=f"{kb.template.name}[{t}]") for t, o in enumerate(obs))


def summarize(net: Network) -> dict[str, int]:
    """Counts of findings / latents / diseases / scaffolding nodes."""
    return {
        "finding": len(net.tagged("finding")),
        "latent": len(net.tagged("latent")),
        "disease": len(net.tagged("disease")),
        "decision": len(net.decision_nodes),
        "value": len(net.value_nodes),
    }
