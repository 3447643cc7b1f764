"""Bundled example models.

The acute-abdominal-pain (AAP) knowledge base follows the structure of a
published diagnosis/treatment model (variable names, tags, and the arcs
around appendicitis); every probability and utility in it is synthetic,
generated from :data:`AAP_SEED`. It has no clinical validity.

``python -m tidkit.fixtures`` regenerates ``data/aap_kb.json``.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .kb import KnowledgeBase, tailor
from .network import CHANCE, DECISION, VALUE, Network, Node, Variable
from .temporal import TemporalArcPolicy, TemporalSpec, generate_arcs, persistence_transitions, _round_row

AAP_SEED = 1993
PRESENT = ("absent", "present")

# diseases; the value node depends on the first two
AAP_DISEASES = {
    "App": ("Appendicitis", 0.25),
    "NSAP": ("Non-specific abdominal pain", 0.35),
    "Chol": ("Cholecystitis", 0.10),
    "SBO": ("Small bowel obstruction", 0.06),
}

# intermediate (latent) states: id -> (name, parents)
AAP_LATENTS = {
    "A-Obs": ("Appendiceal obstruction", ("App",)),
    "Perf-App": ("Perforated appendix", ("App",)),
    "Inflamm": ("Inflammation", ("A-Obs", "Perf-App", "NSAP")),
    "Perit": ("Peritonitis", ("Perf-App",)),
    "Gb-Obs": ("Cystic duct obstruction", ("Chol",)),
    "Gb-Inflamm": ("Gallbladder inflammation", ("Gb-Obs", "Chol")),
    "Bil-Obs": ("Biliary obstruction", ("Gb-Obs",)),
    "Bowel-Dist": ("Bowel distension", ("SBO",)),
    "Bowel-Isch": ("Bowel ischaemia", ("SBO", "Bowel-Dist")),
    "Ileus": ("Ileus", ("Perit", "Bowel-Dist")),
    "Dehyd": ("Dehydration", ("Ileus",)),
    "Sepsis": ("Sepsis", ("Perit", "Bowel-Isch", "Gb-Inflamm")),
    "Visc-Pain": ("Visceral pain", ("Inflamm", "Bowel-Dist", "Gb-Inflamm")),
    "Som-Pain": ("Somatic pain", ("Perit", "Gb-Inflamm")),
    "Mes-Lymph": ("Mesenteric lymphadenitis", ("NSAP",)),
    "Abscess": ("Abscess", ("Perf-App",)),
    "Pelv-Irrit": ("Pelvic irritation", ("Abscess",)),
    "Diaph-Irrit": ("Diaphragmatic irritation", ("Gb-Inflamm",)),
    "Gastric-Irrit": ("Gastric irritation", ("NSAP",)),
    "Muscle-Spasm": ("Abdominal muscle spasm", ("Som-Pain",)),
}

# findings: id -> (name, parents). The first seven form the single-slice
# presentation; A and G are the findings that appear in the second slice.
AAP_FINDINGS = {
    "V": ("Vomiting", ("Inflamm",)),
    "N": ("Nausea", ("Inflamm",)),
    "RLQ-T": ("Right lower quadrant tenderness", ("Inflamm",)),
    "ABS": ("Absent bowel sounds", ("Perit",)),
    "WBC": ("Raised white blood count", ("Inflamm",)),
    "Fever": ("Fever", ("Perit",)),
    "Rebound": ("Rebound tenderness", ("Perit",)),
    "A": ("Anorexia", ("Inflamm",)),
    "G": ("Muscular guarding", ("Perit",)),
    "RUQ-T": ("Right upper quadrant tenderness", ("Gb-Inflamm",)),
    "Murphy": ("Murphy's sign", ("Gb-Inflamm",)),
    "Jaundice": ("Jaundice", ("Bil-Obs",)),
    "Dark-Urine": ("Dark urine", ("Bil-Obs",)),
    "Pale-Stool": ("Pale stool", ("Bil-Obs",)),
    "Shoulder-P": ("Shoulder tip pain", ("Diaph-Irrit",)),
    "Distension": ("Abdominal distension", ("Bowel-Dist",)),
    "Tinkling-BS": ("Tinkling bowel sounds", ("Bowel-Dist",)),
    "Constipation": ("Constipation", ("Ileus",)),
    "No-Flatus": ("No flatus", ("Ileus",)),
    "Colic": ("Colicky pain", ("Bowel-Dist", "Visc-Pain")),
    "Hypotension": ("Hypotension", ("Sepsis",)),
    "Tachycardia": ("Tachycardia", ("Sepsis", "Dehyd")),
    "Rigors": ("Rigors", ("Sepsis",)),
    "Dry-Tongue": ("Dry tongue", ("Dehyd",)),
    "Oliguria": ("Oliguria", ("Dehyd",)),
    "Lactate": ("Raised lactate", ("Bowel-Isch",)),
    "Tender-Mass": ("Tender mass", ("Abscess",)),
    "Rectal-T": ("Rectal tenderness", ("Pelv-Irrit",)),
    "Dysuria": ("Dysuria", ("Pelv-Irrit",)),
    "Diarrhoea": ("Diarrhoea", ("Pelv-Irrit", "Gastric-Irrit")),
    "Epigastric-P": ("Epigastric pain", ("Gastric-Irrit",)),
    "Heartburn": ("Heartburn", ("Gastric-Irrit",)),
    "Periumb-P": ("Periumbilical pain", ("Visc-Pain",)),
    "Pain-Shift": ("Pain migration", ("Visc-Pain", "Som-Pain")),
    "Cough-P": ("Pain on coughing", ("Som-Pain",)),
    "Rigidity": ("Abdominal rigidity", ("Muscle-Spasm",)),
    "Psoas": ("Psoas sign", ("Muscle-Spasm",)),
    "Obturator": ("Obturator sign", ("Pelv-Irrit",)),
    "Rovsing": ("Rovsing's sign", ("Som-Pain",)),
    "Lymph-Nodes": ("Enlarged lymph nodes", ("Mes-Lymph",)),
    "URTI": ("Recent respiratory infection", ("Mes-Lymph",)),
    "Low-Fever": ("Low-grade fever", ("Mes-Lymph",)),
    "Fatty-Food": ("Pain after fatty food", ("Chol",)),
    "Prior-Attacks": ("Previous similar attacks", ("Chol",)),
    "Prior-Surgery": ("Previous abdominal surgery", ("SBO",)),
    "Hernia": ("Hernia", ("SBO",)),
    "Feculent-Vom": ("Feculent vomiting", ("Bowel-Dist",)),
    "Xray-Levels": ("Fluid levels on X-ray", ("Bowel-Dist",)),
    "CRP": ("Raised CRP", ("Sepsis", "Gb-Inflamm")),
    "Amylase": ("Raised amylase", ("Gastric-Irrit",)),
    "Pain-Duration": ("Pain longer than 24h", ("Visc-Pain",)),
    "Restless": ("Restlessness", ("Visc-Pain",)),
}

FIG1_FINDINGS = ("V", "N", "RLQ-T", "ABS", "WBC", "Fever", "Rebound")

#: Single-slice presentation with seven findings.
FIG1_OBSERVATIONS = {
    "V": "present",
    "N": "present",
    "RLQ-T": "present",
    "ABS": "absent",
    "WBC": "present",
    "Fever": "present",
    "Rebound": "absent",
}

#: Second-slice presentation: anorexia and guarding are newly observed.
FIG2_SLICE2_OBSERVATIONS = {**FIG1_OBSERVATIONS, "A": "present", "G": "present"}

#: Variables modelled as evolving under the driving-variable policy.
AAP_DRIVING = ("Inflamm", "A-Obs", "App", "Perf-App", "NSAP", "Perit")

INFLAMM_STATES = ("none", "mild", "severe")

DECISION_ID = "Treat"
VALUE_ID = "U"
ACTIONS = ("operate", "observe")


def _noisy_or_rows(parent_cards, card, strengths, leak, severity=0.5):
    """CPT rows from a noisy-or style recipe (table generation only)."""
    rows = []
    for combo in np.ndindex(*parent_cards) if parent_cards else [()]:
        act = [s / (c - 1) for s, c in zip(combo, parent_cards)]
        p = 1.0 - (1.0 - leak) * np.prod([1.0 - w * a for w, a in zip(strengths, act)])
        if card == 2:
            row = np.array([1.0 - p, p])
        else:
            w = severity * (0.5 + 0.5 * (np.mean(act) if act else 0.0))
            row = np.array([1.0 - p, p * (1.0 - w), p * w])
        rows.append(_round_row(row, 4))
    return np.array(rows)


def _aap_utilities():
    # rows over (App, NSAP, Treat); loss is the negation
    u = []
    for app in range(2):
        for nsap in range(2):
            for act in ACTIONS:
                if app:
                    val = -1.0 if act == "operate" else -12.0
                else:
                    val = -4.0 if act == "operate" else 0.0
                if nsap and act == "observe":
                    val -= 0.5
                u.append(val)
    return u


def build_aap_kb(seed: int = AAP_SEED) -> KnowledgeBase:
    """The synthetic AAP knowledge base: 52 findings, 20 latents, 4 diseases.

    Includes a canonical first-order Markov temporal section whose
    transitions keep each variable's previous state with a per-variable
    persistence probability.
    """
    rng = np.random.default_rng(seed)
    nodes, cpts = [], {}
    card = {}
    for vid, (name, prior) in AAP_DISEASES.items():
        nodes.append(Node(Variable(vid, PRESENT, name, "disease")))
        cpts[vid] = [[round(1 - prior, 4), prior]]
        card[vid] = 2
    for group, tag in ((AAP_LATENTS, "latent"), (AAP_FINDINGS, "finding")):
        for vid, (name, parents) in group.items():
            states = INFLAMM_STATES if vid == "Inflamm" else PRESENT
            card[vid] = len(states)
            nodes.append(Node(Variable(vid, states, name, tag), CHANCE, parents))
            strengths = rng.uniform(0.55, 0.9, size=len(parents))
            leak = rng.uniform(0.02, 0.12)
            cpts[vid] = _noisy_or_rows(tuple(card[p] for p in parents), len(states), strengths, leak)
    nodes.append(Node(Variable(DECISION_ID, ACTIONS, "Treatment decision"), DECISION))
    nodes.append(Node(Variable(VALUE_ID, (), "Utility"), VALUE, ("App", "NSAP", DECISION_ID)))
    template = Network(nodes, cpts, {VALUE_ID: _aap_utilities()}, name="aap")

    persistence = {}
    for vid in template.chance_nodes:
        tag = template.variable(vid).tag
        if tag == "disease":
            persistence[vid] = 0.9
        elif vid == "A-Obs":
            persistence[vid] = 0.95
        elif vid == "Inflamm":
            persistence[vid] = 0.5
        elif tag == "latent":
            persistence[vid] = round(float(rng.uniform(0.6, 0.85)), 2)
        else:
            persistence[vid] = round(float(rng.uniform(0.3, 0.6)), 2)
    policy = TemporalArcPolicy.markov(1)
    bn = template.bn_portion()
    arcs = generate_arcs(policy, [bn, bn])
    transitions = persistence_transitions(bn, arcs, persistence, decimals=4)
    return KnowledgeBase(template, TemporalSpec(policy, tuple(transitions)))


def aap_kb_path() -> Path:
    return Path(str(resources.files("tidkit") / "data" / "aap_kb.json"))


def load_aap_kb() -> KnowledgeBase:
    """The bundled AAP knowledge base (shipped as ``data/aap_kb.json``)."""
    return KnowledgeBase.load(aap_kb_path())


def aap_fig1_slice(kb: KnowledgeBase | None = None) -> Network:
    """BN portion of the single-slice network tailored to the seven findings."""
    kb = kb or load_aap_kb()
    return tailor(kb, FIG1_OBSERVATIONS).bn_portion()


def mini_aap_id() -> Network:
    """Six-chance-node influence diagram for decision-machinery checks."""
    nodes = [
        Node(Variable("App", PRESENT, "Appendicitis", "disease")),
        Node(Variable("NSAP", PRESENT, "Non-specific abdominal pain", "disease")),
        Node(Variable("Inflamm", PRESENT, "Inflammation", "latent"), CHANCE, ("App", "NSAP")),
        Node(Variable("V", PRESENT, "Vomiting", "finding"), CHANCE, ("Inflamm",)),
        Node(Variable("RLQ-T", PRESENT, "Right lower quadrant tenderness", "finding"), CHANCE, ("Inflamm", "App")),
        Node(Variable("WBC", PRESENT, "Raised white blood count", "finding"), CHANCE, ("Inflamm",)),
        Node(Variable(DECISION_ID, ACTIONS, "Treatment decision"), DECISION),
        Node(Variable(VALUE_ID, (), "Utility"), VALUE, ("App", DECISION_ID)),
    ]
    cpts = {
        "App": [[0.7, 0.3]],
        "NSAP": [[0.6, 0.4]],
        "Inflamm": [[0.95, 0.05], [0.4, 0.6], [0.2, 0.8], [0.05, 0.95]],
        "V": [[0.8, 0.2], [0.35, 0.65]],
        "RLQ-T": [[0.85, 0.15], [0.5, 0.5], [0.6, 0.4], [0.1, 0.9]],
        "WBC": [[0.9, 0.1], [0.3, 0.7]],
    }
    # (App, Treat): operate / observe
    utilities = {VALUE_ID: [-4.0, 0.0, -1.0, -12.0]}
    return Network(nodes, cpts, utilities, name="mini-aap")


def mini_kb(seed: int = 12) -> KnowledgeBase:
    """A 12-chance-node knowledge base small enough for the full-joint oracle."""
    rng = np.random.default_rng(seed)
    spec = [
        ("App", "disease", ()),
        ("NSAP", "disease", ()),
        ("Chol", "disease", ()),
        ("A-Obs", "latent", ("App",)),
        ("Inflamm", "latent", ("A-Obs", "NSAP")),
        ("Gb-Inflamm", "latent", ("Chol",)),
        ("V", "finding", ("Inflamm",)),
        ("N", "finding", ("Inflamm", "Gb-Inflamm")),
        ("RLQ-T", "finding", ("Inflamm",)),
        ("RUQ-T", "finding", ("Gb-Inflamm",)),
        ("Fever", "finding", ("Inflamm", "Gb-Inflamm")),
        ("Jaundice", "finding", ("Chol",)),
    ]
    nodes, cpts = [], {}
    for vid, tag, parents in spec:
        nodes.append(Node(Variable(vid, PRESENT, vid, tag), CHANCE, parents))
        cpts[vid] = rng.dirichlet([2.0, 2.0], size=2 ** len(parents))
    nodes.append(Node(Variable(DECISION_ID, ACTIONS), DECISION))
    nodes.append(Node(Variable(VALUE_ID, ()), VALUE, ("App", "NSAP", DECISION_ID)))
    return KnowledgeBase(Network(nodes, cpts, {VALUE_ID: _aap_utilities()}, name="mini-kb"))


def random_network(
    rng: np.random.Generator,
    n_nodes: int,
    max_parents: int = 3,
    max_card: int = 2,
    arc_prob: float = 0.5,
    concentration: float = 1.0,
    prefix: str = "n",
) -> Network:
    """Random valid network over ``n_nodes`` chance nodes (ids in topological order)."""
    nodes, cpts = [], {}
    ids = [f"{prefix}{i:02d}" for i in range(n_nodes)]
    cards = {}
    for i, vid in enumerate(ids):
        card = int(rng.integers(2, max_card + 1))
        cards[vid] = card
        earlier = [j for j in range(i) if rng.random() < arc_prob]
        if len(earlier) > max_parents:
            earlier = sorted(rng.choice(earlier, size=max_parents, replace=False).tolist())
        parents = tuple(ids[j] for j in earlier)
        rows = int(np.prod([cards[p] for p in parents], dtype=int))
        nodes.append(Node(Variable(vid, tuple(f"s{k}" for k in range(card))), CHANCE, parents))
        cpts[vid] = rng.dirichlet([concentration] * card, size=rows)
    return Network(nodes, cpts, name=f"random{n_nodes}")


def _write_bundled(path: Path) -> None:
    from .netio import write_network

    kb = build_aap_kb()
    write_network(path, kb.template, kb.temporal)


if __name__ == "__main__":
    target = Path(__file__).with_name("data") / "aap_kb.json"
    _write_bundled(target)
    print(f"wrote {target}")
