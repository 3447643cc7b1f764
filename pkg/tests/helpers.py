"""Small networks shared by several test modules."""

import itertools

import numpy as np

from tidkit.network import Network, Node, Variable
from tidkit.temporal import SliceSequence, TemporalArcPolicy, generate_arcs, temporal_parents, unroll

BIN = ("0", "1")


def chain_slice():
    """X -> Y, both binary."""
    return Network(
        [Node(Variable("X", BIN)), Node(Variable("Y", BIN), parents=("X",))],
        {"X": [[0.5, 0.5]], "Y": [[0.8, 0.2], [0.2, 0.8]]},
        name="chain",
    )


def second_order_chain(strength: float, n_slices: int = 4):
    """Two-variable chain whose true temporal process is second order.

    ``strength`` shifts each lag-2 row by +/- strength (X) and
    +/- strength / 2 (Y); zero makes the lag-2 arcs irrelevant.
    """
    sl = SliceSequence.copies(chain_slice(), n_slices)
    policy = TemporalArcPolicy.markov(2)
    arcs = generate_arcs(policy, sl)
    tables = {}
    for t in range(1, n_slices):
        for v in ("X", "Y"):
            tp = temporal_parents(arcs, f"{v}@{t}")
            k = (1 if v == "Y" else 0) + len(tp)
            rows = []
            for combo in itertools.product((0, 1), repeat=k):
                if v == "X":
                    p = 0.3 + 0.4 * combo[0]
                    if len(tp) == 2:
                        p += strength * (1 if combo[1] else -1)
                else:
                    p = 0.1 + 0.6 * combo[0] + 0.2 * combo[1]
                    if len(tp) == 2:
                        p += 0.5 * strength * (1 if combo[2] else -1)
                rows.append([1 - p, p])
            tables[f"{v}@{t}"] = np.array(rows)
    return unroll(sl, policy, tables)


def closed_form_counts(n_slices, n_nodes, n_arcs, scope_size, order):
    """Union counts for identical slices under a self-arc policy."""
    per_boundary = [scope_size * min(t, order) for t in range(1, n_slices)]
    return n_slices * n_nodes, n_slices * n_arcs + sum(per_boundary), per_boundary


def markov_chain(prior, T, n_slices):
    """One-variable chain with transition matrix ``T`` unrolled over ``n_slices``."""
    card = len(prior)
    states = tuple(str(k) for k in range(card))
    sl = Network([Node(Variable("S", states))], {"S": [list(prior)]}, name="chain1")
    from tidkit.temporal import Transition

    return unroll(SliceSequence.copies(sl, n_slices), TemporalArcPolicy.markov(1), [Transition("S", (("S", 1),), T)])


def sticky_truth(n_slices=4, noise=0.3):
    """A state that never changes, seen each slice through a noisy finding.

    Returns the truth, its slices, and the reference query (state at the
    last slice given every finding).
    """
    from tidkit.selection import ReferenceQuery
    from tidkit.temporal import Transition

    sl = Network(
        [Node(Variable("X", BIN)), Node(Variable("F", BIN, tag="finding"), parents=("X",))],
        {"X": [[0.5, 0.5]], "F": [[1 - noise, noise], [noise, 1 - noise]]},
        name="sticky",
    )
    slices = SliceSequence.copies(sl, n_slices)
    truth = unroll(slices, TemporalArcPolicy.driving(["X"]), [Transition("X", (("X", 1),), np.eye(2))])
    query = ReferenceQuery((f"X@{n_slices - 1}",), tuple(f"F@{t}" for t in range(n_slices)))
    return truth, slices, query
