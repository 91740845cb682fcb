"""Shared test helpers."""

import numpy as np

from pushsum import stats
from pushsum.graph import build_graph


def bernoulli_model(truth_heads, hyp_heads, beta=1e-8):
    """Well-specified coin model: truth_heads[i] is agent i's true P(heads);
    hyp_heads[t][i] is hypothesis t's P(heads) at agent i."""
    values = ("H", "T")

    def cat(p):
        return stats.Categorical(values=values, probs=(p, 1.0 - p))

    n = len(truth_heads)
    return stats.HypothesisModel(
        likelihoods=tuple(
            tuple(cat(hyp_heads[t][i]) for t in range(len(hyp_heads)))
            for i in range(n)
        ),
        truths=tuple(cat(p) for p in truth_heads),
        beta=beta,
    )


def random_strongly_connected(rng: np.random.Generator, n: int):
    """Random digraph guaranteed strongly connected: a random directed
    Hamiltonian cycle plus extra random edges."""
    perm = list(rng.permutation(n))
    edges = {(perm[i], perm[(i + 1) % n]) for i in range(n)}
    extra = int(rng.integers(0, n * (n - 1) // 2 + 1))
    for _ in range(extra):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            edges.add((int(i), int(j)))
    return build_graph(n, sorted(edges))
