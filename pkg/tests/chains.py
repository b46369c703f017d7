"""Chain builders shared by the test modules."""

import numpy as np

Q2 = np.array([[-2.0, 1.0], [1.0, -2.0]])
Q3_PATH = np.array([[-2.0, 1.0, 0.0], [1.0, -3.0, 1.0], [0.0, 1.0, -2.0]])
NEG2 = np.array([[1.0, -1.0], [-1.0, 1.0]])


def path_generator(n, rate=1.0, kill=0.5):
    """Birth-death chain on ``n`` states with uniform killing ``kill``."""
    q = np.zeros((n, n))
    idx = np.arange(n - 1)
    q[idx, idx + 1] = q[idx + 1, idx] = rate
    np.fill_diagonal(q, -(q.sum(axis=1) + kill))
    return q


def from_edges(n, edges, rate=1.0, kill=0.5):
    q = np.zeros((n, n))
    for u, v in edges:
        q[u, v] = q[v, u] = rate
    np.fill_diagonal(q, -(q.sum(axis=1) + kill))
    return q


def random_generator(rng, n, density=0.4, mode=None):
    """A valid killed symmetric generator.

    ``mode="T2"`` kills at every state; ``mode="T1"`` kills at a random
    non-empty subset of a connected chain; None picks one at random.
    """
    mode = mode or rng.choice(["T1", "T2"])
    w = np.triu(rng.uniform(0.2, 2.0, (n, n)) * (rng.random((n, n)) < density), 1)
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):
        i, j = min(a, b), max(a, b)
        w[i, j] = w[i, j] or rng.uniform(0.2, 2.0)
    w = w + w.T
    if mode == "T2":
        kill = rng.uniform(0.05, 1.0, n)
    else:
        kill = np.zeros(n)
        picks = rng.choice(n, size=rng.integers(1, max(1, n // 2) + 1), replace=False)
        kill[picks] = rng.uniform(0.2, 1.0, len(picks))
    q = w.copy()
    np.fill_diagonal(q, -(w.sum(axis=1) + kill))
    return q


def random_signs(rng, n):
    s = np.where(rng.random((n, n)) < 0.5, -1.0, 1.0)
    s = np.triu(s, 1)
    s = s + s.T
    np.fill_diagonal(s, 1.0)
    return s
