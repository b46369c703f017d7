"""Sequential vertex elimination for prediction weights.

Removing a vertex ``z`` from the weighted graph of ``M = -Q o S`` adds
``-M(x, z) M(y, z) / M(z, z)`` to every pair of neighbours of ``z`` (loops
included), which is a one-vertex Schur complement. When only ``A`` and the
target ``b`` remain, the weight of ``Z_a`` is ``-M(a, b) / M(b, b)``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import as_square
from .errors import NotPositiveDefiniteError, StructuralError

SNAP = 1e-14
DOMINANCE_TOL = 1e-12


@dataclass(frozen=True)
class EliminationState:
    """Remaining vertices (original indices) and the matrix over them."""

    vertices: tuple
    m: np.ndarray
    log: tuple = ()
    multiplies: int = 0
    trace: tuple = field(default=(), repr=False)

    @classmethod
    def start(cls, m0):
        m = as_square(m0)
        state = cls(tuple(range(m.shape[0])), m.copy())
        check_dominance(state.m)
        return state

    def pos(self, v):
        try:
            return self.vertices.index(v)
        except ValueError:
            raise StructuralError(f"vertex {v} is not in the current vertex set") from None

    def edges(self):
        """Off-diagonal support as a set of ``(u, v)`` pairs with ``u < v``."""
        i, j = np.nonzero(np.triu(self.m, 1))
        return {(self.vertices[a], self.vertices[b]) for a, b in zip(i, j)}


def dominance_margin(m):
    """Smallest ``M(x, x) - sum_{y != x} |M(x, y)|`` over rows."""
    if m.shape[0] == 0:
        return 0.0
    off = np.abs(m).sum(axis=1) - np.abs(np.diag(m))
    return float(np.min(np.diag(m) - off))


def check_dominance(m):
    scale = max(1.0, float(np.max(np.abs(np.diag(m))))) if m.shape[0] else 1.0
    if m.shape[0] and (np.any(np.diag(m) <= 0) or dominance_margin(m) < -DOMINANCE_TOL * scale):
        raise NotPositiveDefiniteError(
            int(np.argmin(np.diag(m) - (np.abs(m).sum(axis=1) - np.abs(np.diag(m))))),
            "matrix lost diagonal dominance during elimination",
        )


def eliminate_vertex(state, z):
    k = state.pos(z)
    m = state.m
    pivot = m[k, k]
    if pivot <= 0:
        raise NotPositiveDefiniteError(k, f"non-positive loop weight at vertex {z}")
    col = m[:, k]
    nbrs = np.flatnonzero(col)
    new = m.copy()
    # only pairs of neighbours of z change
    new[np.ix_(nbrs, nbrs)] -= np.outer(col[nbrs], col[nbrs]) / pivot
    new[np.abs(new) < SNAP] = 0.0
    keep = [i for i in range(len(state.vertices)) if i != k]
    new = new[np.ix_(keep, keep)]
    new = 0.5 * (new + new.T)
    check_dominance(new)

    before = state.edges()
    vertices = tuple(state.vertices[i] for i in keep)
    nxt = EliminationState(
        vertices=vertices,
        m=new,
        log=state.log + (z,),
        multiplies=state.multiplies + len(nbrs) * (len(nbrs) + 1),
    )
    fill = sorted(nxt.edges() - {e for e in before if z not in e})
    record = {
        "vertex": z,
        "fill_in": [list(e) for e in fill],
        "dominance_margin": dominance_margin(new),
    }
    return EliminationState(nxt.vertices, nxt.m, nxt.log, nxt.multiplies, state.trace + (record,))


def min_degree_order(m, keep):
    """Greedy minimum-degree order over the vertices not in ``keep``."""
    adj = np.asarray(m) != 0
    np.fill_diagonal(adj, False)
    alive = [v for v in range(m.shape[0]) if v not in keep]
    present = np.ones(m.shape[0], dtype=bool)
    order = []
    while alive:
        deg = [int(np.count_nonzero(adj[v] & present)) for v in alive]
        z = alive[int(np.argmin(deg))]
        nbrs = np.flatnonzero(adj[z] & present)
        adj[np.ix_(nbrs, nbrs)] = True
        np.fill_diagonal(adj, False)
        present[z] = False
        alive.remove(z)
        order.append(z)
    return order


def eliminate_all(m0, order):
    state = EliminationState.start(m0)
    for z in order:
        state = eliminate_vertex(state, z)
    return state


def predict_by_elimination(m0, given, target, order=None, return_state=False):
    """Weights of ``Z_given`` in ``E[Z_target | Z_given]`` by elimination."""
    m0 = as_square(m0)
    n = m0.shape[0]
    given = tuple(int(a) for a in given)
    target = int(target)
    keep = set(given) | {target}
    if target in given or len(set(given)) != len(given) or not given:
        raise StructuralError("given must be non-empty, distinct and exclude the target")
    if min(keep) < 0 or max(keep) >= n:
        raise StructuralError("state index out of range")
    if order is None:
        order = min_degree_order(m0, keep)
    order = [int(z) for z in order]
    if keep & set(order):
        raise StructuralError("elimination order must not touch the target or the given set")
    if sorted(order) != sorted(set(range(n)) - keep):
        raise StructuralError("elimination order must be a permutation of the remaining states")

    state = eliminate_all(m0, order)
    b = state.pos(target)
    coef = np.array([-state.m[state.pos(a), b] / state.m[b, b] for a in given])
    if return_state:
        return coef, state
    return coef


def intermediate_coefficients(state, v):
    """``E[Z_v | Z_w, w in V \\ {v}]`` weights at the current step, keyed by ``w``."""
    k = state.pos(v)
    return {
        w: -state.m[k, j] / state.m[k, k]
        for j, w in enumerate(state.vertices)
        if j != k
    }
