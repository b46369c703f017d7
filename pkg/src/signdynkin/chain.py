"""Generators, sign matrices and the deterministic linear algebra around them.

Every matrix is dense and indexed by position; state labels are carried
alongside only for input/output.
"""

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._linalg import as_square, spd_inverse
from .errors import (
    ChainFileError,
    ConvergenceError,
    InvalidGeneratorError,
    StructuralError,
)

TOL = 1e-12

MODES = ("T1", "T2", "both", "neither")


@dataclass(frozen=True)
class GeneratorMatrix:
    """Symmetric rate matrix with killing, plus the labels of its states."""

    q: np.ndarray
    states: tuple = field(default=None)

    def __post_init__(self):
        q = as_square(self.q, "generator")
        object.__setattr__(self, "q", q)
        if self.states is None:
            object.__setattr__(self, "states", tuple(str(i + 1) for i in range(q.shape[0])))
        else:
            states = tuple(str(s) for s in self.states)
            if len(states) != q.shape[0]:
                raise StructuralError(f"{len(states)} state labels for a {q.shape[0]}-state generator")
            if len(set(states)) != len(states):
                raise StructuralError("state labels must be unique")
            object.__setattr__(self, "states", states)

    @property
    def n(self):
        return self.q.shape[0]

    def index(self, label):
        """Position of ``label``; integers pass through unchanged."""
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < self.n:
                raise StructuralError(f"state index {label} out of range")
            return int(label)
        try:
            return self.states.index(str(label))
        except ValueError:
            raise StructuralError(f"unknown state {label!r}") from None


@dataclass(frozen=True)
class EmbeddedChain:
    """Jump chain of a killed generator.

    ``p`` is sub-stochastic with zero diagonal, ``kill[x]`` is the probability
    that the jump out of ``x`` goes to the cemetery and ``rates[x] = -q[x, x]``.
    """

    p: np.ndarray
    kill: np.ndarray
    rates: np.ndarray


@dataclass(frozen=True)
class ValidationReport:
    symmetric_ok: bool
    sign_pattern_ok: bool
    row_sums_ok: bool
    transience_mode: str
    irreducible: bool

    @property
    def valid(self):
        return (
            self.symmetric_ok
            and self.sign_pattern_ok
            and self.row_sums_ok
            and self.transience_mode != "neither"
        )

    def describe(self):
        return (
            f"symmetric={self.symmetric_ok} sign_pattern={self.sign_pattern_ok} "
            f"row_sums={self.row_sums_ok} irreducible={self.irreducible} "
            f"mode={self.transience_mode}"
        )

    def as_dict(self):
        return {
            "symmetric_ok": self.symmetric_ok,
            "sign_pattern_ok": self.sign_pattern_ok,
            "row_sums_ok": self.row_sums_ok,
            "transience_mode": self.transience_mode,
            "irreducible": self.irreducible,
            "valid": self.valid,
        }


def _qarray(q):
    if isinstance(q, GeneratorMatrix):
        return q.q
    return as_square(q, "generator")


def sign_array(s, n):
    """Check a sign matrix against the size ``n``; ``None`` means all +1."""
    if s is None:
        return np.ones((n, n))
    s = as_square(s, "sign matrix")
    if s.shape[0] != n:
        raise StructuralError(f"sign matrix is {s.shape[0]}x{s.shape[0]}, generator is {n}x{n}")
    if not np.all(np.abs(s) == 1.0):
        raise StructuralError("sign matrix entries must be +1 or -1")
    if not np.all(np.diag(s) == 1.0):
        raise StructuralError("sign matrix must have unit diagonal")
    if not np.array_equal(s, s.T):
        raise StructuralError("sign matrix must be symmetric")
    return s


def support_components(m, removed=()):
    """Connected components of the off-diagonal support graph of ``m``.

    Vertices in ``removed`` are deleted first. Returns a label per vertex,
    with -1 for removed ones.
    """
    n = m.shape[0]
    removed = set(removed)
    adj = (m != 0) & ~np.eye(n, dtype=bool)
    label = np.full(n, -1)
    comp = 0
    for root in range(n):
        if root in removed or label[root] >= 0:
            continue
        label[root] = comp
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]):
                if v not in removed and label[v] < 0:
                    label[v] = comp
                    queue.append(v)
        comp += 1
    return label


def validate_generator(q):
    """Check symmetry, sign pattern, row sums and which transience condition holds.

    ``T1``: irreducible with at least one strictly negative row sum.
    ``T2``: every row sum strictly negative.
    """
    q = _qarray(q)
    n = q.shape[0]
    off = ~np.eye(n, dtype=bool)
    symmetric = bool(np.all(np.abs(q - q.T) <= TOL))
    sign_ok = bool(np.all(q[off] >= 0) and np.all(np.diag(q) < 0))
    sums = q.sum(axis=1)
    sums_ok = bool(np.all(sums <= TOL))
    irreducible = n > 0 and bool(np.all(support_components(q) == 0))
    negative = sums < -TOL
    t1 = irreducible and bool(np.any(negative))
    t2 = n > 0 and bool(np.all(negative))
    mode = {(True, True): "both", (True, False): "T1", (False, True): "T2"}.get((t1, t2), "neither")
    return ValidationReport(symmetric, sign_ok, sums_ok, mode, irreducible)


def require_valid(q):
    q = _qarray(q)
    report = validate_generator(q)
    if not report.valid:
        raise InvalidGeneratorError(report)
    return q


def embedded_chain(q):
    q = require_valid(q)
    rates = -np.diag(q).copy()
    p = q / rates[:, None]
    np.fill_diagonal(p, 0.0)
    kill = np.clip(1.0 - p.sum(axis=1), 0.0, 1.0)
    return EmbeddedChain(p=p, kill=kill, rates=rates)


def signed_precision(q, s=None):
    """The matrix ``M = -Q o S`` whose inverse is the signed covariance."""
    q = _qarray(q)
    return -q * sign_array(s, q.shape[0])


def covariance_direct(q, s=None):
    """``(-Q o S)^-1`` by Cholesky; the result is the field covariance."""
    q = require_valid(q)
    return spd_inverse(signed_precision(q, s))


def expected_occupation(q):
    """``-Q^-1``: expected total time in ``y`` when started from ``x``."""
    return covariance_direct(q, None)


def covariance_neumann(q, s=None, tol=1e-12, max_terms=100_000, validate=True):
    """``(sum_n (P o S)^n) (-Q_diag)^-1`` summed term by term.

    Stops once the newest term is below ``tol`` relative to the partial sum
    and the geometric tail estimated from consecutive term ratios is too.
    """
    q = require_valid(q) if validate else _qarray(q)
    n = q.shape[0]
    s = sign_array(s, n)
    rates = -np.diag(q)
    ps = (q / rates[:, None]) * s
    np.fill_diagonal(ps, 0.0)

    term = np.eye(n)
    total = np.eye(n)
    prev = 1.0
    for _ in range(max_terms):
        term = term @ ps
        total += term
        size = np.max(np.abs(term)) if n else 0.0
        scale = np.max(np.abs(total)) if n else 1.0
        ratio = size / prev if prev > 0 else 0.0
        tail = size * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
        if size <= tol * scale and tail <= tol * scale:
            return total / rates[None, :]
        prev = size
    raise ConvergenceError(
        f"Neumann series did not reach tol={tol} in {max_terms} terms; chain may be recurrent"
    )


def schur_restrict(m, a):
    """``M_AA - M_AB M_BB^-1 M_BA``: the precision of the marginal on ``a``."""
    m = as_square(m)
    a = [int(i) for i in a]
    if not a:
        raise StructuralError("cannot restrict to an empty state set")
    if len(set(a)) != len(a) or min(a) < 0 or max(a) >= m.shape[0]:
        raise StructuralError(f"bad state subset {a}")
    b = [i for i in range(m.shape[0]) if i not in set(a)]
    maa = m[np.ix_(a, a)]
    if not b:
        return maa.copy()
    mab = m[np.ix_(a, b)]
    return maa - mab @ np.linalg.solve(m[np.ix_(b, b)], m[np.ix_(b, a)])


def split_signed_precision(m):
    """Recover ``(Q, S)`` from ``M = -Q o S``.

    Returns ``(q, s, indeterminate)``; where an off-diagonal rate is zero the
    sign cannot be recovered, ``indeterminate`` is True and ``s`` holds +1.
    """
    m = as_square(m)
    n = m.shape[0]
    off = ~np.eye(n, dtype=bool)
    q = np.where(off, np.abs(m), -m)
    indeterminate = off & (m == 0)
    s = np.where(off & (m > 0), -1.0, 1.0)
    return q, s, indeterminate


def _matrix(value, name, n_rows=None):
    if not isinstance(value, list) or not value:
        raise ChainFileError(f"{name}: expected a non-empty list of rows")
    n = len(value) if n_rows is None else n_rows
    if len(value) != n:
        raise ChainFileError(f"{name}: expected {n} rows, found {len(value)}")
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != n:
            length = len(row) if isinstance(row, list) else "non-list"
            raise ChainFileError(f"{name}: row {i + 1} has length {length}, expected {n}")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ChainFileError(f"{name}[{i + 1}][{j + 1}]: not a number: {v!r}")
    return np.array(value, dtype=float)


def parse_chain(text):
    """Parse a chain definition ``{"states": [...], "Q": [[...]], "S": [[...]]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChainFileError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "Q" not in doc:
        raise ChainFileError("top level must be an object with a 'Q' matrix")
    q = _matrix(doc["Q"], "Q")
    states = doc.get("states")
    if states is not None and (not isinstance(states, list) or len(states) != q.shape[0]):
        raise ChainFileError(f"states: expected a list of {q.shape[0]} labels")
    gen = GeneratorMatrix(q, tuple(states) if states is not None else None)
    s = None
    if doc.get("S") is not None:
        s = _matrix(doc["S"], "S", q.shape[0])
        try:
            s = sign_array(s, q.shape[0])
        except StructuralError as exc:
            raise ChainFileError(f"S: {exc}") from None
    return gen, s


def load_chain(path):
    with open(path, encoding="utf-8") as fh:
        return parse_chain(fh.read())
