"""Ornstein-Uhlenbeck examples and noisy prediction for the free field on N.

States are the times ``1..n``; arrays are 0-based (row ``k-1`` is time ``k``).
The tridiagonal recurrences are written over plain Python numbers so that
``fractions.Fraction`` inputs give exact results.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .chain import GeneratorMatrix, sign_array, signed_precision
from .errors import StructuralError

_SHIFT = 996
_BIG = 2.0**_SHIFT


@dataclass(frozen=True)
class OuSpec:
    """AR(1) recursion ``Z_1 = e_1``, ``Z_i = a Z_{i-1} + e_i`` truncated at ``n``."""

    a: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise StructuralError("truncation length n must be at least 1")


@dataclass(frozen=True)
class NoisyObsSpec:
    """Free-field observations at ``obs_points`` with N(0, sigma2) noise."""

    obs_points: tuple
    sigma2: float
    values: tuple = None

    def __post_init__(self):
        pts = tuple(int(p) for p in self.obs_points)
        if not pts:
            raise StructuralError("need at least one observation point")
        if pts[0] < 1 or any(b <= a for a, b in zip(pts, pts[1:])):
            raise StructuralError("observation points must be strictly increasing naturals")
        if not self.sigma2 > 0:
            raise StructuralError("noise variance must be positive")
        if self.values is not None and len(self.values) != len(pts):
            raise StructuralError("one observed value per observation point")
        object.__setattr__(self, "obs_points", pts)

    @property
    def k(self):
        return len(self.obs_points)


def ou_covariance(spec):
    """``Sigma(k, l) = a^(l-k) sum_{i=1}^k a^(2(k-i))`` for ``k <= l``."""
    a, n = float(spec.a), spec.n
    sigma = np.empty((n, n))
    for k in range(1, n + 1):
        var = sum(a ** (2 * (k - i)) for i in range(1, k + 1))
        for l in range(k, n + 1):
            sigma[k - 1, l - 1] = sigma[l - 1, k - 1] = a ** (l - k) * var
    return sigma


def recursion_covariance(coefs):
    """Covariance of ``Z_1 = e_1``, ``Z_i = coefs[i-2] Z_{i-1} + e_i``.

    Propagates ``Var Z_i = c^2 Var Z_{i-1} + 1`` and
    ``Cov(Z_k, Z_l) = c_{k+1} ... c_l Var Z_k``.
    """
    n = len(coefs) + 1
    var = np.empty(n)
    var[0] = 1.0
    for i in range(1, n):
        var[i] = coefs[i - 1] ** 2 * var[i - 1] + 1.0
    sigma = np.diag(var)
    for k in range(n):
        prod = 1.0
        for l in range(k + 1, n):
            prod *= coefs[l - 1]
            sigma[k, l] = sigma[l, k] = prod * var[k]
    return sigma


def ou_generator(spec, boundary="corrected", gaussian_only=False):
    """Tridiagonal ``Q`` with diagonal ``-(1 + a^2)`` and off-diagonal ``a``.

    ``boundary="corrected"`` sets ``Q(n, n) = -1`` so that ``-Q^-1`` is exactly
    :func:`ou_covariance` on the truncation; ``"raw"`` keeps the infinite-line
    entry. ``a <= 0`` is only accepted with ``gaussian_only=True`` since the
    off-diagonal rates are then not jump rates.
    """
    a, n = float(spec.a), spec.n
    if a <= 0 and not gaussian_only:
        raise StructuralError("a must be positive for the birth-death interpretation")
    if boundary not in ("raw", "corrected"):
        raise StructuralError(f"unknown boundary mode {boundary!r}")
    q = np.diag(np.full(n, -(1.0 + a * a)))
    idx = np.arange(n - 1)
    q[idx, idx + 1] = q[idx + 1, idx] = a
    if boundary == "corrected":
        q[n - 1, n - 1] = -1.0
    return GeneratorMatrix(q)


def consecutive_signs(s, n):
    s = sign_array(s, n)
    return [s[i - 1, i] for i in range(1, n)]


def signed_ou_covariance(spec, s):
    """Covariance of ``Z'_i = S(i-1, i) a Z'_{i-1} + e_i`` by direct propagation."""
    signs = consecutive_signs(s, spec.n)
    return recursion_covariance([sg * spec.a for sg in signs])


def signed_ou_precision(spec, s):
    """``-Q o S`` for the corrected-boundary OU generator."""
    q = ou_generator(spec, "corrected", gaussian_only=True).q
    return signed_precision(q, s)


# -- tridiagonal recurrences ---------------------------------------------------

def _scaled_recurrence(first, second, coefs, subs):
    """``v_0, v_1`` given, ``v_i = coefs[i] v_{i-1} - subs[i] v_{i-2}``.

    Returns ``(mantissas, exponents)`` with ``v_i = m_i * 2**(996 e_i)``; the
    exponent grows whenever a mantissa would exceed ``2**996``.
    """
    vals = [first, second]
    exps = [0, 0]
    if abs(second) > _BIG:
        vals[1], exps[1] = second / _BIG, 1
    for i in range(2, len(coefs)):
        prev2 = vals[i - 2]
        if exps[i - 2] != exps[i - 1]:
            prev2 = prev2 / _BIG ** (exps[i - 1] - exps[i - 2])
        v = coefs[i] * vals[i - 1] - subs[i] * prev2
        e = exps[i - 1]
        if abs(v) > _BIG:
            v, e = v / _BIG, e + 1
            vals[i - 1] = vals[i - 1] / _BIG
            exps[i - 1] = e
        vals.append(v)
        exps.append(e)
    return vals, exps


def _unscale(m, e):
    return m if e == 0 else m * _BIG**e


def _ratio(a, b, c, e):
    """``a * b / c * 2**(996 e)`` without overflow in between for floats."""
    if any(isinstance(v, Fraction) for v in (a, b, c)):
        return _unscale(a * b / c, e)
    (ma, ea), (mb, eb), (mc, ec) = (math.frexp(float(v)) for v in (a, b, c))
    return math.ldexp(ma * mb / mc, ea + eb - ec + _SHIFT * e)


def forward_minors(diag, off):
    """Leading principal minors ``theta_0 = 1, theta_1, ..., theta_k``."""
    k = len(diag)
    coefs = [None] + list(diag)
    subs = [None, None] + [off[i - 2] ** 2 for i in range(2, k + 1)]
    return _scaled_recurrence(1, diag[0], coefs, subs)


def backward_minors(diag, off):
    """Trailing minors ``phi_{k+1} = 1, phi_k, ..., phi_1`` returned as ``phi[1..k+1]``.

    Index 0 of the returned lists corresponds to ``phi_1``.
    """
    m, e = forward_minors(list(diag)[::-1], list(off)[::-1])
    return m[::-1], e[::-1]


def tridiag_inverse(diag, off):
    """Inverse of the symmetric tridiagonal matrix with the given bands.

    Uses ``inv(i, j) = prod_{m=i}^{j-1} (-off_m) theta_{i-1} phi_{j+1} / theta_k``
    for ``i <= j`` (1-based). Returns a nested list, exact for Fractions.
    """
    k = len(diag)
    th, te = forward_minors(diag, off)
    ph, pe = backward_minors(diag, off)
    # ph[j] holds phi_{j+1}
    inv = [[0] * k for _ in range(k)]
    for i in range(1, k + 1):
        prod = 1
        for j in range(i, k + 1):
            if j > i:
                prod = prod * (-off[j - 2])
            e = te[i - 1] + pe[j] - te[k]
            val = prod * _ratio(th[i - 1], ph[j], th[k], e)
            inv[i - 1][j - 1] = inv[j - 1][i - 1] = val
    return inv


def free_field_covariance(points):
    p = np.asarray(points, dtype=float)
    return np.minimum.outer(p, p)


def unit_lower(k):
    """``U(i, j) = 1{i >= j}``."""
    return np.tril(np.ones((k, k)))


def first_difference(k):
    """``U^-1``: 1 on the diagonal, -1 just below it."""
    return np.eye(k) - np.eye(k, k=-1)


def noise_lambda_bands(obs_points, sigma2):
    """Bands of ``Lambda`` with ``Sigma_VV + sigma2 I = U Lambda U^T``.

    ``Lambda = D + sigma2 U^-1 U^-T``: diagonal ``n_i - n_{i-1} + sigma2`` for
    ``i = 1`` and ``n_i - n_{i-1} + 2 sigma2`` afterwards, off-diagonal ``-sigma2``.
    """
    gaps = np.diff(np.concatenate([[0], obs_points]))
    diag = [g + (1 if i == 0 else 2) * sigma2 for i, g in enumerate(gaps.tolist())]
    off = [-sigma2] * (len(obs_points) - 1)
    return diag, off


def one_sequence_lambda_bands(obs_points, sigma2):
    """The ``Lambda`` behind the one-sequence weights.

    Diagonal ``n_i - n_{i-1} + i sigma2``, off-diagonal ``-sigma2``. It agrees
    with :func:`noise_lambda_bands` only for ``k <= 2``.
    """
    pts = [0] + list(obs_points)
    diag = [pts[i] - pts[i - 1] + i * sigma2 for i in range(1, len(pts))]
    off = [-sigma2] * (len(obs_points) - 1)
    return diag, off


def bands_to_matrix(diag, off):
    m = np.diag(np.asarray(diag, dtype=float))
    idx = np.arange(len(off))
    m[idx, idx + 1] = m[idx + 1, idx] = off
    return m


def one_sequence_r(obs_points, sigma2):
    """``r_0 = sigma2``, ``r_1 = (n_1 + sigma2) sigma2``,
    ``r_i = (n_i - n_{i-1} + i sigma2) r_{i-1} - r_{i-2}``; returns ``r_0..r_k``."""
    pts = [0] + list(obs_points)
    k = len(obs_points)
    coefs = [None, None] + [pts[i] - pts[i - 1] + i * sigma2 for i in range(2, k + 1)]
    subs = [None, None] + [1] * (k - 1)
    return _scaled_recurrence(sigma2, (pts[1] + sigma2) * sigma2, coefs, subs)


def one_sequence_lambda_inverse(obs_points, sigma2):
    """One-sequence formula ``r_{i-1} r_{k-j} / r_k`` for ``i <= j``."""
    r, e = one_sequence_r(obs_points, sigma2)
    k = len(obs_points)
    inv = [[0] * k for _ in range(k)]
    for i in range(1, k + 1):
        for j in range(i, k + 1):
            val = _ratio(r[i - 1], r[k - j], r[k], e[i - 1] + e[k - j] - e[k])
            inv[i - 1][j - 1] = inv[j - 1][i - 1] = val
    return inv


def one_sequence_gamma(obs_points, sigma2):
    """Closed-form weights ``gamma_ij`` built on ``r``, with ``r_{-1} = 0``."""
    rm, re = one_sequence_r(obs_points, sigma2)
    k = len(obs_points)

    def r(i):
        return 0 if i < 0 else _unscale(rm[i], re[i])

    g = [[0] * k for _ in range(k)]
    for i in range(1, k + 1):
        g[i - 1][i - 1] = (r(i - 1) * (r(k - i) - 2 * r(k - i - 1)) + r(i) * r(k - i - 1)) / r(k)
        for j in range(i + 1, k + 1):
            g[i - 1][j - 1] = g[j - 1][i - 1] = (r(i) - r(i - 1)) * (r(k - j) - r(k - j - 1)) / r(k)
    return g


@dataclass(frozen=True)
class NoisyPrediction:
    """Weights ``w`` with ``E[Z_query | noisy obs] = w . obs`` by three routes.

    ``dense`` solves the kriging system directly, ``recurrence`` uses
    ``U^-T Lambda^-1 U^-1`` with the two-sided tridiagonal inverse and
    ``one_sequence`` applies the closed-form ``gamma`` weights built on the
    single ``r`` sequence.
    """

    query: int
    dense: np.ndarray
    recurrence: np.ndarray
    one_sequence: np.ndarray
    predictions: dict = None

    @property
    def recurrence_gap(self):
        return float(np.max(np.abs(self.recurrence - self.dense)))

    @property
    def one_sequence_gap(self):
        return float(np.max(np.abs(self.one_sequence - self.dense)))

    def as_dict(self):
        out = {
            "query": self.query,
            "weights": {
                "dense": self.dense.tolist(),
                "recurrence": self.recurrence.tolist(),
                "one_sequence": self.one_sequence.tolist(),
            },
            "max_gap": {"recurrence": self.recurrence_gap, "one_sequence": self.one_sequence_gap},
        }
        if self.predictions is not None:
            out["predictions"] = self.predictions
        return out


def noisy_prediction(spec, n_query):
    n_query = int(n_query)
    if n_query < 1:
        raise StructuralError("query point must be a natural number")
    pts = np.asarray(spec.obs_points, dtype=float)
    k, s2 = spec.k, float(spec.sigma2)
    cross = np.minimum(pts, n_query)

    dense = np.linalg.solve(free_field_covariance(pts) + s2 * np.eye(k), cross)

    diag, off = noise_lambda_bands(spec.obs_points, s2)
    lam_inv = np.array(tridiag_inverse(diag, off), dtype=float)
    u_inv = first_difference(k)
    recurrence = u_inv.T @ lam_inv @ u_inv @ cross

    with np.errstate(all="ignore"):
        one_sequence = np.array(one_sequence_gamma(spec.obs_points, s2), dtype=float) @ cross

    predictions = None
    if spec.values is not None:
        obs = np.asarray(spec.values, dtype=float)
        predictions = {
            "dense": float(dense @ obs),
            "recurrence": float(recurrence @ obs),
            "one_sequence": float(one_sequence @ obs) if np.all(np.isfinite(one_sequence)) else math.nan,
        }
    return NoisyPrediction(n_query, dense, recurrence, one_sequence, predictions)
