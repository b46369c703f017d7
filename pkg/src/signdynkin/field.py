"""The Gaussian side: sampling, kriging weights and the weighted second moment."""

from dataclasses import dataclass

import numpy as np

from ._linalg import as_square, cholesky_lower, spd_inverse, spd_sqrt_det_ratio
from .chain import require_valid, sign_array, signed_precision, support_components
from .errors import StructuralError


@dataclass(frozen=True)
class FieldFactor:
    """Lower-triangular ``L`` with ``sigma = L @ L.T``."""

    lower: np.ndarray

    @property
    def n(self):
        return self.lower.shape[0]


@dataclass(frozen=True)
class PredictionResult:
    """Conditional mean weights of ``Z_target`` given ``Z_given``.

    ``coefficients[i]`` multiplies ``Z[given[i]]``; ``cond_cov`` is the
    conditional covariance over ``rest`` (every state not in ``given``).
    """

    target: int
    given: tuple
    coefficients: np.ndarray
    rest: tuple
    cond_cov: np.ndarray

    def as_dict(self, labels=None):
        name = (lambda i: labels[i]) if labels is not None else (lambda i: i)
        return {
            "target": name(self.target),
            "given": [name(a) for a in self.given],
            "coefficients": {str(name(a)): float(c) for a, c in zip(self.given, self.coefficients)},
            "rest": [name(b) for b in self.rest],
            "cond_cov": self.cond_cov.tolist(),
        }


def factor(sigma):
    """Cholesky factor of a covariance; raises ``NotPositiveDefiniteError``."""
    sigma = as_square(sigma, "covariance")
    if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12):
        raise StructuralError("covariance must be symmetric")
    return FieldFactor(cholesky_lower(sigma))


def sample_field(fac, rng, n_samples):
    """``n_samples`` zero-mean draws, one per row, with covariance ``L L^T``."""
    z = rng.standard_normal((n_samples, fac.n))
    return z @ fac.lower.T


def _check_sets(n, given, target):
    given = tuple(int(a) for a in given)
    if not given:
        raise StructuralError("conditioning set must be non-empty")
    if len(set(given)) != len(given) or min(given) < 0 or max(given) >= n:
        raise StructuralError(f"bad conditioning set {given}")
    target = int(target)
    if not 0 <= target < n:
        raise StructuralError(f"target {target} out of range")
    if target in given:
        raise StructuralError(f"target {target} is in the conditioning set")
    return given, target


def predict_direct(q, s, given, target):
    """Kriging weights and conditional covariance in the precision domain.

    With ``M = -Q o S`` and ``B`` the complement of ``given``, the weights
    are the ``target`` row of ``-(M_BB)^-1 M_BA`` and the conditional
    covariance is ``(M_BB)^-1``.
    """
    q = require_valid(q)
    m = signed_precision(q, s)
    n = m.shape[0]
    given, target = _check_sets(n, given, target)
    rest = tuple(i for i in range(n) if i not in given)
    cond = spd_inverse(m[np.ix_(rest, rest)])
    weights = -cond @ m[np.ix_(rest, given)]
    return PredictionResult(
        target=target,
        given=given,
        coefficients=weights[rest.index(target)],
        rest=rest,
        cond_cov=cond,
    )


def predict_covariance_route(sigma, given, target):
    """Textbook weights ``Sigma_bA Sigma_AA^-1`` from a covariance matrix."""
    sigma = as_square(sigma, "covariance")
    given, target = _check_sets(sigma.shape[0], given, target)
    saa = sigma[np.ix_(given, given)]
    return np.linalg.solve(saa, sigma[given, target])


def weight_expectation(q, s, d):
    """``E[exp(-sum_u d_u Z_u^2 / 2)] = sqrt(det M / det(M + D))``."""
    q = require_valid(q)
    m = signed_precision(q, s)
    d = _weights(d, m.shape[0])
    return spd_sqrt_det_ratio(m, m + np.diag(d))


def _weights(d, n):
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.shape != (n,):
        raise StructuralError(f"expected {n} weights, got {d.shape[0]}")
    if np.any(d < 0):
        raise StructuralError("weights d must be non-negative")
    return d


def gaussian_lhs_analytic(q, s, d, x, y):
    """Closed form of ``E[Z_x Z_y exp(-sum_u d_u Z_u^2 / 2)]``.

    Equals ``weight_expectation * ((D - Q) o S)^-1 [x, y]``; at ``d = 0`` it
    returns the covariance entry unchanged.
    """
    q = require_valid(q)
    n = q.shape[0]
    d = _weights(d, n)
    m = signed_precision(q, s)
    if not np.any(d):
        return float(spd_inverse(m)[x, y])
    md = m + np.diag(d)
    ratio = spd_sqrt_det_ratio(m, md)
    col = np.linalg.solve(md, np.eye(n)[:, int(y)])
    return float(ratio * col[int(x)])


def killed_covariance(q, s, d):
    """``((D - Q) o S)^-1``: the signed covariance after extra killing ``d``."""
    q = require_valid(q)
    d = _weights(d, q.shape[0])
    return spd_inverse(signed_precision(q, s) + np.diag(d))


@dataclass(frozen=True)
class CondIndependenceReport:
    separated: bool
    block: np.ndarray
    max_abs: float
    tol: float

    @property
    def zero_block(self):
        return self.max_abs <= self.tol

    @property
    def passed(self):
        # no claim is made when the separator hypothesis fails
        return (not self.separated) or self.zero_block


def cond_independence_check(q, s, a_set, b_set, c_set, tol=1e-10):
    """Conditional covariance of ``Z_A`` and ``Z_C`` given ``Z_B``.

    Also decides whether ``B`` separates ``A`` from ``C`` in the support
    graph of ``Q``.
    """
    q = require_valid(q)
    n = q.shape[0]
    sets = [tuple(int(v) for v in x) for x in (a_set, b_set, c_set)]
    a_set, b_set, c_set = sets
    flat = [v for x in sets for v in x]
    if len(set(flat)) != len(flat):
        raise StructuralError("A, B and C must be disjoint")
    if flat and (min(flat) < 0 or max(flat) >= n):
        raise StructuralError("state index out of range")
    if not a_set or not c_set:
        raise StructuralError("A and C must be non-empty")
    sign_array(s, n)

    label = support_components(q, removed=b_set)
    separated = not (set(label[list(a_set)]) & set(label[list(c_set)]))

    m = signed_precision(q, s)
    rest = [i for i in range(n) if i not in set(b_set)]
    cond = spd_inverse(m[np.ix_(rest, rest)])
    ia = [rest.index(a) for a in a_set]
    ic = [rest.index(c) for c in c_set]
    block = cond[np.ix_(ia, ic)]
    return CondIndependenceReport(separated, block, float(np.max(np.abs(block))), tol)
