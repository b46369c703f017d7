"""Killed chain simulation with the sign process, and Monte Carlo estimators.

Path ``i`` of a run draws from its own Philox stream keyed by ``(seed, i)``,
so an estimate does not depend on how paths are split across workers. Each
estimator folds every path into a fixed-length tally vector, the tallies are
stacked in path-index order and reduced once.
"""

import math
import os
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import (
    covariance_direct,
    embedded_chain,
    expected_occupation,
    require_valid,
    sign_array,
)
from .errors import InsufficientSamplesError, JumpCapExceeded, StructuralError
from .field import factor, gaussian_lhs_analytic, sample_field

DEFAULT_MAX_JUMPS = 10**6
_BLOCK = 64
_MASK64 = (1 << 64) - 1

# counter high word separating the stream families of one seed
FIELD_LHS = 1 << 62
FIELD_RHS = (1 << 62) + 1


def path_rng(seed, index, channel=0):
    """Generator for path ``index`` of family ``channel`` under ``seed``."""
    bitgen = np.random.Philox(key=[seed & _MASK64, index & _MASK64], counter=[0, 0, 0, channel])
    return np.random.Generator(bitgen)


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    seed: int
    max_jumps: int = DEFAULT_MAX_JUMPS
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise StructuralError("n_paths must be at least 1")
        if self.max_jumps < 1:
            raise StructuralError("max_jumps must be at least 1")
        if self.workers < 1:
            raise StructuralError("workers must be at least 1")


@dataclass(frozen=True)
class McEstimate:
    """Sample mean, standard error (sample std / sqrt(n)) and sample count.

    ``mean`` and ``std_error`` may be arrays for vector-valued estimators;
    indexing returns the scalar estimate for one component.
    """

    mean: object
    std_error: object
    n: int

    @classmethod
    def from_samples(cls, values):
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        mean = values.mean(axis=0)
        if n > 1:
            se = values.std(axis=0, ddof=1) / math.sqrt(n)
        else:
            se = np.zeros_like(mean)
        if np.ndim(mean) == 0:
            return cls(float(mean), float(se), n)
        return cls(mean, se, n)

    def __getitem__(self, idx):
        return McEstimate(float(self.mean[idx]), float(self.std_error[idx]), self.n)

    def z_score(self, reference):
        """``(mean - reference) / std_error``; 0 when both the gap and the error vanish."""
        gap = np.asarray(self.mean, dtype=float) - reference
        se = np.asarray(self.std_error, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, gap / np.where(se > 0, se, 1.0), np.where(gap == 0, 0.0, np.inf))
        return float(z) if z.ndim == 0 else z


@dataclass(frozen=True)
class PathRecord:
    """One trajectory: arrival times ``S_i``, states ``Y_i`` and signs ``H_{S_i}``.

    ``lifetime`` is the time of the jump to the cemetery when ``absorbed``,
    otherwise the time of the last simulated jump.
    """

    jump_times: tuple
    states: tuple
    signs: tuple
    absorbed: bool
    lifetime: float

    @property
    def holding_times(self):
        ends = self.jump_times[1:] + (self.lifetime,)
        return tuple(b - a for a, b in zip(self.jump_times, ends))


class _Sampler:
    """Jump tables of one ``(chain, signs)`` pair, reused across paths."""

    def __init__(self, chain, s):
        n = len(chain.rates)
        s = sign_array(s, n)
        self.n = n
        self.rates = chain.rates.tolist()
        cum = np.cumsum(chain.p, axis=1)
        rows = []
        for x in range(n):
            row = cum[x].tolist()
            if chain.kill[x] <= 0.0:
                # no killing: route rounding slack to the last reachable state
                last = int(np.flatnonzero(chain.p[x])[-1]) if np.any(chain.p[x]) else n - 1
                for j in range(last, n):
                    row[j] = 1.0
            rows.append(row)
        self.cum = rows
        self.signs = s.astype(int).tolist()

    def run(self, start, rng, max_jumps=DEFAULT_MAX_JUMPS, strict=True):
        if not 0 <= start < self.n:
            raise StructuralError(f"start state {start} out of range")
        n, rates, cum, sgn = self.n, self.rates, self.cum, self.signs
        times, states, signs = [0.0], [start], [1]
        t, x, h = 0.0, start, 1
        k = _BLOCK
        for _ in range(max_jumps):
            if k == _BLOCK:
                ubuf = rng.random(_BLOCK).tolist()
                ebuf = rng.standard_exponential(_BLOCK).tolist()
                k = 0
            t += ebuf[k] / rates[x]
            y = bisect_right(cum[x], ubuf[k])
            k += 1
            if y >= n:
                return PathRecord(tuple(times), tuple(states), tuple(signs), True, t)
            h *= sgn[x][y]
            x = y
            times.append(t)
            states.append(y)
            signs.append(h)
        if strict:
            raise JumpCapExceeded(f"path from state {start} not absorbed within {max_jumps} jumps")
        return PathRecord(tuple(times), tuple(states), tuple(signs), False, t)


def sample_path(chain, s, start, rng, max_jumps=DEFAULT_MAX_JUMPS, strict=True):
    """Simulate one path of the killed chain from ``start``.

    Holding times are exponential with rate ``chain.rates[Y_i]``; the next
    state is drawn from row ``Y_i`` of ``chain.p`` or the cemetery with
    probability ``chain.kill[Y_i]``. Jumps to the cemetery keep the sign.
    With ``strict=False`` a path that hits the jump cap is returned with
    ``absorbed=False`` instead of raising.
    """
    return _Sampler(chain, s).run(int(start), rng, max_jumps, strict)


def _require_absorbed(path):
    if not path.absorbed:
        raise JumpCapExceeded("occupation times are undefined for an unabsorbed path")


def occupation(path, x):
    _require_absorbed(path)
    return sum(w for y, w in zip(path.states, path.holding_times) if y == x)


def net_occupation(path, x):
    _require_absorbed(path)
    return sum(h * w for y, h, w in zip(path.states, path.signs, path.holding_times) if y == x)


@dataclass(frozen=True)
class Hit:
    time: float
    state: int
    sign: int


def hitting(path, a_set):
    """First arrival in ``a_set`` at a jump ``i >= 1``; None if killed first."""
    a_set = set(a_set)
    for i in range(1, len(path.states)):
        if path.states[i] in a_set:
            return Hit(path.jump_times[i], path.states[i], path.signs[i])
    return None


# -- per-path tallies --------------------------------------------------------

def _fold_occupation(path, n):
    out = [0.0] * (2 * n)
    for y, h, w in zip(path.states, path.signs, path.holding_times):
        out[y] += w
        out[n + y] += h * w
    return out


def _fold_hitting(path, n, in_a):
    """``e_{X_R} H_R`` followed by the signed occupation strictly before ``R``."""
    out = [0.0] * (2 * n)
    holds = path.holding_times
    for i, (y, h) in enumerate(zip(path.states, path.signs)):
        if i >= 1 and in_a[y]:
            out[y] = float(h)
            break
        out[n + y] += h * holds[i]
    return out


def _fold_terminal(path, n):
    out = [0.0] * (n + 2)
    for y, w in zip(path.states, path.holding_times):
        out[y] += w
    out[n] = float(path.signs[-1])
    out[n + 1] = float(path.states[-1])
    return out


def _fold_measure_change(path, n, weights, n_steps):
    out = [0.0] * n
    if len(path.states) > n_steps:
        prod = 1.0
        for i in range(n_steps):
            prod *= weights[path.states[i]]
        out[path.states[n_steps]] = prod
    return out


def _chunk(sampler, start, seed, channel, lo, hi, max_jumps, fold, fold_args):
    rows = []
    for i in range(lo, hi):
        path = sampler.run(start, path_rng(seed, i, channel), max_jumps)
        rows.append(fold(path, sampler.n, *fold_args))
    return np.array(rows, dtype=float)


def default_workers():
    """Worker count from ``SIGNDYNKIN_WORKERS``; never changes results."""
    try:
        return max(1, int(os.environ.get("SIGNDYNKIN_WORKERS", "1")))
    except ValueError:
        return 1


def _tallies(sampler, start, cfg, fold, fold_args=()):
    channel = start + 1
    common = (sampler, start, cfg.seed, channel)
    if cfg.workers <= 1 or cfg.n_paths < 2 * cfg.workers:
        return _chunk(*common, 0, cfg.n_paths, cfg.max_jumps, fold, fold_args)
    bounds = np.linspace(0, cfg.n_paths, cfg.workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [
            pool.submit(_chunk, *common, int(lo), int(hi), cfg.max_jumps, fold, fold_args)
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=0)


def _setup(q, s):
    q = require_valid(q)
    s = sign_array(s, q.shape[0])
    return q, s, _Sampler(embedded_chain(q), s)


def _state_set(a_set, n, name="A"):
    a_set = tuple(int(a) for a in a_set)
    if not a_set:
        raise StructuralError(f"{name} must be non-empty")
    if len(set(a_set)) != len(a_set) or min(a_set) < 0 or max(a_set) >= n:
        raise StructuralError(f"bad state set {name}={a_set}")
    return a_set


# -- estimators ----------------------------------------------------------------

def mc_occupation_matrix(q, s, cfg, starts=None):
    """Estimates of ``E_x[l^y]`` and ``E_x[net l^y]`` for every start ``x``.

    Returns two :class:`McEstimate` with ``n x n`` mean arrays (row = start);
    rows of starts left out of ``starts`` stay zero.
    """
    q, s, sampler = _setup(q, s)
    n = q.shape[0]
    occ_m, occ_se, net_m, net_se = (np.zeros((n, n)) for _ in range(4))
    for x in range(n) if starts is None else [int(v) for v in starts]:
        est = McEstimate.from_samples(_tallies(sampler, x, cfg, _fold_occupation))
        occ_m[x], occ_se[x] = est.mean[:n], est.std_error[:n]
        net_m[x], net_se[x] = est.mean[n:], est.std_error[n:]
    return McEstimate(occ_m, occ_se, cfg.n_paths), McEstimate(net_m, net_se, cfg.n_paths)


def _hitting_tallies(q, s, b, a_set, cfg):
    q, s, sampler = _setup(q, s)
    n = q.shape[0]
    a_set = _state_set(a_set, n)
    b = int(b)
    if b in a_set:
        raise StructuralError(f"start state {b} must not be in A")
    in_a = [i in set(a_set) for i in range(n)]
    return n, a_set, _tallies(sampler, b, cfg, _fold_hitting, (in_a,))


def mc_hitting_coefficients(q, s, b, a_set, cfg):
    """``E_b[1{X_{R_A} = a} H_{R_A}]`` for each ``a`` in ``a_set`` (in order)."""
    n, a_set, tallies = _hitting_tallies(q, s, b, a_set, cfg)
    return McEstimate.from_samples(tallies[:, list(a_set)])


def mc_conditional_cov(q, s, b, b2, a_set, cfg):
    """``E_b[int 1{X_s = b2} H_s 1{s < R_A} ds]``.

    With ``b2=None`` returns the vector over every state (zero on ``A``).
    """
    n, a_set, tallies = _hitting_tallies(q, s, b, a_set, cfg)
    est = McEstimate.from_samples(tallies[:, n:])
    if b2 is None:
        return est
    if int(b2) in a_set:
        raise StructuralError(f"state {b2} must not be in A")
    return est[int(b2)]


def _mu_estimate(values, accepted, mass, kappa, how):
    k = int(np.count_nonzero(accepted))
    if k < 2:
        raise InsufficientSamplesError(
            f"only {k} path(s) were killed at the requested state; raise n_paths"
        )
    if how == "analytic":
        est = McEstimate.from_samples(values[accepted])
        return McEstimate(mass * est.mean, abs(mass) * est.std_error, k)
    if how == "empirical":
        return McEstimate.from_samples(np.where(accepted, values, 0.0) / kappa)
    raise StructuralError(f"unknown mass mode {how!r}")


def mc_mu_integral(q, s, x, y, functional, cfg, mass="analytic"):
    """Integral of ``functional(occupations, H_inf)`` against ``mu_xy``.

    Paths from ``x`` are kept when their last state before killing is ``y``.
    ``mass="analytic"`` scales the conditional mean by ``-Q^-1(x, y)``;
    ``mass="empirical"`` uses the unbiased ratio ``1{Y_eta = y} F / kappa_y``
    over all paths, where ``kappa_y`` is the killing rate at ``y``, so the
    error also reflects the acceptance rate.
    """
    q, s, sampler = _setup(q, s)
    n = q.shape[0]
    x, y = int(x), int(y)
    tallies = _tallies(sampler, x, cfg, _fold_terminal)
    accepted = tallies[:, n + 1] == y
    values = np.zeros(len(tallies))
    for i in np.flatnonzero(accepted):
        values[i] = functional(tallies[i, :n], tallies[i, n])
    kappa = -float(q[y].sum())
    return _mu_estimate(values, accepted, expected_occupation(q)[x, y], kappa, mass)


@dataclass(frozen=True)
class IsomorphismCheck:
    lhs: McEstimate
    rhs: McEstimate
    analytic: float

    def z_scores(self):
        """Gaps in units of (combined) standard error: lhs-analytic, rhs-analytic, lhs-rhs."""
        combined = math.hypot(self.lhs.std_error, self.rhs.std_error)
        gap = self.lhs.mean - self.rhs.mean
        lr = gap / combined if combined > 0 else (0.0 if gap == 0 else math.inf)
        return self.lhs.z_score(self.analytic), self.rhs.z_score(self.analytic), lr

    def agree(self, k=3.0):
        return all(abs(z) <= k for z in self.z_scores())


def mc_isomorphism_check(q, s, x, y, d, cfg, sampler=sample_field, mass="analytic"):
    """Three routes to ``E[Z_x Z_y exp(-sum_u d_u Z_u^2 / 2)]``.

    ``lhs`` averages over field samples; ``rhs`` pairs path ``i`` with an
    independent field sample and integrates
    ``exp(-sum_u d_u (Z_u^2/2 + l^u)) H_inf`` against ``mu_xy``;
    ``analytic`` is the determinant-ratio closed form.
    """
    q, s, path_sampler = _setup(q, s)
    n = q.shape[0]
    x, y = int(x), int(y)
    d = np.asarray(d, dtype=float).reshape(-1)
    analytic = gaussian_lhs_analytic(q, s, d, x, y)
    fac = factor(covariance_direct(q, s))

    z = sampler(fac, path_rng(cfg.seed, 0, FIELD_LHS), cfg.n_paths)
    lhs = McEstimate.from_samples(z[:, x] * z[:, y] * np.exp(-0.5 * (z**2) @ d))

    w = sampler(fac, path_rng(cfg.seed, 0, FIELD_RHS), cfg.n_paths)
    tallies = _tallies(path_sampler, x, cfg, _fold_terminal)
    accepted = tallies[:, n + 1] == y
    values = np.exp(-(0.5 * w**2 + tallies[:, :n]) @ d) * tallies[:, n]
    kappa = -float(q[y].sum())
    rhs = _mu_estimate(values, accepted, expected_occupation(q)[x, y], kappa, mass)
    return IsomorphismCheck(lhs, rhs, analytic)


def augmented_chain(q, d):
    """Embedded chain of ``Q - D``: the same chain with extra killing ``d``."""
    q = require_valid(q)
    return embedded_chain(q - np.diag(np.asarray(d, dtype=float)))


def mc_measure_change(q, d, x, n_steps, cfg):
    """``E_x[prod_{i<n} w(Y_i) 1{Y_n = y}]`` for every ``y``, ``w = -q/(-q + d)``.

    Reweights original-chain paths; its expectation is the ``n``-step
    transition probability of the augmented chain.
    """
    q, s, sampler = _setup(q, None)
    rates = -np.diag(q)
    weights = (rates / (rates + np.asarray(d, dtype=float))).tolist()
    return McEstimate.from_samples(
        _tallies(sampler, int(x), cfg, _fold_measure_change, (weights, int(n_steps)))
    )
