import numpy as np
import pytest

from chains import Q2, Q3_PATH, NEG2, path_generator, random_generator, random_signs
from signdynkin import (
    McConfig,
    McEstimate,
    PathRecord,
    covariance_direct,
    hitting,
    mc_conditional_cov,
    mc_hitting_coefficients,
    mc_measure_change,
    mc_mu_integral,
    mc_occupation_matrix,
    net_occupation,
    occupation,
    predict_direct,
    sample_path,
)
from signdynkin.chain import embedded_chain, expected_occupation
from signdynkin.errors import InsufficientSamplesError, JumpCapExceeded, StructuralError
from signdynkin.field import killed_covariance
from signdynkin.paths import augmented_chain, path_rng

CFG = McConfig(n_paths=20_000, seed=12345)


def _within(est, ref, k=3.0):
    return np.all(np.abs(np.atleast_1d(est.z_score(ref))) <= k)


# -- single paths -------------------------------------------------------------------

def test_one_state_path():
    ch = embedded_chain(np.array([[-1.0]]))
    path = sample_path(ch, None, 0, path_rng(0, 0))
    assert path.states == (0,)
    assert path.signs == (1,)
    assert path.absorbed
    assert occupation(path, 0) == path.lifetime > 0


def test_paths_are_reproducible():
    ch = embedded_chain(Q3_PATH)
    a = sample_path(ch, None, 1, path_rng(9, 4))
    b = sample_path(ch, None, 1, path_rng(9, 4))
    c = sample_path(ch, None, 1, path_rng(9, 5))
    assert a == b
    assert a != c


def test_path_invariants():
    rng = np.random.default_rng(0)
    q, s = random_generator(rng, 6), random_signs(rng, 6)
    ch = embedded_chain(q)
    for i in range(200):
        path = sample_path(ch, s, i % 6, path_rng(1, i))
        h = 1
        for k in range(1, len(path.states)):
            h *= int(s[path.states[k - 1], path.states[k]])
            assert path.signs[k] == h
        assert all(q[u, v] > 0 for u, v in zip(path.states, path.states[1:]))
        assert np.all(np.diff(path.jump_times) > 0)
        occ = [occupation(path, x) for x in range(6)]
        assert sum(occ) == pytest.approx(path.lifetime)
        for x in range(6):
            assert abs(net_occupation(path, x)) <= occ[x] + 1e-15


def test_net_occupation_hand_example():
    path = PathRecord((0.0, 1.0, 3.0), (0, 1, 0), (1, -1, -1), True, 3.5)
    assert occupation(path, 0) == 1.5
    assert net_occupation(path, 0) == 0.5
    assert net_occupation(path, 1) == -2.0


def test_hitting_ignores_time_zero():
    path = PathRecord((0.0, 1.0, 3.0), (0, 1, 0), (1, -1, -1), True, 3.5)
    hit = hitting(path, {0})
    assert (hit.time, hit.state, hit.sign) == (3.0, 0, -1)
    assert hitting(path, {2}) is None


def test_unabsorbed_path_has_no_occupation():
    ch = embedded_chain(path_generator(3, kill=1e-6))
    path = sample_path(ch, None, 0, path_rng(0, 0), max_jumps=3, strict=False)
    assert not path.absorbed
    with pytest.raises(JumpCapExceeded):
        occupation(path, 0)
    with pytest.raises(JumpCapExceeded):
        sample_path(ch, None, 0, path_rng(0, 0), max_jumps=3)


def test_jump_cap_surfaces_from_estimators():
    with pytest.raises(JumpCapExceeded):
        mc_occupation_matrix(path_generator(3, kill=1e-6), None, McConfig(50, 0, max_jumps=5))


# -- estimators ---------------------------------------------------------------------

def test_estimate_from_samples():
    est = McEstimate.from_samples([1.0, 2.0, 3.0, 4.0])
    assert est.mean == 2.5
    assert est.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert est.z_score(2.5) == 0.0


def test_occupation_two_state():
    occ, net = mc_occupation_matrix(Q2, NEG2, CFG)
    assert _within(occ, expected_occupation(Q2))
    assert _within(net, covariance_direct(Q2, NEG2))


def test_occupation_random_chain():
    rng = np.random.default_rng(21)
    q, s = random_generator(rng, 4, mode="T2"), random_signs(rng, 4)
    occ, net = mc_occupation_matrix(q, s, CFG)
    assert _within(occ, expected_occupation(q))
    assert _within(net, covariance_direct(q, s))


def test_workers_do_not_change_results():
    cfg1 = McConfig(n_paths=3000, seed=77, workers=1)
    cfg2 = McConfig(n_paths=3000, seed=77, workers=2)
    a = mc_occupation_matrix(Q3_PATH, None, cfg1)
    b = mc_occupation_matrix(Q3_PATH, None, cfg2)
    for x, y in zip(a, b):
        assert np.array_equal(x.mean, y.mean)
        assert np.array_equal(x.std_error, y.std_error)


def test_hitting_coefficients_three_state():
    est = mc_hitting_coefficients(Q3_PATH, None, 1, [0, 2], CFG)
    assert _within(est, np.array([1 / 3, 1 / 3]))
    s = np.array([[1, -1, 1], [-1, 1, 1], [1, 1, 1]], dtype=float)
    est = mc_hitting_coefficients(Q3_PATH, s, 1, [0, 2], CFG)
    assert _within(est, np.array([-1 / 3, 1 / 3]))


def test_hitting_rejects_start_in_a():
    with pytest.raises(StructuralError):
        mc_hitting_coefficients(Q3_PATH, None, 0, [0, 2], CFG)


def test_conditional_covariance_three_state():
    est = mc_conditional_cov(Q3_PATH, None, 1, 1, [0, 2], CFG)
    assert _within(est, 1 / 3)


def test_conditional_covariance_matches_direct():
    q = path_generator(5)
    s = random_signs(np.random.default_rng(2), 5)
    res = predict_direct(q, s, [0, 4], 2)
    est = mc_conditional_cov(q, s, 2, None, [0, 4], CFG)
    ib = res.rest.index(2)
    for j, b2 in enumerate(res.rest):
        assert _within(est[b2], res.cond_cov[ib, j])


def test_mu_one_state():
    q = np.array([[-1.0]])
    est = mc_mu_integral(q, None, 0, 0, lambda occ, h: np.exp(-occ[0]), CFG)
    assert _within(est, 0.5)


def test_mu_total_mass():
    est = mc_mu_integral(Q2, None, 0, 1, lambda occ, h: 1.0, CFG)
    assert est.mean == pytest.approx(1 / 3, abs=1e-15)
    est = mc_mu_integral(Q2, None, 0, 1, lambda occ, h: 1.0, CFG, mass="empirical")
    assert _within(est, 1 / 3)


def test_mu_laplace_transform_is_killed_covariance():
    d = np.array([0.5, 0.25])
    ref = killed_covariance(Q2, NEG2, d)
    for x, y in [(0, 0), (0, 1), (1, 1)]:
        for how in ("analytic", "empirical"):
            est = mc_mu_integral(Q2, NEG2, x, y, lambda occ, h: np.exp(-occ @ d) * h, CFG, mass=how)
            assert _within(est, ref[x, y])


def test_mu_needs_accepted_paths():
    # state 1 has no killing, so no path dies there
    q = np.array([[-2.0, 1.0], [1.0, -1.0]])
    with pytest.raises(InsufficientSamplesError):
        mc_mu_integral(q, None, 0, 1, lambda occ, h: 1.0, McConfig(100, 0))


@pytest.mark.parametrize("n_steps", [1, 2, 3])
def test_measure_change(n_steps):
    q = Q3_PATH
    d = np.array([0.5, 1.0, 0.25])
    aug = augmented_chain(q, d)
    oracle = np.linalg.matrix_power(aug.p, n_steps)[0]
    est = mc_measure_change(q, d, 0, n_steps, CFG)
    assert _within(est, oracle)


def test_config_validation():
    with pytest.raises(StructuralError):
        McConfig(0, 1)
    with pytest.raises(StructuralError):
        McConfig(10, 1, workers=0)
