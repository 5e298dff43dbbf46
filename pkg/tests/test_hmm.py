"""Checks for filtering, likelihood, batch EM, and decoding."""

import numpy as np
import pytest
from scipy.special import logsumexp

from driveload import (
    EmissionModel,
    GalParams,
    batch_em,
    empirical_transition_matrix,
    filter_init,
    filter_step,
    gal_logpdf,
    loglik,
    retrospective_kernel,
    validate_transition_matrix,
    viterbi,
)
from driveload.hmm import _estep, _finite_logdens, _prior_vector
from oracles import brute_viterbi, enum_posteriors, path_logprob, random_stochastic

EM3 = EmissionModel([
    GalParams(-1.0, -0.5, 10.0, 0.2),
    GalParams(0.0, 0.0, 0.5, 1.0),
    GalParams(1.0, 0.5, 10.0, 0.2),
])

Q_CITY = np.array([
    [0.85, 0.10, 0.05],
    [0.025, 0.95, 0.025],
    [0.05, 0.10, 0.85],
])


class TableEmission:
    """Duck-typed emission model backed by a log-density lookup table.

    Observations are row indices, so arbitrary density patterns can be
    injected without going through a parametric family.
    """

    def __init__(self, tab):
        self.tab = np.asarray(tab, dtype=float)
        self.m = self.tab.shape[1]

    def logdens(self, y):
        idx = np.asarray(y, dtype=int)
        return self.tab[idx]


def rand_prob(rng, m):
    p = rng.gamma(1.0, 1.0, m) + 0.05
    return p / p.sum()


def rand_instance(rng, m, T):
    q = random_stochastic(rng, m)
    tab = rng.normal(0.0, 2.0, size=(T, m))
    return q, tab, rand_prob(rng, m)


def test_validate_transition_matrix():
    q = validate_transition_matrix([[0.9, 0.1], [0.3, 0.7]])
    assert q.dtype == float and q.shape == (2, 2)
    with pytest.raises(ValueError):
        validate_transition_matrix([[0.9, 0.2], [0.3, 0.7]])
    with pytest.raises(ValueError):
        validate_transition_matrix([[1.1, -0.1], [0.3, 0.7]])
    with pytest.raises(ValueError):
        validate_transition_matrix([[0.9, 0.1, 0.0], [0.3, 0.7, 0.0]])


def test_empirical_transition_matrix():
    q = empirical_transition_matrix([0, 1, 1, 0, 2, 2])
    expected = np.array([[0.0, 0.5, 0.5], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(q, expected)
    # unreachable source state falls back to a uniform row
    q = empirical_transition_matrix([0, 0, 1], m=3)
    np.testing.assert_allclose(q[2], [1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(q.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        empirical_transition_matrix([0])


def test_filter_init_is_prior_times_density():
    y0 = 0.3
    pi0 = np.array([0.2, 0.5, 0.3])
    phi = filter_init(EM3, y0, pi0)
    g = np.exp([gal_logpdf(p, y0) for p in EM3.states])
    expected = pi0 * g
    expected /= expected.sum()
    np.testing.assert_allclose(phi, expected, rtol=1e-12)
    assert phi.sum() == pytest.approx(1.0, abs=1e-12)


def test_filter_init_point_mass_prior():
    phi = filter_init(EM3, 0.3, np.array([0.0, 1.0, 0.0]))
    np.testing.assert_allclose(phi, [0.0, 1.0, 0.0])


def test_filter_init_degenerate_warns():
    em = TableEmission([[-np.inf, -np.inf]])
    with pytest.warns(UserWarning, match="zero density"):
        phi = filter_init(em, 0.0)
    np.testing.assert_allclose(phi, [0.5, 0.5])


def test_filter_step_hand_case():
    phi = np.array([0.5, 0.5])
    q = np.array([[0.9, 0.1], [0.2, 0.8]])
    out = filter_step(phi, q, np.log([1.0, 0.5]))
    np.testing.assert_allclose(out, [0.55 / 0.775, 0.225 / 0.775], rtol=1e-12)


def test_filter_step_identity_transition():
    phi = np.array([0.3, 0.7])
    out = filter_step(phi, np.eye(2), np.log([2.0, 2.0]))
    np.testing.assert_allclose(out, phi, rtol=1e-12)


def test_filter_step_sums_to_one(rng):
    for _ in range(2000):
        m = rng.integers(2, 5)
        q = random_stochastic(rng, m)
        phi = rand_prob(rng, m)
        out = filter_step(phi, q, rng.normal(0, 5, size=m))
        assert out.min() >= 0
        assert out.sum() == pytest.approx(1.0, abs=1e-9)


def test_filter_step_degenerate_warns():
    with pytest.warns(UserWarning, match="vanished"):
        out = filter_step([0.5, 0.5], np.eye(2), [-np.inf, -np.inf])
    np.testing.assert_allclose(out, [0.5, 0.5])


def test_filter_step_singular_density():
    q = np.array([[0.9, 0.1], [0.2, 0.8]])
    out = filter_step([0.5, 0.5], q, [np.inf, 0.0])
    np.testing.assert_allclose(out, [1.0, 0.0])
    # two singular states split by predicted mass
    out = filter_step([0.4, 0.6], np.eye(2), [np.inf, np.inf])
    np.testing.assert_allclose(out, [0.4, 0.6])


def test_retrospective_kernel_hand_case():
    phi = np.array([0.7, 0.3])
    q = np.array([[0.9, 0.1], [0.2, 0.8]])
    r = retrospective_kernel(phi, q)
    np.testing.assert_allclose(r[:, 0], [0.63 / 0.69, 0.06 / 0.69], rtol=1e-12)
    np.testing.assert_allclose(r[:, 1], [0.07 / 0.31, 0.24 / 0.31], rtol=1e-12)


def test_retrospective_kernel_columns_normalized(rng):
    for _ in range(200):
        m = rng.integers(2, 6)
        r = retrospective_kernel(rand_prob(rng, m), random_stochastic(rng, m))
        np.testing.assert_allclose(r.sum(axis=0), 1.0, atol=1e-12)
        assert r.min() >= 0


def test_retrospective_kernel_dead_column_warns():
    q = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.warns(UserWarning, match="unreachable"):
        r = retrospective_kernel(np.array([0.5, 0.5]), q)
    np.testing.assert_allclose(r[:, 1], [0.5, 0.5])
    np.testing.assert_allclose(r.sum(axis=0), 1.0)


def test_loglik_single_observation():
    y0 = 0.3
    pi0 = np.array([0.2, 0.5, 0.3])
    ll = loglik([y0], Q_CITY, EM3, pi0)
    row = np.array([gal_logpdf(p, y0) for p in EM3.states])
    assert ll == pytest.approx(logsumexp(row, b=pi0), abs=1e-12)


def test_loglik_single_state():
    tab = np.log([[0.4], [0.7], [0.2]])
    em = TableEmission(tab)
    ll = loglik(np.arange(3), np.array([[1.0]]), em)
    assert ll == pytest.approx(tab.sum(), abs=1e-12)


def test_loglik_hand_enumeration():
    g = np.array([[0.2, 1.1], [0.9, 0.3], [0.5, 0.5]])
    pi0 = np.array([0.6, 0.4])
    q = np.array([[0.7, 0.3], [0.4, 0.6]])
    total = 0.0
    for z0 in range(2):
        for z1 in range(2):
            for z2 in range(2):
                total += (pi0[z0] * g[0, z0] * q[z0, z1] * g[1, z1]
                          * q[z1, z2] * g[2, z2])
    em = TableEmission(np.log(g))
    assert loglik(np.arange(3), q, em, pi0) == pytest.approx(np.log(total), abs=1e-12)


def test_loglik_matches_enumeration(rng):
    for _ in range(20):
        m = int(rng.integers(2, 4))
        T = int(rng.integers(1, 8))
        q, tab, p0 = rand_instance(rng, m, T)
        ll_ref, _, _, _ = enum_posteriors(tab, q, p0)
        assert loglik(np.arange(T), q, TableEmission(tab), p0) == pytest.approx(
            ll_ref, abs=1e-10
        )


def test_estep_matches_enumeration(rng):
    for _ in range(20):
        m = int(rng.integers(2, 4))
        T = int(rng.integers(2, 8))
        q, tab, p0 = rand_instance(rng, m, T)
        _, phi_ref, s_ref, _ = enum_posteriors(tab, q, p0)
        phi, _, S = _estep(tab, q, p0)
        np.testing.assert_allclose(phi, phi_ref, atol=1e-10)
        np.testing.assert_allclose(S, s_ref, atol=1e-10)
        assert S.sum() == pytest.approx(1.0, abs=1e-9)


def test_batch_em_monotone_loglik(rng):
    for _ in range(15):
        m = int(rng.integers(2, 4))
        q, tab, p0 = rand_instance(rng, m, 60)
        path = batch_em(np.arange(60), q, TableEmission(tab), p0, n_iter=8)
        lls = [ll for _, ll in path]
        assert len(path) == 9
        for a, b in zip(lls, lls[1:]):
            assert b >= a - 1e-9 * max(1.0, abs(a))
        for qi, _ in path:
            np.testing.assert_allclose(qi.sum(axis=1), 1.0, atol=1e-9)


def test_batch_em_first_update_matches_enumeration(rng):
    for _ in range(10):
        m = int(rng.integers(2, 4))
        T = int(rng.integers(3, 8))
        q, tab, p0 = rand_instance(rng, m, T)
        _, _, s_ref, _ = enum_posteriors(tab, q, p0)
        q_ref = s_ref / s_ref.sum(axis=1, keepdims=True)
        path = batch_em(np.arange(T), q, TableEmission(tab), p0, n_iter=1)
        np.testing.assert_allclose(path[1][0], q_ref, atol=1e-10)


def test_batch_em_recovers_transition_matrix(rng):
    T = 20_000
    states = np.empty(T, dtype=np.int64)
    states[0] = 1
    u = rng.random(T)
    cum = np.cumsum(Q_CITY, axis=1)
    for t in range(1, T):
        states[t] = np.searchsorted(cum[states[t - 1]], u[t])
    y = EM3.sample(states, rng)
    q0 = np.full((3, 3), 1 / 3)
    path = batch_em(y, q0, EM3, n_iter=50)
    q_hat = path[-1][0]
    assert np.max(np.abs(q_hat - Q_CITY)) <= 0.02
    lls = [ll for _, ll in path]
    assert all(b >= a - 1e-7 * abs(a) for a, b in zip(lls, lls[1:]))


def test_batch_em_dead_state_row_kept():
    q0 = np.array([[0.6, 0.4, 0.0], [0.3, 0.7, 0.0], [0.2, 0.2, 0.6]])
    tab = np.zeros((40, 3))
    tab[:, 2] = -1e9
    with pytest.warns(UserWarning, match="no posterior mass"):
        path = batch_em(np.arange(40), q0, TableEmission(tab), n_iter=1)
    q1 = path[1][0]
    np.testing.assert_allclose(q1[2], q0[2])
    np.testing.assert_allclose(q1.sum(axis=1), 1.0, atol=1e-12)


def test_viterbi_single_state():
    em = TableEmission(np.full((5, 1), -0.3))
    np.testing.assert_array_equal(viterbi(np.arange(5), [[1.0]], em), np.zeros(5))


def test_viterbi_ties_take_lowest_index():
    em = TableEmission(np.zeros((6, 3)))
    q = np.full((3, 3), 1 / 3)
    np.testing.assert_array_equal(viterbi(np.arange(6), q, em), np.zeros(6))


def test_viterbi_accuracy_separated_emissions(rng):
    em = EmissionModel([
        GalParams(-10.0, 0.0, 1.0, 0.05),
        GalParams(0.0, 0.0, 1.0, 0.05),
        GalParams(10.0, 0.0, 1.0, 0.05),
    ])
    T = 5000
    states = np.empty(T, dtype=np.int64)
    states[0] = 1
    cum = np.cumsum(Q_CITY, axis=1)
    u = rng.random(T)
    for t in range(1, T):
        states[t] = np.searchsorted(cum[states[t - 1]], u[t])
    y = em.sample(states, rng)
    path = viterbi(y, Q_CITY, em)
    assert (path == states).mean() >= 0.99


def test_viterbi_matches_brute_force(rng):
    for _ in range(30):
        m = int(rng.integers(2, 4))
        T = int(rng.integers(1, 8))
        q, tab, p0 = rand_instance(rng, m, T)
        got = viterbi(np.arange(T), q, TableEmission(tab), p0)
        ref_path, ref_lp = brute_viterbi(tab, q, p0)
        np.testing.assert_array_equal(got, ref_path)
        assert path_logprob(got, tab, q, p0) == pytest.approx(ref_lp, abs=1e-10)


def test_viterbi_beats_random_paths(rng):
    m, T = 3, 40
    q, tab, p0 = rand_instance(rng, m, T)
    best = viterbi(np.arange(T), q, TableEmission(tab), p0)
    ref = path_logprob(best, tab, q, p0)
    for _ in range(1000):
        path = rng.integers(0, m, size=T)
        assert path_logprob(path, tab, q, p0) <= ref + 1e-9


def test_prior_vector_validation():
    np.testing.assert_allclose(_prior_vector(3), [1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(_prior_vector(2, [2.0, 6.0]), [0.25, 0.75])
    with pytest.raises(ValueError):
        _prior_vector(2, [1.0, -0.1])
    with pytest.raises(ValueError):
        _prior_vector(2, [0.0, 0.0])
    with pytest.raises(ValueError):
        _prior_vector(3, [0.5, 0.5])


def test_finite_logdens_caps_singularities():
    ld = np.array([[0.0, np.inf], [-np.inf, 1.0]])
    out = _finite_logdens(ld)
    assert np.isfinite(out[0]).all()
    assert out[0, 1] > 1e5
    assert out[1, 0] == -np.inf  # zero densities pass through unchanged
