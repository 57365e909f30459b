import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds
from qbandits.bandit import (DiscreteActions, Environment, IncompatibleActionSetError, Rank1Actions,
                             cumulative_regret, gap_report, run_episode)
from qbandits.policies import (UCB, BanditPLS, InfeasibleProjectionError, LinUCB, LinUcbState,
                               PhasedElimination, PhasedElimState, TwoPhasePolicy, UcbState, UniformPolicy,
                               confidence_radius, g_optimal_design, linucb_select_continuous,
                               linucb_select_discrete, make_policy, phase_budget, pls_linear_estimator,
                               project_to_density, project_to_pure, project_to_simplex, ridge_update,
                               ucb_index)
from qbandits.policies.linucb import linucb_indices
from qbandits.policies.pls import ceil_sqrt
from qbandits.policies.tomography import pls_tolerance, top_eigenvector
from qbandits.quantum import (Observable, devectorize, orthonormal_hermitian_basis, pauli_matrix,
                              pauli_strings, pure_state, random_density_matrix, trace_norm)

QUBIT_PAULIS = DiscreteActions(tuple(pauli_strings(1)))
Z = pauli_matrix("Z")


# -- UCB -------------------------------------------------------------------------------------

def test_ucb_index_examples():
    s = UcbState(3, math.exp(-1))
    assert ucb_index(s, 0) == math.inf
    s.update(0, 0.0)
    s.update(0, 1.0)
    assert ucb_index(s, 0) == pytest.approx(1.5)
    near_one = UcbState(1, 1 - 1e-15)
    near_one.update(0, 0.25)
    assert ucb_index(near_one, 0) == pytest.approx(0.25, abs=1e-6)
    with pytest.raises(ValueError):
        UcbState(2, 1.0)


def test_ucb_plays_each_arm_first():
    arms = DiscreteActions(tuple(pauli_strings(2)[:6]))
    trace = run_episode(Environment(np.eye(4) / 4), arms, UCB(), 50, seed=0)
    assert list(trace.actions[:6]) == list(range(6))


def test_ucb_concentrates_on_best_arm():
    # means 0.25 and -0.25: gaps (0, 0.5)
    arms = DiscreteActions((Observable.from_matrix(Z, "Z"), Observable.from_matrix(-Z, "-Z")))
    env = Environment(np.diag([0.625, 0.375]))
    fracs = [run_episode(env, arms, UCB(), 10**4, seed=s).pull_counts(2)[1] / 10**4 for s in range(100)]
    assert max(fracs) < 0.10


def test_ucb_rejects_continuous():
    with pytest.raises(IncompatibleActionSetError):
        UCB().start(Rank1Actions(2), 10, np.random.default_rng(0))


# -- LinUCB ----------------------------------------------------------------------------------

def test_ridge_examples():
    s = LinUcbState(4)
    assert np.allclose(s.theta, 0)
    ridge_update(s, np.eye(4)[0], 1.0)
    assert np.allclose(s.theta, [0.5, 0, 0, 0])
    assert np.allclose(s.V, np.diag([2, 1, 1, 1]))


def test_ridge_inverse_stays_consistent(rng):
    s = LinUcbState(9, L=3.0)
    for _ in range(1000):
        A = rng.normal(size=9)
        ridge_update(s, A / max(1.0, np.linalg.norm(A) / 3), rng.normal())
    assert np.allclose(s.V @ s.Vinv, np.eye(9), atol=1e-8)
    assert np.allclose(s.theta, np.linalg.solve(s.V, s.b), atol=1e-8)


def test_ridge_rejects_long_vectors():
    with pytest.raises(ValueError):
        LinUcbState(2, L=1.0).update(np.array([1.0, 1.0]), 0.0)


def test_confidence_radius_formula():
    s = LinUcbState(4, lam=1, m=1, L=math.sqrt(2), delta=0.01)
    assert confidence_radius(s, 0) == pytest.approx(1 + math.sqrt(2 * math.log(100)))
    # direct evaluation of the formula; equals 5.9938, not the 5.23 quoted alongside it
    expected = 1 + math.sqrt(2 * math.log(100) + 4 * math.log(51))
    assert confidence_radius(s, 100) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(5.9938, abs=1e-4)
    assert confidence_radius(LinUcbState(4, lam=2.0, m=1.5, delta=1.0), 0) == pytest.approx(math.sqrt(2) * 1.5)
    with pytest.raises(ValueError):
        LinUcbState(4, delta=0.0)


def test_linucb_discrete_ties_and_greedy():
    s = LinUcbState(2)
    X = np.array([[0.5, 0.0], [0.0, 1.0], [1.0, 0.0]])
    assert linucb_select_discrete(s, X, 1.0) == 1  # argmax norm, lowest index among ties
    s.b[:] = [1.0, 0.0]
    assert linucb_select_discrete(s, X, 0.0) == 2


@given(seeds)
def test_linucb_index_matches_ellipsoid_grid(seed):
    rng = np.random.default_rng(seed)
    s = LinUcbState(2, L=2.0)
    for _ in range(5):
        ridge_update(s, rng.uniform(-1, 1, 2), rng.normal())
    X = rng.uniform(-1, 1, (3, 2))
    beta = 1.3
    # max of theta . a over the boundary of {theta : ||theta - theta_hat||_V <= beta}
    w, U = np.linalg.eigh(s.V)
    V_inv_half = U @ np.diag(w ** -0.5) @ U.T
    ang = np.linspace(0, 2 * np.pi, 200_000, endpoint=False)
    circle = np.stack([np.cos(ang), np.sin(ang)])
    thetas = s.theta[:, None] + beta * V_inv_half @ circle
    grid = np.max(X @ thetas, axis=1)
    assert np.allclose(linucb_indices(s, X, beta), grid, atol=1e-6)
    assert linucb_select_discrete(s, X, beta) == int(np.argmax(grid))


def test_linucb_continuous_greedy_is_top_eigenvector(rng):
    for d in (2, 3, 4):
        basis = orthonormal_hermitian_basis(d)
        s = LinUcbState(d * d)
        s.b[:] = rng.normal(size=d * d)
        phi = linucb_select_continuous(s, d, rng, 0.0)
        Theta = devectorize(s.theta, basis)
        top = np.linalg.eigh(Theta)[1][:, -1]
        assert abs(np.vdot(top, phi)) ** 2 >= 1 - 1e-6


def _bloch_grid(m):
    i = np.arange(m) + 0.5
    polar = np.arccos(1 - 2 * i / m)
    azim = np.pi * (1 + 5**0.5) * i
    return np.stack([np.cos(polar / 2), np.exp(1j * azim) * np.sin(polar / 2)], axis=1)


def test_linucb_continuous_beats_bloch_grid(rng):
    basis = orthonormal_hermitian_basis(2)
    for _ in range(5):
        s = LinUcbState(4, L=math.sqrt(2))
        for _ in range(8):
            psi = rng.normal(size=2) + 1j * rng.normal(size=2)
            psi /= np.linalg.norm(psi)
            A = np.einsum("i,kij,j->k", psi.conj(), basis.elements, psi).real
            ridge_update(s, A, rng.normal())
        beta = 1.0
        phi, val = linucb_select_continuous(s, 2, rng, beta, return_value=True)
        G = _bloch_grid(10_000)
        A = np.einsum("bi,kij,bj->bk", G.conj(), basis.elements, G).real
        grid = linucb_indices(s, A, beta).max()
        assert val >= grid - 1e-3
        # the value is the index at the returned vector
        a = np.einsum("i,kij,j->k", phi.conj(), basis.elements, phi).real
        assert linucb_indices(s, a, beta)[0] == pytest.approx(val, abs=1e-9)


def test_linucb_continuous_dominates_seed_points(rng):
    d = 3
    basis = orthonormal_hermitian_basis(d)
    s = LinUcbState(d * d, L=math.sqrt(d))
    for _ in range(10):
        s.update(rng.normal(size=d * d) / d, rng.normal())
    _, val = linucb_select_continuous(s, d, rng, 0.7, return_value=True)
    for E in basis.elements[1:]:
        for v in np.linalg.eigh(E)[1].T:
            a = np.einsum("i,kij,j->k", v.conj(), basis.elements, v).real
            assert val >= linucb_indices(s, a, 0.7)[0] - 1e-12


def test_linucb_runs_on_both_action_sets(rng):
    env = Environment(random_density_matrix(2, rng))
    t1 = run_episode(env, QUBIT_PAULIS, LinUCB(), 200, seed=1)
    t2 = run_episode(env, Rank1Actions(2), LinUCB(restarts=4, steps=20), 30, seed=1)
    assert t1.n == 200 and t2.n == 30
    assert np.all(cumulative_regret(t2, gap_report(env.state, Rank1Actions(2))) >= 0)


# -- G-optimal design ------------------------------------------------------------------------

def test_design_two_orthonormal_vectors():
    res = g_optimal_design(np.eye(2))
    assert np.allclose(res.weights, [0.5, 0.5], atol=1e-6)
    assert res.g == pytest.approx(2, abs=1e-6)
    # brute-force grid over the 1-simplex maximizing log det
    ws = np.linspace(1e-3, 1 - 1e-3, 9999)
    best = ws[np.argmax(np.log(ws) + np.log(1 - ws))]
    assert abs(res.weights[0] - best) <= 1e-3


def test_design_single_vector():
    a = np.array([[3.0, 4.0, 0.0]])
    res = g_optimal_design(a)
    assert np.allclose(res.weights, [1.0])
    assert res.logdet == pytest.approx(math.log(25.0))


@given(seeds, st.integers(1, 6), st.integers(0, 10))
def test_design_certificate_and_support(seed, p, extra):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(p + extra, p))
    res = g_optimal_design(X, 1e-2)
    assert res.span_dim == p
    assert res.g <= p * (1 + 1e-2) + 1e-9
    assert len(res.support) <= p * (p + 1) // 2
    assert res.weights.sum() == pytest.approx(1)
    assert np.all(res.weights >= 0)


def test_design_rejects_empty():
    with pytest.raises(ValueError):
        g_optimal_design(np.zeros((0, 3)))


# -- phased elimination ----------------------------------------------------------------------

def test_phase_budget_example():
    assert phase_budget(4, 0.5, 0.5, 2, 1, 0.1) == math.ceil(16 * math.log(40)) == 60
    assert phase_budget(4, 0.0, 0.5, 2, 1, 0.1) == 0


@given(seeds)
def test_noiseless_elimination_keeps_best_arm(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(8, 4))
    theta = rng.normal(size=4)
    means = X @ theta
    best = int(np.argmax(means))
    st_ = PhasedElimState(X, 0.1)
    sizes = []
    for t in range(3000):
        a = st_.select(t)
        st_.update(a, means[a])
        assert best in st_.active
        sizes.append(len(st_.active))
        if st_.committed_arm() is not None:
            break
    assert all(b <= a for a, b in zip(sizes, sizes[1:]))
    assert all(set(b) <= set(a) for a, b in zip(st_.history, st_.history[1:]))


def test_phased_elimination_plays_budget_per_phase(rng):
    arms = DiscreteActions(tuple(pauli_strings(1)))
    env = Environment(random_density_matrix(2, rng))
    trace = run_episode(env, arms, PhasedElimination(), 2000, seed=4)
    assert trace.pull_counts(3).sum() == 2000


# -- tomography ------------------------------------------------------------------------------

def _exact_counts(rho, trials):
    means = np.array([np.trace(rho @ P.op).real for P in pauli_strings(1)])
    n_plus = trials * (1 + means) / 2
    return n_plus, trials - n_plus


def test_pls_estimator_exact_counts(rng):
    trials = np.full(3, 1000.0)
    assert np.allclose(pls_linear_estimator(*_exact_counts(np.eye(2) / 2, trials), trials, 2), np.eye(2) / 2)
    for _ in range(10):
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        rho = pure_state(psi)
        L = pls_linear_estimator(*_exact_counts(rho, trials), trials, 2)
        assert np.allclose(L, rho, atol=1e-12)
        assert np.allclose(L, L.conj().T)
    with pytest.raises(ValueError):
        pls_linear_estimator([1, 1, 1], [0, 0, 1], [1, 1, 0], 2)


def test_project_to_simplex_oracle(rng):
    assert np.allclose(project_to_simplex([1.2, -0.2]), [1.0, 0.0])
    for _ in range(50):
        v = rng.normal(size=5)
        p = project_to_simplex(v)
        assert p.sum() == pytest.approx(1) and np.all(p >= 0)
        # KKT: p_i = max(v_i - tau, 0) for a single tau
        tau = (v - p)[p > 0]
        assert np.allclose(tau, tau[0])


def test_project_to_density_examples(rng):
    assert np.allclose(project_to_density(np.diag([1.2, -0.2])), np.diag([1.0, 0.0]))
    rho = random_density_matrix(3, rng)
    assert np.allclose(project_to_density(rho), rho, atol=1e-10)


def test_project_to_pure_examples():
    rho = pure_state([1, 1j])
    assert np.allclose(project_to_pure(rho, 0.0), rho, atol=1e-12)
    P = project_to_pure(np.diag([0.9, 0.1]), 0.25)
    assert np.allclose(P, np.diag([1.0, 0.0]))
    assert trace_norm(np.diag([0.9, 0.1]) - P) == pytest.approx(0.2)
    with pytest.raises(InfeasibleProjectionError):
        project_to_pure(np.eye(2) / 2, 0.5)


def test_top_eigenvector_tie_goes_low():
    v = top_eigenvector(np.eye(2) / 2)
    assert abs(v[0]) == pytest.approx(1)


# -- Bandit PLS ------------------------------------------------------------------------------

def test_pls_exploration_schedule():
    env = Environment(pure_state([1, 0]), pure=True)
    for n in (100, 1000, 12345):
        trace = run_episode(env, Rank1Actions(2), BanditPLS(), n, seed=n)
        assert trace.flags["explore_rounds"] == ceil_sqrt(n) == math.ceil(math.sqrt(n) - 1e-12)
        rep = gap_report(env.state, Rank1Actions(2))
        inst = np.diff(cumulative_regret(trace, rep), prepend=0.0)
        tail = inst[ceil_sqrt(n):]
        assert np.allclose(tail, tail[0])


def test_pls_commits_near_ground_state():
    env = Environment(pure_state([1, 0]), pure=True)
    good = 0
    for s in range(200):
        trace = run_episode(env, Rank1Actions(2), BanditPLS(), 10**6, seed=s)
        phi = trace.action(trace.n - 1)
        good += abs(phi[0]) ** 2 >= 0.99
    assert good >= 190


def test_pls_rejects_large_registers_and_short_horizons():
    with pytest.raises(IncompatibleActionSetError):
        BanditPLS().start(Rank1Actions(4), 100, np.random.default_rng(0))
    with pytest.raises(ValueError):
        BanditPLS().start(Rank1Actions(2), 4, np.random.default_rng(0))
    BanditPLS(allow_large=True).start(Rank1Actions(4), 10**4, np.random.default_rng(0))


def test_pls_tolerance_value():
    assert pls_tolerance(10**6, 2) ** 2 == pytest.approx(172 * math.log(10**6) / 1000)


# -- baselines and registry ------------------------------------------------------------------

def test_uniform_single_arm_and_determinism(rng):
    arms = DiscreteActions((QUBIT_PAULIS[0],))
    env = Environment(random_density_matrix(2, rng))
    assert np.all(run_episode(env, arms, UniformPolicy(), 100, seed=1).actions == 0)
    a = run_episode(env, QUBIT_PAULIS, UniformPolicy(), 100, seed=2)
    b = run_episode(env, QUBIT_PAULIS, UniformPolicy(), 100, seed=2)
    assert np.array_equal(a.actions, b.actions)


def test_two_phase_action_probs():
    pol = TwoPhasePolicy(switch=2)
    assert np.allclose(pol.action_probs([], 3), 1 / 3)
    assert np.allclose(pol.action_probs([(1, 1.0), (0, -1.0)], 3), [0, 1, 0])
    assert np.allclose(pol.action_probs([(1, 1.0), (1, 1.0), (0, 1.0)], 3), [0, 1, 0])


def test_make_policy():
    assert make_policy("ucb") == UCB()
    assert make_policy({"name": "linucb", "lam": 2.0}).lam == 2.0
    with pytest.raises(ValueError):
        make_policy("nope")
    with pytest.raises(ValueError):
        make_policy({"name": "ucb", "bogus": 1})
