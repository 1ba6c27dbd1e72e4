import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfrelent.dynamics import (
    RateFamily,
    drift,
    find_fixed_points,
    random_rate_matrix,
    solve_forward,
    stationary_of,
)
from mfrelent.gibbs import (
    DYNAMICS,
    Adjacency,
    AffinePotential,
    GibbsModel,
    GibbsPotential,
    QuadraticPotential,
    affine_model,
    curie_weiss,
    energy_differences,
    energy_U,
    field_H,
    field_H_all,
    find_reverse_entropy_increase,
    gibbs_constant_C,
    glauber_rate,
    limit_rate_family,
    limit_stationary_pi,
    load_model,
    log_partition_function,
    lyapunov_F,
    lyapunov_F_affine,
    mean_energy_phi,
    model_from_dict,
    model_to_dict,
    prelimit_rate_family,
    psi_diff,
    remainder_B,
    reverse_candidate,
)
from mfrelent.simplex import Lattice, relative_entropy, uniform

# min over a 10^6-point grid of R(q||nu) + 2 beta q(1-q), minus log 2 (Curie-Weiss)
CW_C_GRID = {0.5: -0.4431471805599453, 1.0: -0.1931471805599454, 2.0: -0.019671067986866353}


def affine_double_sum(V, W, beta, config):
    N = len(config)
    return sum(V[a] for a in config) + beta / N * sum(W[a, b] for a in config for b in config)


def random_affine(seed, d=3, dynamics="metropolis"):
    rng = np.random.default_rng(seed)
    return affine_model(rng.normal(size=d), rng.normal(size=(d, d)), rng.uniform(0.3, 2.0), dynamics=dynamics)


def quadratic_model(seed=0, d=3):
    rng = np.random.default_rng(seed)
    pot = QuadraticPotential(rng.normal(size=d), rng.normal(size=(d, d)), 0.5 * rng.normal(size=(d, d, d)))
    return GibbsModel(pot, Adjacency.complete(d))


class TestPotentials:
    def test_affine_rejects_bad_beta(self):
        with pytest.raises(ValueError):
            AffinePotential([0, 0], np.eye(2), beta=0.0)

    def test_general_potential_gradient_checked(self):
        good = GibbsPotential(2, lambda x, p: p[x] ** 2, lambda x, p: 2 * p[x] * np.eye(2)[x])
        assert good.values([0.5, 0.5]).shape == (2,)
        with pytest.raises(ValueError):
            GibbsPotential(2, lambda x, p: p[x] ** 2, lambda x, p: np.eye(2)[x])

    def test_quadratic_gradient_matches_fd(self):
        quadratic_model().potential.check_gradient(tol=1e-7)

    def test_adjacency_validation(self):
        with pytest.raises(ValueError):
            Adjacency([[0, 1], [0, 0]])
        with pytest.raises(ValueError):
            Adjacency([[1, 1], [1, 0]])
        with pytest.raises(ValueError):
            Adjacency(np.zeros((3, 3)))
        Adjacency.path(4)


class TestEnergy:
    def test_phi_zero_without_interaction(self):
        m = affine_model(np.zeros(3), np.zeros((3, 3)), 1.3)
        assert mean_energy_phi(m, [0.2, 0.3, 0.5]) == 0.0

    def test_phi_curie_weiss_half(self):
        assert mean_energy_phi(curie_weiss(1.0), [0.5, 0.5]) == pytest.approx(0.5, abs=1e-15)

    def test_N_phi_matches_brute_force(self):
        m = random_affine(1)
        pot = m.potential
        rng = np.random.default_rng(2)
        for N in range(1, 9):
            config = rng.integers(0, 3, size=N)
            r = np.bincount(config, minlength=3) / N
            brute = affine_double_sum(pot.V, pot.W, pot.beta, config)
            assert N * mean_energy_phi(m, r) == pytest.approx(brute, abs=1e-12)

    def test_decoupled(self):
        m = affine_model([0.3, -1.0, 2.0], np.zeros((3, 3)), 1.0)
        config = [0, 1, 1, 2]
        assert energy_U(m, config) == pytest.approx(0.3 - 2.0 + 2.0, abs=1e-14)

    def test_single_state(self):
        m = random_affine(3)
        pot = m.potential
        assert energy_U(m, [1] * 5) == pytest.approx(5 * (pot.V[1] + pot.beta * pot.W[1, 1]), abs=1e-12)

    def test_double_sum_random(self):
        m = random_affine(4)
        pot = m.potential
        config = np.random.default_rng(5).integers(0, 3, size=6)
        assert energy_U(m, config) == pytest.approx(affine_double_sum(pot.V, pot.W, pot.beta, config), abs=1e-12)

    def test_permutation_invariant(self):
        m = quadratic_model()
        for config in itertools.product(range(3), repeat=4):
            base = energy_U(m, config)
            for perm in itertools.permutations(config):
                assert energy_U(m, perm) == pytest.approx(base, abs=1e-12)


class TestField:
    def test_symmetric_affine(self):
        W = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 2.0], [0.5, 2.0, 0.0]])
        m = affine_model(np.zeros(3), W, 1.0)
        p = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(field_H_all(m, p), 2 * W @ p, atol=1e-14)

    def test_decoupled(self):
        m = affine_model([1.0, -2.0], np.zeros((2, 2)), 1.0)
        assert field_H(m, 1, [0.4, 0.6]) == -2.0

    def test_generic_affine_vs_fd(self):
        m = random_affine(6)
        pot = m.potential
        p = np.array([0.1, 0.6, 0.3])
        expected = pot.V + pot.beta * (pot.W @ p + pot.W.T @ p)
        np.testing.assert_allclose(field_H_all(m, p), expected, atol=1e-12)
        # H is the gradient of Phi
        h = 1e-6
        fd = [(mean_energy_phi(m, p + h * e) - mean_energy_phi(m, p - h * e)) / (2 * h) for e in np.eye(3)]
        np.testing.assert_allclose(field_H_all(m, p), fd, atol=1e-6)

    def test_psi_rejects_equal_states(self):
        with pytest.raises(ValueError):
            psi_diff(curie_weiss(1.0), 0, 0, [0.5, 0.5])

    @given(st.integers(0, 1000), st.floats(0.01, 0.99))
    def test_psi_antisymmetric(self, seed, a):
        m = random_affine(seed)
        p = np.array([a, (1 - a) / 2, (1 - a) / 2])
        assert psi_diff(m, 0, 2, p) + psi_diff(m, 2, 0, p) == 0.0

    def test_psi_curie_weiss(self):
        beta = 1.4
        p = np.array([0.7, 0.3])
        assert psi_diff(curie_weiss(beta), 0, 1, p) == pytest.approx(2 * beta * (p[0] - p[1]), abs=1e-14)


class TestRates:
    def test_glauber_kinds(self):
        assert glauber_rate("metropolis", -1.0) == 1.0
        assert glauber_rate("heat_bath", 0.0) == 0.5
        assert glauber_rate("symmetrized", 0.0) == 1.0
        with pytest.raises(ValueError):
            glauber_rate("kawasaki", 0.0)

    def test_free_metropolis(self):
        m = affine_model(np.zeros(3), np.zeros((3, 3)), 1.0, adjacency=Adjacency.path(3).alpha)
        G = prelimit_rate_family(m, 7)(np.array([3, 2, 2]) / 7)
        off = G - np.diag(np.diag(G))
        np.testing.assert_array_equal(off, m.adjacency.alpha)

    def test_free_heat_bath(self):
        m = affine_model(np.zeros(2), np.zeros((2, 2)), 1.0, dynamics="heat_bath")
        assert prelimit_rate_family(m, 4)(np.array([0.5, 0.5]))[0, 1] == 0.5

    def test_N_must_be_positive(self):
        with pytest.raises(ValueError):
            prelimit_rate_family(curie_weiss(1.0), 0)

    @pytest.mark.parametrize("model", [random_affine(7), quadratic_model(8)])
    def test_delta_matches_brute_force(self, model):
        for N in range(1, 9):
            for config in itertools.islice(itertools.product(range(3), repeat=N), 0, None, max(1, 3**N // 40)):
                r = np.bincount(config, minlength=3) / N
                D = energy_differences(model, N, r)
                for i, x in enumerate(config):
                    for y in range(3):
                        if y == x:
                            continue
                        moved = list(config)
                        moved[i] = y
                        brute = energy_U(model, moved) - energy_U(model, config)
                        assert D[x, y] == pytest.approx(brute, abs=1e-10)

    def test_remainder_zero_without_interaction(self):
        m = affine_model([0.1, 0.5, -0.2], np.zeros((3, 3)), 1.0)
        for r in Lattice(6, 3).points:
            for x, y in itertools.permutations(range(3), 2):
                assert abs(remainder_B(m, 6, x, y, r)) < 1e-14

    def test_curie_weiss_remainder_is_exact(self):
        # for Curie-Weiss the correction is the constant -2 beta / N
        beta = 1.3
        for r in Lattice(10, 2).points:
            assert remainder_B(curie_weiss(beta), 10, 0, 1, r) == pytest.approx(-2 * beta / 10, abs=1e-13)

    def test_remainder_decay(self):
        m = curie_weiss(1.0)

        def sup_B(N):
            return max(abs(remainder_B(m, N, 0, 1, r)) for r in Lattice(N, 2).points if r[0] > 0)

        for N in (10, 20):
            assert sup_B(2 * N) / sup_B(N) <= 0.6

    def test_quadratic_remainder_bounded(self):
        m = quadratic_model(9)
        scaled = []
        for N in (10, 20, 40, 80, 160):
            worst = max(abs(remainder_B(m, N, x, y, r))
                        for r in Lattice(N, 3).points[:: max(1, N // 5)]
                        for x, y in itertools.permutations(range(3), 2) if r[x] > 0)
            scaled.append(N * worst)
        assert max(scaled) < 2 * scaled[0] + 1e-12

    def test_limit_free_rates(self):
        m = affine_model(np.zeros(3), np.zeros((3, 3)), 1.0)
        G = limit_rate_family(m)([0.2, 0.3, 0.5])
        np.testing.assert_allclose(G - np.diag(np.diag(G)), m.adjacency.alpha)

    @pytest.mark.parametrize("kind", DYNAMICS)
    def test_uniform_convergence_rate(self, kind):
        m = curie_weiss(1.2, dynamics=kind)
        lim = limit_rate_family(m)
        grid = [np.array([a, 1 - a]) for a in np.linspace(0, 1, 101)]
        consts = []
        for N in (20, 40, 80, 160, 320):
            pre = prelimit_rate_family(m, N)
            consts.append(N * max(np.abs(pre(p) - lim(p)).max() for p in grid))
        assert max(consts) / min(consts) < 1.2

    @pytest.mark.parametrize("kind", DYNAMICS)
    def test_limit_detailed_balance(self, kind):
        m = random_affine(10, dynamics=kind)
        p = np.array([0.25, 0.35, 0.4])
        pi = limit_stationary_pi(m, p)
        G = limit_rate_family(m)(p)
        flux = pi[:, None] * G
        np.testing.assert_allclose(flux, flux.T, atol=1e-12)


class TestStationaryPi:
    def test_free_uniform(self):
        m = affine_model(np.zeros(4), np.zeros((4, 4)), 1.0)
        np.testing.assert_allclose(limit_stationary_pi(m, [0.1, 0.2, 0.3, 0.4]), uniform(4))

    def test_invariant_for_limit_rates(self):
        m = random_affine(11)
        for p in np.random.default_rng(12).dirichlet(np.ones(3), size=10):
            pi = limit_stationary_pi(m, p)
            assert abs(pi.sum() - 1) < 1e-12 and pi.min() > 0
            np.testing.assert_allclose(pi @ limit_rate_family(m)(p), 0, atol=1e-12)

    def test_fixed_points_match_bisection(self):
        from scipy.optimize import brentq

        beta = 2.0
        m = curie_weiss(beta)
        mag = brentq(lambda s: s - np.tanh(beta * s), 1e-3, 1.0)
        found = sorted(p[0] for p in find_fixed_points(limit_rate_family(m)))
        np.testing.assert_allclose(found, [(1 - mag) / 2, 0.5, (1 + mag) / 2], atol=1e-8)
        for a in found:
            np.testing.assert_allclose(limit_stationary_pi(m, [a, 1 - a]), [a, 1 - a], atol=1e-8)


class TestGibbsConstant:
    def test_no_interaction(self):
        m = affine_model(np.zeros(3), np.zeros((3, 3)), 1.0)
        assert gibbs_constant_C(m) == pytest.approx(-np.log(3), abs=1e-10)

    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    def test_curie_weiss_grid_oracle(self, beta):
        assert gibbs_constant_C(curie_weiss(beta)) == pytest.approx(CW_C_GRID[beta], abs=1e-6)

    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    def test_partition_function_limit(self, beta):
        m = curie_weiss(beta)
        C = gibbs_constant_C(m)
        gaps = [abs(log_partition_function(m, N) / N + C) for N in (25, 50, 100, 200)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_log_partition_brute_force(self):
        m = random_affine(13)
        N = 5
        brute = np.log(sum(np.exp(-energy_U(m, c)) for c in itertools.product(range(3), repeat=N)))
        assert log_partition_function(m, N) == pytest.approx(brute, abs=1e-12)


class TestLyapunov:
    def test_reduces_to_relative_entropy(self):
        m = affine_model(np.zeros(3), np.zeros((3, 3)), 1.0)
        p = np.array([0.2, 0.5, 0.3])
        assert lyapunov_F(m, p, -np.log(3)) == pytest.approx(relative_entropy(p, uniform(3)), abs=1e-14)
        assert lyapunov_F(m, uniform(3), -np.log(3)) == pytest.approx(0.0, abs=1e-15)

    def test_finite_on_boundary(self):
        assert np.isfinite(lyapunov_F(curie_weiss(1.0), [1.0, 0.0], 0.0))

    def test_affine_form_identity(self):
        m = random_affine(14)
        pot = m.potential
        for p in np.random.default_rng(15).dirichlet(np.ones(3), size=20):
            assert lyapunov_F(m, p, 0.3) == pytest.approx(lyapunov_F_affine(pot.V, pot.W, pot.beta, p, 0.3), abs=1e-12)

    def test_minimiser_small_beta(self):
        m = curie_weiss(0.5)
        grid = np.linspace(0.001, 0.999, 999)
        vals = [lyapunov_F(m, [a, 1 - a], 0.0) for a in grid]
        assert grid[int(np.argmin(vals))] == pytest.approx(0.5, abs=1e-3)

    @pytest.mark.parametrize("kind", DYNAMICS)
    def test_descent_along_limit_flow(self, kind):
        m = random_affine(16, dynamics=kind)
        traj = solve_forward(limit_rate_family(m), [0.8, 0.1, 0.1], 8.0, 1e-2)
        vals = [lyapunov_F(m, p, 0.0) for p in traj.points]
        assert np.all(np.diff(vals) <= 1e-12)


class TestReverseCandidate:
    def test_zero_at_pi(self):
        assert reverse_candidate([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_linear_nonincreasing(self):
        G = random_rate_matrix(3, np.random.default_rng(17))
        pi = stationary_of(G)
        traj = solve_forward(RateFamily.constant(G), [0.05, 0.05, 0.9], 6.0, 1e-2)
        vals = [reverse_candidate(pi, p) for p in traj.points]
        assert np.all(np.diff(vals) <= 1e-12)

    def test_search_finds_increase(self):
        hit = find_reverse_entropy_increase()
        assert hit is not None
        assert hit.increase >= 1e-4
        assert 1.5 <= hit.beta <= 3.0
        fam = limit_rate_family(curie_weiss(hit.beta))
        assert np.abs(drift(fam, hit.pi_star)).sum() < 1e-12


class TestModelFiles:
    def test_round_trip_json(self, tmp_path):
        m = random_affine(18)
        path = tmp_path / "m.json"
        path.write_text(json.dumps(model_to_dict(m)))
        back = load_model(path)
        p = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(field_H_all(back, p), field_H_all(m, p))

    def test_toml_table_potential(self, tmp_path):
        path = tmp_path / "m.toml"
        path.write_text(
            'd = 2\nlabels = ["a", "b"]\ndynamics = "heat_bath"\nadjacency = [[0, 1], [1, 0]]\n'
            "[potential.table]\nconstant = [0.0, 1.0]\nlinear = [[0.0, 1.0], [1.0, 0.0]]\n"
        )
        m = load_model(path)
        assert m.dynamics == "heat_bath" and m.labels == ("a", "b")
        assert isinstance(m.potential, QuadraticPotential)

    def test_missing_fields_named(self):
        with pytest.raises(KeyError) as exc:
            model_from_dict({"d": 2, "potential": {"affine": {"V": [0, 0], "W": [[0, 1], [1, 0]]}}})
        assert "adjacency" in str(exc.value)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_pi_normalised(seed):
    m = random_affine(seed)
    pi = limit_stationary_pi(m, np.random.default_rng(seed).dirichlet(np.ones(3)))
    assert abs(pi.sum() - 1) < 1e-12 and np.all(pi > 0)
