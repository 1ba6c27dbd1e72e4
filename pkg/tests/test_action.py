import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfrelent.action import (
    EntropyInitialCost,
    PointInitialCost,
    as_initial_cost,
    boundary_trend,
    flux_cost,
    hamiltonian,
    hamiltonian_gradient,
    local_lagrangian,
    local_lagrangian_dual,
    minimize_action_Jt,
    quasipotential,
)
from mfrelent.dynamics import (
    RateFamily,
    drift,
    random_rate_matrix,
    solve_forward,
    stationary_of,
    with_diagonal,
)
from mfrelent.gibbs import curie_weiss, gibbs_constant_C, limit_rate_family, lyapunov_F
from mfrelent.simplex import relative_entropy

# positive root of m = tanh(2 m) mapped to p1 = (1 + m)/2 (brentq)
CW_BETA2_STABLE = 0.9787520120386344


def random_family(seed, d):
    rng = np.random.default_rng(seed)
    if seed % 2:
        return RateFamily.constant(random_rate_matrix(d, rng)), rng
    return limit_rate_family(curie_weiss(rng.uniform(0.2, 2.5), d=d)), rng


class TestHamiltonian:
    def test_zero_at_origin(self):
        fam = limit_rate_family(curie_weiss(1.0, d=3))
        assert hamiltonian(fam, [0.2, 0.3, 0.5], np.zeros(3)) == 0.0

    @given(st.integers(0, 10_000), st.floats(-5, 5))
    def test_shift_invariance(self, seed, c):
        fam, rng = random_family(seed, 3)
        p = rng.dirichlet(np.ones(3))
        a = rng.normal(size=3)
        assert hamiltonian(fam, p, a + c) == pytest.approx(hamiltonian(fam, p, a), rel=1e-10, abs=1e-12)

    @settings(max_examples=30)
    @given(st.integers(0, 10_000), st.integers(2, 5))
    def test_gradient_at_zero_is_drift(self, seed, d):
        fam, rng = random_family(seed, d)
        p = rng.dirichlet(np.ones(d))
        h = 1e-6
        fd = np.array([(hamiltonian(fam, p, h * e) - hamiltonian(fam, p, -h * e)) / (2 * h) for e in np.eye(d)])
        np.testing.assert_allclose(fd, drift(fam, p), atol=1e-8)
        np.testing.assert_allclose(hamiltonian_gradient(fam, p, np.zeros(d)), drift(fam, p), atol=1e-14)


class TestLagrangian:
    @settings(max_examples=60)
    @given(st.integers(0, 10_000), st.integers(2, 5))
    def test_calibration(self, seed, d):
        fam, rng = random_family(seed, d)
        p = rng.dirichlet(np.ones(d))
        assert local_lagrangian(fam, p, drift(fam, p)) < 1e-8

    @pytest.mark.parametrize("p1,z", [(0.3, 0.2), (0.6, -0.45), (0.5, 1.3), (0.1, -0.05)])
    def test_dense_grid_oracle(self, p1, z):
        a, b = 1.3, 0.7
        fam = RateFamily.constant(with_diagonal([[0.0, a], [b, 0.0]]))
        p = np.array([p1, 1 - p1])
        zeta = np.array([-z, z])

        def objective(s):
            return z * s - (p[0] * a * np.expm1(s) + p[1] * b * np.expm1(-s))

        grid = np.linspace(-12, 12, 2_400_001)
        k = int(np.argmax(objective(grid)))
        fine = np.linspace(grid[k - 1], grid[k + 1], 200_001)
        oracle = objective(fine).max()
        assert local_lagrangian(fam, p, zeta) == pytest.approx(oracle, abs=1e-7)

    @settings(max_examples=30)
    @given(st.integers(0, 10_000))
    def test_convex_increasing_along_rays(self, seed):
        fam, rng = random_family(seed, 3)
        p = rng.dirichlet(np.ones(3))
        zeta = rng.normal(size=3)
        zeta -= zeta.mean()
        cs = np.linspace(1, 4, 13)
        base = drift(fam, p)
        # along rays through the zero-cost velocity
        vals = np.array([local_lagrangian(fam, p, base + c * zeta) for c in cs])
        assert np.all(np.diff(vals) > 0)
        assert np.all(vals[:-2] - 2 * vals[1:-1] + vals[2:] >= -1e-9)

    @settings(max_examples=60)
    @given(st.integers(0, 10_000), st.integers(2, 5))
    def test_duality_gradient_identity(self, seed, d):
        fam, rng = random_family(seed, d)
        p = rng.dirichlet(np.ones(d))
        zeta = rng.normal(scale=rng.uniform(0.05, 2), size=d)
        zeta -= zeta.mean()
        res = local_lagrangian_dual(fam, p, zeta)
        if res.finite:
            np.testing.assert_allclose(hamiltonian_gradient(fam, p, res.alpha), zeta, atol=1e-8)

    @settings(max_examples=30)
    @given(st.integers(0, 10_000))
    def test_primal_upper_bound(self, seed):
        # any fluxes realising zeta cost at least L
        fam, rng = random_family(seed, 3)
        p = rng.dirichlet(np.ones(3))
        u = rng.uniform(0, 1, size=(3, 3))
        np.fill_diagonal(u, 0)
        zeta = u.sum(axis=0) - u.sum(axis=1)
        assert local_lagrangian(fam, p, zeta) <= flux_cost(fam, p, u) + 1e-9

    def test_unreachable_is_infinite(self):
        fam = RateFamily.constant(with_diagonal([[0.0, 1.0], [1.0, 0.0]]))
        assert local_lagrangian(fam, [1.0, 0.0], [1.0, -1.0]) == math.inf

    def test_requires_tangent(self):
        fam = RateFamily.constant(with_diagonal([[0.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(ValueError):
            local_lagrangian(fam, [0.5, 0.5], [0.1, 0.1])


class TestInitialCosts:
    def test_point(self):
        c = as_initial_cost([0.5, 0.5])
        assert isinstance(c, PointInitialCost)
        assert c(np.array([0.5, 0.5])) == 0.0 and c(np.array([0.4, 0.6])) == math.inf

    def test_entropy_gradient(self):
        c = EntropyInitialCost(np.array([0.2, 0.3, 0.5]))
        p = np.array([0.3, 0.3, 0.4])
        h = 1e-6
        fd = [(c(p + h * e) - c(p - h * e)) / (2 * h) for e in np.eye(3)]
        np.testing.assert_allclose(c.gradient(p), fd, atol=1e-7)

    def test_callable_gradient(self):
        c = as_initial_cost(lambda p: float(np.sum(p**2)))
        np.testing.assert_allclose(c.gradient(np.array([0.2, 0.8])), [0.4, 1.6], atol=1e-6)


class TestMinimizeAction:
    def test_zero_cost_path(self):
        fam = limit_rate_family(curie_weiss(1.2, d=3))
        p0 = np.array([0.6, 0.3, 0.1])
        q = solve_forward(fam, p0, 1.0, 1e-3).final
        res = minimize_action_Jt(fam, p0, q, 1.0, nodes=64, restarts=2)
        assert res.value <= 1e-4
        np.testing.assert_allclose(res.path.points[0], p0, atol=1e-12)
        np.testing.assert_allclose(res.path.points[-1], q, atol=1e-12)

    def test_short_time_limit(self):
        fam = limit_rate_family(curie_weiss(1.0))
        rho = np.array([0.5, 0.5])
        q = np.array([0.8, 0.2])
        res = minimize_action_Jt(fam, EntropyInitialCost(rho), q, 1e-3, nodes=16, restarts=2)
        assert abs(res.value - relative_entropy(q, rho)) < 1e-2
        assert res.value <= relative_entropy(q, rho) + 1e-9

    def test_linear_two_state_long_time(self):
        # for a reversible linear chain the cost of reaching q from pi in long time is R(q || pi)
        G = with_diagonal([[0.0, 1.3], [0.7, 0.0]])
        fam = RateFamily.constant(G)
        pi = stationary_of(G)
        q = np.array([0.5, 0.5])
        res = minimize_action_Jt(fam, pi, q, 10.0, nodes=41, restarts=2)
        assert res.value == pytest.approx(relative_entropy(q, pi), abs=5e-4)

    def test_node_refinement_stable(self):
        fam = limit_rate_family(curie_weiss(0.5))
        pi = np.array([0.5, 0.5])
        q = np.array([0.7, 0.3])
        a = minimize_action_Jt(fam, pi, q, 1.0, nodes=32, restarts=2).value
        b = minimize_action_Jt(fam, pi, q, 1.0, nodes=64, restarts=2).value
        assert abs(a - b) < 1e-3

    def test_restart_best_is_reported(self):
        fam = limit_rate_family(curie_weiss(0.5))
        res = minimize_action_Jt(fam, [0.5, 0.5], [0.7, 0.3], 1.0, nodes=16, restarts=4, seed=3)
        assert len(res.restart_values) == 4
        assert res.value == min(res.restart_values)

    def test_boundary_target_flagged(self):
        fam = RateFamily.constant(with_diagonal([[0.0, 1.0], [1.0, 0.0]]))
        res = minimize_action_Jt(fam, [0.5, 0.5], [1.0, 0.0], 1.0, nodes=16, restarts=1)
        assert "boundary-target" in res.flags
        trend = boundary_trend(fam, [0.5, 0.5], [1.0, 0.0], 1.0, eps_list=(1e-2, 1e-3), nodes=16, restarts=1)
        assert trend[1][1] >= trend[0][1]

    def test_bad_arguments(self):
        fam = limit_rate_family(curie_weiss(0.5))
        with pytest.raises(ValueError):
            minimize_action_Jt(fam, [0.5, 0.5], [0.7, 0.3], 0.0)
        with pytest.raises(ValueError):
            minimize_action_Jt(fam, [0.5, 0.5], [0.7, 0.3], 1.0, nodes=4)

    def test_path_csv(self, tmp_path):
        fam = limit_rate_family(curie_weiss(0.5))
        res = minimize_action_Jt(fam, [0.5, 0.5], [0.6, 0.4], 0.5, nodes=8, restarts=1)
        res.path.to_csv(tmp_path / "p.csv")
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "time,p1,p2" and len(lines) == 9


class TestQuasipotential:
    def test_at_fixed_point(self):
        fam = limit_rate_family(curie_weiss(0.5))
        res = quasipotential(fam, [0.5, 0.5], [0.5, 0.5])
        assert res.value < 1e-6

    def test_requires_fixed_point(self):
        fam = limit_rate_family(curie_weiss(0.5))
        with pytest.raises(ValueError):
            quasipotential(fam, [0.6, 0.4], [0.5, 0.5])

    def test_linear_plateau_and_entropy_oracle(self):
        G = with_diagonal([[0.0, 1.3], [0.7, 0.0]])
        pi = stationary_of(G)
        q = np.array([0.5, 0.5])
        res = quasipotential(RateFamily.constant(G), pi, q, horizons=(2, 5, 10, 20, 40), restarts=3)
        raw = dict(zip(res.horizons, res.raw_values))
        assert abs(raw[20.0] - raw[40.0]) < 1e-3
        assert np.all(np.diff(res.running_min) <= 0)
        assert res.value == pytest.approx(relative_entropy(q, pi), abs=1e-3)

    def test_gibbs_free_energy_oracle(self):
        # reversible Gibbs limit: V(q) = F(q) - F(pi*)
        model = curie_weiss(0.5)
        C = gibbs_constant_C(model)
        q = np.array([0.7, 0.3])
        oracle = lyapunov_F(model, q, C) - lyapunov_F(model, [0.5, 0.5], C)
        res = quasipotential(limit_rate_family(model), [0.5, 0.5], q, horizons=(2, 5, 10), restarts=3)
        assert res.value == pytest.approx(oracle, abs=2e-3)

    def test_large_beta_ordering(self):
        model = curie_weiss(2.0)
        fam = limit_rate_family(model)
        pi = np.array([CW_BETA2_STABLE, 1 - CW_BETA2_STABLE])
        kw = dict(horizons=(2, 5, 10), restarts=3)
        v_mid = quasipotential(fam, pi, [0.5, 0.5], **kw).value
        v_basin = quasipotential(fam, pi, [0.8, 0.2], **kw).value
        assert v_mid > v_basin > 0
        C = gibbs_constant_C(model)
        F = lambda p: lyapunov_F(model, p, C)
        assert v_basin == pytest.approx(F([0.8, 0.2]) - F(pi), abs=2e-3)
