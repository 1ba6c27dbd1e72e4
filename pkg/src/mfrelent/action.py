"""Action functionals for the empirical-measure process.

The local cost of moving the empirical measure with velocity ``zeta`` at
``p`` is the Legendre transform

    L(p, zeta) = sup_alpha { <alpha, zeta> - H(p, alpha) },
    H(p, alpha) = sum_{x != y} p_x Gamma_xy(p) (exp(alpha_y - alpha_x) - 1),

which equals the cheapest flux decomposition
``sum p_x Gamma_xy ell(u_xy / (p_x Gamma_xy))`` over fluxes with net
``zeta``.  Paths are discretised on a uniform grid, nodes are kept in the
interior of the simplex through softmax coordinates, and the discrete action
is minimised by L-BFGS with an analytic gradient (envelope theorem for the
dual variable, central differences for the rates).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import drift, solve_forward
from .simplex import relative_entropy, uniform

DUAL_GTOL = 1e-10
DUAL_BOUND = 60.0


def _flux_weights(family, p):
    """``A[x, y] = p_x Gamma_xy(p)`` with a zero diagonal."""
    p = np.asarray(p, dtype=float)
    A = p[:, None] * family(p)
    np.fill_diagonal(A, 0.0)
    return A


def canonical(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return alpha - alpha.mean(axis=-1, keepdims=True)


def _ham(A, alpha):
    """Batched ``H`` for weights ``A`` of shape ``(..., d, d)``."""
    # absent edges contribute nothing even when the tilt overflows
    with np.errstate(over="ignore", invalid="ignore"):
        E = np.exp(alpha[..., None, :] - alpha[..., :, None])
        return np.sum(np.where(A > 0, A * (E - 1.0), 0.0), axis=(-2, -1))


def _ham_grad(A, alpha):
    """Batched ``grad_alpha H``: net inflow of the tilted fluxes, and the fluxes."""
    U = A * np.exp(alpha[..., None, :] - alpha[..., :, None])
    return U.sum(axis=-2) - U.sum(axis=-1), U


def hamiltonian(family, p, alpha):
    """``H(p, alpha) = sum_{x != y} p_x Gamma_xy(p) (e^{alpha_y - alpha_x} - 1)``."""
    return float(_ham(_flux_weights(family, p), np.asarray(alpha, dtype=float)))


def hamiltonian_gradient(family, p, alpha):
    g, _ = _ham_grad(_flux_weights(family, p), np.asarray(alpha, dtype=float))
    return g


def _dual_solve(A, zeta, alpha0=None, gtol=DUAL_GTOL, bound=DUAL_BOUND, max_iter=200):
    """Maximise ``<alpha, zeta> - H`` for a batch; returns ``(values, alphas, finite)``.

    Newton steps use the weighted graph Laplacian of the tilted fluxes with
    the constant direction removed, followed by backtracking on the
    objective.  An iterate leaving the box ``|alpha| <= bound`` marks the
    supremum as infinite.
    """
    A = np.asarray(A, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    m, d = zeta.shape
    alpha = np.zeros((m, d)) if alpha0 is None else canonical(alpha0).copy()
    ones = np.full((d, d), 1.0 / d)
    finite = np.ones(m, dtype=bool)
    active = np.ones(m, dtype=bool)

    def obj(Ab, zb, ab):
        return np.einsum("ij,ij->i", ab, zb) - _ham(Ab, ab)

    f = obj(A, zeta, alpha)
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        Ai, zi, ai = A[idx], zeta[idx], alpha[idx]
        hg, U = _ham_grad(Ai, ai)
        g = zi - hg
        done = np.abs(g).max(axis=1) < gtol
        active[idx[done]] = False
        keep = ~done
        if not keep.any():
            break
        idx, Ai, zi, ai, g, U = idx[keep], Ai[keep], zi[keep], ai[keep], g[keep], U[keep]
        S = U + np.swapaxes(U, -1, -2)
        lap = -S
        diag = S.sum(axis=-1)
        lap[:, np.arange(d), np.arange(d)] += diag
        try:
            step = np.linalg.solve(lap + ones, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(lap[0] + ones, g[0], rcond=None)[0][None, :]
        step = canonical(step)
        t = np.ones(len(idx))
        fi = f[idx]
        cand = ai + step
        fc = obj(Ai, zi, cand)
        slack = 1e-13 * (1.0 + np.abs(fi))
        bad = ~(fc >= fi - slack)
        for _ls in range(60):
            if not bad.any():
                break
            t[bad] *= 0.5
            cand[bad] = ai[bad] + t[bad, None] * step[bad]
            fc[bad] = obj(Ai[bad], zi[bad], cand[bad])
            bad = ~(fc >= fi - slack)
        stalled = bad
        alpha[idx] = np.where(stalled[:, None], ai, cand)
        f[idx] = np.where(stalled, fi, fc)
        if stalled.any():
            active[idx[stalled]] = False
        blown = np.abs(alpha[idx]).max(axis=1) > bound
        if blown.any():
            finite[idx[blown]] = False
            active[idx[blown]] = False
    # anything still active did not reach gtol; treat as finite only if the
    # gradient is small relative to zeta
    if active.any():
        idx = np.nonzero(active)[0]
        hg, _ = _ham_grad(A[idx], alpha[idx])
        g = np.abs(zeta[idx] - hg).max(axis=1)
        finite[idx[g > 1e-6 * (1 + np.abs(zeta[idx]).max(axis=1))]] = False
    vals = np.where(finite, np.maximum(f, 0.0), np.inf)
    return vals, alpha, finite


@dataclass
class LagrangianResult:
    value: float
    alpha: np.ndarray
    finite: bool

    def __float__(self):
        return self.value


def local_lagrangian_dual(family, p, zeta, alpha0=None):
    """:func:`local_lagrangian` together with the maximising dual vector."""
    zeta = np.asarray(zeta, dtype=float)
    if abs(zeta.sum()) > 1e-10:
        raise ValueError("zeta must be tangent to the simplex (components summing to zero)")
    A = _flux_weights(family, p)
    vals, alphas, finite = _dual_solve(A[None], zeta[None], None if alpha0 is None else np.asarray(alpha0)[None])
    return LagrangianResult(float(vals[0]), alphas[0], bool(finite[0]))


def local_lagrangian(family, p, zeta):
    """Cost ``L(p, zeta) >= 0`` of velocity ``zeta`` at ``p``; ``inf`` if unreachable."""
    return local_lagrangian_dual(family, p, zeta).value


def flux_cost(family, p, fluxes):
    """Primal cost ``sum p_x Gamma_xy ell(u_xy / (p_x Gamma_xy))`` of given fluxes."""
    A = _flux_weights(family, p)
    u = np.asarray(fluxes, dtype=float)
    mask = ~np.eye(A.shape[0], dtype=bool)
    total = 0.0
    for a, v in zip(A[mask], u[mask]):
        if a > 0:
            total += v * np.log(v / a) - v + a if v > 0 else a
        elif v > 0:
            return np.inf
    return total


# initial costs -------------------------------------------------------------


@dataclass(frozen=True)
class PointInitialCost:
    """Zero at ``anchor`` and ``+inf`` elsewhere (deterministic start)."""

    anchor: np.ndarray

    def __call__(self, p):
        return 0.0 if np.allclose(p, self.anchor, atol=1e-12) else np.inf


@dataclass(frozen=True)
class EntropyInitialCost:
    """``R(p || rho)``: start from the product law with marginal ``rho``."""

    rho: np.ndarray

    def __call__(self, p):
        return relative_entropy(p, self.rho)

    def gradient(self, p):
        return np.log(p) - np.log(self.rho) + 1.0


@dataclass(frozen=True)
class CallableInitialCost:
    fn: object
    grad: object = None

    def __call__(self, p):
        return float(self.fn(p))

    def gradient(self, p, h=1e-7):
        if self.grad is not None:
            return np.asarray(self.grad(p), dtype=float)
        g = np.empty(len(p))
        for i in range(len(p)):
            e = np.zeros(len(p))
            e[i] = h
            g[i] = (self.fn(p + e) - self.fn(p - e)) / (2 * h)
        return g


def as_initial_cost(J0):
    if isinstance(J0, (PointInitialCost, EntropyInitialCost, CallableInitialCost)):
        return J0
    if callable(J0):
        return CallableInitialCost(J0)
    return PointInitialCost(np.asarray(J0, dtype=float))


# paths ---------------------------------------------------------------------


@dataclass
class PathVariable:
    times: np.ndarray
    points: np.ndarray

    def to_csv(self, path):
        d = self.points.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + [f"p{k + 1}" for k in range(d)])
            for t, p in zip(self.times, self.points):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in p])


@dataclass
class ActionResult:
    value: float
    path: PathVariable
    converged: bool
    flags: tuple = ()
    restart_values: list = field(default_factory=list)

    def __float__(self):
        return self.value


def _softmax(theta):
    z = np.concatenate([theta, np.zeros(theta.shape[:-1] + (1,))], axis=-1)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _logit(p):
    p = np.clip(np.asarray(p, dtype=float), 1e-300, None)
    return np.log(p[..., :-1]) - np.log(p[..., -1:])


class _DiscreteAction:
    """Discrete action over free node coordinates, with gradient."""

    def __init__(self, family, J0, q, t, nodes, fd_h=1e-7):
        self.family = family
        self.J0 = J0
        self.q = np.asarray(q, dtype=float)
        self.d = len(self.q)
        self.nodes = nodes
        self.dt = t / (nodes - 1)
        self.free_start = not isinstance(J0, PointInitialCost)
        self.start = None if self.free_start else np.asarray(J0.anchor, dtype=float)
        self.n_free = nodes - 1 if self.free_start else nodes - 2
        self.fd_h = fd_h
        self._alpha = None

    def assemble(self, x):
        theta = x.reshape(self.n_free, self.d - 1)
        phis_free = _softmax(theta)
        parts = [phis_free, self.q[None]] if self.free_start else [self.start[None], phis_free, self.q[None]]
        return np.vstack(parts), phis_free

    def segments(self, phis):
        mids = 0.5 * (phis[1:] + phis[:-1])
        vel = (phis[1:] - phis[:-1]) / self.dt
        return mids, vel

    def __call__(self, x):
        phis, phis_free = self.assemble(x)
        mids, vel = self.segments(phis)
        A = np.array([_flux_weights(self.family, m) for m in mids])
        vals, alphas, finite = _dual_solve(A, vel, self._alpha)
        if not finite.all():
            self._alpha = None
            return 1e10, np.zeros_like(x)
        self._alpha = alphas
        value = self.dt * vals.sum()
        # dL/dp = -dH/dp at the optimal alpha (central differences in p)
        d = self.d
        Lp = np.empty_like(mids)
        for w in range(d):
            e = np.zeros(d)
            e[w] = self.fd_h
            Ap = np.array([_flux_weights(self.family, m + e) for m in mids])
            Am = np.array([_flux_weights(self.family, m - e) for m in mids])
            Lp[:, w] = -(_ham(Ap, alphas) - _ham(Am, alphas)) / (2 * self.fd_h)
        # gradient wrt every node
        gnode = np.zeros_like(phis)
        gnode[:-1] += self.dt * 0.5 * Lp - alphas
        gnode[1:] += self.dt * 0.5 * Lp + alphas
        if self.free_start:
            value += self.J0(phis[0])
            gnode[0] += self.J0.gradient(phis[0])
            gfree = gnode[:-1]
        else:
            gfree = gnode[1:-1]
        # chain rule through softmax: dphi_i/dtheta_j = phi_j (delta_ij - phi_i)
        dot = np.sum(gfree * phis_free, axis=1, keepdims=True)
        gtheta = phis_free * (gfree - dot)
        return float(value), gtheta[:, :-1].ravel()


def _straight_path(a, b, nodes):
    s = np.linspace(0.0, 1.0, nodes)[:, None]
    return (1 - s) * a[None] + s * b[None]


def _ode_bridge(family, a, q, t, nodes):
    traj = solve_forward(family, a, t, t / (nodes - 1) / 4)
    pts = traj.at(np.linspace(0.0, t, nodes))
    s = np.linspace(0.0, 1.0, nodes)[:, None]
    bridge = pts + s * (q - pts[-1])[None]
    bridge = np.clip(bridge, 1e-6, None)
    return bridge / bridge.sum(axis=1, keepdims=True)


def interior_target(q, eps):
    q = np.asarray(q, dtype=float)
    return (1 - eps) * q + eps * uniform(len(q))


def minimize_action_Jt(
    family,
    J0,
    q,
    t,
    nodes=64,
    restarts=8,
    seed=0,
    initial_paths=(),
    boundary_eps=1e-4,
    gtol=1e-9,
    maxiter=3000,
):
    """Upper approximation of ``J_t(q) = inf {J0(phi(0)) + int_0^t L(phi, phi')}``.

    The path lives on ``nodes`` equally spaced times with ``phi(t) = q``.
    ``J0`` is either a point (cost zero there and infinite elsewhere, which
    pins ``phi(0)``), an :class:`EntropyInitialCost`, or any callable, in
    which case ``phi(0)`` is optimised too.  Each segment costs
    ``dt L(midpoint, forward difference)``.  Starts: the straight line,
    the ODE bridge (mean-field flow from ``phi(0)`` bent linearly onto
    ``q``), any ``initial_paths`` supplied, then seeded perturbations of
    those in softmax coordinates until ``restarts`` starts have run.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if nodes < 8:
        raise ValueError("nodes must be >= 8")
    J0 = as_initial_cost(J0)
    q = np.asarray(q, dtype=float)
    flags = []
    if np.any(q <= 0):
        flags.append("boundary-target")
        q = interior_target(q, boundary_eps)
    problem = _DiscreteAction(family, J0, q, t, nodes)
    a = problem.start if not problem.free_start else q
    bases = [_straight_path(a, q, nodes)]
    if not problem.free_start:
        bases.append(_ode_bridge(family, a, q, t, nodes))
    else:
        rho = getattr(J0, "rho", None)
        if rho is not None:
            bases.append(_ode_bridge(family, np.asarray(rho, dtype=float), q, t, nodes))
    bases.extend(np.asarray(p, dtype=float) for p in initial_paths)

    def to_x(path):
        free = path[:-1] if problem.free_start else path[1:-1]
        return _logit(np.clip(free, 1e-12, None)).ravel()

    starts = [to_x(b) for b in bases]
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    k = 0
    while len(starts) < max(restarts, 1):
        base = starts[k % len(bases)]
        scale = 0.05 * (1 + k // len(bases))
        starts.append(base + scale * rng.standard_normal(base.shape))
        k += 1

    best = None
    values = []
    converged_any = False
    for x0 in starts:
        problem._alpha = None
        res = minimize(problem, x0, jac=True, method="L-BFGS-B",
                       options={"gtol": gtol, "ftol": 1e-15, "maxiter": maxiter, "maxcor": 30})
        values.append(float(res.fun))
        converged_any |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    phis, _ = problem.assemble(best.x)
    if not converged_any:
        flags.append("not-converged")
    path = PathVariable(np.linspace(0.0, t, nodes), phis)
    return ActionResult(float(best.fun), path, bool(best.success), tuple(flags), values)


def boundary_trend(family, J0, q, t, eps_list=(1e-2, 1e-3, 1e-4), **kw):
    """Actions at interior approximations ``(1-eps) q + eps nu`` of a boundary target."""
    return [(eps, minimize_action_Jt(family, J0, interior_target(q, eps), t, **kw).value)
            for eps in eps_list]


@dataclass
class QuasipotentialResult:
    value: float
    horizons: list
    raw_values: list
    running_min: list
    paths: list

    def __float__(self):
        return self.value


def _shift_path(path, new_t, nodes, anchor):
    """Resample an optimal path onto ``[0, new_t]``, resting at ``anchor`` first."""
    old_t = path.times[-1]
    delay = new_t - old_t
    t_new = np.linspace(0.0, new_t, nodes)
    s = np.clip(t_new - delay, 0.0, old_t)
    out = np.column_stack([np.interp(s, path.times, path.points[:, k]) for k in range(path.points.shape[1])])
    out[t_new < delay] = anchor
    return out


def quasipotential(family, pi_star, q, horizons=(2, 5, 10, 20, 40), nodes=64, restarts=8, seed=0,
                   max_step=0.25):
    """Upper approximation of the quasipotential ``V(q)`` relative to ``pi*``.

    Minimises the action from the point ``pi*`` to ``q`` over each horizon
    (the optimum for a shorter horizon, delayed at ``pi*``, seeds the next)
    and returns the running minimum over the horizon list.  Long horizons
    get extra nodes so the grid spacing never exceeds ``max_step``; with a
    fixed node count the quadrature error grows like ``(t / nodes)^2`` and
    would mask the decrease in the horizon.
    """
    pi_star = np.asarray(pi_star, dtype=float)
    res = np.abs(drift(family, pi_star)).sum()
    if res >= 1e-8:
        raise ValueError(f"pi_star is not a fixed point (||drift||_1 = {res:.2e})")
    q = np.asarray(q, dtype=float)
    horizons = sorted(float(h) for h in horizons)
    raw, paths = [], []
    if np.allclose(q, pi_star, atol=1e-14):
        for h in horizons:
            n = max(nodes, int(np.ceil(h / max_step - 1e-9)) + 1)
            raw.append(0.0)
            paths.append(PathVariable(np.linspace(0, h, n), np.tile(pi_star, (n, 1))))
    else:
        prev = None
        for i, h in enumerate(horizons):
            n = max(nodes, int(np.ceil(h / max_step - 1e-9)) + 1)
            seeds = () if prev is None else (_shift_path(prev, h, n, pi_star),)
            r = minimize_action_Jt(family, pi_star, q, h, n, restarts, seed + i, initial_paths=seeds)
            raw.append(r.value)
            paths.append(r.path)
            prev = r.path
    running = list(np.minimum.accumulate(raw))
    return QuasipotentialResult(float(running[-1]), horizons, raw, running, paths)
