"""Systems of Gibbs type: potentials, energies, Glauber rates and the limit
Lyapunov candidate.

A potential ``K(x, p)`` (written ``K^x(p)``) defines the ``N``-particle
energy ``U_N(x) = sum_i K(x_i, r^N(x)) = N Phi(r^N(x))`` with
``Phi(q) = sum_x K^x(q) q_x``.  Glauber dynamics with adjacency ``alpha``
are reversible for ``exp(-U_N)``; as ``N -> infinity`` the single-particle
rates converge to the same dynamics applied to
``Psi(x, y, p) = H^y(p) - H^x(p)``, ``H^x(p) = K^x(p) + sum_z dK^z/dp_x (p) p_z``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, logsumexp

from .dynamics import RateFamily, solve_forward
from .simplex import (
    Lattice,
    _compositions,
    entropy_term,
    relative_entropy,
    uniform,
)

DYNAMICS = ("metropolis", "heat_bath", "symmetrized")


def glauber_rate(kind, delta):
    """Rate attached to an energy change ``delta`` for each dynamics kind."""
    delta = np.asarray(delta, dtype=float)
    if kind == "metropolis":
        return np.exp(-np.maximum(delta, 0.0))
    if kind == "heat_bath":
        return expit(-delta)
    if kind == "symmetrized":
        return 0.5 * (1.0 + np.exp(-delta))
    raise ValueError(f"unknown dynamics kind {kind!r}; expected one of {DYNAMICS}")


class GibbsPotential:
    """A ``C^2`` potential given by per-state value and gradient callables.

    ``value(x, p)`` returns ``K^x(p)`` and ``gradient(x, p)`` the vector
    ``dK^x/dp``.  The gradient is checked against central differences at a
    few seeded interior points when the potential is built, since ``H``
    enters the rates exponentially.
    """

    def __init__(self, d, value, gradient, check=True, fd_tol=1e-6):
        self.d = d
        self._value = value
        self._gradient = gradient
        if check:
            self.check_gradient(fd_tol)

    def values(self, p):
        """Vector ``(K^x(p))_x``."""
        p = np.asarray(p, dtype=float)
        return np.array([self._value(x, p) for x in range(self.d)], dtype=float)

    def gradients(self, p):
        """Matrix ``D[x, w] = dK^x/dp_w``."""
        p = np.asarray(p, dtype=float)
        return np.array([self._gradient(x, p) for x in range(self.d)], dtype=float)

    def check_gradient(self, tol=1e-6, n_points=5, h=1e-5, seed=0):
        rng = np.random.default_rng(seed)
        for _ in range(n_points):
            p = rng.dirichlet(np.ones(self.d))
            D = self.gradients(p)
            fd = np.empty_like(D)
            for w in range(self.d):
                e = np.zeros(self.d)
                e[w] = h
                fd[:, w] = (self.values(p + e) - self.values(p - e)) / (2 * h)
            scale = max(1.0, float(np.abs(fd).max()))
            if np.abs(D - fd).max() > tol * scale:
                raise ValueError(
                    f"potential gradient disagrees with finite differences by {np.abs(D - fd).max():.2e}"
                )


class AffinePotential(GibbsPotential):
    """``K^x(p) = V(x) + beta sum_y W(x, y) p_y``."""

    def __init__(self, V, W, beta=1.0):
        self.V = np.asarray(V, dtype=float)
        self.W = np.asarray(W, dtype=float)
        self.beta = float(beta)
        d = self.V.shape[0]
        if self.W.shape != (d, d):
            raise ValueError("W must be d x d")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        self.d = d

    def values(self, p):
        return self.V + self.beta * (self.W @ np.asarray(p, dtype=float))

    def gradients(self, p):
        return self.beta * self.W

    def to_dict(self):
        return {"affine": {"V": self.V.tolist(), "W": self.W.tolist(), "beta": self.beta}}


class QuadraticPotential(GibbsPotential):
    """``K^x(p) = c_x + sum_y A[x,y] p_y + sum_{y,z} Q[x,y,z] p_y p_z``.

    This is the coefficient-table form accepted in model files for
    potentials that are not affine.
    """

    def __init__(self, constant, linear, quadratic):
        self.c = np.asarray(constant, dtype=float)
        d = self.c.shape[0]
        self.A = np.zeros((d, d)) if linear is None else np.asarray(linear, dtype=float)
        self.Q = np.zeros((d, d, d)) if quadratic is None else np.asarray(quadratic, dtype=float)
        if self.A.shape != (d, d) or self.Q.shape != (d, d, d):
            raise ValueError("linear must be d x d and quadratic d x d x d")
        self.d = d

    def values(self, p):
        p = np.asarray(p, dtype=float)
        return self.c + self.A @ p + np.einsum("xyz,y,z->x", self.Q, p, p)

    def gradients(self, p):
        p = np.asarray(p, dtype=float)
        return self.A + np.einsum("xyz,z->xy", self.Q, p) + np.einsum("xyz,y->xz", self.Q, p)

    def to_dict(self):
        return {
            "table": {
                "constant": self.c.tolist(),
                "linear": self.A.tolist(),
                "quadratic": self.Q.tolist(),
            }
        }


@dataclass(frozen=True)
class Adjacency:
    alpha: np.ndarray

    def __post_init__(self):
        from scipy.sparse.csgraph import connected_components

        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency must have zero diagonal")
        if connected_components(a, directed=False)[0] != 1:
            raise ValueError("adjacency graph is not connected")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @classmethod
    def complete(cls, d):
        return cls(np.ones((d, d)) - np.eye(d))

    @classmethod
    def path(cls, d):
        a = np.zeros((d, d))
        i = np.arange(d - 1)
        a[i, i + 1] = a[i + 1, i] = 1
        return cls(a)


@dataclass(frozen=True)
class GibbsModel:
    potential: GibbsPotential
    adjacency: Adjacency
    dynamics: str = "metropolis"
    labels: tuple = ()

    def __post_init__(self):
        if self.dynamics not in DYNAMICS:
            raise ValueError(f"unknown dynamics kind {self.dynamics!r}")
        if self.adjacency.alpha.shape[0] != self.potential.d:
            raise ValueError("adjacency and potential disagree on d")

    @property
    def d(self):
        return self.potential.d

    def with_dynamics(self, kind):
        return GibbsModel(self.potential, self.adjacency, kind, self.labels)


def affine_model(V, W, beta=1.0, adjacency=None, dynamics="metropolis"):
    pot = AffinePotential(V, W, beta)
    adj = Adjacency.complete(pot.d) if adjacency is None else Adjacency(adjacency)
    return GibbsModel(pot, adj, dynamics)


def curie_weiss(beta, d=2, dynamics="metropolis"):
    """``V = 0`` and ``W(x, y) = 1{x != y}`` on ``d`` states."""
    return affine_model(np.zeros(d), np.ones((d, d)) - np.eye(d), beta, dynamics=dynamics)


def mean_energy_phi(model, q):
    """``Phi(q) = sum_x K^x(q) q_x``, so that ``U_N(x) = N Phi(r^N(x))``."""
    q = np.asarray(q, dtype=float)
    return float(model.potential.values(q) @ q)


def energy_U(model, config):
    """``U_N(x) = sum_i K(x_i, r^N(x))`` for a configuration of state indices."""
    config = np.asarray(config, dtype=int)
    r = np.bincount(config, minlength=model.d) / config.size
    return float(model.potential.values(r)[config].sum())


def field_H_all(model, p):
    """Vector ``(H^x(p))_x``."""
    p = np.asarray(p, dtype=float)
    return model.potential.values(p) + model.potential.gradients(p).T @ p


def field_H(model, x, p):
    return float(field_H_all(model, p)[x])


def psi_diff(model, x, y, p):
    """``Psi(x, y, p) = H^y(p) - H^x(p)``; requires ``x != y``."""
    if x == y:
        raise ValueError("psi_diff needs x != y")
    H = field_H_all(model, p)
    return float(H[y] - H[x])


def energy_differences(model, N, r):
    """Matrix ``D[x, y] = N (Phi(r + (e_y - e_x)/N) - Phi(r))``.

    This is the exact change of ``U_N`` when one particle moves from ``x``
    to ``y`` at empirical measure ``r``.  Affine potentials use the closed
    form, other potentials ``d^2`` evaluations of ``Phi``.
    """
    r = np.asarray(r, dtype=float)
    d = r.shape[0]
    pot = model.potential
    if isinstance(pot, AffinePotential):
        W = pot.W
        Wr = W @ r
        WTr = W.T @ r
        dV = pot.V[None, :] - pot.V[:, None]
        lin = (Wr + WTr)[None, :] - (Wr + WTr)[:, None]
        diag = np.diag(W)
        quad = diag[None, :] + diag[:, None] - W - W.T
        return dV + pot.beta * (lin + quad / N)
    phi0 = mean_energy_phi(model, r)
    D = np.zeros((d, d))
    for x in range(d):
        for y in range(d):
            if x != y:
                v = r.copy()
                v[x] -= 1.0 / N
                v[y] += 1.0 / N
                D[x, y] = N * (mean_energy_phi(model, v) - phi0)
    return D


def _rates_from(kind, alpha, delta):
    G = glauber_rate(kind, delta) * alpha
    np.fill_diagonal(G, 0.0)
    np.fill_diagonal(G, -G.sum(axis=1))
    return G


def prelimit_rate_family(model, N):
    """Single-particle rates ``Gamma^N(r)`` of the ``N``-particle Glauber dynamics."""
    if N < 1:
        raise ValueError("N must be >= 1")
    alpha = model.adjacency.alpha
    kind = model.dynamics

    def rate_fn(r):
        return _rates_from(kind, alpha, energy_differences(model, N, r))

    return RateFamily(model.d, rate_fn, name=f"{kind}-prelimit-N{N}", validate=False)


def remainder_B(model, N, x, y, r):
    """``B^N(x, y, r) = Delta - Psi(x, y, r)``, the ``O(1/N)`` correction."""
    if x == y:
        raise ValueError("remainder_B needs x != y")
    r = np.asarray(r, dtype=float)
    return float(energy_differences(model, N, r)[x, y] - psi_diff(model, x, y, r))


def limit_rate_family(model):
    """Mean-field rates: the chosen dynamics applied to ``Psi(x, y, p)``."""
    alpha = model.adjacency.alpha
    kind = model.dynamics

    def rate_fn(p):
        H = field_H_all(model, p)
        return _rates_from(kind, alpha, H[None, :] - H[:, None])

    return RateFamily(model.d, rate_fn, name=f"{kind}-limit", validate=False)


def limit_stationary_pi(model, p):
    """``pi(p)_x = exp(-H^x(p)) / Z(p)``, computed with max subtraction."""
    a = -field_H_all(model, p)
    w = np.exp(a - a.max())
    return w / w.sum()


def gibbs_log_weights(model, lattice):
    """Unnormalised log law of the empirical measure under ``pi_N``:
    ``log C^N(r) - N Phi(r)`` for every lattice point."""
    N = lattice.N
    phis = np.array([mean_energy_phi(model, p) for p in lattice.points])
    return lattice.log_multiplicities() - N * phis


def log_partition_function(model, N, cap=None):
    """Exact ``log Z_N`` via a sum over the lattice rather than over ``X^N``."""
    lattice = Lattice(N, model.d) if cap is None else Lattice(N, model.d, cap)
    return float(logsumexp(gibbs_log_weights(model, lattice)))


def _project_simplex(v, floor=1e-300):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    w = np.maximum(v - css[rho] / (rho + 1), floor)
    return w / w.sum()


def _free_energy(model, q):
    """``R(q || nu) + Phi(q)`` and its gradient ``log q + 1 + log d + H(q)``."""
    d = model.d
    val = entropy_term(q) + np.log(d) + mean_energy_phi(model, q)
    with np.errstate(divide="ignore"):
        grad = np.log(q) + 1.0 + field_H_all(model, q)
    return val, grad


def _projected_descent(model, q, ftol=1e-10, max_iter=20_000):
    f, g = _free_energy(model, q)
    step = 1.0
    for _ in range(max_iter):
        while True:
            cand = _project_simplex(q - step * g)
            fc, gc = _free_energy(model, cand)
            if fc <= f - 1e-4 * np.dot(g, q - cand) or step < 1e-14:
                break
            step *= 0.5
        if f - fc < ftol * 1e-4 or np.abs(cand - q).max() < 1e-13:
            return (cand, fc) if fc < f else (q, f)
        q, f, g = cand, fc, gc
        step = min(step * 2.0, 1.0)
    return q, f


def minimize_free_energy(model, refinement=40, n_starts=4):
    """Minimise ``R(q||nu) + Phi(q)`` by grid search plus projected gradient.

    Returns ``(minimum, minimiser)``.  The best ``n_starts`` interior grid
    points are each refined with backtracking projected gradient steps.
    """
    if refinement < 2:
        raise ValueError("refinement must be >= 2")
    d = model.d
    grid = [(np.asarray(c, dtype=float) + 0.25) / (refinement + 0.25 * d)
            for c in _compositions(refinement, d)]
    vals = np.array([_free_energy(model, q)[0] for q in grid])
    order = np.argsort(vals, kind="stable")[:n_starts]
    best = (np.inf, None)
    for i in order:
        q, f = _projected_descent(model, grid[i])
        if f < best[0]:
            best = (f, q)
    return best


def gibbs_constant_C(model, refinement=40):
    """``C = inf_q {R(q||nu) + Phi(q)} - log d``, the limit of ``-(1/N) log Z_N``."""
    fmin, _ = minimize_free_energy(model, refinement)
    return float(fmin - np.log(model.d))


def lyapunov_F(model, p, C):
    """``F(p) = sum_x (K^x(p) + log p_x) p_x - C`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    return float(model.potential.values(p) @ p + entropy_term(p) - C)


def lyapunov_F_affine(V, W, beta, p, C):
    """Affine form ``sum q log q + sum V q + beta sum W(x,y) q_x q_y - C``."""
    p = np.asarray(p, dtype=float)
    return float(entropy_term(p) + np.asarray(V) @ p + beta * p @ np.asarray(W) @ p - C)


def reverse_candidate(pi_star, p):
    """``R(pi* || p)``: relative entropy with the moving point second."""
    return relative_entropy(pi_star, p)


@dataclass
class ReverseEntropyIncrease:
    beta: float
    p0: np.ndarray
    pi_star: np.ndarray
    t_start: float
    t_end: float
    increase: float
    times: np.ndarray
    values: np.ndarray


def find_reverse_entropy_increase(
    betas=np.linspace(1.5, 3.0, 7),
    offsets=(0.02, 0.05, 0.1, 0.2),
    threshold=1e-4,
    horizon=10.0,
    step=1e-2,
    dynamics="metropolis",
):
    """Search Curie-Weiss models for growth of ``t -> R(pi*||p(t))``.

    ``pi*`` is the symmetric fixed point ``(1/2, 1/2)``.  For each ``beta``
    the start points sit between ``pi*`` and one of the stable fixed points
    (offset from ``pi*`` along the first coordinate).  Returns the first
    segment whose increase reaches ``threshold``, or ``None``.
    """
    pi_star = uniform(2)
    for beta in betas:
        fam = limit_rate_family(curie_weiss(beta, dynamics=dynamics))
        for off in offsets:
            p0 = np.array([0.5 + off, 0.5 - off])
            traj = solve_forward(fam, p0, horizon, step)
            vals = np.array([reverse_candidate(pi_star, p) for p in traj.points])
            running_min = np.minimum.accumulate(vals)
            rise = vals - running_min
            j = int(np.argmax(rise))
            if rise[j] >= threshold:
                i = int(np.argmin(vals[: j + 1]))
                return ReverseEntropyIncrease(
                    float(beta), p0, pi_star, traj.times[i], traj.times[j],
                    float(rise[j]), traj.times, vals,
                )
    return None


def potential_from_dict(spec, d):
    if "affine" in spec:
        a = spec["affine"]
        return AffinePotential(a["V"], a["W"], a.get("beta", 1.0))
    if "table" in spec:
        t = spec["table"]
        pot = QuadraticPotential(t["constant"], t.get("linear"), t.get("quadratic"))
        if pot.d != d:
            raise ValueError("potential table size disagrees with d")
        return pot
    raise ValueError("potential needs an 'affine' or 'table' entry")


def model_from_dict(spec):
    """Build a :class:`GibbsModel` from a parsed model document."""
    missing = [k for k in ("d", "potential", "adjacency") if k not in spec]
    if missing:
        raise KeyError(", ".join(missing))
    d = int(spec["d"])
    pot = potential_from_dict(spec["potential"], d)
    if pot.d != d:
        raise ValueError("potential size disagrees with d")
    labels = tuple(spec.get("labels", ()))
    return GibbsModel(pot, Adjacency(spec["adjacency"]), spec.get("dynamics", "metropolis"), labels)


def model_to_dict(model):
    out = {
        "d": model.d,
        "potential": model.potential.to_dict(),
        "adjacency": model.adjacency.alpha.astype(int).tolist(),
        "dynamics": model.dynamics,
    }
    if model.labels:
        out["labels"] = list(model.labels)
    return out


def load_document(path):
    """Parse a JSON or TOML document, chosen by file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python 3.10
            import tomli as tomllib

        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def load_model(path):
    return model_from_dict(load_document(path))
