"""Mean-field forward equation ``dp/dt = p Gamma(p)`` and entropy descent.

Rate matrices follow the row convention: off-diagonal ``Gamma[x, y] >= 0`` is
the rate of a jump ``x -> y`` and the diagonal makes every row sum to zero, so
``p @ Gamma(p)`` is the forward drift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .simplex import ell, relative_entropy, uniform

ROW_SUM_TOL = 1e-10
NEG_CLAMP = 1e-9


class RateMatrixError(ValueError):
    pass


class SimplexEscape(RuntimeError):
    """The integrator left the simplex beyond the clamp tolerance."""


def validate_rate_matrix(G, d=None, tol=ROW_SUM_TOL):
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise RateMatrixError(f"rate matrix must be square, got shape {G.shape}")
    if d is not None and G.shape[0] != d:
        raise RateMatrixError(f"rate matrix must be {d}x{d}")
    if not np.all(np.isfinite(G)):
        raise RateMatrixError("rate matrix has non-finite entries")
    off = G - np.diag(np.diag(G))
    if np.any(off < 0):
        raise RateMatrixError("negative off-diagonal rate")
    scale = max(1.0, float(np.abs(off).sum(axis=1).max()))
    if np.any(np.abs(G.sum(axis=1)) > tol * scale):
        raise RateMatrixError("rate matrix rows do not sum to zero")
    return G


def with_diagonal(off):
    """Fill the diagonal so that rows sum to zero."""
    G = np.array(off, dtype=float)
    np.fill_diagonal(G, 0.0)
    np.fill_diagonal(G, -G.sum(axis=1))
    return G


def is_irreducible(G):
    from scipy.sparse.csgraph import connected_components

    adj = (np.asarray(G) - np.diag(np.diag(G))) > 0
    n, _ = connected_components(adj, directed=True, connection="strong")
    return n == 1


class RateFamily:
    """The map ``p -> Gamma(p)`` of ``d x d`` rate matrices.

    ``rate_fn`` receives a length-``d`` float array and must return a valid
    rate matrix; results are validated on every call unless ``validate`` is
    false.  Evaluation at points slightly off the simplex (finite
    differences) must be supported.
    """

    def __init__(self, d, rate_fn, lipschitz_hint=None, name=None, validate=True):
        if d < 2:
            raise ValueError("d must be >= 2")
        self.d = d
        self.rate_fn = rate_fn
        self.lipschitz_hint = lipschitz_hint
        self.name = name or getattr(rate_fn, "__name__", "family")
        self.validate = validate

    def __call__(self, p):
        G = self.rate_fn(np.asarray(p, dtype=float))
        if self.validate:
            G = validate_rate_matrix(G, self.d)
        return G

    def __repr__(self):
        return f"RateFamily(d={self.d}, name={self.name!r})"

    @classmethod
    def constant(cls, G, name="constant"):
        G = validate_rate_matrix(G)
        G.setflags(write=False)
        fam = cls(G.shape[0], lambda p: G, name=name, validate=False)
        fam.matrix = G
        return fam


def stationary_of(G):
    """Stationary law of an irreducible constant rate matrix."""
    G = validate_rate_matrix(G)
    d = G.shape[0]
    A = np.vstack([G.T, np.ones(d)])
    b = np.zeros(d + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def random_rate_matrix(d, rng, low=0.1, high=2.0):
    """Dense random rate matrix with all off-diagonal rates in ``[low, high]``."""
    return with_diagonal(rng.uniform(low, high, size=(d, d)))


def drift(family, p):
    """Forward drift ``p Gamma(p)``; its components sum to zero."""
    p = np.asarray(p, dtype=float)
    return p @ family(p)


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape[0] != self.times.shape[0]:
            raise ValueError("times and points differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.points[-1]

    def at(self, t):
        """Linear interpolation of the trajectory at time(s) ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.column_stack(
            [np.interp(t, self.times, self.points[:, k]) for k in range(self.points.shape[1])]
        )
        return out


def _clamp_renormalize(p):
    if p.min() < -NEG_CLAMP:
        raise SimplexEscape(f"component {p.min():.3e} below -{NEG_CLAMP}; reduce the step")
    p = np.where(p < 0, 0.0, p)
    return p / p.sum()


def solve_forward(family, p0, horizon, step):
    """Integrate ``dp/dt = p Gamma(p)`` with fixed-step classical RK4.

    Each new point is clamped (components in ``[-1e-9, 0)`` set to zero) and
    renormalised; anything more negative raises :class:`SimplexEscape`.
    The grid is ``0, step, 2 step, ...`` with a final partial step landing
    exactly on ``horizon``.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if not 0 < step <= horizon:
        raise ValueError("step must lie in (0, horizon]")
    n = int(np.floor(horizon / step + 1e-9))
    times = step * np.arange(n + 1)
    if horizon - times[-1] > 1e-12 * horizon:
        times = np.append(times, horizon)
    else:
        times[-1] = horizon
    p = np.asarray(p0, dtype=float).copy()
    points = np.empty((len(times), p.shape[0]))
    points[0] = p

    def f(x):
        return x @ family(x)

    for i in range(1, len(times)):
        h = times[i] - times[i - 1]
        k1 = f(p)
        k2 = f(p + 0.5 * h * k1)
        k3 = f(p + 0.5 * h * k2)
        k4 = f(p + h * k3)
        p = _clamp_renormalize(p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
        points[i] = p
    return Trajectory(times, points)


def linear_flow(G, p0, t):
    """Exact ``p0 exp(t G)`` for a constant rate matrix."""
    return np.asarray(p0, dtype=float) @ linalg.expm(t * np.asarray(G, dtype=float))


def entropy_descent_rate(p, q, G):
    """Time derivative of ``R(p(t)||q(t))`` when both follow ``r' = r G``.

    Both arguments must be strictly positive.  The value is
    ``-sum_{x != y} ell(p_y q_x / (p_x q_y)) p_x (q_y / q_x) G[y, x]``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p <= 0) or np.any(q <= 0):
        raise ValueError("entropy descent rate needs strictly positive p and q")
    G = validate_rate_matrix(G, p.shape[0])
    ratio = np.outer(q, p) / np.outer(p, q)  # [x, y] = p_y q_x / (p_x q_y)
    weight = p[:, None] * (q[None, :] / q[:, None]) * G.T  # [x, y] = p_x q_y/q_x G[y, x]
    mask = ~np.eye(len(p), dtype=bool)
    return -float(np.sum(ell(ratio[mask]) * weight[mask]))


def drift_jacobian(family, p, h=1e-6):
    """Central-difference Jacobian ``J[j, i] = d drift_j / d p_i``."""
    p = np.asarray(p, dtype=float)
    d = len(p)
    J = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        J[:, i] = (drift(family, p + e) - drift(family, p - e)) / (2 * h)
    return J


@dataclass
class FixedPointSearch:
    points: list
    converged: bool
    n_starts: int
    n_converged: int

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def _simplex_grid(resolution, d, interior=True):
    from .simplex import _compositions

    pts = []
    for c in _compositions(resolution, d):
        c = np.asarray(c, dtype=float)
        if interior:
            c = c + 0.5
        pts.append(c / c.sum())
    return pts


def find_fixed_points(family, grid_resolution=10, tol=1e-10, max_iter=20_000):
    """Zeros of the drift from a multi-start search over a simplex grid.

    Every grid start first gets damped Newton on the drift restricted to the
    tangent space, which also reaches unstable equilibria.  Starts where
    Newton stalls are relaxed by the damped iteration
    ``p <- p (I + h Gamma(p))`` with ``h = 1/(2 max exit rate)`` and then
    polished.  Points with ``||drift||_1 < tol`` are deduplicated within
    ``10 tol`` (l1) after sorting lexicographically.
    """
    if grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    starts = _simplex_grid(grid_resolution, family.d)
    found = []
    for p in starts:
        root = _newton_polish(family, p, tol)
        if root is None:
            root = _newton_polish(family, _relax(family, p, max_iter), tol)
        if root is not None:
            found.append(root)
    found.sort(key=tuple)
    unique = []
    for p in found:
        if all(np.abs(p - u).sum() >= 10 * tol for u in unique):
            unique.append(p)
    return FixedPointSearch(unique, bool(unique), len(starts), len(found))


def _relax(family, p, max_iter):
    p = np.asarray(p, dtype=float)
    for _ in range(max_iter):
        G = family(p)
        v = p @ G
        if np.abs(v).sum() < 1e-8:
            break
        h = 0.5 / max(1e-12, float(np.max(-np.diag(G))))
        p = _clamp_renormalize(p + h * v)
    return p


def _newton_polish(family, p, tol, iters=60):
    p = np.asarray(p, dtype=float)
    d = len(p)
    B = np.vstack([np.eye(d - 1), -np.ones(d - 1)])  # tangent basis e_i - e_d
    v = drift(family, p)
    for _ in range(iters):
        res = np.abs(v).sum()
        if res < tol:
            return p
        J = drift_jacobian(family, p, h=1e-7)
        A = (J @ B)[:-1]
        try:
            s = np.linalg.solve(A, -v[:-1])
        except np.linalg.LinAlgError:
            return None
        step = B @ s
        lam = 1.0
        while lam > 1e-8:
            cand = p + lam * step
            if cand.min() >= 0:
                vc = drift(family, cand)
                if np.abs(vc).sum() < res:
                    break
            lam *= 0.5
        else:
            return None
        p, v = cand / cand.sum(), vc
    return p if np.abs(v).sum() < tol else None


def relative_entropy_path(P, Q):
    """``R(P[i] || Q[i])`` along two aligned arrays of probability vectors."""
    return np.array([relative_entropy(a, b) for a, b in zip(P, Q)])


def time_shifted_candidate(G, p, T):
    """``R(p || q^p(T))`` where ``q^p`` is the linear flow of ``G`` started at ``p``."""
    return relative_entropy(p, linear_flow(G, p, T))


__all__ = [
    "FixedPointSearch",
    "RateFamily",
    "RateMatrixError",
    "SimplexEscape",
    "Trajectory",
    "drift",
    "drift_jacobian",
    "entropy_descent_rate",
    "find_fixed_points",
    "is_irreducible",
    "linear_flow",
    "random_rate_matrix",
    "relative_entropy_path",
    "solve_forward",
    "stationary_of",
    "time_shifted_candidate",
    "uniform",
    "validate_rate_matrix",
    "with_diagonal",
]
