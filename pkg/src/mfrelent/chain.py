"""Exact finite-N computations on the empirical-measure chain.

The empirical measure of the ``N``-particle system is a Markov chain on the
lattice ``S_N``; a move ``r -> r + (e_y - e_x)/N`` happens at rate
``N r_x Gamma^N_xy(r)``.  This module assembles that generator as a sparse
matrix, propagates laws by uniformization, solves for stationary laws and
evaluates scaled relative entropies ``(1/N) R(q^N || Q^N)`` for exchangeable
``Q^N`` through their class functions.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve
from scipy.special import logsumexp
from scipy.stats import poisson

from .simplex import (
    DEFAULT_LATTICE_CAP,
    Lattice,
    entropy_term,
    log_multinomial_pmf,
    relative_entropy,
)

DENSE_SOLVE_LIMIT = 3000


@dataclass(frozen=True)
class LatticeGenerator:
    """Sparse generator of the empirical-measure chain (rows sum to zero)."""

    lattice: Lattice
    matrix: sparse.csr_matrix
    family_name: str = ""

    @property
    def N(self):
        return self.lattice.N

    @property
    def size(self):
        return len(self.lattice)

    def entries(self):
        """Off-diagonal ``(from, to, rate)`` triples in row order."""
        coo = self.matrix.tocoo()
        keep = coo.row != coo.col
        return list(zip(coo.row[keep].tolist(), coo.col[keep].tolist(), coo.data[keep].tolist()))

    def exit_rates(self):
        return -self.matrix.diagonal()


@dataclass
class LatticeDistribution:
    """A probability vector indexed by a lattice enumeration.

    Closed-form laws also keep exact ``log_weights``, which stay finite
    where ``weights`` underflow (large ``N``).
    """

    lattice: Lattice
    weights: np.ndarray
    flags: tuple = field(default=())
    log_weights: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.lattice),):
            raise ValueError("weights do not match the lattice size")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be a probability vector")
        self.weights = w
        if self.log_weights is not None:
            lw = np.asarray(self.log_weights, dtype=float)
            if lw.shape != w.shape:
                raise ValueError("log_weights do not match the lattice size")
            self.log_weights = lw

    def logs(self):
        """Log weights, exact when available (``-inf`` off support)."""
        if self.log_weights is not None:
            return self.log_weights
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    @property
    def N(self):
        return self.lattice.N

    def mean(self):
        """Expected empirical measure."""
        return self.weights @ self.lattice.points

    def class_function(self):
        """``G^N(r) = m(r) / C^N(r)``: the probability of one configuration in class ``r``."""
        return np.exp(self.logs() - self.lattice.log_multiplicities())

    def to_csv(self, path):
        d = self.lattice.d
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"count_{k + 1}" for k in range(d)] + ["weight"])
            for c, p in zip(self.lattice.counts.tolist(), self.weights):
                w.writerow(c + [f"{p:.17g}"])

    @classmethod
    def from_csv(cls, path, cap=DEFAULT_LATTICE_CAP):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        d = len(header) - 1
        counts = [tuple(int(v) for v in row[:d]) for row in body]
        N = sum(counts[0])
        lattice = Lattice(N, d, cap)
        weights = np.zeros(len(lattice))
        for c, row in zip(counts, body):
            weights[lattice.index(c)] = float(row[d])
        return cls(lattice, weights)


def multinomial_distribution(lattice, rho):
    """Law of the empirical measure of ``N`` i.i.d. draws from ``rho``."""
    logw = log_multinomial_pmf(lattice.counts, rho)
    logw = logw - logsumexp(logw)
    return LatticeDistribution(lattice, np.exp(logw), log_weights=logw)


def point_mass(lattice, counts):
    w = np.zeros(len(lattice))
    w[lattice.index(counts)] = 1.0
    return LatticeDistribution(lattice, w)


def nearest_counts(p, N):
    """Lattice point closest to ``p`` by largest-remainder rounding.

    Ties go to the lower state index.
    """
    p = np.asarray(p, dtype=float)
    raw = p * N
    counts = np.floor(raw).astype(int)
    rem = raw - counts
    order = np.argsort(-rem, kind="stable")
    counts[order[: N - counts.sum()]] += 1
    return tuple(int(c) for c in counts)


def nearest_point_mass(lattice, p):
    return point_mass(lattice, nearest_counts(p, lattice.N))


def uniform_distribution(lattice):
    n = len(lattice)
    return LatticeDistribution(lattice, np.full(n, 1.0 / n))


def gibbs_distribution(model, lattice):
    """Empirical-measure law under ``pi_N``: weights ``∝ C^N(r) exp(-N Phi(r))``."""
    from .gibbs import gibbs_log_weights

    logw = gibbs_log_weights(model, lattice)
    logw = logw - logsumexp(logw)
    return LatticeDistribution(lattice, np.exp(logw), log_weights=logw)


def build_generator(family, N, cap=DEFAULT_LATTICE_CAP, lattice=None):
    """Assemble the sparse generator of the chain on ``S_N``.

    ``family`` is evaluated once per lattice point; the rate of
    ``r -> r + (e_y - e_x)/N`` is ``counts_x * Gamma_xy(r)``.
    """
    if lattice is None:
        lattice = Lattice(N, family.d, cap)
    elif lattice.N != N:
        raise ValueError("lattice N does not match")
    d = lattice.d
    rows, cols, vals = [], [], []
    index = lattice._index
    for i, c in enumerate(lattice.counts.tolist()):
        G = family(np.asarray(c, dtype=float) / N)
        for x in range(d):
            if c[x] == 0:
                continue
            for y in range(d):
                if y == x or G[x, y] <= 0:
                    continue
                c2 = list(c)
                c2[x] -= 1
                c2[y] += 1
                rows.append(i)
                cols.append(index[tuple(c2)])
                vals.append(c[x] * G[x, y])
    n = len(lattice)
    off = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    diag = -np.asarray(off.sum(axis=1)).ravel()
    L = (off + sparse.diags(diag)).tocsr()
    L.sort_indices()
    return LatticeGenerator(lattice, L, getattr(family, "name", ""))


def _uniformized_kernel(gen):
    lam = float(gen.exit_rates().max())
    if lam <= 0:
        return 0.0, None
    n = gen.size
    P = sparse.identity(n, format="csr") + gen.matrix / lam
    return lam, P.T.tocsr()


def transient_distribution(gen, init, t, tol=1e-12):
    """Law at time ``t`` by uniformization.

    With ``lam`` the largest exit rate, the result is
    ``sum_k Poisson(lam t; k) init P^k`` with ``P = I + L/lam``, truncated
    once the Poisson tail is below ``tol``.  The sum only involves
    nonnegative terms, so positivity is exact.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not 0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    if init.lattice.N != gen.N:
        raise ValueError("initial law lives on a different lattice")
    v = init.weights.copy()
    if t == 0:
        return LatticeDistribution(gen.lattice, v)
    lam, PT = _uniformized_kernel(gen)
    if PT is None:
        return LatticeDistribution(gen.lattice, v, flags=("no-exit",))
    return LatticeDistribution(gen.lattice, _poisson_sum(PT, v, lam * t, tol))


def _poisson_sum(PT, v, mu, tol):
    kmax = int(poisson.isf(tol, mu)) + 2
    ks = np.arange(kmax + 1)
    w = poisson.pmf(ks, mu)
    out = w[0] * v
    for k in range(1, kmax + 1):
        v = PT @ v
        if w[k] > 0:
            out += w[k] * v
    out = np.clip(out, 0.0, None)
    return out / out.sum()


def is_irreducible(gen):
    n, _ = connected_components(gen.matrix, directed=True, connection="strong")
    return n == 1


def stationary_distribution(gen, check=True):
    """Unique stationary law of an irreducible lattice chain.

    Solves ``pi L = 0`` with one balance equation replaced by the
    normalisation; dense LU below ``DENSE_SOLVE_LIMIT`` states, sparse LU
    above.
    """
    if check and not is_irreducible(gen):
        raise ValueError("lattice chain is reducible; stationary law is not unique")
    n = gen.size
    A = gen.matrix.T.tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[-1] = 1.0
    if n <= DENSE_SOLVE_LIMIT:
        pi = np.linalg.solve(A.toarray(), b)
    else:
        pi = spsolve(A.tocsc(), b)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    resid = np.abs(gen.matrix.T @ pi).max()
    scale = max(1.0, float(gen.exit_rates().max()))
    if resid > 1e-10 * scale:
        warnings.warn(f"stationary residual {resid:.2e} above 1e-10", RuntimeWarning, stacklevel=2)
    return LatticeDistribution(gen.lattice, pi)


def scaled_product_entropy(q, m):
    """``(1/N) R(q^{⊗N} || Q^N)`` for the exchangeable law with class law ``m``.

    ``Q^N(y) = G^N(r^N(y))`` with ``G^N(r) = m(r) / C^N(r)``; the value is
    ``sum_x q_x log q_x - E[(1/N) log G^N(r^N)]`` where ``r^N`` is the
    empirical measure of ``N`` i.i.d. draws from ``q``.  It is ``inf`` when
    the multinomial law charges a point where ``m`` vanishes.
    """
    q = np.asarray(q, dtype=float)
    lattice = m.lattice
    if q.shape[0] != lattice.d:
        raise ValueError("q and the lattice disagree on d")
    N = lattice.N
    logw = log_multinomial_pmf(lattice.counts, q)
    charged = np.isfinite(logw)
    logm = m.logs()[charged]
    if np.any(np.isneginf(logm)):
        return np.inf
    w = np.exp(logw[charged])
    theta = (logm - lattice.log_multiplicities()[charged]) / N
    return float(entropy_term(q) - np.dot(w, theta) / w.sum())


def lattice_relative_entropy(a, b):
    """``(1/N) R(a || b)`` between two laws on the same lattice."""
    return relative_entropy(a.weights, b.weights) / a.N


def entropy_curve_Ft(source, q, init, times, N=None, tol=1e-14, cap=DEFAULT_LATTICE_CAP):
    """``F_t^N(q) = (1/N) R(q^{⊗N} || p^N(t))`` on a list of times.

    ``source`` is either a :class:`~mfrelent.gibbs.GibbsModel` (its prelimit
    rates at ``N`` are used), a rate family evaluated on the lattice, or an
    already built :class:`LatticeGenerator`.  Laws are propagated from one
    time to the next.
    """
    from .gibbs import GibbsModel, prelimit_rate_family

    N = init.N if N is None else N
    if init.N != N:
        raise ValueError("initial law is not on S_N")
    if isinstance(source, LatticeGenerator):
        gen = source
    else:
        family = prelimit_rate_family(source, N) if isinstance(source, GibbsModel) else source
        gen = build_generator(family, N, cap, lattice=init.lattice)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be nonnegative and nondecreasing")
    lam, PT = _uniformized_kernel(gen)
    v = init.weights.copy()
    t_prev = 0.0
    out = []
    for t in times:
        dt = t - t_prev
        if dt > 0 and PT is not None:
            v = _poisson_sum(PT, v, lam * dt, tol)
        t_prev = t
        out.append(scaled_product_entropy(q, LatticeDistribution(gen.lattice, v)))
    return out


def richardson(values, Ns):
    """Richardson extrapolation assuming ``value(N) = limit + a/N + b/N^2 + ...``.

    ``Ns`` must double at each step; the last entry of the final tableau row
    is returned.
    """
    Ns = np.asarray(Ns, dtype=float)
    if not np.allclose(Ns[1:] / Ns[:-1], 2.0):
        raise ValueError("Richardson extrapolation here expects doubling N")
    T = [np.asarray(values, dtype=float)]
    for k in range(1, len(values)):
        prev = T[-1]
        f = 2.0**k
        T.append((f * prev[1:] - prev[:-1]) / (f - 1.0))
    return float(T[-1][-1])
