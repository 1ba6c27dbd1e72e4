"""Finite state spaces, simplex points, lattice measures and entropies.

Probability vectors are plain ``numpy`` arrays; :func:`as_probability`
validates them.  Lattice measures ``r`` in ``S_N = S ∩ (1/N) Z^d`` are held
as integer count vectors (:class:`LatticeMeasure`) and enumerated by
:class:`Lattice`, which fixes the lexicographic index used by the exact
chain code.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.special import gammaln

SIMPLEX_TOL = 1e-12
DEFAULT_LATTICE_CAP = 50_000


class LatticeTooLarge(ValueError):
    """Raised when a lattice enumeration would exceed the configured cap."""

    def __init__(self, size, cap):
        super().__init__(f"lattice has {size} points, above the cap of {cap}")
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class StateSpace:
    d: int
    labels: tuple = ()

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("state space needs d >= 2")
        labels = tuple(self.labels) or tuple(str(i + 1) for i in range(self.d))
        if len(labels) != self.d or len(set(labels)) != self.d:
            raise ValueError("labels must be d distinct names")
        object.__setattr__(self, "labels", labels)


def as_probability(p, d=None, tol=SIMPLEX_TOL, renormalize=False):
    """Return ``p`` as a float array after checking it lies on the simplex.

    Renormalization only happens when asked for; a sum off by more than
    ``tol`` is otherwise an error.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("probability vector must be one-dimensional")
    if d is not None and p.shape[0] != d:
        raise ValueError(f"expected {d} components, got {p.shape[0]}")
    if np.any(p < 0):
        raise ValueError("probability vector has negative entries")
    s = p.sum()
    if renormalize:
        return p / s
    if abs(s - 1.0) > tol:
        raise ValueError(f"probability vector sums to {s!r}, not 1")
    return p


def uniform(d):
    return np.full(d, 1.0 / d)


def relative_entropy(p, q):
    """Relative entropy ``R(p||q) = sum_x p_x log(p_x / q_x)``.

    Uses ``0 log 0 = 0`` and returns ``inf`` when ``p`` charges a state
    that ``q`` does not.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("dimension mismatch")
    support = p > 0
    if np.any(q[support] <= 0):
        return np.inf
    ps, qs = p[support], q[support]
    return max(float(np.sum(ps * (np.log(ps) - np.log(qs)))), 0.0)


def ell(z):
    """``z log z - z + 1`` with ``ell(0) = 1``; accepts scalars or arrays."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("ell is defined for z >= 0 only")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)) - z + 1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def entropy_term(p):
    """``sum_x p_x log p_x`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz])))


@dataclass(frozen=True)
class LatticeMeasure:
    """A point of ``S_N`` stored as integer counts summing to ``N``."""

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2 or any(c < 0 for c in counts):
            raise ValueError("counts must be >= 2 nonnegative integers")
        if sum(counts) < 1:
            raise ValueError("lattice measure needs N >= 1")
        object.__setattr__(self, "counts", counts)

    @property
    def N(self):
        return sum(self.counts)

    @property
    def d(self):
        return len(self.counts)

    def to_probability(self):
        return np.asarray(self.counts, dtype=float) / self.N

    def shift(self, x, y):
        """The lattice point after one particle moves from ``x`` to ``y``."""
        c = list(self.counts)
        c[x] -= 1
        c[y] += 1
        return LatticeMeasure(tuple(c))


def empirical_measure(config, d):
    """Counts of each state in a configuration of 0-based state indices."""
    config = np.asarray(config, dtype=int)
    if config.size == 0:
        raise ValueError("empty configuration")
    if config.min() < 0 or config.max() >= d:
        raise ValueError(f"state index out of range for d={d}")
    return LatticeMeasure(tuple(np.bincount(config, minlength=d)))


def lattice_size(N, d):
    return comb(N + d - 1, d - 1)


def _compositions(N, d):
    # lexicographic order of count tuples, largest first coordinate first
    if d == 1:
        yield (N,)
        return
    for first in range(N, -1, -1):
        for rest in _compositions(N - first, d - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class Lattice:
    """Enumeration of ``S_N`` with a bijective index map.

    Points are ordered lexicographically (descending) on counts, so for
    ``N=2, d=2`` the order is ``(2,0), (1,1), (0,2)``.
    """

    N: int
    d: int
    cap: int = DEFAULT_LATTICE_CAP
    counts: np.ndarray = field(init=False, repr=False, compare=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1 or self.d < 2:
            raise ValueError("need N >= 1 and d >= 2")
        size = lattice_size(self.N, self.d)
        if size > self.cap:
            raise LatticeTooLarge(size, self.cap)
        counts = np.array(list(_compositions(self.N, self.d)), dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "_index", {tuple(c): i for i, c in enumerate(counts.tolist())})

    def __len__(self):
        return self.counts.shape[0]

    def __getitem__(self, i):
        return LatticeMeasure(tuple(self.counts[i]))

    def __iter__(self):
        return (LatticeMeasure(tuple(c)) for c in self.counts.tolist())

    def index(self, r):
        key = r.counts if isinstance(r, LatticeMeasure) else tuple(int(c) for c in r)
        return self._index[key]

    @property
    def points(self):
        """Lattice points as an ``(n, d)`` float array of probability vectors."""
        return self.counts / self.N

    def log_multiplicities(self):
        return log_multiplicity_counts(self.counts)


def enumerate_lattice(N, d, cap=DEFAULT_LATTICE_CAP):
    """All compositions of ``N`` into ``d`` parts, as a :class:`Lattice`."""
    return Lattice(N, d, cap)


def log_multiplicity_counts(counts):
    """Vectorised ``log(N! / prod_x counts_x!)`` over the last axis."""
    counts = np.asarray(counts, dtype=float)
    N = counts.sum(axis=-1)
    return gammaln(N + 1) - gammaln(counts + 1).sum(axis=-1)


def log_multiplicity(r):
    """Log of the number of configurations whose empirical measure is ``r``."""
    return float(log_multiplicity_counts(np.asarray(r.counts)))


def sanov_bounds(r):
    """Log-domain bounds on the uniform-product probability of the class of ``r``.

    Returns ``(lower, upper)`` with ``lower = -d log(N+1) - N R(r/N||nu)`` and
    ``upper = -N R(r/N||nu)``, which bracket ``log C^N(r) - N log d``.
    """
    N, d = r.N, r.d
    upper = -N * relative_entropy(r.to_probability(), uniform(d))
    return upper - d * np.log(N + 1), upper


def log_multinomial_pmf(counts, q):
    """Log multinomial probabilities of count rows under ``q`` (``-inf`` off support)."""
    counts = np.asarray(counts)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logq = np.log(q)
        terms = np.where(counts > 0, counts * logq, 0.0)
    return log_multiplicity_counts(counts) + terms.sum(axis=-1)

