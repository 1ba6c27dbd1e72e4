"""Exact event-driven simulation of the particle system and its empirical measure.

Randomness: every run draws from ``numpy.random.Generator(PCG64)`` seeded by
``SeedSequence(seed, spawn_key=(replica,))``.  Each event consumes two
uniforms from that stream (holding time, then jump choice), and tagged
simulations a third (which particle moves), so a replica simulated alone
and the same replica inside a batch see identical draws.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .chain import nearest_counts
from .simplex import DEFAULT_LATTICE_CAP, Lattice, LatticeMeasure, lattice_size

EVENT_LOG_LIMIT = 10_000_000
_BLOCK = 4096


def replica_rng(seed, replica=0):
    """Generator for replica ``replica`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.PCG64(ss))


class _Uniforms:
    """Buffered uniforms; block size does not change the sequence drawn."""

    def __init__(self, rng, block=_BLOCK):
        self.rng = rng
        self.block = block
        self.buf = rng.random(block)
        self.pos = 0

    def next(self):
        if self.pos == self.block:
            self.buf = self.rng.random(self.block)
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


class _JumpTable:
    """Per-lattice-point jump lists, filled lazily.

    For counts ``c`` the entry holds the jumps ``(x, y)`` with positive rate
    ``c_x Gamma^N_xy(c / N)``, listed in ``(x, y)`` order, their cumulative
    rates and the total rate.
    """

    def __init__(self, family, N):
        self.family = family
        self.N = N
        self.cache = {}

    def __getitem__(self, counts):
        row = self.cache.get(counts)
        if row is None:
            row = self._build(counts)
            self.cache[counts] = row
        return row

    def _build(self, counts):
        G = self.family(np.asarray(counts, dtype=float) / self.N)
        d = len(counts)
        jumps, cum = [], []
        total = 0.0
        for x in range(d):
            if counts[x] == 0:
                continue
            for y in range(d):
                rate = counts[x] * G[x, y] if y != x else 0.0
                if rate > 0:
                    total += rate
                    jumps.append((x, y))
                    cum.append(total)
        return jumps, cum, total


def _pick(cum, target):
    # first index with cum[i] > target; guards against rounding at the top
    lo, hi = 0, len(cum) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > target:
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass
class SimulationRun:
    """One simulated path of the empirical measure.

    ``event_log`` holds ``(time, from_state, to_state)`` with 0-based states;
    it is empty when logging was off or the run passed ``EVENT_LOG_LIMIT``
    events (``"log-truncated"`` in ``flags``).  ``snapshots`` are counts at
    the requested times.
    """

    seed: int
    N: int
    horizon: float
    init: tuple
    event_log: list
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    n_events: int
    replica: int = 0
    flags: tuple = ()
    absorbed_at: float | None = None

    def snapshot_measures(self):
        return [LatticeMeasure(tuple(c)) for c in self.snapshots.tolist()]

    def snapshot_points(self):
        return self.snapshots / self.N

    def events_to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "from_state", "to_state"])
            for t, x, y in self.event_log:
                w.writerow([f"{t:.17g}", x, y])

    def snapshots_to_csv(self, path):
        d = self.snapshots.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["time"] + [f"count_{k + 1}" for k in range(d)])
            for t, c in zip(self.snapshot_times, self.snapshots.tolist()):
                w.writerow([f"{t:.17g}"] + c)


def _snapshot_grid(horizon, snapshot_times):
    if snapshot_times is None:
        return np.linspace(0.0, horizon, 101)
    s = np.asarray(snapshot_times, dtype=float)
    if s.ndim != 1 or np.any(np.diff(s) <= 0) or s[0] < 0 or s[-1] > horizon:
        raise ValueError("snapshot times must increase within [0, horizon]")
    return s


def _as_counts(init, N, d):
    if isinstance(init, LatticeMeasure):
        counts = init.counts
    else:
        arr = np.asarray(init)
        if np.issubdtype(arr.dtype, np.integer):
            counts = tuple(int(c) for c in arr)
        else:
            counts = nearest_counts(arr, N)
    if len(counts) != d or sum(counts) != N or min(counts) < 0:
        raise ValueError(f"initial counts {counts} are not a point of S_N with N={N}, d={d}")
    return tuple(counts)


def simulate_empirical(family, N, init, horizon, seed, snapshot_times=None, replica=0, log_events=True):
    """Exact jump-by-jump simulation of the empirical-measure chain.

    From counts ``c`` the chain leaves at total rate
    ``sum_{x != y} c_x Gamma^N_xy(c/N)`` after an exponential holding time
    and moves along a jump chosen in proportion to its rate.  Rates are
    computed once per visited lattice point.  ``init`` is a
    :class:`LatticeMeasure`, an integer count vector, or a probability
    vector (rounded to the nearest lattice point).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if N < 1:
        raise ValueError("N must be >= 1")
    d = family.d
    counts = list(_as_counts(init, N, d))
    snaps_t = _snapshot_grid(horizon, snapshot_times)
    snaps = np.empty((len(snaps_t), d), dtype=np.int64)
    table = _JumpTable(family, N)
    U = _Uniforms(replica_rng(seed, replica))
    log = []
    flags = []
    t = 0.0
    k = 0
    n_events = 0
    absorbed = None
    while True:
        key = tuple(counts)
        jumps, cum, total = table[key]
        if total <= 0:
            absorbed = t
            break
        t_next = t - np.log1p(-U.next()) / total
        while k < len(snaps_t) and snaps_t[k] < t_next:
            snaps[k] = key
            k += 1
        if t_next > horizon:
            break
        x, y = jumps[_pick(cum, U.next() * total)]
        counts[x] -= 1
        counts[y] += 1
        t = t_next
        n_events += 1
        if log_events:
            if n_events > EVENT_LOG_LIMIT:
                log_events = False
                log = []
                flags.append("log-truncated")
            else:
                log.append((float(t), x, y))
    while k < len(snaps_t):
        snaps[k] = counts
        k += 1
    if absorbed is not None:
        flags.append("absorbed")
    return SimulationRun(int(seed), N, float(horizon), _as_counts(init, N, d), log, snaps_t, snaps,
                         n_events, replica, tuple(flags), absorbed)


def _dense_tables(family, lattice):
    """Padded per-point jump arrays over a whole lattice, in ``(x, y)`` order."""
    table = _JumpTable(family, lattice.N)
    rows = [table[tuple(c)] for c in lattice.counts.tolist()]
    width = max(1, max(len(r[0]) for r in rows))
    n = len(rows)
    d = lattice.d
    cum = np.full((n, width), np.inf)
    target = np.zeros((n, width), dtype=np.int64)
    total = np.zeros(n)
    for i, (jumps, c, tot) in enumerate(rows):
        base = lattice.counts[i]
        total[i] = tot
        for j, ((x, y), cj) in enumerate(zip(jumps, c)):
            cum[i, j] = cj
            nxt = base.copy()
            nxt[x] -= 1
            nxt[y] += 1
            target[i, j] = lattice.index(nxt)
        if jumps:
            cum[i, len(jumps) - 1] = np.inf  # rounding guard for the last jump
    return cum, target, total, d


def simulate_replicas(family, N, init, horizon, seed, replicas, snapshot_times=None, cap=DEFAULT_LATTICE_CAP):
    """Counts at ``snapshot_times`` for ``replicas`` independent runs.

    Returns an array of shape ``(replicas, len(snapshot_times), d)``.
    Replica ``i`` uses the same stream as
    ``simulate_empirical(..., seed, replica=i)`` and reproduces its
    snapshots exactly.  When the lattice fits under ``cap`` the replicas
    advance together on precomputed jump tables; otherwise they run one by
    one.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    d = family.d
    snaps_t = _snapshot_grid(horizon, snapshot_times)
    if lattice_size(N, d) > cap:
        return np.stack([
            simulate_empirical(family, N, init, horizon, seed, snaps_t, r, log_events=False).snapshots
            for r in range(replicas)
        ])
    lattice = Lattice(N, d, cap)
    cum, target, total, _ = _dense_tables(family, lattice)
    start = lattice.index(_as_counts(init, N, d))
    R = replicas
    state = np.full(R, start, dtype=np.int64)
    t = np.zeros(R)
    k = np.zeros(R, dtype=np.int64)
    out = np.empty((R, len(snaps_t)), dtype=np.int64)
    rngs = [replica_rng(seed, r) for r in range(R)]
    block = 64
    bufs = np.stack([g.random(2 * block) for g in rngs])
    pos = 0
    active = np.ones(R, dtype=bool)
    n_snap = len(snaps_t)
    snaps_ext = np.append(snaps_t, np.inf)
    while active.any():
        if pos == bufs.shape[1]:
            block = min(2 * block, _BLOCK)
            bufs = np.zeros((R, 2 * block))
            for r in np.nonzero(active)[0]:
                bufs[r] = rngs[r].random(2 * block)
            pos = 0
        idx = np.nonzero(active)[0]
        u1 = bufs[idx, pos]
        u2 = bufs[idx, pos + 1]
        pos += 2
        s = state[idx]
        lam = total[s]
        with np.errstate(divide="ignore"):
            t_next = np.where(lam > 0, t[idx] - np.log1p(-u1) / lam, np.inf)
        # record snapshots passed before the next jump
        kk = k[idx]
        while True:
            due = snaps_ext[kk] < t_next
            if not due.any():
                break
            rr = idx[due]
            out[rr, kk[due]] = s[due]
            kk[due] += 1
        k[idx] = kk
        done = t_next > horizon
        active[idx[done]] = False
        go = ~done
        if go.any():
            gi = idx[go]
            sg = s[go]
            thresh = (u2[go] * lam[go])[:, None]
            choice = np.sum(cum[sg] <= thresh, axis=1)
            state[gi] = target[sg, choice]
            t[gi] = t_next[go]
    assert np.all(k == n_snap)
    return lattice.counts[out]


def lln_gap(run, ode):
    """Sup over the snapshot times of ``|mu^N(t) - p(t)|_1`` (ODE linearly interpolated)."""
    times = np.asarray(run.snapshot_times)
    if times[-1] > ode.times[-1] + 1e-12:
        raise ValueError("ODE trajectory is shorter than the simulation")
    ref = ode.at(times)
    return float(np.abs(run.snapshot_points() - ref).sum(axis=1).max())


def lln_gaps(snapshots, snapshot_times, N, ode):
    """:func:`lln_gap` for a stack of replica snapshots ``(R, T, d)``."""
    ref = ode.at(np.asarray(snapshot_times))
    return np.abs(snapshots / N - ref[None]).sum(axis=2).max(axis=1)


@dataclass
class TaggedRun:
    """Tagged-particle states and counts at the snapshot times."""

    seed: int
    N: int
    horizon: float
    snapshot_times: np.ndarray
    tagged: np.ndarray  # (T, k) states of particles 1..k
    snapshots: np.ndarray  # (T, d) counts
    n_events: int
    replica: int = 0
    flags: tuple = field(default=())


def _initial_configuration(init, N, d, rng):
    """Exchangeable initial configuration: shuffled counts or i.i.d. draws."""
    if isinstance(init, LatticeMeasure) or np.issubdtype(np.asarray(init).dtype, np.integer):
        arr = np.asarray(init.counts if isinstance(init, LatticeMeasure) else init)
        if arr.shape == (d,):
            config = np.repeat(np.arange(d), _as_counts(arr, N, d))
            return rng.permutation(config)
        if arr.shape == (N,):
            return arr.astype(np.int64)
        raise ValueError("integer init must be a count vector or a full configuration")
    rho = np.asarray(init, dtype=float)
    return rng.choice(d, size=N, p=rho / rho.sum())


def simulate_tagged(family, N, k, init, horizon, seed, snapshot_times=None, replica=0):
    """Configuration-level simulation keeping particle identities.

    ``init`` is a count vector or :class:`LatticeMeasure` (particles placed
    by a uniformly random arrangement), a length-``N`` configuration, or a
    probability vector ``rho`` (particles i.i.d. ``rho``).  The jump type is
    chosen exactly as in :func:`simulate_empirical`; the moving particle is
    then uniform among those in the source state.  Particles ``0..k-1`` are
    reported.
    """
    if not 1 <= k <= N:
        raise ValueError("need 1 <= k <= N")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    d = family.d
    rng = replica_rng(seed, replica)
    config = _initial_configuration(init, N, d, rng)
    members = [list(np.nonzero(config == x)[0]) for x in range(d)]
    pos = np.empty(N, dtype=np.int64)
    for x in range(d):
        for j, i in enumerate(members[x]):
            pos[i] = j
    counts = [len(m) for m in members]
    snaps_t = _snapshot_grid(horizon, snapshot_times)
    snaps = np.empty((len(snaps_t), d), dtype=np.int64)
    tagged = np.empty((len(snaps_t), k), dtype=np.int64)
    table = _JumpTable(family, N)
    U = _Uniforms(rng)
    t = 0.0
    s = 0
    n_events = 0
    while True:
        key = tuple(counts)
        jumps, cum, total = table[key]
        t_next = np.inf if total <= 0 else t - np.log1p(-U.next()) / total
        while s < len(snaps_t) and snaps_t[s] < t_next:
            snaps[s] = key
            tagged[s] = config[:k]
            s += 1
        if t_next > horizon:
            break
        x, y = jumps[_pick(cum, U.next() * total)]
        j = min(int(U.next() * counts[x]), counts[x] - 1)
        i = members[x][j]
        last = members[x].pop()
        if last != i:
            members[x][j] = last
            pos[last] = j
        pos[i] = len(members[y])
        members[y].append(i)
        config[i] = y
        counts[x] -= 1
        counts[y] += 1
        t = t_next
        n_events += 1
    return TaggedRun(int(seed), N, float(horizon), snaps_t, tagged, snaps, n_events, replica)


def simulate_tagged_replicas(family, N, k, init, horizon, seed, replicas, snapshot_times=None,
                             cap=DEFAULT_LATTICE_CAP):
    """Tagged states at ``snapshot_times`` for many replicas, shape ``(R, T, k)``.

    The untagged particles are exchangeable, so a replica only tracks the
    counts and the ``k`` tagged states: when a particle leaves state ``x``
    it is the one in a uniformly chosen slot among the ``counts_x``
    occupants, the tagged ones holding the first slots in tag order.  This
    has the same law as :func:`simulate_tagged` (initial arrangements are
    drawn the same way) but is not draw-for-draw identical to it.
    """
    d = family.d
    snaps_t = _snapshot_grid(horizon, snapshot_times)
    lattice = Lattice(N, d, cap)
    cum, target, total, _ = _dense_tables(family, lattice)
    R = replicas
    rngs = [replica_rng(seed, r) for r in range(R)]
    configs = [_initial_configuration(init, N, d, g) for g in rngs]
    state = np.array([lattice.index(tuple(np.bincount(c, minlength=d))) for c in configs])
    tag = np.stack([c[:k] for c in configs]).astype(np.int64)
    # jump source/destination for each (lattice point, jump slot)
    src = np.zeros_like(target)
    dst = np.zeros_like(target)
    diff = lattice.counts[target] - lattice.counts[:, None, :]
    src[:] = np.argmin(diff, axis=2)
    dst[:] = np.argmax(diff, axis=2)
    t = np.zeros(R)
    kk = np.zeros(R, dtype=np.int64)
    out = np.empty((R, len(snaps_t), k), dtype=np.int64)
    snaps_ext = np.append(snaps_t, np.inf)
    active = np.ones(R, dtype=bool)
    block = 64
    bufs = np.stack([g.random(3 * block) for g in rngs])
    pos = 0
    while active.any():
        if pos == bufs.shape[1]:
            block = min(2 * block, _BLOCK)
            bufs = np.zeros((R, 3 * block))
            for r in np.nonzero(active)[0]:
                bufs[r] = rngs[r].random(3 * block)
            pos = 0
        idx = np.nonzero(active)[0]
        u1, u2, u3 = bufs[idx, pos], bufs[idx, pos + 1], bufs[idx, pos + 2]
        pos += 3
        s = state[idx]
        lam = total[s]
        with np.errstate(divide="ignore"):
            t_next = np.where(lam > 0, t[idx] - np.log1p(-u1) / lam, np.inf)
        ki = kk[idx]
        while True:
            due = snaps_ext[ki] < t_next
            if not due.any():
                break
            out[idx[due], ki[due]] = tag[idx[due]]
            ki[due] += 1
        kk[idx] = ki
        done = t_next > horizon
        active[idx[done]] = False
        go = ~done
        if not go.any():
            continue
        gi, sg = idx[go], s[go]
        choice = np.sum(cum[sg] <= (u2[go] * lam[go])[:, None], axis=1)
        x = src[sg, choice]
        y = dst[sg, choice]
        nx = lattice.counts[sg, x]
        slot = np.minimum((u3[go] * nx).astype(np.int64), nx - 1)
        tg = tag[gi]
        in_x = tg == x[:, None]
        rank = np.cumsum(in_x, axis=1) - 1
        moved = in_x & (rank == slot[:, None])
        tg[moved] = np.broadcast_to(y[:, None], tg.shape)[moved]
        tag[gi] = tg
        state[gi] = target[sg, choice]
        t[gi] = t_next[go]
    return out


def summarize_gaps(gaps, seed, N, horizon, threshold=None):
    """JSON-ready summary of LLN gaps across replicas."""
    gaps = np.asarray(gaps, dtype=float)
    out = {
        "seed": int(seed),
        "N": int(N),
        "horizon": float(horizon),
        "replicas": int(gaps.size),
        "gap_mean": float(gaps.mean()),
        "gap_median": float(np.median(gaps)),
        "gap_max": float(gaps.max()),
        "gap_q95": float(np.quantile(gaps, 0.95)),
    }
    if threshold is not None:
        out["threshold"] = float(threshold)
        out["fraction_below"] = float(np.mean(gaps <= threshold))
    return out


def write_summary(summary, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
