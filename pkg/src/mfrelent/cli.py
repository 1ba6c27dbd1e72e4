"""Configuration-driven experiment runner.

Usage::

    mfrelent validate experiment.toml
    mfrelent run experiment.toml [--seed S] [--out-dir DIR] [--threads T] [--cap C]

An experiment file (TOML or JSON) names one experiment kind and its
parameters::

    experiment = "entropy-limit"
    model = "curie_weiss.toml"        # path relative to this file, or an inline table
    seed = 0
    out_dir = "results"

    [parameters]
    Ns = [10, 20, 40, 80, 160]
    q = [[0.5, 0.5], [0.8, 0.2]]

Experiments on a fixed rate matrix replace ``model`` by ``rates`` (a square
matrix of off-diagonal rates; the diagonal is ignored and refilled).
Every CSV starts with ``#`` comment lines naming the operation behind each
column; the JSON summary echoes inputs, versions, seeds and wall times.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .action import EntropyInitialCost, minimize_action_Jt, quasipotential
from .chain import (
    build_generator,
    entropy_curve_Ft,
    gibbs_distribution,
    multinomial_distribution,
    nearest_point_mass,
    richardson,
    scaled_product_entropy,
    stationary_distribution,
)
from .dynamics import (
    RateFamily,
    entropy_descent_rate,
    find_fixed_points,
    random_rate_matrix,
    solve_forward,
    stationary_of,
    with_diagonal,
)
from .gibbs import (
    gibbs_constant_C,
    limit_rate_family,
    load_document,
    lyapunov_F,
    model_from_dict,
    prelimit_rate_family,
)
from .particle import lln_gaps, simulate_empirical, simulate_replicas, summarize_gaps
from .simplex import DEFAULT_LATTICE_CAP, Lattice, lattice_size, relative_entropy

EXPERIMENTS = ("ode", "simulate", "stationary", "entropy-limit", "descent-check", "jt", "quasipotential")
THREADS_ENV = "MFRELENT_THREADS"


class ConfigError(Exception):
    """Collected validation diagnostics, one ``field.path: message`` per entry."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


# configuration ---------------------------------------------------------------


_TOP_LEVEL = {"experiment", "model", "rates", "parameters", "seed", "out_dir"}


class _Checker:
    def __init__(self, params):
        self.params = params
        self.errors = []
        self.seen = set()

    def fail(self, path, msg):
        self.errors.append(f"{path}: {msg}")

    def get(self, key, kind, default=None, required=False):
        path = f"parameters.{key}"
        self.seen.add(key)
        if key not in self.params:
            if required:
                self.fail(path, "missing required field")
            return default
        value = self.params[key]
        try:
            return kind(value, path, self)
        except (TypeError, ValueError) as exc:
            self.fail(path, str(exc))
            return default


def _pos_int(v, path, chk):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValueError(f"expected a positive integer, got {v!r}")
    return v


def _pos_int_list(v, path, chk):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a non-empty list of positive integers")
    for i, x in enumerate(v):
        if isinstance(x, bool) or not isinstance(x, int) or x < 1:
            raise ValueError(f"entry [{i}] is not a positive integer: {x!r}")
    return v


def _pos_float(v, path, chk):
    v = float(v)
    if not v > 0:
        raise ValueError(f"expected a positive number, got {v!r}")
    return v


def _float_list(v, path, chk):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a non-empty list of numbers")
    return [float(x) for x in v]


def _prob(v, path, chk):
    p = np.asarray(v, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ValueError(f"expected a probability vector, got {v!r}")
    return p


def _prob_list(v, path, chk):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a non-empty list of probability vectors")
    if not isinstance(v[0], list):
        v = [v]
    return [_prob(x, path, chk) for x in v]


def _string(v, path, chk):
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


class Experiment:
    """A validated experiment: kind, model or rate family, parameters."""

    def __init__(self, raw, base_dir, cap):
        self.raw = raw
        self.base_dir = Path(base_dir)
        self.cap = cap
        errors = []
        self.kind = raw.get("experiment")
        if self.kind not in EXPERIMENTS:
            errors.append(f"experiment: expected one of {', '.join(EXPERIMENTS)}, got {self.kind!r}")
        self.seed = raw.get("seed", 0)
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            errors.append(f"seed: expected a nonnegative integer, got {self.seed!r}")
        self.out_dir = raw.get("out_dir", "results")
        self.model = None
        self.rates = None
        self.model_source = None
        if "model" in raw:
            spec = raw["model"]
            try:
                if isinstance(spec, str):
                    path = (self.base_dir / spec)
                    if not path.exists():
                        raise FileNotFoundError(f"model file {str(path)!r} does not exist")
                    self.model_source = str(path)
                    spec = load_document(path)
                self.model = model_from_dict(spec)
            except KeyError as exc:
                for name in str(exc).strip("'\"").split(", "):
                    errors.append(f"model.{name}: missing required field")
            except (ValueError, TypeError, FileNotFoundError, OSError) as exc:
                errors.append(f"model: {exc}")
        elif "rates" in raw:
            try:
                G = with_diagonal(raw["rates"])
                if np.any(G - np.diag(np.diag(G)) < 0):
                    raise ValueError("negative rate")
                self.rates = G
            except (ValueError, TypeError) as exc:
                errors.append(f"rates: {exc}")
        elif self.kind != "descent-check":
            errors.append("model: missing required field (or give 'rates')")
        params = raw.get("parameters", {})
        if not isinstance(params, dict):
            errors.append("parameters: expected a table")
            params = {}
        chk = _Checker(params)
        self.params = self._check_params(chk) if self.kind in EXPERIMENTS else {}
        errors.extend(chk.errors)
        if self.kind in EXPERIMENTS:
            for key in sorted(set(params) - chk.seen):
                errors.append(f"parameters.{key}: unknown field for the {self.kind} experiment")
        for key in sorted(set(raw) - _TOP_LEVEL):
            errors.append(f"{key}: unknown field")
        if self.kind in EXPERIMENTS and not errors:
            errors.extend(self._check_caps())
        if errors:
            raise ConfigError(errors)

    @property
    def d(self):
        if self.model is not None:
            return self.model.d
        if self.rates is not None:
            return self.rates.shape[0]
        return self.params.get("d")

    def limit_family(self):
        if self.model is not None:
            return limit_rate_family(self.model)
        return RateFamily.constant(self.rates)

    def family_at(self, N):
        if self.model is not None:
            return prelimit_rate_family(self.model, N)
        return RateFamily.constant(self.rates)

    def _check_params(self, chk):
        k = self.kind
        p = {}
        if k == "ode":
            p["p0"] = chk.get("p0", _prob, required=True)
            p["horizon"] = chk.get("horizon", _pos_float, 10.0)
            p["step"] = chk.get("step", _pos_float, 1e-2)
        elif k == "simulate":
            p["N"] = chk.get("N", _pos_int, required=True)
            p["p0"] = chk.get("p0", _prob, required=True)
            p["horizon"] = chk.get("horizon", _pos_float, 5.0)
            p["replicas"] = chk.get("replicas", _pos_int, 100)
            p["snapshots"] = chk.get("snapshots", _pos_int, 101)
            p["threshold"] = chk.get("threshold", _pos_float, 0.05)
        elif k == "stationary":
            p["N"] = chk.get("N", _pos_int, required=True)
        elif k == "entropy-limit":
            p["Ns"] = chk.get("Ns", _pos_int_list, [10, 20, 40, 80, 160])
            p["q"] = chk.get("q", _prob_list, required=True)
            p["refinement"] = chk.get("refinement", _pos_int, 40)
            if self.model is None:
                chk.fail("model", "entropy-limit needs a Gibbs model")
        elif k == "descent-check":
            p["d"] = chk.get("d", _pos_int, 3)
            p["horizon"] = chk.get("horizon", _pos_float, 5.0)
            p["step"] = chk.get("step", _pos_float, 1e-2)
            p["p0"] = chk.get("p0", _prob)
        elif k == "jt":
            p["q"] = chk.get("q", _prob, required=True)
            p["times"] = chk.get("times", _float_list, [1.0])
            p["Ns"] = chk.get("Ns", _pos_int_list, [25, 50, 100, 200])
            p["nodes"] = chk.get("nodes", _pos_int, 64)
            p["restarts"] = chk.get("restarts", _pos_int, 8)
            p["init"] = chk.get("init", _string, "point")
            p["pi_star"] = chk.get("pi_star", _prob)
            p["rho"] = chk.get("rho", _prob)
            if p["init"] not in ("point", "product"):
                chk.fail("parameters.init", "expected 'point' or 'product'")
            if p["init"] == "product" and p["rho"] is None:
                chk.fail("parameters.rho", "missing required field for init = 'product'")
            if p["nodes"] is not None and p["nodes"] < 8:
                chk.fail("parameters.nodes", "must be >= 8")
            if p["Ns"] and len(p["Ns"]) > 1 and any(b != 2 * a for a, b in zip(p["Ns"], p["Ns"][1:])):
                chk.fail("parameters.Ns", "Richardson extrapolation needs doubling N values")
        elif k == "quasipotential":
            p["pi_star"] = chk.get("pi_star", _prob)
            p["q"] = chk.get("q", _prob_list, required=True)
            p["horizons"] = chk.get("horizons", _float_list, [2.0, 5.0, 10.0, 20.0, 40.0])
            p["nodes"] = chk.get("nodes", _pos_int, 64)
            p["restarts"] = chk.get("restarts", _pos_int, 8)
        return p

    def _check_caps(self):
        errors = []
        d = self.d
        for key in ("N", "Ns"):
            if key not in self.params or self.kind == "simulate":
                continue
            values = self.params[key]
            values = values if isinstance(values, list) else [values]
            for i, N in enumerate(values):
                size = lattice_size(N, d)
                if size > self.cap:
                    where = f"parameters.{key}" + (f"[{i}]" if key == "Ns" else "")
                    errors.append(f"{where}: lattice for N={N}, d={d} has {size} points, above the cap of {self.cap}")
        for key in ("p0", "q", "pi_star", "rho"):
            v = self.params.get(key)
            vs = v if isinstance(v, list) else [v]
            for x in vs:
                if x is not None and d is not None and len(x) != d:
                    errors.append(f"parameters.{key}: expected {d} components, got {len(x)}")
        return errors


def load_experiment(path, cap=DEFAULT_LATTICE_CAP, overrides=None):
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config: file {str(path)!r} does not exist"])
    try:
        raw = load_document(path)
    except Exception as exc:  # parse errors from either format
        raise ConfigError([f"config: cannot parse: {exc}"]) from exc
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return Experiment(raw, path.parent, cap)


# output ----------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


class _Outputs:
    """Tracks written files so a failed run can remove them."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.created_dir = not self.dir.exists()
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def csv(self, name, columns, rows, comments):
        path = self.dir / name
        self.files.append(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.writelines(f"# {line}\r\n" for line in comments)
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return path

    def json(self, name, obj):
        path = self.dir / name
        self.files.append(path)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        return path

    def cleanup(self):
        for f in self.files:
            f.unlink(missing_ok=True)
        if self.created_dir:
            try:
                self.dir.rmdir()
            except OSError:
                pass


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def _pmap(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# experiments -----------------------------------------------------------------


def _exp_ode(exp, out, threads):
    p = exp.params
    fam = exp.limit_family()
    traj = solve_forward(fam, p["p0"], p["horizon"], p["step"])
    d = fam.d
    rows = [[t, *pt] for t, pt in zip(traj.times, traj.points)]
    out.csv("trajectory.csv", ["time"] + [f"p{k + 1}" for k in range(d)], rows, [
        "time: grid time of dynamics.solve_forward",
        "p1..pd: dynamics.solve_forward state (RK4, clamp-renormalised)",
    ])
    fps = find_fixed_points(fam)
    return {"final_point": traj.final, "fixed_points": [list(x) for x in fps]}


def _exp_simulate(exp, out, threads):
    p = exp.params
    N = p["N"]
    fam = exp.family_at(N)
    times = np.linspace(0.0, p["horizon"], p["snapshots"])
    first = simulate_empirical(fam, N, p["p0"], p["horizon"], exp.seed, times, replica=0, log_events=False)
    ode = solve_forward(exp.limit_family(), first.snapshots[0] / N, p["horizon"], min(1e-2, p["horizon"] / 10))
    snaps = simulate_replicas(fam, N, p["p0"], p["horizon"], exp.seed, p["replicas"], times, cap=exp.cap)
    gaps = lln_gaps(snaps, times, N, ode)
    d = fam.d
    out.csv("snapshots.csv", ["replica", "time"] + [f"count_{k + 1}" for k in range(d)],
            ([r, t, *c] for r in range(len(snaps)) for t, c in zip(times, snaps[r].tolist())), [
        "replica, time, count_*: particle.simulate_replicas snapshot counts",
    ])
    out.csv("gaps.csv", ["replica", "gap"], ([r, g] for r, g in enumerate(gaps)), [
        "gap: particle.lln_gaps, sup over snapshot times of the l1 distance to dynamics.solve_forward",
    ])
    return summarize_gaps(gaps, exp.seed, N, p["horizon"], p["threshold"])


def _exp_stationary(exp, out, threads):
    N = exp.params["N"]
    gen = build_generator(exp.family_at(N), N, exp.cap)
    st = stationary_distribution(gen)
    cols = [f"count_{k + 1}" for k in range(gen.lattice.d)] + ["weight"]
    comments = ["count_*: simplex.Lattice point", "weight: chain.stationary_distribution"]
    closed = None
    if exp.model is not None:
        closed = gibbs_distribution(exp.model, gen.lattice).weights
        cols.append("gibbs_weight")
        comments.append("gibbs_weight: chain.gibbs_distribution (closed-form Gibbs pushforward)")
    rows = []
    for i, c in enumerate(gen.lattice.counts.tolist()):
        row = c + [st.weights[i]]
        if closed is not None:
            row.append(closed[i])
        rows.append(row)
    out.csv("stationary.csv", cols, rows, comments)
    summary = {"states": gen.size, "mean": st.mean()}
    if closed is not None:
        summary["max_abs_diff_vs_gibbs"] = float(np.abs(st.weights - closed).max())
    return summary


def _exp_entropy_limit(exp, out, threads):
    p = exp.params
    model = exp.model
    C = gibbs_constant_C(model, p["refinement"])
    Ns = p["Ns"]
    laws = _pmap(lambda N: gibbs_distribution(model, Lattice(N, model.d, exp.cap)), Ns, threads)
    rows = []
    gaps = {}
    for q in p["q"]:
        F = lyapunov_F(model, q, C)
        for N, m in zip(Ns, laws):
            Ft = scaled_product_entropy(q, m)
            rows.append([N, *q, Ft, F, abs(Ft - F)])
            gaps.setdefault(str(list(q)), []).append(abs(Ft - F))
    d = model.d
    out.csv("entropy_limit.csv", ["N"] + [f"q{k + 1}" for k in range(d)] + ["F_tilde_N", "F", "gap"], rows, [
        "F_tilde_N: chain.scaled_product_entropy against chain.gibbs_distribution",
        "F: gibbs.lyapunov_F with C from gibbs.gibbs_constant_C",
        "gap: |F_tilde_N - F|",
    ])
    return {"C": C, "gaps": gaps}


def _exp_descent_check(exp, out, threads):
    p = exp.params
    rng = np.random.default_rng(np.random.SeedSequence(exp.seed))
    G = exp.rates if exp.rates is not None else random_rate_matrix(p["d"], rng)
    d = G.shape[0]
    pi = stationary_of(G)
    p0 = p["p0"] if p["p0"] is not None else rng.dirichlet(np.ones(d))
    fam = RateFamily.constant(G)
    traj = solve_forward(fam, p0, p["horizon"], p["step"])
    R = np.array([relative_entropy(x, pi) for x in traj.points])
    rows = []
    h = p["step"]
    for i in range(1, len(traj.times) - 1):
        fd = (R[i + 1] - R[i - 1]) / (traj.times[i + 1] - traj.times[i - 1])
        rows.append([traj.times[i], R[i], entropy_descent_rate(traj.points[i], pi, G), fd])
    out.csv("descent.csv", ["time", "R_p_pi", "descent_rate", "fd_rate"], rows, [
        "R_p_pi: simplex.relative_entropy of dynamics.solve_forward state to the stationary law",
        "descent_rate: dynamics.entropy_descent_rate",
        "fd_rate: centred difference of R_p_pi on the solve_forward grid",
    ])
    diffs = [abs(r[2] - r[3]) for r in rows]
    return {"rates": G, "p0": p0, "step": h, "max_rate_mismatch": max(diffs),
            "monotone": bool(np.all(np.diff(R) <= 1e-9))}


def _jt_initial(exp):
    p = exp.params
    if p["init"] == "product":
        return "product", p["rho"]
    pi = p["pi_star"]
    if pi is None:
        fps = find_fixed_points(exp.limit_family())
        if len(fps) != 1:
            raise ValueError("parameters.pi_star: required when the drift has several fixed points")
        pi = fps.points[0]
    return "point", pi


def _exp_jt(exp, out, threads):
    p = exp.params
    q = p["q"]
    kind, anchor = _jt_initial(exp)
    fam = exp.limit_family()
    J0 = EntropyInitialCost(anchor) if kind == "product" else anchor
    rows = []
    headline = []
    times = sorted(p["times"])

    def finite_n(N):
        lat = Lattice(N, fam.d, exp.cap)
        init = multinomial_distribution(lat, anchor) if kind == "product" else nearest_point_mass(lat, anchor)
        src = exp.model if exp.model is not None else build_generator(fam, N, exp.cap, lat)
        return entropy_curve_Ft(src, q, init, times, N=N, cap=exp.cap)

    curves = _pmap(finite_n, p["Ns"], threads)
    for j, t in enumerate(times):
        vals = [c[j] for c in curves]
        extrap = richardson(vals, p["Ns"]) if len(vals) > 1 else vals[0]
        res = minimize_action_Jt(fam, J0, q, t, p["nodes"], p["restarts"], seed=exp.seed)
        rows.append([t, res.value, extrap] + vals)
        headline.append({"t": t, "J_t": res.value, "F_t_extrapolated": extrap, "flags": list(res.flags)})
        _path_csv(out, f"jt_path_t{j}.csv", res.path, "action.minimize_action_Jt optimal path at this t")
    cols = ["t", "J_t", "F_t_extrapolated"] + [f"F_t_N{N}" for N in p["Ns"]]
    out.csv("jt.csv", cols, rows, [
        "J_t: action.minimize_action_Jt",
        "F_t_extrapolated: chain.richardson over the F_t_N columns",
        "F_t_N*: chain.entropy_curve_Ft at each N",
    ])
    return {"initial": kind, "anchor": anchor, "results": headline}


def _path_csv(out, name, path, what):
    d = path.points.shape[1]
    out.csv(name, ["time"] + [f"p{k + 1}" for k in range(d)],
            ([t, *pt] for t, pt in zip(path.times, path.points)), [f"time, p*: {what}"])


def _exp_quasipotential(exp, out, threads):
    p = exp.params
    fam = exp.limit_family()
    pi = p["pi_star"]
    if pi is None:
        fps = find_fixed_points(fam)
        if len(fps) != 1:
            raise ValueError("parameters.pi_star: required when the drift has several fixed points")
        pi = fps.points[0]
    results = _pmap(lambda q: quasipotential(fam, pi, q, p["horizons"], p["nodes"], p["restarts"], exp.seed),
                    p["q"], threads)
    rows = []
    d = fam.d
    for i, (q, r) in enumerate(zip(p["q"], results)):
        for h, raw, run in zip(r.horizons, r.raw_values, r.running_min):
            rows.append([i, *q, h, raw, run])
        best = int(np.argmin(r.raw_values))
        _path_csv(out, f"qp_path_{i}.csv", r.paths[best], "action.quasipotential path at the best horizon")
    out.csv("quasipotential.csv", ["target"] + [f"q{k + 1}" for k in range(d)] + ["horizon", "action", "running_min"],
            rows, [
                "action: action.minimize_action_Jt from the point pi_star at each horizon",
                "running_min: action.quasipotential (running minimum over horizons)",
            ])
    return {"pi_star": pi, "values": [r.value for r in results]}


_RUNNERS = {
    "ode": _exp_ode,
    "simulate": _exp_simulate,
    "stationary": _exp_stationary,
    "entropy-limit": _exp_entropy_limit,
    "descent-check": _exp_descent_check,
    "jt": _exp_jt,
    "quasipotential": _exp_quasipotential,
}


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def run_experiment(exp, out_dir=None, threads=1):
    """Execute ``exp``; returns the summary dictionary.  Removes outputs on failure."""
    out = _Outputs(out_dir or (exp.base_dir / exp.out_dir))
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    try:
        headline = _RUNNERS[exp.kind](exp, out, threads)
        summary = {
            "experiment": exp.kind,
            "inputs": exp.raw,
            "model_source": exp.model_source,
            "parameters": exp.params,
            "seed": exp.seed,
            "threads": threads,
            "cap": exp.cap,
            "versions": {
                "mfrelent": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
                "bit_generator": "PCG64",
            },
            "started": started.isoformat(),
            "wall_time_s": time.perf_counter() - t0,
            "results": headline,
            "files": [f.name for f in out.files],
        }
        out.json("summary.json", summary)
        return summary
    except BaseException:
        out.cleanup()
        raise


def build_parser():
    ap = argparse.ArgumentParser(prog="mfrelent", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("config")
        sp.add_argument("--cap", type=int, default=DEFAULT_LATTICE_CAP, help="lattice size cap")
        sp.add_argument("--seed", type=int, default=None)
        if name == "run":
            sp.add_argument("--out-dir", default=None)
            sp.add_argument("--threads", type=int, default=None,
                            help=f"worker threads (default: ${THREADS_ENV} or 1)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        exp = load_experiment(args.config, args.cap, {"seed": args.seed})
    except ConfigError as exc:
        for line in exc.diagnostics:
            print(f"error: {line}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"ok: {exp.kind} experiment is runnable")
        return 0
    try:
        summary = run_experiment(exp, args.out_dir, _threads(args.threads))
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"experiment": summary["experiment"], "files": summary["files"],
                      "wall_time_s": round(summary["wall_time_s"], 3)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
