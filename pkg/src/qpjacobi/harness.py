"""Command-line driver: configured sweeps, CSV/JSON reports and a run manifest.

Usage::

    qpjacobi <subcommand> --config run.json [--out DIR] [--threads N] [--preset paper|custom]

Subcommands: ``spectrum``, ``lyapunov``, ``gaps``, ``resonances``, ``badset``,
``localize``, ``green-check``, ``ldt``, ``avalanche-check``, ``identities``
and ``all`` (every subcommand listed under ``"run"`` in the config).

Exit status is 0 on success, 1 for an invalid configuration (a JSON
diagnostic is written to stderr) and 2 when at least one task failed; failed
tasks are recorded in the manifest and the remaining tasks still run.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .avalanche import ap_check, chain_zero_profile, random_ap_sequence
from .frequency import GOLDEN, SILVER, convergent_grid_size
from .green import decay_certificate, poisson_sweep
from .identities import cramer_defect, identity_case, suite_model
from .intervals import IntervalUnion
from .localization import center_proximity, fitted_rate, localization_center, restriction_distance, tail_mass
from .models import random_model
from .operator import build_window, eigensystem, eigenvalues
from .resonance import (elimination_scan, gap_report, ldt_empirical, paper_parameters, refine_bad_set,
                        slope_bad_set, verify_slope_guarantee)
from .sampling import ModelFileError, SamplingPair, load_model, model_from_dict, model_to_dict
from .transfer import lyapunov

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "run", "main", "SUBCOMMANDS"]

SUBCOMMANDS = ("spectrum", "lyapunov", "gaps", "resonances", "badset", "localize",
               "green-check", "ldt", "avalanche-check", "identities")
THREADS_ENV = "QPJACOBI_THREADS"
NUMERICAL_ERRORS = (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError)


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


# -- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    pair: SamplingPair
    omega: float
    scales: tuple[int, ...]
    x_grid: int
    phase: float
    energy_window: tuple[float, float] | None
    preset: str
    params: dict
    sections: dict
    output: Path | None
    threads: int
    seed: int
    run: tuple[str, ...]
    digest: str

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def resolved_params(self) -> dict:
        """Explicit parameters, or the scale relations at ``N = max(scales)``."""
        if self.preset == "paper":
            p = dict(self.params)
            pp = paper_parameters(max(self.scales), float(p.get("p", 16.0)), float(p.get("A", 2.0)))
            p.update(pp)
            p["Q"] = int(math.ceil(pp["Q"]))
            return p
        return dict(self.params)


def _omega(spec) -> float:
    if isinstance(spec, str):
        named = {"golden": GOLDEN, "silver": SILVER}
        if spec.lower() not in named:
            raise ConfigError("omega", f"unknown name {spec!r}; use golden, silver, a number or a continued fraction")
        return named[spec.lower()]
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        w = float(spec)
    elif isinstance(spec, dict) and "continued_fraction" in spec:
        q = spec["continued_fraction"]
        if not q or not all(isinstance(v, int) and v > 0 for v in q):
            raise ConfigError("omega", "continued_fraction must be a non-empty list of positive integers")
        # a periodic expansion repeats its quotients until double precision is exhausted
        quotients = list(q) * (1 + 80 // len(q)) if spec.get("periodic", False) else list(q)
        w = 0.0
        for v in reversed(quotients):
            w = 1.0 / (v + w)
    else:
        raise ConfigError("omega", f"cannot interpret {spec!r}")
    if not 0 < w < 1:
        raise ConfigError("omega", f"must lie in (0, 1), got {w}")
    return w


def _model(spec, base: Path, seed: int) -> SamplingPair:
    try:
        if isinstance(spec, str):
            return load_model(base / spec)
        if isinstance(spec, dict) and "random" in spec:
            opts = dict(spec["random"])
            return random_model(np.random.default_rng(seed), K=int(opts.get("K", 3)),
                                decay=float(opts.get("decay", 1.0)), b_shift=float(opts.get("b_shift", 0.0)))
        if isinstance(spec, dict):
            return model_from_dict(spec)
    except (ModelFileError, ValueError, TypeError) as exc:
        raise ConfigError("model", str(exc)) from exc
    raise ConfigError("model", "expected a path, an inline model or {'random': {...}}")


def _positive(doc: dict, key: str, kind=float, allow_zero: bool = False):
    v = doc[key]
    try:
        v = kind(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"expected a number, got {doc[key]!r}") from exc
    if not (v >= 0 if allow_zero else v > 0):
        raise ConfigError(key, f"must be {'non-negative' if allow_zero else 'positive'}, got {v}")
    return v


_PARAM_KINDS = {"p": float, "tau": float, "sigma": float, "Q": int, "M": int, "l": int, "A": float,
                "grid": int, "l2": int}
_SECTIONS = ("lyapunov", "ldt", "localize", "green", "avalanche", "identities", "spectrum", "badset")


def load_config(path, preset: str | None = None, out: str | None = None,
                threads: int | None = None) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration.

    Command-line values (``preset``, ``out``, ``threads``) take precedence;
    the ``QPJACOBI_THREADS`` environment variable overrides the config's
    thread count when no flag is given.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
        doc = json.loads(raw)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be an object")
    known = {"model", "omega", "scales", "x_grid", "phase", "energy_window", "preset", "params",
             "output", "threads", "seed", "run", *_SECTIONS}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    if "model" not in doc:
        raise ConfigError("model", "required")
    seed = int(doc.get("seed", 0))
    pair = _model(doc["model"], path.parent, seed)
    omega = _omega(doc.get("omega", "golden"))
    scales = doc.get("scales", [64])
    if not isinstance(scales, list) or not scales:
        raise ConfigError("scales", "must be a non-empty list of integers")
    for v in scales:
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError("scales", f"entries must be positive integers, got {v!r}")
    x_grid = _positive(doc, "x_grid", int) if "x_grid" in doc else 8
    phase = float(doc.get("phase", 0.1))
    ew = doc.get("energy_window")
    if ew is not None:
        if not (isinstance(ew, list) and len(ew) == 2 and float(ew[0]) < float(ew[1])):
            raise ConfigError("energy_window", "must be [lo, hi] with lo < hi")
        ew = (float(ew[0]), float(ew[1]))
    pre = preset or doc.get("preset", "custom")
    if pre not in ("paper", "custom"):
        raise ConfigError("preset", f"must be 'paper' or 'custom', got {pre!r}")
    params = dict(doc.get("params", {}))
    for k, v in params.items():
        if k in _PARAM_KINDS:
            params[k] = _positive(params, k, _PARAM_KINDS[k], allow_zero=(k == "tau"))
        elif k not in ("bad_set", "prior"):
            raise ConfigError(f"params.{k}", "unknown parameter")
    sections = {}
    for name in _SECTIONS:
        if name in doc:
            if not isinstance(doc[name], dict):
                raise ConfigError(name, "must be an object")
            sections[name] = dict(doc[name])
    for key in ("bad_set", "prior"):
        if key in params:
            params[key] = str(path.parent / params[key])
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env is not None:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigError(THREADS_ENV, f"not an integer: {env!r}") from exc
        else:
            threads = int(doc.get("threads", 1))
    if threads < 1:
        raise ConfigError("threads", "must be at least 1")
    run_list = tuple(doc.get("run", SUBCOMMANDS))
    for r in run_list:
        if r not in SUBCOMMANDS:
            raise ConfigError("run", f"unknown subcommand {r!r}")
    output = Path(out) if out is not None else (Path(doc["output"]) if "output" in doc else None)
    # the hash covers the resolved model, not the path it was read from
    canon = dict(doc)
    canon["model"] = model_to_dict(pair)
    canon.pop("threads", None)
    canon.pop("output", None)
    canon["preset"] = pre
    digest = hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()
    return ExperimentConfig(pair, omega, tuple(scales), x_grid, phase, ew, pre, params, sections,
                            output, threads, seed, run_list, digest)


def _require(params: dict, *keys) -> None:
    for k in keys:
        if k not in params:
            raise ConfigError(f"params.{k}", "required by this subcommand (or use --preset paper)")


# -- serialization ---------------------------------------------------------

def _schema() -> dict:
    return json.loads(resources.files("qpjacobi").joinpath("data/csv_schema.json").read_text())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    return v


def _json_bytes(doc) -> bytes:
    return (json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n").encode()


def _csv_bytes(columns: list[str], rows: list[dict]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue().encode()


# -- tasks -----------------------------------------------------------------

@dataclass
class TaskResult:
    name: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class Task:
    name: str
    fn: Callable[[], TaskResult]


def _execute(task: Task) -> TaskResult:
    try:
        res = task.fn()
        res.name = task.name
        return res
    except NUMERICAL_ERRORS as exc:
        return TaskResult(task.name, error=f"{type(exc).__name__}: {exc}")


def _map(tasks: list[Task], threads: int) -> list[TaskResult]:
    """Run tasks, returning results in task order whatever the thread count."""
    if threads == 1 or len(tasks) <= 1:
        return [_execute(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_execute, tasks))


def _phases(cfg: ExperimentConfig) -> np.ndarray:
    return np.arange(cfg.x_grid) / cfg.x_grid


def _reference_energies(cfg: ExperimentConfig, N: int, count: int) -> np.ndarray:
    """``count`` eigenvalues spread across ``spec H^(N)(phase)``, inside the energy window."""
    spec = eigenvalues(cfg.pair, cfg.phase, cfg.omega, 0, N - 1)
    if cfg.energy_window is not None:
        spec = spec[(spec >= cfg.energy_window[0]) & (spec <= cfg.energy_window[1])]
    if spec.size == 0:
        raise ValueError("no eigenvalue inside the energy window")
    idx = np.unique(np.linspace(0, spec.size - 1, min(count, spec.size)).round().astype(int))
    return spec[idx]


def _spectrum_tasks(cfg):
    def job(N):
        def fn():
            rows = []
            lo, hi = math.inf, -math.inf
            for x in _phases(cfg):
                E = eigenvalues(cfg.pair, float(x), cfg.omega, 0, N - 1)
                lo, hi = min(lo, E[0]), max(hi, E[-1])
                rows.extend({"N": N, "x": float(x), "j": j, "E": float(e)} for j, e in enumerate(E))
            return TaskResult("", rows, {"N": N, "phases": cfg.x_grid, "E_min": lo, "E_max": hi})
        return fn
    return [Task(f"spectrum/N={N}", job(N)) for N in cfg.scales]


def _lyapunov_tasks(cfg):
    sec = cfg.section("lyapunov")
    count = int(sec.get("energies", 8))
    grid = sec.get("grid")
    y = float(sec.get("y", 0.0))
    tasks = []
    for N in cfg.scales:
        energies = sec.get("E")
        if energies is None:
            energies = _reference_energies(cfg, N, count)

        def job(N=N, energies=tuple(float(e) for e in energies)):
            def fn():
                rows = []
                G = int(grid) if grid is not None else convergent_grid_size(cfg.omega)
                for E in energies:
                    est = lyapunov(cfg.pair, y, cfg.omega, E, N, G, variant="plain")
                    est_a = lyapunov(cfg.pair, y, cfg.omega, E, N, G, variant="a")
                    rows.append({"N": N, "E": E, "L": est.value, "La": est_a.value, "D_N": est.D_N,
                                 "D": est.D, "relation_residual": est.relation_residual,
                                 "quadrature_error": est.quadrature_error_estimate,
                                 "grid_size": est.grid_size, "excluded": est.excluded_points})
                summ = {"N": N, "L_min": min(r["L"] for r in rows), "L_max": max(r["L"] for r in rows),
                        "max_relation_residual": max(r["relation_residual"] for r in rows)}
                return TaskResult("", rows, summ, {"lyapunov_grid": G})
            return fn
        tasks.append(Task(f"lyapunov/N={N}", job()))
    return tasks


def _excluded_set(cfg, params) -> IntervalUnion | None:
    path = params.get("bad_set")
    if path is None:
        return None
    try:
        return IntervalUnion.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("params.bad_set", f"cannot load {path}: {exc}") from exc


def _gaps_tasks(cfg):
    params = cfg.resolved_params()
    p = float(params.get("p", 16.0))
    given = _excluded_set(cfg, params)
    grid = int(params.get("grid", 256))

    def excluded():
        """The given bad set, else the slope bad set when ``l`` and ``tau`` are known."""
        if given is not None:
            return given, "params.bad_set"
        if "l" in params and "tau" in params:
            return _badset_for(cfg, params, int(params["l"]), float(params["tau"]), grid).Z, "slope_bad_set"
        return None, "none"

    def job(N):
        def fn():
            bad, source = excluded()
            rep = gap_report(cfg.pair, cfg.phase, cfg.omega, N, p, bad)
            E = rep.eigenvalues
            rows = []
            for j in range(N - 1):
                g = float(E[j + 1] - E[j])
                rows.append({"N": N, "j": j, "E_lo": float(E[j]), "E_hi": float(E[j + 1]), "gap": g,
                             "below_threshold": g < rep.threshold})
            edges, counts = rep.histogram
            summ = {"N": N, "p": p, "threshold": rep.threshold, "min_gap": float(np.min(rep.min_gaps)),
                    "all_positive": bool(np.all(rep.min_gaps > 0)),
                    "below_fraction": rep.below_fraction, "considered": rep.considered,
                    "excluded_source": source,
                    "histogram_log10_edges": edges, "histogram_counts": counts,
                    "note": "the separation threshold is asymptotic; the fraction is recorded, not asserted"}
            return TaskResult("", rows, summ)
        return fn
    return [Task(f"gaps/N={N}", job(N)) for N in cfg.scales if N >= 2] + \
           [Task(f"gaps/N={N}", _fail(f"N={N}: gaps need N >= 2")) for N in cfg.scales if N < 2]


def _fail(message):
    def fn():
        raise ValueError(message)
    return fn


_BADSET_CACHE: dict = {}
_BADSET_LOCK = threading.Lock()


def _badset_for(cfg, params, l, tau, grid):
    """Slope bad set, computed once per process for a given configuration."""
    key = (cfg.digest, l, tau, grid, params.get("prior"))
    with _BADSET_LOCK:
        if key not in _BADSET_CACHE:
            prior = None
            if params.get("prior") is not None:
                prior = IntervalUnion.load(params["prior"])
            _BADSET_CACHE[key] = slope_bad_set(cfg.pair, cfg.omega, l, tau, grid, prior=prior)
        return _BADSET_CACHE[key]


def _badset_tasks(cfg):
    params = cfg.resolved_params()
    _require(params, "l", "tau")
    l, tau = int(params["l"]), float(params["tau"])
    grid = int(params.get("grid", 256))
    factor = int(cfg.section("badset").get("verify_factor", 4))

    def fn():
        bad = _badset_for(cfg, params, l, tau, grid)
        viol, checked = verify_slope_guarantee(cfg.pair, cfg.omega, bad, factor)
        rows = [{"lo": lo, "hi": hi} for lo, hi in bad.Z]
        meta = bad.metadata(cfg.omega, cfg.pair.fingerprint(), params.get("sigma"))
        summ = {"tau": tau, "l": l, "grid": grid, "mes": bad.Z.mes, "com": bad.Z.com,
                "raw_mes": bad.raw.mes, "raw_com": bad.raw.com, "regions": len(bad.regions),
                "excluded_points": bad.excluded_points, "verify_factor": factor,
                "verify_points": checked, "violations": viol}
        files = {"badset_intervals.json": _json_bytes(bad.Z.to_dict(**meta))}
        res = TaskResult("", rows, summ, {"slope_grid": grid, "verify_grid": grid * factor}, files)
        if viol:
            res.error = f"slope guarantee violated at {viol} verification points"
        return res
    return [Task(f"badset/l={l}", fn)]


def _resonance_tasks(cfg):
    params = cfg.resolved_params()
    _require(params, "l", "sigma", "Q", "M")
    l, sigma, Q, M = int(params["l"]), float(params["sigma"]), int(params["Q"]), int(params["M"])
    l2 = int(params.get("l2", l))
    grid = int(params.get("grid", 256))
    given = _excluded_set(cfg, params)
    if given is None and M >= Q:
        _require(params, "tau")

    def fn():
        meta = {"sigma": sigma, "l": l, "omega": cfg.omega, "grid": grid, "model": cfg.pair.fingerprint()}
        if M < Q:
            scan = elimination_scan(cfg.pair, cfg.omega, l, sigma, Q, M, None, grid, l2=l2)
            summ = {"vacuous": scan.vacuous, "violations": scan.violations, "excluded": scan.excluded,
                    "Q": Q, "M": M, "sigma": sigma, "l": l, "l2": l2,
                    "note": "no shift satisfies Q <= |m| <= M"}
            bad = given
            if bad is None and "tau" in params:
                summ["tau"] = float(params["tau"])
                bad = _badset_for(cfg, params, l, float(params["tau"]), grid).Z
            if bad is not None:
                summ["Z_mes"], summ["Z_com"] = bad.mes, bad.com
            return TaskResult("", [], summ, {"scan_grid": grid})
        if given is not None:
            bad, tau = given, params.get("tau")
        else:
            tau = float(params["tau"])
            bad = _badset_for(cfg, params, l, tau, grid).Z
        scan = elimination_scan(cfg.pair, cfg.omega, l, sigma, Q, M, bad, grid, l2=l2)
        rows = [{"x": e.x, "m": e.m, "j": e.j, "k": e.k, "gap": e.gap, "E_j": e.E_j,
                 "excluded": e.excluded} for e in scan.events]
        fattened = bad.fatten(sigma)
        after_fatten = elimination_scan(cfg.pair, cfg.omega, l, sigma, Q, M, fattened, grid, l2=l2)
        refined = refine_bad_set(bad, scan.events, sigma)
        after = elimination_scan(cfg.pair, cfg.omega, l, sigma, Q, M, refined, grid, l2=l2)
        summ = {"vacuous": False, "Q": Q, "M": M, "sigma": sigma, "tau": tau, "l": l, "l2": l2,
                "grid": grid, "events": len(scan.events), "violations": scan.violations,
                "excluded": scan.excluded, "Z_mes": bad.mes, "Z_com": bad.com,
                "violations_after_fatten": after_fatten.violations,
                "refined_mes": refined.mes, "refined_com": refined.com,
                "violations_after_refinement": after.violations}
        files = {"resonances_refined_badset.json": _json_bytes(refined.to_dict(**meta, tau=tau))}
        return TaskResult("", rows, summ, {"scan_grid": grid}, files)
    return [Task(f"resonances/l={l}", fn)]


def _localize_tasks(cfg):
    sec = cfg.section("localize")
    Qloc = int(sec.get("Q", 10))
    sigma = float(sec.get("sigma", cfg.params.get("sigma", 1e-3)))

    def job(N):
        def fn():
            sd = eigensystem(build_window(cfg.pair, cfg.phase, cfg.omega, 0, N - 1))
            rows = []
            for j in range(N):
                psi = sd.eigenvectors[:, j]
                nu = localization_center(psi)
                lo, hi = max(nu - Qloc, 0), min(nu + Qloc, N - 1)
                rows.append({"N": N, "j": j, "E": float(sd.eigenvalues[j]), "center": nu,
                             "tail_mass": tail_mass(psi, nu, Qloc), "fitted_rate": fitted_rate(psi, nu),
                             "window_lo": lo, "window_hi": hi,
                             "restriction_distance": restriction_distance(
                                 cfg.pair, cfg.phase, cfg.omega, float(sd.eigenvalues[j]), (lo, hi))})
            close = fails = 0
            for j in range(N - 1):
                r = center_proximity(cfg.pair, cfg.phase, cfg.omega, N, j, j + 1, sigma, Qloc, spectral=sd)
                if not r.vacuous:
                    close += 1
                    fails += not r.holds
            rates = np.array([r["fitted_rate"] for r in rows])
            summ = {"N": N, "Q": Qloc, "sigma": sigma, "max_tail_mass": max(r["tail_mass"] for r in rows),
                    "median_fitted_rate": float(np.nanmedian(rates)) if np.any(np.isfinite(rates)) else math.nan,
                    "close_pairs": close, "proximity_failures": fails}
            return TaskResult("", rows, summ)
        return fn
    return [Task(f"localize/N={N}", job(N)) for N in cfg.scales]


def _green_tasks(cfg):
    sec = cfg.section("green")
    scales = [int(v) for v in sec.get("scales", [16, 64])]

    def job(N):
        def fn():
            rows = []
            win = build_window(cfg.pair, cfg.phase, cfg.omega, 0, N - 1)
            sd = eigensystem(win)
            spec = sd.eigenvalues
            if N <= 16:
                E_out = float(spec[0] - 0.5)
                rows.append({"N": N, "check": "cramer", "E": E_out,
                             "value": cramer_defect(cfg.pair, cfg.phase, cfg.omega, N, E_out), "tol": 1e-8})
            sw = poisson_sweep(win, sd.eigenvalues, sd.eigenvectors)
            rows.append({"N": N, "check": "poisson", "E": math.nan, "value": sw.max_residual, "tol": 1e-8})
            K = 2 * math.log(N) ** 2
            if N >= 2:
                j = int(np.argmax(np.diff(spec)))
                E_mid = float(0.5 * (spec[j] + spec[j + 1]))
                cert = decay_certificate(cfg.pair, cfg.phase, cfg.omega, N, E_mid, K)
                rows.append({"N": N, "check": "decay" if cert.applicable else "decay(not applicable)",
                             "E": E_mid, "value": cert.max_violation, "tol": 0.0})
            for r in rows:
                r["passed"] = bool(r["value"] <= r["tol"]) or r["check"] == "decay(not applicable)"
            res = TaskResult("", rows, {"N": N, "windows_checked": sw.windows_checked,
                                        "windows_skipped": sw.windows_skipped, "K": K})
            bad = [r["check"] for r in rows if not r["passed"]]
            if bad:
                res.error = f"checks failed: {', '.join(bad)}"
            return res
        return fn
    return [Task(f"green-check/N={N}", job(N)) for N in scales]


def _ldt_tasks(cfg):
    sec = cfg.section("ldt")
    H = [float(h) for h in sec.get("H", [0, 1, 2, 4, 8])]
    grid = int(sec.get("grid", 4096))
    C0 = float(sec.get("C0", 1.0))

    def job(N):
        def fn():
            E = float(sec["E"]) if "E" in sec else float(_reference_energies(cfg, N, 3)[1])
            rep = ldt_empirical(cfg.pair, cfg.omega, E, N, H, grid, C0)
            rows = [{"N": N, "E": E, "H": h, "fraction": f, "exp_minus_H": math.exp(-h)}
                    for h, f in rep.fractions.items()]
            fr = [r["fraction"] for r in rows]
            summ = {"N": N, "E": E, "La": rep.La, "C0": C0, "max_deviation": rep.max_deviation,
                    "nonincreasing": all(a >= b for a, b in zip(fr, fr[1:]))}
            return TaskResult("", rows, summ, {"ldt_grid": grid})
        return fn
    return [Task(f"ldt/N={N}", job(N)) for N in cfg.scales]


def _avalanche_tasks(cfg):
    sec = cfg.section("avalanche")
    n_random = int(sec.get("random_sequences", 200))
    shards = int(sec.get("shards", 4))
    l = int(sec.get("l", cfg.params.get("l", 16)))
    blocks = int(sec.get("blocks", 8))
    e_offset = int(sec.get("energy_offset", 5))
    e_stride = int(sec.get("energy_stride", 50))
    offset = float(sec.get("zero_offset", 1e-9))
    chain_N = int(sec.get("N", 256))
    seeds = np.random.SeedSequence(cfg.seed).spawn(shards)

    def random_job(s):
        def fn():
            rng = np.random.default_rng(seeds[s])
            rows = []
            count = n_random // shards + (s < n_random % shards)
            for i in range(count):
                n = int(rng.integers(2, 21))
                rep = ap_check(random_ap_sequence(rng, n))
                bound = 20 * n / rep.mu
                rows.append({"kind": "random", "case": s * 100000 + i, "n": n, "l": 0, "mu": rep.mu,
                             "value": rep.discrepancy, "bound": bound, "within": rep.discrepancy <= bound})
            return TaskResult("", rows)
        return fn

    def diagonal():
        rep = ap_check([np.diag([1e3, 1e-3])] * 10)
        row = {"kind": "diagonal", "case": 0, "n": 10, "l": 0, "mu": rep.mu, "value": rep.discrepancy,
               "bound": 1e-12, "within": rep.discrepancy <= 1e-12}
        res = TaskResult("", [row])
        if not row["within"]:
            res.error = "diagonal discrepancy above 1e-12"
        return res

    def chain_job(length):
        def fn():
            spec = eigenvalues(cfg.pair, cfg.phase, cfg.omega, 0, chain_N - 1)
            Es = spec[e_offset::e_stride]
            rows = []
            meds = []
            for E in Es:
                prof = chain_zero_profile(cfg.pair, cfg.omega, float(E), [length] * blocks, (offset,))
                meds.append(prof.residuals[0])
                rows.extend({"kind": "chain", "case": i, "n": blocks, "l": length, "mu": math.nan,
                             "value": float(v), "bound": math.nan, "within": True}
                            for i, v in enumerate(prof.residuals[0]))
            vals = np.concatenate(meds) if meds else np.zeros(0)
            return TaskResult("", rows, {"l": length, "blocks": blocks, "offset": offset, "energies": Es,
                                         "zeros_sampled": int(vals.size // 2),
                                         "median_residual": float(np.median(vals)) if vals.size else math.nan})
        return fn

    tasks = [Task(f"avalanche/random/{s}", random_job(s)) for s in range(shards)]
    tasks.append(Task("avalanche/diagonal", diagonal))
    tasks += [Task(f"avalanche/chain/l={length}", chain_job(length)) for length in (l, 2 * l)]
    return tasks


def _identity_tasks(cfg):
    sec = cfg.section("identities")
    cases = int(sec.get("cases", 20))
    N_max = int(sec.get("N_max", 32))
    seeds = np.random.SeedSequence(cfg.seed).spawn(cases + 1)

    def job(c):
        def fn():
            rng = np.random.default_rng(seeds[c])
            pair = cfg.pair if c == 0 else suite_model(rng)
            rows = [{"suite": r.suite, "case": r.case, "N": r.N, "value": r.value, "tol": r.tol,
                     "passed": r.passed} for r in identity_case(pair, cfg.omega, rng, c, N_max)]
            res = TaskResult("", rows)
            bad = sorted({r["suite"] for r in rows if not r["passed"]})
            if bad:
                res.error = f"identities failed: {', '.join(bad)}"
            return res
        return fn
    return [Task(f"identities/case={c}", job(c)) for c in range(cases + 1)]


_BUILDERS = {
    "spectrum": _spectrum_tasks,
    "lyapunov": _lyapunov_tasks,
    "gaps": _gaps_tasks,
    "resonances": _resonance_tasks,
    "badset": _badset_tasks,
    "localize": _localize_tasks,
    "green-check": _green_tasks,
    "ldt": _ldt_tasks,
    "avalanche-check": _avalanche_tasks,
    "identities": _identity_tasks,
}


# -- driver ----------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def run(subcommand: str, cfg: ExperimentConfig, out: Path) -> int:
    """Run one subcommand (or ``all``), write its artifacts, update the manifest.

    Returns the exit status: 0, or 2 if any task failed.
    """
    subs = cfg.run if subcommand == "all" else (subcommand,)
    schema = _schema()
    out.mkdir(parents=True, exist_ok=True)
    mpath = out / "manifest.json"
    manifest = {}
    if mpath.exists():
        try:
            manifest = json.loads(mpath.read_text())
        except json.JSONDecodeError:
            manifest = {}
    if manifest.get("config_hash") != cfg.digest:
        manifest = {}
    manifest.update({"config_hash": cfg.digest, "version": __version__, "omega": cfg.omega,
                     "preset": cfg.preset})
    manifest.setdefault("runs", {})
    status = 0
    for sub in subs:
        t0 = time.perf_counter()
        results = _map(_BUILDERS[sub](cfg), cfg.threads)
        columns = schema[sub]["columns"]
        stem = sub.replace("-", "_")
        payload = {f"{stem}.csv": _csv_bytes(columns, [r for res in results for r in res.rows])}
        summary = {"subcommand": sub, "config_hash": cfg.digest, "version": __version__,
                   "tasks": [{"name": r.name, "status": "failed" if r.failed else "ok",
                              "error": r.error, "summary": r.summary} for r in results]}
        payload[f"{stem}.json"] = _json_bytes(summary)
        for r in results:
            payload.update(r.files)
        for name, data in payload.items():
            (out / name).write_bytes(data)
        provenance = {}
        for r in results:
            provenance.update(r.provenance)
        failed = [r.name for r in results if r.failed]
        manifest["runs"][sub] = {
            "files": {name: _sha256(data) for name, data in sorted(payload.items())},
            "tasks": {r.name: ("failed: " + r.error) if r.failed else "ok" for r in results},
            "grid_provenance": provenance,
            "wall_clock_seconds": round(time.perf_counter() - t0, 3),
            "threads": cfg.threads,
        }
        if failed:
            status = 2
    mpath.write_bytes(_json_bytes(manifest))
    return status


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qpjacobi", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"qpjacobi {__version__}")
    ap.add_argument("subcommand", choices=SUBCOMMANDS + ("all",))
    ap.add_argument("--config", required=True, help="experiment configuration (JSON)")
    ap.add_argument("--out", help="output directory (overrides the config's 'output')")
    ap.add_argument("--threads", type=int, help=f"worker threads (overrides ${THREADS_ENV} and the config)")
    ap.add_argument("--preset", choices=("paper", "custom"), help="parameter preset")
    return ap


def _diagnostic(field: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": "config", "field": field, "message": message}) + "\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.preset, args.out, args.threads)
        out = cfg.output
        if out is None:
            raise ConfigError("output", "no output directory: pass --out or set 'output'")
        return run(args.subcommand, cfg, out)
    except ConfigError as exc:
        _diagnostic(exc.field, exc.message)
        return 1


if __name__ == "__main__":
    sys.exit(main())
