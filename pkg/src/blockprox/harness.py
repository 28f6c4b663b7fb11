"""Experiment orchestration: config parsing, replications, traces, summaries.

An experiment is described by a single JSON document (no comments) with the
keys of :class:`ExperimentConfig`.  Validation happens before anything runs
and refuses bad configs with a named violation: positive step size, a valid
block-probability vector, averaging exponent below 1, finite set bounds, and
a square-summable schedule for the non-averaged block algorithm.

Replication i draws its noise stream from ``default_rng([seed, i])``; the
master seed is the only entropy source.  Outputs are one CSV of per-
checkpoint metric values (``run_id,replication,k,metric,value``, shortest
round-trip decimals, resolved config embedded as a leading comment line) and
one JSON summary with per-checkpoint means, standard errors, fitted log-log
slopes, and the applicable theoretical bounds.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics as mt
from . import problems as pb
from . import solvers as sv

KNOWN_METRICS = ("mse", "lyapunov", "objective_gap", "dual_gap")


class ConfigError(ValueError):
    """Invalid experiment configuration, with the offending key name."""

    def __init__(self, name, message):
        self.name = name
        super().__init__(f"{name}: {message}")


_GENERATORS = {
    "strongly_monotone_affine": pb.make_strongly_monotone_affine,
    "monotone_affine": pb.make_monotone_affine,
    "scop_quadratic": pb.make_scop_quadratic,
    "nash_quadratic": pb.make_nash_quadratic,
}


def build_problem(spec):
    """Build a problem from a {"generator", "params"} spec dict."""
    if not isinstance(spec, dict) or "generator" not in spec:
        raise ConfigError("problem.generator", "missing generator name")
    name = spec["generator"]
    params = dict(spec.get("params", {}))
    if name == "strictly_pseudo_monotone":
        base_spec = params.pop("base", None)
        if base_spec is None:
            raise ConfigError("problem.params.base", "scaled generator needs a base spec")
        base = build_problem(base_spec)
        try:
            return pb.make_strictly_pseudo_monotone(base, **params)
        except (pb.ProblemError, TypeError) as exc:
            raise ConfigError("problem.params", str(exc)) from exc
    if name not in _GENERATORS:
        raise ConfigError("problem.generator", f"unknown generator {name!r}")
    if name == "scop_quadratic" and "spectrum" in params:
        params["spectrum"] = np.asarray(params["spectrum"], dtype=float)
    try:
        return _GENERATORS[name](**params)
    except (pb.ProblemError, TypeError) as exc:
        raise ConfigError("problem.params", str(exc)) from exc


@dataclass
class ExperimentConfig:
    """Validated experiment description."""

    name: str
    problem: dict
    solver: dict
    replications: int
    seed: int
    checkpoints: object = None
    metrics: tuple = ("mse",)
    out: str | None = None

    @classmethod
    def from_dict(cls, doc):
        for key in ("name", "problem", "solver", "replications", "seed"):
            if key not in doc:
                raise ConfigError(key, "missing required key")
        cfg = cls(
            name=str(doc["name"]),
            problem=doc["problem"],
            solver=doc["solver"],
            replications=int(doc["replications"]),
            seed=int(doc["seed"]),
            checkpoints=doc.get("checkpoints"),
            metrics=tuple(doc.get("metrics", ("mse",))),
            out=doc.get("out"),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("json", f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_file(cls, path):
        return cls.from_json(Path(path).read_text())

    def validate(self):
        if self.replications < 1:
            raise ConfigError("replications", "need at least one replication")
        for m in self.metrics:
            if m not in KNOWN_METRICS:
                raise ConfigError("metrics", f"unknown metric {m!r}")
        sol = self.solver
        algorithm = sol.get("algorithm")
        if algorithm not in (sv.BSMP, sv.SMP):
            raise ConfigError("solver.algorithm", f"unknown algorithm {algorithm!r}")
        sched = sol.get("schedule", {})
        if sched.get("kind") not in (sv.HARMONIC, sv.INV_SQRT, sv.CONSTANT):
            raise ConfigError("solver.schedule.kind", f"unknown kind {sched.get('kind')!r}")
        gamma0 = sched.get("gamma0")
        if gamma0 != "auto":
            try:
                ok = float(gamma0) > 0 and np.isfinite(float(gamma0))
            except (TypeError, ValueError):
                ok = False
            if not ok:
                raise ConfigError("solver.schedule.gamma0", "step size must be positive")
        if int(sol.get("iterations", -1)) < 0:
            raise ConfigError("solver.iterations", "iteration budget must be nonnegative")
        r = sol.get("averaging_exponent")
        if r is not None and float(r) >= 1.0:
            raise ConfigError("solver.averaging_exponent", "averaging needs r < 1")
        if algorithm == sv.SMP and r is None:
            raise ConfigError("solver.averaging_exponent", "full-block solver requires r")
        if algorithm == sv.BSMP and r is None and sched.get("kind") != sv.HARMONIC:
            raise ConfigError(
                "solver.schedule.kind",
                "non-averaged block runs need a square-summable, non-summable "
                "schedule (harmonic)",
            )
        probs = sol.get("block_probs")
        if probs is not None:
            p = np.asarray(probs, dtype=float)
            if p.ndim != 1 or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ConfigError("solver.block_probs", "need a positive vector summing to 1")

    def to_dict(self):
        return {
            "name": self.name,
            "problem": self.problem,
            "solver": self.solver,
            "replications": self.replications,
            "seed": self.seed,
            "checkpoints": self.checkpoints,
            "metrics": list(self.metrics),
            "out": self.out,
        }


def _resolve_solver(config, problem):
    sol = config.solver
    sched_spec = sol["schedule"]
    gamma0 = sched_spec["gamma0"]
    if gamma0 == "auto":
        rule = "harmonic_strong" if sched_spec["kind"] == sv.HARMONIC else "sqrt_d"
        try:
            gamma0 = sv.auto_gamma0(problem, rule, gamma=sched_spec.get("gamma", 1.0))
        except sv.SolverError as exc:
            raise ConfigError("solver.schedule.gamma0", str(exc)) from exc
    schedule = sv.StepsizeSchedule(sched_spec["kind"], float(gamma0))
    common = dict(
        schedule=schedule,
        iterations=int(sol["iterations"]),
        checkpoints=config.checkpoints,
    )
    if sol["algorithm"] == sv.BSMP:
        return sv.BsmpConfig(
            block_probs=sol.get("block_probs"),
            averaging_exponent=sol.get("averaging_exponent"),
            **common,
        )
    return sv.SmpConfig(averaging_exponent=float(sol["averaging_exponent"]), **common)


def _check_metric_applicability(config, problem):
    if "mse" in config.metrics or "lyapunov" in config.metrics:
        if problem.known_solution is None:
            raise ConfigError("metrics", "mse/lyapunov need a known solution")
    if "objective_gap" in config.metrics:
        if problem.objective is None:
            raise ConfigError("metrics", "objective_gap needs an objective")
        if config.solver["algorithm"] == sv.BSMP and config.solver.get("averaging_exponent") is None:
            raise ConfigError("metrics", "objective_gap is evaluated on the averaged iterate")
    if "dual_gap" in config.metrics and problem.affine is None:
        raise ConfigError("metrics", "dual_gap needs an affine instance")


def _metric_values(config, problem, trace, block_probs):
    """Per-checkpoint metric values for one replication; NaN marks undefined."""
    geoms = problem.geometries
    out = {}
    for metric in config.metrics:
        vals = np.full(trace.ks.shape[0], np.nan)
        for j, k in enumerate(trace.ks):
            if metric == "mse":
                vals[j] = mt.mse(geoms, trace.iterates[j], problem.known_solution)
            elif metric == "lyapunov":
                vals[j] = mt.lyapunov(
                    block_probs, geoms, trace.iterates[j], problem.known_solution
                )
            else:
                point = trace.iterates[j]
                if trace.averages is not None:
                    point = trace.averages[j]
                    if np.any(np.isnan(point)):
                        continue  # undefined average (full-block k = 0)
                if metric == "objective_gap":
                    vals[j] = problem.objective_value(point) - problem.f_star
                else:
                    vals[j] = mt.gap_function(problem, point)
        out[metric] = vals
    return out


@dataclass
class ExperimentResult:
    config: dict
    checkpoints: np.ndarray
    values: dict  # metric -> (R, n_ck) array
    means: dict
    ses: dict
    slopes: dict
    bounds: dict
    backend: str
    wall_time: float
    csv_path: str | None = None
    summary_path: str | None = None

    def summary_dict(self):
        return {
            "config": self.config,
            "checkpoints": self.checkpoints.tolist(),
            "metrics": {
                m: {
                    "mean": self.means[m].tolist(),
                    "se": self.ses[m].tolist(),
                }
                for m in self.means
            },
            "slopes": self.slopes,
            "bounds": self.bounds,
            "backend": self.backend,
        }


def _theoretical_bounds(config, problem, solver_cfg, block_probs, ks):
    """Rate bounds applicable to this run, evaluated at the checkpoints."""
    bounds = {}
    cst = problem.constants
    geoms = problem.geometries
    algorithm = config.solver["algorithm"]
    sched = solver_cfg.schedule
    r = config.solver.get("averaging_exponent")
    pos = ks[ks > 0].astype(float)
    if (
        algorithm == sv.BSMP
        and sched.kind == sv.HARMONIC
        and cst.strong_mu is not None
        and "mse" in config.metrics
    ):
        mse_c = mt.rate_constants(cst, geoms).mse_constant
        bounds["mse_strong_pseudo"] = {
            "constant": mse_c,
            "k": pos.tolist(),
            "value": (mse_c * problem.d / pos).tolist(),
        }
    if algorithm == sv.BSMP and r is not None and "objective_gap" in config.metrics:
        vals = [
            mt.averaged_objective_bound(cst, geoms, block_probs, sched, r, int(k))
            for k in pos
        ]
        bounds["objective_gap_averaged"] = {"k": pos.tolist(), "value": vals}
    if algorithm == sv.SMP and "dual_gap" in config.metrics:
        gap_c = mt.rate_constants(cst, geoms, r=r, gamma0=sched.gamma0).gap_constant
        bounds["dual_gap_sqrt"] = {
            "constant": gap_c,
            "k": pos.tolist(),
            "value": (gap_c / np.sqrt(pos)).tolist(),
        }
    return bounds


def run_experiment(config, out_dir=None, quiet=False, backend="auto"):
    """Run all replications of an experiment; optionally persist CSV/summary."""
    t0 = time.perf_counter()
    problem = build_problem(config.problem)
    _check_metric_applicability(config, problem)
    solver_cfg = _resolve_solver(config, problem)
    block_probs = sv._validate_probs(config.solver.get("block_probs"), problem.d)

    per_rep = []
    trace_backend = None
    for rep in range(config.replications):
        solver_cfg.seed = [config.seed, rep]
        if config.solver["algorithm"] == sv.BSMP:
            trace = sv.run_bsmp(problem, solver_cfg, backend=backend)
        else:
            trace = sv.run_smp(problem, solver_cfg, backend=backend)
        trace_backend = trace.backend
        per_rep.append(_metric_values(config, problem, trace, block_probs))
        ks = trace.ks

    values = {
        m: np.vstack([rep[m] for rep in per_rep]) for m in config.metrics
    }
    means, ses, slopes = {}, {}, {}
    for m, arr in values.items():
        n_eff = np.sum(~np.isnan(arr), axis=0)
        with np.errstate(invalid="ignore", divide="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", category=RuntimeWarning)
            means[m] = np.nanmean(arr, axis=0)
            ses[m] = np.nanstd(arr, axis=0, ddof=1) / np.sqrt(np.maximum(n_eff, 1))
        mask = (ks > 0) & ~np.isnan(means[m]) & (means[m] > 0)
        if mask.sum() >= 5:
            k_min = min(100, int(ks[mask][0]))
            try:
                slope, intercept = mt.fit_rate(ks[mask], means[m][mask], k_min=k_min)
                slopes[m] = {"slope": slope, "intercept": intercept, "k_min": k_min}
            except mt.MetricError:
                pass
    bounds = _theoretical_bounds(config, problem, solver_cfg, block_probs, ks)

    result = ExperimentResult(
        config=config.to_dict(),
        checkpoints=ks,
        values=values,
        means=means,
        ses=ses,
        slopes=slopes,
        bounds=bounds,
        backend=trace_backend,
        wall_time=time.perf_counter() - t0,
    )
    if out_dir is not None:
        _write_outputs(result, config, out_dir)
    if not quiet:
        for m in config.metrics:
            line = f"[{config.name}] {m}: mean@K={means[m][-1]:.6g}"
            if m in slopes:
                line += f", slope={slopes[m]['slope']:+.3f}"
            print(line)
    return result


def _write_outputs(result, config, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = json.dumps(result.config, sort_keys=True)
    csv_path = out / f"{config.name}.csv"
    lines = [f"# {resolved}", "run_id,replication,k,metric,value"]
    for m in config.metrics:
        arr = result.values[m]
        for rep in range(arr.shape[0]):
            for j, k in enumerate(result.checkpoints):
                v = arr[rep, j]
                if np.isnan(v):
                    continue
                lines.append(f"{config.name},{rep},{int(k)},{m},{float(v)!r}")
    csv_path.write_text("\n".join(lines) + "\n")
    summary_path = out / f"{config.name}.summary.json"
    summary_path.write_text(json.dumps(result.summary_dict(), indent=2, sort_keys=True) + "\n")
    result.csv_path = str(csv_path)
    result.summary_path = str(summary_path)
