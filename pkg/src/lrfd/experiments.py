"""Seeded experiment grids and the sweeps that run over them.

Config files are plain text, one ``key = value`` per line, ``#`` starts a
comment. Lists are comma separated (``1, 2, 4``) or inclusive ranges written
``start:stop:step``. Keys shared by every experiment:

    trials, seed, lambda, max_iters, rel_tol, tol, stage_tol, stage_iters,
    acceleration, svd_method

Experiment specific keys (defaults in ``DEFAULTS``):

    coherence-sweep  rows, cols, rank, missing, subspaces
    fig3-sweep       n, missing, dict_ranks, success_tol
    phase-diagram    rows, cols, num_subspaces, ranks, fractions, lrfd_max_iters
    lemma-check      size, ranks, rhos, delta, terms, probes, power_tol,
                     power_iters, psi_cutoff, residual_tol
    complete         (shared keys only)

Every random draw is seeded from ``SeedSequence([base_seed, stream, *cell,
trial])`` so a cell can be re-run on its own and gives the same numbers
whatever the worker count.
"""
from __future__ import annotations

import csv
import enum
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coherence import coherence, recovery_error
from .observation import (BernoulliRho, ObservationSet, SubspaceBasis, UniformExactCount,
                          rng_for, sample_observations)
from .pipeline import (DegenerateEstimateError, NeumannDivergenceError, PowerIterationError,
                       lemma1_operator_norm, lemma2_inverse_check, run_algorithm1)
from .solvers import SolverConfig, solve_cono, solve_lrfd
from .synth import (SubspaceMixSpec, gen_coherent_rank1, gen_fig3_dictionary,
                    gen_subspace_mixture, random_basis)

SUCCESS_TOL = 0.05


class ConfigError(ValueError):
    pass


class Experiment(enum.Enum):
    COHERENCE_SWEEP = "coherence-sweep"
    FIG3_SWEEP = "fig3-sweep"
    PHASE_DIAGRAM = "phase-diagram"
    SINGLE_COMPLETE = "complete"
    LEMMA_CHECK = "lemma-check"


# seed streams, kept distinct so instance, mask and dictionary draws never share a seed
_TRUTH, _MASK, _DICT, _NOISE, _BASIS = range(5)

_SHARED = {
    "trials": 1, "seed": 0, "lambda": 1e6, "max_iters": 5000, "rel_tol": 1e-7, "tol": 1e-3,
    "stage_tol": 1e-3, "stage_iters": 100, "acceleration": True, "svd_method": "lapack",
}

DEFAULTS = {
    Experiment.COHERENCE_SWEEP: {
        "rows": 200, "cols": 200, "rank": 40, "missing": 0.45,
        "subspaces": [1, 2, 4, 8, 20], "trials": 10,
    },
    Experiment.FIG3_SWEEP: {
        "n": 200, "missing": 0.9, "dict_ranks": [1, 5, 10, 20], "trials": 10,
        "success_tol": 1e-3,
    },
    Experiment.PHASE_DIAGRAM: {
        "rows": 100, "cols": 300, "num_subspaces": 5,
        "ranks": list(range(5, 51, 5)),
        "fractions": [round(0.35 + 0.05 * i, 10) for i in range(10)],
        "trials": 5, "lrfd_max_iters": 1000,
    },
    Experiment.LEMMA_CHECK: {
        "size": 40, "ranks": [3], "rhos": [0.3, 0.5, 0.8, 1.0], "trials": 100,
        "delta": 0.3, "terms": 40, "probes": 10, "power_tol": 1e-8, "power_iters": 1000,
        "psi_cutoff": 0.7, "residual_tol": 1e-8,
    },
    Experiment.SINGLE_COMPLETE: {"lambda": 100.0},
}

_LIST_KEYS = {"subspaces", "dict_ranks", "ranks", "fractions", "rhos"}
_INT_KEYS = {"rows", "cols", "rank", "n", "size", "trials", "seed", "max_iters", "stage_iters",
             "lrfd_max_iters", "num_subspaces", "terms", "probes", "power_iters"}


@dataclass(frozen=True)
class ExperimentGrid:
    experiment: Experiment
    params: dict = field(default_factory=dict)
    trials_per_cell: int = 1
    base_seed: int = 0
    lambda_override: float | None = None
    output_path: str | None = None

    def __post_init__(self):
        if self.trials_per_cell < 1:
            raise ConfigError("trials must be at least 1")
        if self.base_seed < 0 or self.base_seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for k in _LIST_KEYS & self.params.keys():
            if len(self.params[k]) == 0:
                raise ConfigError(f"{k} must not be empty")

    @property
    def lam(self) -> float:
        return self.lambda_override if self.lambda_override is not None else self.params["lambda"]

    def solver_config(self, **changes) -> SolverConfig:
        p = self.params
        cfg = SolverConfig(lam=self.lam, max_iters=p["max_iters"], rel_tol=p["rel_tol"],
                           tol=p["tol"], acceleration=p["acceleration"], stage_tol=p["stage_tol"],
                           stage_iters=p["stage_iters"], svd_method=p["svd_method"])
        return replace(cfg, **changes)


def parse_config(text: str) -> dict:
    """Raw ``key -> string`` mapping from config file text."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _scalar(key, s):
    if key in _INT_KEYS:
        return int(s)
    if key == "acceleration":
        if s.lower() in ("1", "true", "yes", "on"):
            return True
        if s.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(s)
    if key == "svd_method":
        return s
    return float(s)


def _list(key, s):
    s = s.strip()
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ValueError(s)
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(s)
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        vals = [round(start + i * step, 10) for i in range(n)]
    else:
        vals = [float(p) for p in s.split(",") if p.strip()]
    if key != "fractions" and key != "rhos":
        if any(v != int(v) for v in vals):
            raise ValueError(s)
        vals = [int(v) for v in vals]
    return vals


def load_grid(experiment: Experiment, text: str | None = None, seed: int | None = None,
              output_path: str | None = None) -> ExperimentGrid:
    """Merge shared defaults, experiment defaults and the config text."""
    params = dict(_SHARED)
    params.update(DEFAULTS[experiment])
    lam_override = None
    for key, value in parse_config(text or "").items():
        if key not in params:
            raise ConfigError(f"unknown key {key!r} for {experiment.value}")
        try:
            params[key] = _list(key, value) if key in _LIST_KEYS else _scalar(key, value)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}") from None
        if key == "lambda":
            lam_override = params[key]
    if seed is not None:
        params["seed"] = seed
    if lam_override is not None and not lam_override > 0:
        raise ConfigError("lambda must be positive")
    return ExperimentGrid(experiment=experiment, params=params,
                          trials_per_cell=params["trials"], base_seed=params["seed"],
                          lambda_override=lam_override, output_path=output_path)


def derive_seed(base_seed: int, stream: int, *coords: int) -> int:
    ss = np.random.SeedSequence([base_seed, stream, *coords])
    return int(ss.generate_state(1, np.uint64)[0])


def _run_cells(fn, tasks, workers):
    """Apply ``fn`` to each task, in order, optionally across processes."""
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _fmt_errors(errs):
    return ";".join(f"{e:.6e}" for e in errs)


# ---------------------------------------------------------------- coherence

COHERENCE_COLUMNS = ["k", "dim_per_subspace", "trials", "mean_mu1", "mean_mu2", "mean_error",
                     "success_count", "errors", "mean_iterations", "wall_time"]


def _coherence_cell(task):
    grid, ki, k = task
    p = grid.params
    if p["rank"] % k:
        raise ConfigError(f"rank {p['rank']} is not divisible by k={k}")
    cfg = grid.solver_config()
    count = int(round((1.0 - p["missing"]) * p["rows"] * p["cols"]))
    mu1, mu2, errs, iters = [], [], [], []
    t0 = time.perf_counter()
    for t in range(grid.trials_per_cell):
        spec = SubspaceMixSpec(p["rows"], p["cols"], k, p["rank"] // k,
                               derive_seed(grid.base_seed, _TRUTH, ki, t))
        l0 = gen_subspace_mixture(spec)
        rep = coherence(l0)
        omega = sample_observations(p["rows"], p["cols"], UniformExactCount(count),
                                    derive_seed(grid.base_seed, _MASK, ki, t))
        sol = solve_cono(l0, omega, cfg)
        mu1.append(rep.mu1)
        mu2.append(rep.mu2)
        errs.append(recovery_error(sol.reconstruction, l0))
        iters.append(sol.iterations)
    return {
        "k": k, "dim_per_subspace": p["rank"] // k, "trials": grid.trials_per_cell,
        "mean_mu1": float(np.mean(mu1)), "mean_mu2": float(np.mean(mu2)),
        "mean_error": float(np.mean(errs)),
        "success_count": sum(e < SUCCESS_TOL for e in errs), "errors": _fmt_errors(errs),
        "mean_iterations": float(np.mean(iters)), "wall_time": time.perf_counter() - t0,
    }


def run_coherence_sweep(grid: ExperimentGrid, workers: int = 1) -> list[dict]:
    _expect(grid, Experiment.COHERENCE_SWEEP)
    tasks = [(grid, i, k) for i, k in enumerate(grid.params["subspaces"])]
    return _run_cells(_coherence_cell, tasks, workers)


# --------------------------------------------------------------------- fig3

FIG3_COLUMNS = ["algorithm", "dict_rank", "trials", "success_count", "mean_error", "max_error",
                "min_error", "errors", "mean_iterations", "wall_time"]


def _fig3_instance(grid, t):
    p = grid.params
    n = p["n"]
    count = int(round((1.0 - p["missing"]) * n * n))
    omega = sample_observations(n, n, UniformExactCount(count),
                                derive_seed(grid.base_seed, _MASK, 0, t))
    return gen_coherent_rank1(n), omega


def _fig3_cell(task):
    grid, ri, rank = task
    p = grid.params
    cfg = grid.solver_config()
    errs, iters = [], []
    t0 = time.perf_counter()
    for t in range(grid.trials_per_cell):
        l0, omega = _fig3_instance(grid, t)
        if rank == 0:
            sol = solve_cono(l0, omega, cfg)
        else:
            a = gen_fig3_dictionary(p["n"], rank - 1, derive_seed(grid.base_seed, _DICT, ri, t))
            sol = solve_lrfd(l0, a, omega, cfg)
        errs.append(recovery_error(sol.reconstruction, l0))
        iters.append(sol.iterations)
    return {
        "algorithm": "cono" if rank == 0 else "lrfd", "dict_rank": rank if rank else "",
        "trials": grid.trials_per_cell,
        "success_count": sum(e < p["success_tol"] for e in errs),
        "mean_error": float(np.mean(errs)), "max_error": max(errs), "min_error": min(errs),
        "errors": _fmt_errors(errs), "mean_iterations": float(np.mean(iters)),
        "wall_time": time.perf_counter() - t0,
    }


def run_fig3_sweep(grid: ExperimentGrid, workers: int = 1) -> list[dict]:
    """One LRFD row per dictionary rank, then one CONO baseline row.

    The coherent instance and its mask depend only on the trial, so every
    dictionary rank and the baseline see the same observations.
    """
    _expect(grid, Experiment.FIG3_SWEEP)
    ranks = grid.params["dict_ranks"]
    if any(r < 1 or r > grid.params["n"] for r in ranks):
        raise ConfigError("dict_ranks must lie in [1, n]")
    tasks = [(grid, i, r) for i, r in enumerate(ranks)] + [(grid, len(ranks), 0)]
    return _run_cells(_fig3_cell, tasks, workers)


# -------------------------------------------------------------------- phase

PHASE_COLUMNS = ["kind", "rank", "fraction", "algorithm", "trials", "success_count", "errors",
                 "mean_error", "mean_rank_estimate", "mean_iterations", "success_area",
                 "wall_time"]


def _phase_cell(task):
    grid, ri, fi, rank, frac = task
    p = grid.params
    k = p["num_subspaces"]
    if rank % k:
        raise ConfigError(f"rank {rank} is not divisible by num_subspaces={k}")
    cfg = grid.solver_config()
    cfg_lrfd = grid.solver_config(max_iters=p["lrfd_max_iters"])
    count = int(round(frac * p["rows"] * p["cols"]))
    cono_err, alg_err, r_hat, cono_it, alg_it = [], [], [], [], []
    t_cono = t_alg = 0.0
    for t in range(grid.trials_per_cell):
        spec = SubspaceMixSpec(p["rows"], p["cols"], k, rank // k,
                               derive_seed(grid.base_seed, _TRUTH, ri, fi, t))
        l0 = gen_subspace_mixture(spec)
        omega = sample_observations(p["rows"], p["cols"], UniformExactCount(count),
                                    derive_seed(grid.base_seed, _MASK, ri, fi, t))
        t0 = time.perf_counter()
        cono = solve_cono(l0, omega, cfg)
        t1 = time.perf_counter()
        cono_err.append(recovery_error(cono.reconstruction, l0))
        cono_it.append(cono.iterations)
        try:
            res = run_algorithm1(l0, omega, lam=cfg.lam, cfg=cfg_lrfd, cono_report=cono)
            alg_err.append(recovery_error(res.final_estimate, l0))
            r_hat.append(res.rank_estimate)
            alg_it.append(res.lrfd_report.iterations)
        except DegenerateEstimateError:
            alg_err.append(1.0)
            r_hat.append(0)
            alg_it.append(0)
        t_cono += t1 - t0
        t_alg += time.perf_counter() - t1
    base = {"kind": "cell", "rank": rank, "fraction": frac, "trials": grid.trials_per_cell,
            "success_area": ""}
    rows = []
    for name, errs, its, rh, wall in (("cono", cono_err, cono_it, "", t_cono),
                                      ("alg1", alg_err, alg_it, r_hat, t_alg)):
        rows.append(dict(base, algorithm=name,
                         success_count=sum(e < SUCCESS_TOL for e in errs),
                         errors=_fmt_errors(errs), mean_error=float(np.mean(errs)),
                         mean_rank_estimate=float(np.mean(rh)) if rh else "",
                         mean_iterations=float(np.mean(its)), wall_time=wall))
    return rows


def success_area(rows: list[dict], algorithm: str) -> float:
    """Fraction of cells where at least half the trials succeeded."""
    cells = [r for r in rows if r["kind"] == "cell" and r["algorithm"] == algorithm]
    if not cells:
        return 0.0
    good = sum(2 * r["success_count"] >= r["trials"] for r in cells)
    return good / len(cells)


def run_phase_diagram(grid: ExperimentGrid, workers: int = 1) -> list[dict]:
    """Cell rows ordered by (rank, fraction, algorithm), then two summary rows.

    Algorithm 1 reuses the CONO solve of the same trial as its first stage.
    The LRFD stage may use its own iteration cap, ``lrfd_max_iters``.
    """
    _expect(grid, Experiment.PHASE_DIAGRAM)
    p = grid.params
    tasks = [(grid, ri, fi, r, f) for ri, r in enumerate(p["ranks"])
             for fi, f in enumerate(p["fractions"])]
    rows = [row for cell in _run_cells(_phase_cell, tasks, workers) for row in cell]
    for name in ("cono", "alg1"):
        cells = [r for r in rows if r["kind"] == "cell" and r["algorithm"] == name]
        rows.append({"kind": "summary", "rank": "", "fraction": "", "algorithm": name,
                     "trials": grid.trials_per_cell,
                     "success_count": sum(r["success_count"] for r in cells), "errors": "",
                     "mean_error": float(np.mean([r["mean_error"] for r in cells])),
                     "mean_rank_estimate": "", "mean_iterations": "",
                     "success_area": success_area(rows, name),
                     "wall_time": sum(r["wall_time"] for r in cells)})
    return rows


# -------------------------------------------------------------------- lemma

LEMMA_COLUMNS = ["rank", "rho", "trials", "bound", "max_norm", "violations", "power_failures",
                 "neumann_diverged", "lemma2_checked", "lemma2_failures", "max_lemma2_residual",
                 "lemma1_pass", "lemma2_pass", "wall_time"]


def _lemma_cell(task):
    grid, ri, pi, rank, rho = task
    p = grid.params
    size = p["size"]
    bound = 1.0 - rho + p["delta"]
    norms, violations, power_failures, diverged = [], 0, 0, 0
    checked, failures, worst = 0, 0, 0.0
    t0 = time.perf_counter()
    for t in range(grid.trials_per_cell):
        u = SubspaceBasis(random_basis(
            rng_for(derive_seed(grid.base_seed, _BASIS, ri, pi, t)), size, rank))
        omega = sample_observations(size, size, BernoulliRho(rho),
                                    derive_seed(grid.base_seed, _MASK, ri, pi, t))
        try:
            psi = lemma1_operator_norm(u, omega, tol=p["power_tol"], max_iters=p["power_iters"])
        except PowerIterationError:
            power_failures += 1
            continue
        norms.append(psi)
        violations += psi > bound
        try:
            res = lemma2_inverse_check(u, omega, p["terms"], probes=p["probes"],
                                       seed=derive_seed(grid.base_seed, _NOISE, ri, pi, t),
                                       psi=psi)
        except NeumannDivergenceError:
            diverged += 1
            continue
        if psi < p["psi_cutoff"]:
            checked += 1
            failures += res >= p["residual_tol"]
            worst = max(worst, res)
    return {
        "rank": rank, "rho": rho, "trials": grid.trials_per_cell, "bound": bound,
        "max_norm": max(norms) if norms else "", "violations": violations,
        "power_failures": power_failures, "neumann_diverged": diverged,
        "lemma2_checked": checked, "lemma2_failures": failures,
        "max_lemma2_residual": worst,
        "lemma1_pass": int(violations == 0 and power_failures == 0),
        "lemma2_pass": int(failures == 0), "wall_time": time.perf_counter() - t0,
    }


def run_lemma_check(grid: ExperimentGrid, workers: int = 1) -> list[dict]:
    """Per (rank, rho) cell: operator-norm bound violations and Neumann residuals.

    Power iterations that do not settle and draws with norm >= 1 are counted
    in their own columns rather than aborting the run.
    """
    _expect(grid, Experiment.LEMMA_CHECK)
    p = grid.params
    if any(r < 1 or r > p["size"] for r in p["ranks"]):
        raise ConfigError("ranks must lie in [1, size]")
    if any(not 0.0 <= rho <= 1.0 for rho in p["rhos"]):
        raise ConfigError("rhos must lie in [0, 1]")
    tasks = [(grid, ri, pi, r, rho) for ri, r in enumerate(p["ranks"])
             for pi, rho in enumerate(p["rhos"])]
    return _run_cells(_lemma_cell, tasks, workers)


# ----------------------------------------------------------------- complete

COMPLETE_COLUMNS = ["algorithm", "lambda", "iterations", "residual", "converged",
                    "rank_estimate", "stationarity", "wall_time"]


def run_single_complete(x, omega: ObservationSet, algorithm: str, cfg: SolverConfig,
                        dictionary=None):
    """Complete ``x`` from ``omega``; returns ``(completed, report_row)``.

    ``algorithm`` is ``cono`` or ``lrfd``. For ``lrfd`` a given dictionary is
    used as given (the CLI normalizes its columns first); without one it is
    learned by the two-stage pipeline.
    """
    t0 = time.perf_counter()
    r_hat = ""
    if algorithm == "cono":
        rep = solve_cono(x, omega, cfg)
    elif algorithm == "lrfd":
        if dictionary is None:
            res = run_algorithm1(x, omega, lam=cfg.lam, cfg=cfg)
            rep, r_hat = res.lrfd_report, res.rank_estimate
        else:
            rep = solve_lrfd(x, dictionary, omega, cfg)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    completed = rep.reconstruction
    obs = np.linalg.norm(np.where(omega.mask, x, 0.0))
    resid = np.linalg.norm(np.where(omega.mask, x - completed, 0.0))
    return completed, {
        "algorithm": algorithm, "lambda": cfg.lam, "iterations": rep.iterations,
        "residual": float(resid / obs) if obs > 0 else float(resid),
        "converged": int(rep.converged), "rank_estimate": r_hat,
        "stationarity": rep.stationarity, "wall_time": time.perf_counter() - t0,
    }


COLUMNS = {
    Experiment.COHERENCE_SWEEP: COHERENCE_COLUMNS,
    Experiment.FIG3_SWEEP: FIG3_COLUMNS,
    Experiment.PHASE_DIAGRAM: PHASE_COLUMNS,
    Experiment.LEMMA_CHECK: LEMMA_COLUMNS,
    Experiment.SINGLE_COMPLETE: COMPLETE_COLUMNS,
}

RUNNERS = {
    Experiment.COHERENCE_SWEEP: run_coherence_sweep,
    Experiment.FIG3_SWEEP: run_fig3_sweep,
    Experiment.PHASE_DIAGRAM: run_phase_diagram,
    Experiment.LEMMA_CHECK: run_lemma_check,
}


def _expect(grid, kind):
    if grid.experiment is not kind:
        raise ConfigError(f"grid is for {grid.experiment.value}, not {kind.value}")


def write_csv(path_or_file, columns, rows):
    """Write rows with a header; floats use repr so reruns compare exactly."""
    def fmt(v):
        return repr(v) if isinstance(v, float) else v

    def dump(fh):
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="raise", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: fmt(r[k]) for k in columns})

    if hasattr(path_or_file, "write"):
        dump(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            dump(fh)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
