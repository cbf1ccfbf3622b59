"""Reproduction harness: single trials, noise sweeps and plot-ready CSVs."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .arx import ArxModel, ModelOrders, NoiseSpec, RankDeficiencyWarning, arx_least_squares, simulate
from .lifting import build_lifted_problem, scale_invariant_error
from .solver import (
    NotRecoverableError,
    SolverConfig,
    SolverError,
    lambda_search,
    solve_bounded,
    solve_noise_free,
    solve_penalized,
)
from .subspace import SubspaceBasis, dft_basis, gaussian_basis, load_basis, zoh_basis

log = logging.getLogger(__name__)

SOLVER_MODES = ("exact", "bounded", "penalized", "search")
METRICS = ("err_u", "err_b", "err_a", "baseline_err_b", "baseline_err_a")
PLOT_HEADER = [
    "eps",
    "mean_err_u",
    "halfstd_err_u",
    "mean_err_b",
    "halfstd_err_b",
    "mean_err_a",
    "halfstd_err_a",
    "failures",
]
TRIAL_HEADER = [
    "eps",
    "trial",
    "err_u",
    "err_b",
    "err_a",
    "baseline_err_b",
    "baseline_err_a",
    "rank_gap",
    "status",
]


@dataclass(frozen=True)
class BasisSpec:
    kind: str
    hold: int | None = None
    m: int | None = None
    seed: int | None = None
    path: str | None = None

    def __post_init__(self):
        required = {"zoh": "hold", "dft": "m", "gaussian": "m", "file": "path"}
        if self.kind not in required:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if getattr(self, required[self.kind]) is None:
            raise ValueError(f"{self.kind} basis needs {required[self.kind]!r}")

    def build(self, N: int) -> SubspaceBasis:
        return _build_basis(self, N)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@lru_cache(maxsize=32)
def _build_basis(spec: BasisSpec, N: int) -> SubspaceBasis:
    if spec.kind == "zoh":
        return zoh_basis(N, spec.hold)
    if spec.kind == "dft":
        return dft_basis(N, spec.m)
    if spec.kind == "gaussian":
        return gaussian_basis(N, spec.m, spec.seed or 0)
    basis = load_basis(spec.path)
    if basis.N != N:
        raise ValueError(f"basis file has {basis.N} rows, scenario has N={N}")
    return basis


@dataclass(frozen=True)
class SolverSpec:
    """Which program to solve. ``eps_box=None`` in bounded mode means the
    half-width of uniform noise, ``parameter / 2``."""

    mode: str = "bounded"
    eps_box: float | None = None
    lam: float | None = None
    config: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.mode not in SOLVER_MODES:
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if self.mode == "penalized" and self.lam is None:
            raise ValueError("penalized mode needs lambda")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "eps_box": self.eps_box,
            "lambda": self.lam,
            "config": self.config.to_dict(),
        }


@dataclass(frozen=True)
class Scenario:
    true_model: ArxModel
    basis: BasisSpec
    N: int
    noise: NoiseSpec = NoiseSpec()
    solver: SolverSpec = SolverSpec()
    seed: int = 0

    @property
    def orders(self) -> ModelOrders:
        return self.true_model.orders

    def box_half_width(self) -> float:
        if self.solver.eps_box is not None:
            return self.solver.eps_box
        if self.noise.is_silent:
            return 0.0
        if self.noise.kind == "uniform":
            return self.noise.parameter / 2
        raise ValueError("bounded mode with gaussian noise needs an explicit eps_box")

    def with_noise_level(self, level: float) -> "Scenario":
        kind = self.noise.kind if self.noise.kind != "none" else "uniform"
        return replace(self, noise=NoiseSpec(kind, level))

    def to_dict(self) -> dict:
        o = self.orders
        return {
            "orders": {"n_a": o.n_a, "n_b": o.n_b, "n_k": o.n_k},
            "a": self.true_model.a.tolist(),
            "b": self.true_model.b.tolist(),
            "basis": self.basis.to_dict(),
            "N": self.N,
            "noise": {"kind": self.noise.kind, "parameter": self.noise.parameter},
            "solver": self.solver.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        o = d["orders"]
        orders = ModelOrders(o["n_a"], o["n_b"], o.get("n_k", 0))
        model = ArxModel(orders, np.asarray(d.get("a", []), dtype=float), np.asarray(d["b"], dtype=float))
        noise = NoiseSpec(**d.get("noise", {}))
        s = d.get("solver", {})
        solver = SolverSpec(
            mode=s.get("mode", "bounded"),
            eps_box=s.get("eps_box"),
            lam=s.get("lambda"),
            config=SolverConfig.from_dict(s.get("config", {})),
        )
        return cls(model, BasisSpec(**d["basis"]), int(d["N"]), noise, solver, int(d.get("seed", 0)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def paper_example(eps: float = 0.0) -> Scenario:
    """ZOH example: a=(-0.3), b=(3, 2, 1), hold 6, N=60, uniform noise of
    width ``eps``, bounded solver with box half-width ``eps / 2``."""
    if not eps >= 0:
        raise ValueError("eps must be >= 0")
    model = ArxModel(ModelOrders(1, 3, 0), np.array([-0.3]), np.array([3.0, 2.0, 1.0]))
    return Scenario(
        true_model=model,
        basis=BasisSpec("zoh", hold=6),
        N=60,
        noise=NoiseSpec("uniform", eps),
        solver=SolverSpec("bounded"),
    )


@dataclass(frozen=True)
class TrialResult:
    eps: float
    err_u: float
    err_b: float
    err_a: float
    baseline_err_b: float
    baseline_err_a: float
    rank_gap: float
    lambda_used: float | None
    solver_status: str

    @property
    def failed(self) -> bool:
        return self.solver_status.startswith("failed")


def coefficient_error(a, a_hat) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    d = float(np.linalg.norm(np.asarray(a_hat) - a))
    na = float(np.linalg.norm(a))
    return d / na if na > 0 else d


def _solve(scenario: Scenario, problem):
    s = scenario.solver
    if s.mode == "exact":
        return solve_noise_free(problem, s.config)
    if s.mode == "bounded":
        return solve_bounded(problem, scenario.box_half_width(), s.config)
    if s.mode == "penalized":
        return solve_penalized(problem, s.lam, s.config)
    _, est = lambda_search(problem, s.config)
    return est


def run_trial(scenario: Scenario, trial_seed: int) -> TrialResult:
    """Draw ``x`` and the noise, simulate, identify blindly, score.

    Solver failures are returned as a result with NaN metrics and a
    ``failed:<reason>`` status.
    """
    basis = scenario.basis.build(scenario.N)
    rng = np.random.default_rng(trial_seed)
    x = rng.standard_normal(basis.m)
    noise_seed = int(rng.integers(2**63))
    u = basis.D @ x
    model = scenario.true_model
    y = simulate(model, u, scenario.noise, seed=noise_seed)
    eps = scenario.noise.parameter

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        ls = arx_least_squares(y, u, model.orders)
    base_b = scale_invariant_error(model.b, ls.b)
    base_a = coefficient_error(model.a, ls.a)

    try:
        problem = build_lifted_problem(y, basis, model.orders)
        est = _solve(scenario, problem)
    except (SolverError, NotRecoverableError, np.linalg.LinAlgError) as exc:
        log.warning("trial seed %d failed: %s", trial_seed, exc)
        nan = float("nan")
        return TrialResult(eps, nan, nan, nan, base_b, base_a, nan, None, f"failed:{type(exc).__name__}")

    if np.any(u):
        err_u = scale_invariant_error(u, est.u_hat)
    else:
        err_u = float("nan")
    return TrialResult(
        eps=eps,
        err_u=err_u,
        err_b=scale_invariant_error(model.b, est.b_hat),
        err_a=coefficient_error(model.a, est.a_hat),
        baseline_err_b=base_b,
        baseline_err_a=base_a,
        rank_gap=est.rank_gap,
        lambda_used=est.lambda_used,
        solver_status=est.report.status if est.report is not None else "converged",
    )


def trial_seed(master_seed: int, level: int, trial: int) -> int:
    """Independent per-trial seed; does not depend on execution order."""
    ss = np.random.SeedSequence([master_seed, level, trial])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class SweepSummary:
    noise_levels: np.ndarray
    trials_per_level: int
    mean: dict
    std: dict
    count: np.ndarray
    failures: np.ndarray
    results: tuple = ()

    def halfstd(self, metric: str) -> np.ndarray:
        return 0.5 * self.std[metric]


def _run_one(args):
    scenario, seed = args
    return run_trial(scenario, seed)


def summarize(levels, results, trials: int) -> SweepSummary:
    mean = {k: np.zeros(len(levels)) for k in METRICS}
    std = {k: np.zeros(len(levels)) for k in METRICS}
    count = np.zeros(len(levels), dtype=int)
    failures = np.zeros(len(levels), dtype=int)
    for i, per_level in enumerate(results):
        ok = [r for r in per_level if not r.failed]
        failures[i] = len(per_level) - len(ok)
        count[i] = len(ok)
        for k in METRICS:
            vals = np.array([getattr(r, k) for r in ok], dtype=float)
            vals = vals[np.isfinite(vals)]
            mean[k][i] = vals.mean() if vals.size else float("nan")
            std[k][i] = vals.std(ddof=1) if vals.size > 1 else 0.0
    return SweepSummary(
        noise_levels=np.asarray(levels, dtype=float),
        trials_per_level=trials,
        mean=mean,
        std=std,
        count=count,
        failures=failures,
        results=tuple(tuple(r) for r in results),
    )


def monte_carlo(
    scenario_template: Scenario,
    noise_levels,
    trials: int,
    master_seed: int = 0,
    parallel: int = 1,
) -> SweepSummary:
    """Run ``trials`` independent trials at every noise level.

    Standard deviations are sample standard deviations (``ddof=1``) over
    the successful trials of each level.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    levels = [float(v) for v in noise_levels]
    jobs = []
    for i, lev in enumerate(levels):
        sc = scenario_template.with_noise_level(lev)
        jobs.extend((sc, trial_seed(master_seed, i, t)) for t in range(trials))
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            flat = list(ex.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * parallel))))
    else:
        flat = [_run_one(j) for j in jobs]
    grouped = [flat[i * trials : (i + 1) * trials] for i in range(len(levels))]
    return summarize(levels, grouped, trials)


def _fmt(v) -> str:
    return repr(float(v))


def export_plot_data(summary: SweepSummary, path) -> None:
    if len(summary.noise_levels) == 0:
        raise ValueError("empty summary")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for i, eps in enumerate(summary.noise_levels):
            row = [_fmt(eps)]
            for k in ("err_u", "err_b", "err_a"):
                row += [_fmt(summary.mean[k][i]), _fmt(summary.halfstd(k)[i])]
            row.append(int(summary.failures[i]))
            w.writerow(row)


def read_plot_data(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in PLOT_HEADER}


def export_trials(summary: SweepSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_HEADER)
        for eps, per_level in zip(summary.noise_levels, summary.results):
            for t, r in enumerate(per_level):
                w.writerow(
                    [
                        _fmt(eps),
                        t,
                        _fmt(r.err_u),
                        _fmt(r.err_b),
                        _fmt(r.err_a),
                        _fmt(r.baseline_err_b),
                        _fmt(r.baseline_err_a),
                        _fmt(r.rank_gap),
                        r.solver_status,
                    ]
                )


def is_weakly_increasing(values, slack: float = 0.0) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) >= -slack)) and not any(map(math.isnan, v))
