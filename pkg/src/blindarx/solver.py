"""Nuclear-norm programs on the lifted system, solved by ADMM.

Three variants are provided:

* :func:`solve_noise_free` -- ``min ||X||_*  s.t.  A theta = rhs``
* :func:`solve_bounded`    -- ``min ||X||_*  s.t.  |rhs - A theta| <= eps``
* :func:`solve_penalized`  -- ``min ||X||_* + lam ||rhs - A theta||_2^2``

Every variant splits the lifted matrix into a copy ``Z`` handled by singular
value thresholding; the returned ``X`` is that thresholded copy, so exact
zero singular values survive into the estimate.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .arx import ar_least_squares
from .lifting import (
    LiftedEstimate,
    LiftedProblem,
    assemble_estimate,
    check_recoverability,
    numerical_rank,
)

log = logging.getLogger(__name__)

NOISE_FREE_GAP_TOL = 1e-6
NOISY_GAP_TOL = 1e-3
ZERO_TOL = 1e-6


class SolverError(RuntimeError):
    """Base class for solver failures."""


class InfeasibleError(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class LambdaSearchError(SolverError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class NotRecoverableError(ValueError):
    """``A`` lacks full column rank, so the linear-system shortcut does not apply."""


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    max_iter: int = 5000
    tol_abs: float = 1e-8
    tol_rel: float = 1e-6
    rank1_gap_tol: float | None = None  # None: 1e-6 noise-free, 1e-3 noisy
    tikhonov_a: float = 1e-10
    adaptive_rho: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        for name in ("tol_abs", "tol_rel", "tikhonov_a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.rank1_gap_tol is not None and not self.rank1_gap_tol > 0:
            raise ValueError("rank1_gap_tol must be > 0")

    def gap_tol(self, noisy: bool) -> float:
        if self.rank1_gap_tol is not None:
            return self.rank1_gap_tol
        return NOISY_GAP_TOL if noisy else NOISE_FREE_GAP_TOL

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SolverConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverReport:
    status: str
    iterations: int = 0
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    objective_trace: list = field(default_factory=list)
    primal_trace: list = field(default_factory=list)
    dual_trace: list = field(default_factory=list)
    rho: float = float("nan")
    message: str = ""

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "primal_residual", "dual_residual"])
            for k, row in enumerate(
                zip(self.objective_trace, self.primal_trace, self.dual_trace), start=1
            ):
                w.writerow([k, *(repr(float(v)) for v in row)])


def svt(M, tau: float) -> np.ndarray:
    """Singular value thresholding, the prox of ``tau * ||.||_*``.

    Returns ``U diag(max(s - tau, 0)) V^T``, the minimizer of
    ``0.5 ||Z - M||_F^2 + tau ||Z||_*``.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    M = np.asarray(M, dtype=float)
    if tau == 0:
        return M.copy()
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    if k == 0:
        return np.zeros_like(M)
    return (U[:, :k] * s[:k]) @ Vt[:k]


def _nuclear(M) -> float:
    return float(np.linalg.svd(M, compute_uv=False).sum())


def _balance(rho, r, s, mu=10.0, factor=2.0):
    """Residual balancing; returns the multiplicative change to rho."""
    if r > mu * s:
        return factor
    if s > mu * r:
        return 1.0 / factor
    return 1.0


def _adapt_now(config: SolverConfig, it: int) -> bool:
    # Stop adapting after half the budget so the fixed-rho tail converges.
    return config.adaptive_rho and it % 10 == 0 and it < config.max_iter // 2


def _chol(K):
    return scipy.linalg.cho_factor(K, lower=False, check_finite=False)


def _chol_solve(c, rhs):
    return scipy.linalg.cho_solve(c, rhs, check_finite=False)


# ---------------------------------------------------------------------------
# noise-free
# ---------------------------------------------------------------------------


def _affine_parametrization(problem: LiftedProblem, config: SolverConfig):
    """Minimum-norm particular solution and null-space basis of ``A``.

    Raises InfeasibleError if ``rhs`` is not in the range of ``A``.
    """
    A, rhs = problem.A, problem.rhs
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    r, _ = numerical_rank(A)
    theta0 = Vt[:r].T @ ((U[:, :r].T @ rhs) / s[:r])
    resid = rhs - A @ theta0
    bound = 10 * config.tol_abs * max(np.max(np.abs(rhs)), 1e-300)
    if np.max(np.abs(resid)) > bound:
        report = SolverReport(
            status="infeasible",
            primal_residual=float(np.max(np.abs(resid))),
            message=(
                "equality constraints are inconsistent (data are noisy?); "
                "use solve_bounded or solve_penalized instead"
            ),
        )
        raise InfeasibleError(report.message, report)
    return theta0, Vt[r:].T


def solve_noise_free(problem: LiftedProblem, config: SolverConfig | None = None) -> LiftedEstimate:
    """Minimum nuclear norm lifted matrix consistent with noise-free data."""
    config = config or SolverConfig()
    theta0, Nmat = _affine_parametrization(problem, config)
    nx = problem.n_x
    shape = (problem.m, problem.orders.n_b)

    if Nmat.shape[1] == 0:
        # Unique solution: nothing to optimize.
        X, a = problem.unpack(theta0)
        rep = SolverReport(status="converged", objective_trace=[_nuclear(X)], message="unique solution")
        return assemble_estimate(X, a, problem, report=rep)

    Nx, Nc = Nmat[:nx], Nmat[nx:]
    t0x, t0c = theta0[:nx], theta0[nx:]
    tau_a = config.tikhonov_a
    NxtNx = Nx.T @ Nx
    NctNc = Nc.T @ Nc
    ctc0 = Nc.T @ t0c

    rho = config.rho
    fac = _chol(rho * NxtNx + tau_a * NctNc + 1e-14 * np.eye(Nmat.shape[1]))
    Z = np.zeros(nx)
    U = np.zeros(nx)  # scaled dual
    obj, ptr, dtr = [], [], []
    status = "max_iter"
    rhs_inf = np.max(np.abs(problem.rhs))
    A_x = problem.A_x
    z = np.zeros(Nmat.shape[1])
    for it in range(1, config.max_iter + 1):
        z = _chol_solve(fac, rho * (Nx.T @ (Z - U - t0x)) - tau_a * ctc0)
        x = t0x + Nx @ z
        Z_prev = Z
        Z = svt((x + U).reshape(shape, order="F"), 1.0 / rho).reshape(-1, order="F")
        U = U + x - Z

        r = np.linalg.norm(x - Z)
        s = rho * np.linalg.norm(Z - Z_prev)
        obj.append(_nuclear(Z.reshape(shape, order="F")))
        ptr.append(r)
        dtr.append(s)
        eps_pri = np.sqrt(nx) * config.tol_abs + config.tol_rel * max(np.linalg.norm(x), np.linalg.norm(Z))
        eps_dual = np.sqrt(nx) * config.tol_abs + config.tol_rel * rho * np.linalg.norm(U)
        if r <= eps_pri and s <= eps_dual:
            feas = np.max(np.abs(A_x @ (Z - x)))
            if feas <= 10 * config.tol_abs * rhs_inf:
                status = "converged"
                break
        if _adapt_now(config, it):
            f = _balance(rho, r, s)
            if f != 1.0:
                rho *= f
                U /= f
                fac = _chol(rho * NxtNx + tau_a * NctNc + 1e-14 * np.eye(Nmat.shape[1]))

    theta_c = t0c + Nc @ z
    X = Z.reshape(shape, order="F")
    rep = SolverReport(
        status=status,
        iterations=it,
        primal_residual=float(r),
        dual_residual=float(s),
        objective_trace=obj,
        primal_trace=ptr,
        dual_trace=dtr,
        rho=rho,
    )
    if status != "converged":
        log.warning("noise-free ADMM stopped at max_iter=%d (r=%.3g, s=%.3g)", it, r, s)
    return assemble_estimate(X, -theta_c, problem, report=rep)


# ---------------------------------------------------------------------------
# bounded noise
# ---------------------------------------------------------------------------


def min_max_residual(problem: LiftedProblem) -> float:
    """Smallest achievable ``max_t |rhs - A theta|`` (a small LP)."""
    A, rhs = problem.A, problem.rhs
    rows, p = A.shape
    # variables [theta, s]; minimize s s.t. -s <= rhs - A theta <= s
    c = np.zeros(p + 1)
    c[-1] = 1.0
    ones = np.ones((rows, 1))
    A_ub = np.vstack([np.hstack([-A, -ones]), np.hstack([A, -ones])])
    b_ub = np.concatenate([-rhs, rhs])
    bounds = [(None, None)] * p + [(0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"feasibility LP failed: {res.message}")
    return float(res.fun)


def solve_bounded(problem: LiftedProblem, eps: float, config: SolverConfig | None = None) -> LiftedEstimate:
    """Minimum nuclear norm subject to ``|eta(t)| <= eps`` for every row."""
    config = config or SolverConfig()
    if not eps >= 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return solve_noise_free(problem, config)

    best = min_max_residual(problem)
    if best > eps * (1 + 1e-9) + 1e-12 * max(np.max(np.abs(problem.rhs)), 1.0):
        rep = SolverReport(
            status="infeasible",
            primal_residual=best,
            message=f"no model fits within eps={eps:g}; smallest achievable bound is {best:.6g}",
        )
        raise InfeasibleError(rep.message, rep)

    A, rhs = problem.A, problem.rhs
    rows, p = A.shape
    nx = problem.n_x
    shape = (problem.m, problem.orders.n_b)
    AtA = A.T @ A
    Pdiag = np.zeros(p)
    Pdiag[:nx] = 1.0
    Tdiag = np.zeros(p)
    Tdiag[nx:] = config.tikhonov_a

    def factor(rho):
        return _chol(rho * (AtA + np.diag(Pdiag)) + np.diag(Tdiag))

    rho = config.rho
    fac = factor(rho)
    Z = np.zeros(nx)
    eta = np.zeros(rows)
    U = np.zeros(nx)
    W = np.zeros(rows)
    theta = np.zeros(p)
    obj, ptr, dtr = [], [], []
    status = "max_iter"
    for it in range(1, config.max_iter + 1):
        g = np.zeros(p)
        g[:nx] = Z - U
        theta = _chol_solve(fac, rho * (g + A.T @ (rhs - eta - W)))
        x = theta[:nx]
        At = A @ theta
        Z_prev, eta_prev = Z, eta
        Z = svt((x + U).reshape(shape, order="F"), 1.0 / rho).reshape(-1, order="F")
        eta = np.clip(rhs - At - W, -eps, eps)
        rz = x - Z
        re = At + eta - rhs
        U = U + rz
        W = W + re

        r = np.sqrt(rz @ rz + re @ re)
        dual = -(Z - Z_prev)
        dual_full = A.T @ (eta - eta_prev)
        dual_full[:nx] += dual
        s = rho * np.linalg.norm(dual_full)
        obj.append(_nuclear(Z.reshape(shape, order="F")))
        ptr.append(r)
        dtr.append(s)
        eps_pri = np.sqrt(nx + rows) * config.tol_abs + config.tol_rel * max(
            np.sqrt(x @ x + At @ At), np.sqrt(Z @ Z + eta @ eta), np.linalg.norm(rhs)
        )
        yvec = A.T @ W
        yvec[:nx] += U
        eps_dual = np.sqrt(p) * config.tol_abs + config.tol_rel * rho * np.linalg.norm(yvec)
        if r <= eps_pri and s <= eps_dual:
            status = "converged"
            break
        if _adapt_now(config, it):
            f = _balance(rho, r, s)
            if f != 1.0:
                rho *= f
                U /= f
                W /= f
                fac = factor(rho)

    X = Z.reshape(shape, order="F")
    rep = SolverReport(
        status=status,
        iterations=it,
        primal_residual=float(r),
        dual_residual=float(s),
        objective_trace=obj,
        primal_trace=ptr,
        dual_trace=dtr,
        rho=rho,
    )
    if status != "converged":
        log.warning("bounded ADMM stopped at max_iter=%d (r=%.3g, s=%.3g)", it, r, s)
    return assemble_estimate(X, -theta[nx:], problem, report=rep)


# ---------------------------------------------------------------------------
# penalized
# ---------------------------------------------------------------------------


def _penalized_admm(problem, lam, config, warm=None):
    A, rhs = problem.A, problem.rhs
    p = A.shape[1]
    nx = problem.n_x
    shape = (problem.m, problem.orders.n_b)
    AtA2 = 2 * lam * (A.T @ A)
    Atb2 = 2 * lam * (A.T @ rhs)
    diag_base = np.zeros(p)
    diag_base[nx:] = config.tikhonov_a

    def factor(rho):
        d = diag_base.copy()
        d[:nx] += rho
        return _chol(AtA2 + np.diag(d))

    if warm is None:
        rho = config.rho
        Z = np.zeros(nx)
        Y = np.zeros(nx)  # unscaled dual
    else:
        Z, Y, rho = warm
    U = Y / rho
    fac = factor(rho)
    theta = np.zeros(p)
    obj, ptr, dtr = [], [], []
    status = "max_iter"
    for it in range(1, config.max_iter + 1):
        g = Atb2.copy()
        g[:nx] += rho * (Z - U)
        theta = _chol_solve(fac, g)
        x = theta[:nx]
        Z_prev = Z
        Z = svt((x + U).reshape(shape, order="F"), 1.0 / rho).reshape(-1, order="F")
        U = U + x - Z

        r = np.linalg.norm(x - Z)
        s = rho * np.linalg.norm(Z - Z_prev)
        resid = rhs - A_mul(A, Z, theta[nx:])
        obj.append(_nuclear(Z.reshape(shape, order="F")) + lam * float(resid @ resid))
        ptr.append(r)
        dtr.append(s)
        eps_pri = np.sqrt(nx) * config.tol_abs + config.tol_rel * max(np.linalg.norm(x), np.linalg.norm(Z))
        eps_dual = np.sqrt(nx) * config.tol_abs + config.tol_rel * rho * np.linalg.norm(U)
        if r <= eps_pri and s <= eps_dual:
            status = "converged"
            break
        if _adapt_now(config, it):
            f = _balance(rho, r, s)
            if f != 1.0:
                rho *= f
                U /= f
                fac = factor(rho)

    rep = SolverReport(
        status=status,
        iterations=it,
        primal_residual=float(r),
        dual_residual=float(s),
        objective_trace=obj,
        primal_trace=ptr,
        dual_trace=dtr,
        rho=rho,
    )
    if status != "converged":
        log.warning("penalized ADMM stopped at max_iter=%d (r=%.3g, s=%.3g)", it, r, s)
    return Z.reshape(shape, order="F"), -theta[nx:], rep, (Z, rho * U, rho)


def A_mul(A, x_vec, c):
    nx = x_vec.size
    return A[:, :nx] @ x_vec + A[:, nx:] @ c


def solve_penalized(problem: LiftedProblem, lam: float, config: SolverConfig | None = None) -> LiftedEstimate:
    """``min ||X||_* + lam * ||rhs - A theta||^2`` over ``X`` and ``a``."""
    config = config or SolverConfig()
    if not (lam > 0 and np.isfinite(lam)):
        raise ValueError("lambda must be a positive finite number")
    X, a, rep, _ = _penalized_admm(problem, lam, config)
    notes = ()
    if not np.any(X):
        notes = ("lambda is at or below lambda_min: the lifted matrix is zero",)
    return assemble_estimate(X, a, problem, report=rep, lambda_used=lam, warnings=notes)


# ---------------------------------------------------------------------------
# lambda_min and the lambda sweep
# ---------------------------------------------------------------------------


def lambda_min_matrix(problem: LiftedProblem) -> np.ndarray:
    """Gradient matrix ``V`` of the data term at ``X = 0`` and the AR fit.

    ``V[i, j] = 2 * sum_t r(t) D(t - n_k - j, i)`` with ``r`` the AR
    least-squares residual over ``t = n..N``.
    """
    fit = ar_least_squares(problem.y, problem.orders.n_a, start=problem.n)
    v = 2.0 * (problem.A_x.T @ fit.residuals)
    return v.reshape(problem.m, problem.orders.n_b, order="F")


def lambda_min(problem: LiftedProblem) -> float:
    """Largest penalty weight for which the penalized program returns ``X = 0``.

    Equals ``1 / ||V||_op``; ``inf`` when the AR fit leaves no residual
    correlated with the input subspace.
    """
    V = lambda_min_matrix(problem)
    opn = float(np.linalg.norm(V, 2))
    scale = 2.0 * np.linalg.norm(problem.A_x) * np.linalg.norm(problem.rhs)
    if opn == 0.0 or opn <= 1e-13 * scale:
        return float("inf")
    return 1.0 / opn


def classify(est: LiftedEstimate, gap_tol: float) -> str:
    if np.linalg.norm(est.X) <= ZERO_TOL * np.linalg.norm(est.problem.rhs):
        return "zero"
    if est.rank_gap <= gap_tol:
        return "rank1"
    return "higher"


def lambda_search(
    problem: LiftedProblem,
    config: SolverConfig | None = None,
    growth: float = 1.5,
    max_steps: int = 40,
):
    """Sweep ``lam = lambda_min * growth**k``, ``k = 1..max_steps``, and keep
    the solution at the largest ``lam`` that is rank 1.

    The whole sweep is always run: the regularization path can pass through
    a short higher-rank stretch and return to rank 1 for larger ``lam``.

    Returns ``(lambda_star, estimate)``. When ``lambda_min`` is infinite the
    zero solution is returned with ``lambda_star = inf`` and a warning note.
    """
    config = config or SolverConfig()
    if not growth > 1:
        raise ValueError("growth must be > 1")
    lmin = lambda_min(problem)
    if not np.isfinite(lmin):
        fit = ar_least_squares(problem.y, problem.orders.n_a, start=problem.n)
        est = assemble_estimate(
            np.zeros((problem.m, problem.orders.n_b)),
            fit.a,
            problem,
            report=SolverReport(status="converged", message="lambda_min is infinite"),
            lambda_used=float("inf"),
            warnings=("lambda_min is infinite; the lifted matrix is zero for every lambda",),
        )
        return float("inf"), est

    gap_tol = config.gap_tol(noisy=True)
    trace = []
    best = None
    warm = None
    for k in range(1, max_steps + 1):
        lam = lmin * growth**k
        X, a, rep, warm = _penalized_admm(problem, lam, config, warm)
        est = assemble_estimate(X, a, problem, report=rep, lambda_used=lam)
        kind = classify(est, gap_tol)
        trace.append((lam, kind, est.rank_gap, rep.status))
        if kind == "rank1":
            best = (lam, est)
    if best is None:
        raise LambdaSearchError(
            f"no rank-1 solution found in {len(trace)} lambda steps from lambda_min={lmin:.6g}",
            trace,
        )
    return best


# ---------------------------------------------------------------------------
# linear-system shortcut
# ---------------------------------------------------------------------------


def oracle_linear_solve(problem: LiftedProblem) -> LiftedEstimate:
    """Least-squares solve of ``A theta = rhs`` when ``A`` has full column rank."""
    rec = check_recoverability(problem)
    if not rec.full_column_rank:
        raise NotRecoverableError(
            f"A has rank {rec.rank} < {rec.columns} columns; the solution is not unique"
        )
    theta, *_ = np.linalg.lstsq(problem.A, problem.rhs, rcond=None)
    X, a = problem.unpack(theta)
    rep = SolverReport(status="converged", message="direct least-squares solve")
    return assemble_estimate(X, a, problem, report=rep)



