"""Lifted linear system for blind ARX identification.

With ``u = D x`` and the lifted matrix ``X = x b^T`` (``m x n_b``), the ARX
relation becomes linear in ``theta = [X[:, 0]; ...; X[:, n_b-1]; -a]``::

    rhs = A @ theta + eta,      rhs = [y(n), ..., y(N)]

Row ``t`` of ``A`` holds ``D[t - n_k - j]`` (1-based rows) in column block
``j`` and ``-y(t-1), ..., -y(t-n_a)`` in the trailing block, so that the
stored ``-a`` reproduces the model sign convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .arx import InvalidDimensionError, ModelOrders, OutputSeries, lag_matrix
from .subspace import SubspaceBasis


@dataclass(frozen=True, eq=False)
class LiftedProblem:
    y: OutputSeries
    basis: SubspaceBasis
    orders: ModelOrders
    A: np.ndarray
    rhs: np.ndarray

    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def n(self) -> int:
        return self.orders.n

    @property
    def n_x(self) -> int:
        """Number of lifted-matrix unknowns, ``m * n_b``."""
        return self.basis.m * self.orders.n_b

    @property
    def n_theta(self) -> int:
        return self.n_x + self.orders.n_a

    @property
    def A_x(self) -> np.ndarray:
        return self.A[:, : self.n_x]

    @property
    def A_a(self) -> np.ndarray:
        return self.A[:, self.n_x :]

    def pack(self, X, a) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(self.m, self.orders.n_b)
        a = np.asarray(a, dtype=float).reshape(self.orders.n_a)
        return np.concatenate([X.reshape(-1, order="F"), -a])

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        X = theta[: self.n_x].reshape(self.m, self.orders.n_b, order="F")
        return X, -theta[self.n_x :]

    def residual(self, X, a) -> np.ndarray:
        """``eta = rhs - A theta`` for the given lifted matrix and AR part."""
        return self.rhs - self.A @ self.pack(X, a)


def build_lifted_problem(y, basis: SubspaceBasis, orders: ModelOrders) -> LiftedProblem:
    y = y if isinstance(y, OutputSeries) else OutputSeries(y)
    N = y.N
    if basis.N != N:
        raise InvalidDimensionError(f"basis has N={basis.N} rows, series has N={N}")
    n = orders.n
    if N < n:
        raise InvalidDimensionError(f"need N >= n={n}, got N={N}")
    D = basis.D
    t = np.arange(n, N + 1)
    blocks = [D[t - orders.n_k - j - 1] for j in range(1, orders.n_b + 1)]
    blocks.append(-lag_matrix(y.y, orders.n_a, n))
    A = np.hstack(blocks)
    A.flags.writeable = False
    rhs = y.y[n - 1 :].copy()
    rhs.flags.writeable = False
    return LiftedProblem(y=y, basis=basis, orders=orders, A=A, rhs=rhs)


@dataclass(frozen=True)
class RecoveryReport:
    full_column_rank: bool
    rank: int
    columns: int
    rows: int
    smallest_singular_value: float
    condition: float

    def to_dict(self) -> dict:
        return {
            "full_column_rank": self.full_column_rank,
            "rank": self.rank,
            "columns": self.columns,
            "rows": self.rows,
            "smallest_singular_value": self.smallest_singular_value,
            "condition": self.condition,
        }


def numerical_rank(M: np.ndarray) -> tuple[int, np.ndarray]:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s
    tol = max(M.shape) * s[0] * 1e-12
    return int(np.sum(s > tol)), s


def check_recoverability(problem: LiftedProblem) -> RecoveryReport:
    """Full-column-rank test on ``A``: the sufficient condition for exact
    noise-free recovery (up to scale)."""
    A = problem.A
    rows, cols = A.shape
    rank, s = numerical_rank(A)
    # Fewer rows than columns means zero singular values are missing from s.
    smin = float(s[-1]) if rows >= cols and s.size else 0.0
    cond = float(s[0] / smin) if smin > 0 else float("inf")
    return RecoveryReport(
        full_column_rank=rank == cols,
        rank=rank,
        columns=cols,
        rows=rows,
        smallest_singular_value=smin,
        condition=cond,
    )


class Rank1Factors(NamedTuple):
    x: np.ndarray
    b: np.ndarray
    rank_gap: float
    is_zero: bool


def normalize_sign(v: np.ndarray) -> float:
    """Return +1/-1 making the first nonzero entry of ``v`` positive."""
    nz = np.flatnonzero(np.abs(v) > 0)
    if nz.size == 0:
        return 1.0
    return 1.0 if v[nz[0]] > 0 else -1.0


def extract_rank1(X) -> Rank1Factors:
    """Best rank-1 factors ``x b^T`` of ``X`` with ``||b|| = 1`` and the
    first nonzero entry of ``b`` positive.

    ``rank_gap`` is ``sigma_2 / sigma_1`` (zero for a single column or for
    ``X = 0``).
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    m, nb = X.shape
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return Rank1Factors(np.zeros(m), np.zeros(nb), 0.0, True)
    b = Vt[0]
    sgn = normalize_sign(b)
    gap = float(s[1] / s[0]) if s.size > 1 else 0.0
    return Rank1Factors(s[0] * U[:, 0] * sgn, b * sgn, gap, False)


def scale_invariant_error(v, v_hat) -> float:
    """``min_s ||v - s v_hat|| / ||v||``, i.e. the sine of the angle between
    the two vectors. Returns 1 when ``v_hat`` is zero."""
    v = np.asarray(v, dtype=float).reshape(-1)
    v_hat = np.asarray(v_hat, dtype=float).reshape(-1)
    if v.shape != v_hat.shape:
        raise InvalidDimensionError(f"shape mismatch {v.shape} vs {v_hat.shape}")
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("scale-invariant error is undefined for v = 0")
    nh = np.linalg.norm(v_hat)
    if nh == 0:
        return 1.0
    # Project out the v_hat direction: stable for nearly parallel vectors.
    q = v_hat / nh
    r = v - (q @ v) * q
    return float(min(1.0, np.linalg.norm(r) / nv))


@dataclass(frozen=True, eq=False)
class LiftedEstimate:
    """Solver output together with its rank-1 factorization.

    ``u_hat`` is derived as ``D @ x_hat``; ``eta`` is ``rhs - A theta``.
    """

    problem: LiftedProblem
    X: np.ndarray
    a_hat: np.ndarray
    x_hat: np.ndarray
    b_hat: np.ndarray
    eta: np.ndarray
    rank_gap: float
    is_zero: bool
    report: object = None
    lambda_used: float | None = None
    warnings: tuple = field(default=())

    @property
    def u_hat(self) -> np.ndarray:
        return self.problem.basis.D @ self.x_hat

    @property
    def theta(self) -> np.ndarray:
        return self.problem.pack(self.X, self.a_hat)

    @property
    def nuclear_norm(self) -> float:
        return float(np.linalg.svd(self.X, compute_uv=False).sum())

    def to_dict(self) -> dict:
        rep = self.report
        out = {
            "a": self.a_hat.tolist(),
            "b": self.b_hat.tolist(),
            "x": self.x_hat.tolist(),
            "u": self.u_hat.tolist(),
            "X": self.X.tolist(),
            "rank_gap": self.rank_gap,
            "zero_solution": self.is_zero,
            "eta_norm": float(np.linalg.norm(self.eta)),
            "nuclear_norm": self.nuclear_norm,
            "lambda_used": self.lambda_used,
            "status": getattr(rep, "status", None),
            "iterations": getattr(rep, "iterations", None),
            "warnings": list(self.warnings),
        }
        return out


def assemble_estimate(
    X, a_hat, problem: LiftedProblem, report=None, lambda_used=None, warnings=()
) -> LiftedEstimate:
    X = np.array(X, dtype=float).reshape(problem.m, problem.orders.n_b)
    a_hat = np.array(a_hat, dtype=float).reshape(problem.orders.n_a)
    f = extract_rank1(X)
    eta = problem.residual(X, a_hat)
    return LiftedEstimate(
        problem=problem,
        X=X,
        a_hat=a_hat,
        x_hat=f.x,
        b_hat=f.b,
        eta=eta,
        rank_gap=f.rank_gap,
        is_zero=f.is_zero,
        report=report,
        lambda_used=lambda_used,
        warnings=tuple(warnings),
    )
