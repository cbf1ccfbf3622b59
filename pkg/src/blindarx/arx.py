"""ARX models, output simulation and known-input least-squares estimators.

Time indices follow the usual 1-based convention in all public text and
file formats: sample ``y(t)`` lives at ``y[t - 1]`` in storage.  The model
relation is::

    y(t) - a_1 y(t-1) - ... - a_na y(t-na) = b_1 u(t-nk-1) + ... + b_nb u(t-nk-nb) + e(t)

and is evaluated for ``t = n, ..., N`` with ``n = max(na, nk + nb) + 1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class InvalidDimensionError(ValueError):
    """Raised when vector lengths or sample counts are inconsistent."""


class RankDeficiencyWarning(UserWarning):
    """Regression matrix lost rank; a minimum-norm solution was returned."""


@dataclass(frozen=True)
class ModelOrders:
    n_a: int
    n_b: int
    n_k: int = 0

    def __post_init__(self):
        for name in ("n_a", "n_b", "n_k"):
            v = getattr(self, name)
            if int(v) != v:
                raise ValueError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.n_b < 1:
            raise ValueError("n_b must be >= 1")
        if self.n_a < 0 or self.n_k < 0:
            raise ValueError("n_a and n_k must be >= 0")

    @property
    def n(self) -> int:
        """First usable (1-based) time index."""
        return max(self.n_a, self.n_k + self.n_b) + 1


@dataclass(frozen=True)
class ArxModel:
    orders: ModelOrders
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if a.size != self.orders.n_a or b.size != self.orders.n_b:
            raise InvalidDimensionError(
                f"coefficient lengths ({a.size}, {b.size}) do not match "
                f"orders (n_a={self.orders.n_a}, n_b={self.orders.n_b})"
            )
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_coefficients(cls, a, b, n_k: int = 0) -> "ArxModel":
        a = np.atleast_1d(np.asarray(a, dtype=float)) if np.size(a) else np.zeros(0)
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return cls(ModelOrders(a.size, b.size, n_k), a, b)


@dataclass(frozen=True)
class OutputSeries:
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if not np.all(np.isfinite(y)):
            raise ValueError("output series contains non-finite values")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def N(self) -> int:
        return self.y.size

    def __len__(self):
        return self.y.size


NOISE_KINDS = ("none", "uniform", "gaussian")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive equation-error noise.

    ``uniform`` draws i.i.d. from ``[-parameter/2, parameter/2]``;
    ``gaussian`` draws i.i.d. with standard deviation ``parameter``.
    """

    kind: str = "none"
    parameter: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not (self.parameter >= 0 and np.isfinite(self.parameter)):
            raise ValueError("noise parameter must be finite and >= 0")
        object.__setattr__(self, "parameter", float(self.parameter))

    @property
    def is_silent(self) -> bool:
        return self.kind == "none" or self.parameter == 0.0

    def sample(self, N: int, rng: np.random.Generator) -> np.ndarray:
        if self.is_silent:
            return np.zeros(N)
        if self.kind == "uniform":
            half = self.parameter / 2
            return rng.uniform(-half, half, size=N)
        return rng.normal(0.0, self.parameter, size=N)


def _as_series(y) -> OutputSeries:
    return y if isinstance(y, OutputSeries) else OutputSeries(y)


def simulate(model: ArxModel, u, noise: NoiseSpec | None = None, seed: int = 0) -> OutputSeries:
    """Run the ARX recursion forward from zero initial conditions.

    Parameters
    ----------
    model : ArxModel
    u : array_like, shape (N,)
        Input samples ``u(1), ..., u(N)``.
    noise : NoiseSpec, optional
        Equation-error noise added at every step. Defaults to none.
    seed : int
        Seed for the noise generator.

    Returns
    -------
    OutputSeries
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    N = u.size
    if N < model.orders.n:
        raise InvalidDimensionError(f"need N >= n={model.orders.n}, got N={N}")
    if not np.all(np.isfinite(u)):
        raise ValueError("input contains non-finite values")
    noise = noise or NoiseSpec()
    e = noise.sample(N, np.random.default_rng(seed))

    n_a, n_b, n_k = model.orders.n_a, model.orders.n_b, model.orders.n_k
    a, b = model.a, model.b
    y = np.zeros(N)
    for i in range(N):
        acc = e[i]
        for k in range(1, n_a + 1):
            if i - k >= 0:
                acc += a[k - 1] * y[i - k]
        for j in range(1, n_b + 1):
            s = i - n_k - j
            if s >= 0:
                acc += b[j - 1] * u[s]
        y[i] = acc
    return OutputSeries(y)


def lag_matrix(y: np.ndarray, n_a: int, start: int) -> np.ndarray:
    """Rows ``[y(t-1), ..., y(t-n_a)]`` for ``t = start..N`` (1-based)."""
    N = y.size
    rows = N - start + 1
    out = np.empty((rows, n_a))
    for k in range(1, n_a + 1):
        out[:, k - 1] = y[start - 1 - k : N - k]
    return out


def input_lag_matrix(u: np.ndarray, n_b: int, n_k: int, start: int) -> np.ndarray:
    """Rows ``[u(t-nk-1), ..., u(t-nk-nb)]`` for ``t = start..N`` (1-based)."""
    N = u.size
    rows = N - start + 1
    out = np.empty((rows, n_b))
    for j in range(1, n_b + 1):
        out[:, j - 1] = u[start - 1 - n_k - j : N - n_k - j]
    return out


def _lstsq(Phi: np.ndarray, rhs: np.ndarray):
    if Phi.shape[1] == 0:
        return np.zeros(0), False
    theta, _, rank, _ = np.linalg.lstsq(Phi, rhs, rcond=None)
    return theta, rank < Phi.shape[1]


@dataclass(frozen=True)
class ArFit:
    """Least-squares AR fit over the window ``t = start..N``."""

    a: np.ndarray
    residuals: np.ndarray
    start: int
    rank_deficient: bool = False
    warnings: tuple = field(default=())


def ar_least_squares(y, n_a: int, start: int | None = None) -> ArFit:
    """Fit ``y(t) = sum_k a_k y(t-k)`` by least squares.

    ``start`` is the first 1-based time index of the residual window and
    defaults to ``n_a + 1``. Pass the lifted problem's ``n`` to align the
    window with the full ARX equation.
    """
    y = _as_series(y).y
    if n_a < 0:
        raise ValueError("n_a must be >= 0")
    start = n_a + 1 if start is None else int(start)
    if start < n_a + 1:
        raise InvalidDimensionError(f"start={start} would read y(t<=0) for n_a={n_a}")
    rows = y.size - start + 1
    if rows < max(n_a, 1):
        raise InvalidDimensionError(f"window t={start}..{y.size} has {rows} rows, need >= {n_a}")

    Phi = lag_matrix(y, n_a, start)
    target = y[start - 1 :]
    a, deficient = _lstsq(Phi, target)
    notes = ()
    if deficient:
        notes = ("AR regression matrix is rank deficient; minimum-norm solution returned",)
        warnings.warn(notes[0], RankDeficiencyWarning, stacklevel=2)
    resid = target - Phi @ a
    return ArFit(a=a, residuals=resid, start=start, rank_deficient=deficient, warnings=notes)


def arx_least_squares(y, u, orders: ModelOrders) -> ArxModel:
    """Known-input least-squares ARX estimate over ``t = n..N``."""
    y = _as_series(y).y
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != y.size:
        raise InvalidDimensionError(f"len(u)={u.size} != len(y)={y.size}")
    n = orders.n
    if y.size - n + 1 < orders.n_a + orders.n_b:
        raise InvalidDimensionError("too few samples for the requested orders")
    Phi = np.hstack(
        [input_lag_matrix(u, orders.n_b, orders.n_k, n), lag_matrix(y, orders.n_a, n)]
    )
    theta, deficient = _lstsq(Phi, y[n - 1 :])
    if deficient:
        warnings.warn(
            "ARX regression matrix is rank deficient; minimum-norm solution returned",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return ArxModel(orders, a=theta[orders.n_b :], b=theta[: orders.n_b])


def residuals(model: ArxModel, y, u) -> np.ndarray:
    """Equation error ``y(t) - sum a_k y(t-k) - sum b_j u(t-nk-j)`` for ``t = n..N``."""
    y = _as_series(y).y
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != y.size:
        raise InvalidDimensionError(f"len(u)={u.size} != len(y)={y.size}")
    n = model.orders.n
    if y.size < n:
        raise InvalidDimensionError(f"need N >= n={n}")
    pred = lag_matrix(y, model.orders.n_a, n) @ model.a
    pred = pred + input_lag_matrix(u, model.orders.n_b, model.orders.n_k, n) @ model.b
    return y[n - 1 :] - pred
