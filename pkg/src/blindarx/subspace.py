"""Known input subspaces ``u = D x``."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np


class BasisFormatError(ValueError):
    """Malformed basis file."""


@dataclass(frozen=True)
class SubspaceBasis:
    """Dense ``N x m`` basis matrix with a short provenance tag.

    ``provenance`` is one of ``zoh``, ``dft``, ``gaussian`` or ``file``;
    ``params`` holds what is needed to rebuild it (hold, seed, path).
    """

    D: np.ndarray
    provenance: str
    params: tuple = ()

    def __post_init__(self):
        D = np.array(self.D, dtype=float, copy=True)
        if D.ndim != 2:
            raise ValueError("basis must be a 2-D matrix")
        N, m = D.shape
        if m < 1 or m > N:
            raise ValueError(f"need 1 <= m <= N, got N={N}, m={m}")
        if not np.all(np.isfinite(D)):
            raise ValueError("basis contains non-finite entries")
        D.flags.writeable = False
        object.__setattr__(self, "D", D)

    @property
    def N(self) -> int:
        return self.D.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[1]

    def spec_string(self) -> str:
        """Inline form understood by :func:`basis_from_spec`."""
        args = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.provenance}:{args}" if args else self.provenance


def zoh_basis(N: int, hold: int) -> SubspaceBasis:
    """Block-of-ones basis for an input held constant over ``hold`` samples.

    The last block is truncated when ``hold`` does not divide ``N``.
    """
    if N < 1 or hold < 1:
        raise ValueError("N and hold must be >= 1")
    m = math.ceil(N / hold)
    D = np.zeros((N, m))
    D[np.arange(N), np.arange(N) // hold] = 1.0
    return SubspaceBasis(D, "zoh", (("hold", hold),))


def dft_basis(N: int, m: int) -> SubspaceBasis:
    """First ``m`` vectors of the real orthonormal trigonometric basis.

    Column order is the constant vector followed by ``cos``/``sin`` pairs of
    increasing frequency, sampled at ``t = 1..N``.
    """
    if not 1 <= m <= N:
        raise ValueError(f"need 1 <= m <= N, got N={N}, m={m}")
    t = np.arange(1, N + 1)
    cols = [np.full(N, 1.0 / np.sqrt(N))]
    k = 1
    while len(cols) < m:
        w = 2 * np.pi * k * t / N
        for c in (np.cos(w), np.sin(w)):
            nrm = np.linalg.norm(c)
            # sin vanishes at the Nyquist frequency for even N
            if nrm > 1e-8 and len(cols) < m:
                cols.append(c / nrm)
        k += 1
    return SubspaceBasis(np.column_stack(cols), "dft", (("m", m),))


def gaussian_basis(N: int, m: int, seed: int) -> SubspaceBasis:
    if not 1 <= m <= N:
        raise ValueError(f"need 1 <= m <= N, got N={N}, m={m}")
    rng = np.random.default_rng(seed)
    return SubspaceBasis(rng.standard_normal((N, m)), "gaussian", (("m", m), ("seed", seed)))


def save_basis(basis: SubspaceBasis, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in basis.D:
            w.writerow([repr(float(v)) for v in row])


def load_basis(path) -> SubspaceBasis:
    """Read a header-less CSV of ``N`` rows by ``m`` columns."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if rows and len(row) != len(rows[0]):
                raise BasisFormatError(
                    f"{path}: row {i} has {len(row)} columns, expected {len(rows[0])}"
                )
            vals = []
            for j, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise BasisFormatError(
                        f"{path}: row {i}, column {j}: non-numeric entry {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise BasisFormatError(f"{path}: row {i}, column {j}: non-finite entry")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise BasisFormatError(f"{path}: empty basis file")
    D = np.array(rows)
    if D.shape[1] > D.shape[0]:
        raise BasisFormatError(f"{path}: m={D.shape[1]} columns exceeds N={D.shape[0]} rows")
    return SubspaceBasis(D, "file", (("path", os.fspath(path)),))


def basis_from_spec(spec: str, N: int) -> SubspaceBasis:
    """Build a basis from an inline spec such as ``zoh:hold=6``,
    ``dft:m=5``, ``gaussian:m=10,seed=3`` or ``file:path=D.csv``."""
    kind, _, rest = spec.partition(":")
    kw = {}
    for part in filter(None, rest.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise ValueError(f"malformed basis spec {spec!r}")
        kw[key.strip()] = val.strip()
    try:
        if kind == "zoh":
            return zoh_basis(N, int(kw["hold"]))
        if kind == "dft":
            return dft_basis(N, int(kw["m"]))
        if kind == "gaussian":
            return gaussian_basis(N, int(kw["m"]), int(kw.get("seed", 0)))
        if kind == "file":
            basis = load_basis(kw["path"])
            if basis.N != N:
                raise ValueError(f"basis has N={basis.N} rows, series has N={N}")
            return basis
    except KeyError as exc:
        raise ValueError(f"basis spec {spec!r} is missing {exc.args[0]!r}") from None
    raise ValueError(f"unknown basis kind {kind!r}")
