"""Grid views of single-mode Gaussian states: density matrices in the
position and momentum bases, Wigner functions and marginal densities.

Everything is evaluated in closed form from the first and second moments
(hbar = 1/2, so ``<x|p> = exp(2ixp) / sqrt(pi)``).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .gaussian import GaussianState, QuadratureSelector, marginal

DEFAULT_POINTS = 201
DEFAULT_SPAN = 4.0


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Values of a function sampled on a uniform 1D or 2D quadrature grid.

    For 2D grids ``values[i, j]`` belongs to ``(axes[0][i], axes[1][j])``.
    """

    axes: tuple[np.ndarray, ...]
    values: np.ndarray
    kind: str = ""

    def __post_init__(self):
        for ax in self.axes:
            if ax.size > 2 and not np.allclose(np.diff(ax), ax[1] - ax[0], rtol=1e-9, atol=1e-12):
                raise ValueError("grid axes must be uniformly spaced")
        shape = tuple(ax.size for ax in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(float(ax[1] - ax[0]) for ax in self.axes)

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.values).copy()

    def trace(self) -> float:
        """Integral of the diagonal (density matrices only)."""
        return float(np.real(np.trapezoid(self.diagonal(), self.axes[0])))

    def integral(self) -> float:
        if len(self.axes) == 1:
            return float(np.trapezoid(self.values, self.axes[0]))
        return float(np.trapezoid(np.trapezoid(self.values, self.axes[1], axis=1), self.axes[0]))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.values - self.values.conj().T)))

    def to_csv(self, path: str | Path) -> None:
        """Long-format CSV: axis columns then value column(s); complex as re/im."""
        path = Path(path)
        complex_vals = np.iscomplexobj(self.values)
        names = ["x", "x_prime"] if self.kind.endswith("dm") else ["x", "p"]
        header = names[: len(self.axes)] + (["re", "im"] if complex_vals else ["value"])
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for idx in np.ndindex(self.values.shape):
                coords = [f"{self.axes[k][i]:.10g}" for k, i in enumerate(idx)]
                v = self.values[idx]
                vals = [f"{v.real:.12g}", f"{v.imag:.12g}"] if complex_vals else [f"{v:.12g}"]
                w.writerow(coords + vals)


def default_axis(state: GaussianState, points: int = DEFAULT_POINTS, span: float = DEFAULT_SPAN) -> np.ndarray:
    """Uniform axis covering ``span`` times the largest standard deviation
    around the largest mean component."""
    sd = np.sqrt(np.max(np.linalg.eigvalsh(state.cov)))
    centre = float(np.max(np.abs(state.mean)))
    half = centre + span * sd
    return np.linspace(-half, half, points)


def _single(state: GaussianState) -> None:
    if state.n_modes != 1:
        raise ValueError("representation requires a single-mode state")


def _dm_from_moments(q_mean, c_mean, vq, vc, cqc, grid) -> np.ndarray:
    """Density matrix in the basis of quadrature ``q`` (conjugate ``c``)."""
    return _dm_elements(q_mean, c_mean, vq, vc, cqc, grid[:, None], grid[None, :])


def _dm_elements(q_mean, c_mean, vq, vc, cqc, a, b) -> np.ndarray:
    q = 0.5 * (a + b)
    y = a - b
    cond_mean = c_mean + cqc / vq * (q - q_mean)
    cond_var = vc - cqc**2 / vq
    envelope = np.exp(-0.5 * (q - q_mean) ** 2 / vq) / np.sqrt(2 * np.pi * vq)
    return envelope * np.exp(2j * y * cond_mean - 2.0 * cond_var * y**2)


def _check_resolution(grid: np.ndarray, sd: float) -> None:
    if grid.size > 1 and (grid[1] - grid[0]) > sd / 4:
        warnings.warn(
            f"grid spacing {grid[1] - grid[0]:.3g} exceeds sigma/4 = {sd / 4:.3g}", RuntimeWarning
        )


def position_density_matrix(state: GaussianState, grid: Optional[np.ndarray] = None) -> QuadratureGrid:
    """``rho(x, x')`` on ``grid`` x ``grid``."""
    _single(state)
    grid = default_axis(state) if grid is None else np.asarray(grid, dtype=float)
    (x0, p0), v = state.mean, state.cov
    _check_resolution(grid, np.sqrt(v[0, 0]))
    vals = _dm_from_moments(x0, p0, v[0, 0], v[1, 1], v[0, 1], grid)
    return QuadratureGrid((grid, grid), vals, "position_dm")


def density_matrix_elements(state: GaussianState, a, b, basis: str = "x") -> np.ndarray:
    """Pointwise ``<a|rho|b>`` for broadcastable coordinate arrays.

    Args:
        state: single-mode state.
        a: row coordinates.
        b: column coordinates.
        basis: ``"x"`` (position) or ``"p"`` (momentum).

    Returns:
        Complex array with the broadcast shape of ``a`` and ``b``.
    """
    _single(state)
    (x0, p0), v = state.mean, state.cov
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if basis == "x":
        return _dm_elements(x0, p0, v[0, 0], v[1, 1], v[0, 1], a, b)
    if basis == "p":
        return _dm_elements(p0, -x0, v[1, 1], v[0, 0], -v[0, 1], a, b)
    raise ValueError(f"basis must be 'x' or 'p', got {basis!r}")


def momentum_density_matrix(state: GaussianState, grid: Optional[np.ndarray] = None) -> QuadratureGrid:
    """``rho~(p, p') = <p|rho|p'>``."""
    _single(state)
    grid = default_axis(state) if grid is None else np.asarray(grid, dtype=float)
    (x0, p0), v = state.mean, state.cov
    _check_resolution(grid, np.sqrt(v[1, 1]))
    # (x, p) -> (p, -x) maps the momentum basis onto the position basis
    vals = _dm_from_moments(p0, -x0, v[1, 1], v[0, 0], -v[0, 1], grid)
    return QuadratureGrid((grid, grid), vals, "momentum_dm")


def ratio_function(probe: GaussianState, deltas: Sequence[float] | np.ndarray) -> np.ndarray:
    """``R(d) = int dp exp(2i d p) rho~_P(p, p)``: the probe momentum
    characteristic function, i.e. the factor multiplying ``rho_S(x, x + d)``."""
    _single(probe)
    d = np.asarray(deltas, dtype=float)
    p0, vp = probe.mean[1], probe.cov[1, 1]
    return np.exp(2j * d * p0 - 2.0 * vp * d**2)


def decoherence_bound(fisher_information: float, delta) -> np.ndarray | float:
    """Upper bound ``exp(-I d^2 / 8)`` on ``|rho_b(x, x+d)| / |rho_a(x, x+d)|``."""
    if fisher_information < 0:
        raise ValueError("Fisher information must be >= 0")
    out = np.exp(-fisher_information * np.asarray(delta, dtype=float) ** 2 / 8.0)
    return float(out) if out.ndim == 0 else out


def wigner(
    state: GaussianState, xgrid: Optional[np.ndarray] = None, pgrid: Optional[np.ndarray] = None
) -> QuadratureGrid:
    _single(state)
    xgrid = default_axis(state) if xgrid is None else np.asarray(xgrid, dtype=float)
    pgrid = xgrid if pgrid is None else np.asarray(pgrid, dtype=float)
    v = state.cov
    inv = np.linalg.inv(v)
    dx = xgrid[:, None] - state.mean[0]
    dp = pgrid[None, :] - state.mean[1]
    quad = inv[0, 0] * dx**2 + 2 * inv[0, 1] * dx * dp + inv[1, 1] * dp**2
    vals = np.exp(-0.5 * quad) / (2 * np.pi * np.sqrt(np.linalg.det(v)))
    return QuadratureGrid((xgrid, pgrid), vals, "wigner")


def marginal_pdf(state: GaussianState, theta: float, grid: Optional[np.ndarray] = None) -> QuadratureGrid:
    _single(state)
    grid = default_axis(state) if grid is None else np.asarray(grid, dtype=float)
    m, var = marginal(state, QuadratureSelector(0, theta))
    vals = np.exp(-0.5 * (grid - m) ** 2 / var) / np.sqrt(2 * np.pi * var)
    return QuadratureGrid((grid,), vals, "marginal")


def dm_cuts(dm: QuadratureGrid, x0: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal ``rho(x, x)`` and anti-diagonal ``rho(x, 2 x0 - x)`` cuts."""
    grid = dm.axes[0]
    diag = dm.diagonal()
    anti = np.array([np.interp(2 * x0 - x, grid, dm.values[i].real)
                     + 1j * np.interp(2 * x0 - x, grid, dm.values[i].imag)
                     for i, x in enumerate(grid)])
    mirror = 2 * x0 - grid
    outside = (mirror < grid[0]) | (mirror > grid[-1])
    anti[outside] = np.nan
    return diag, anti
