"""Figures of merit: fidelities, channel estimation, Fisher information,
measurement-uncertainty products, conditional variance and Duan-Simon."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .gaussian import VACUUM_VARIANCE, GaussianState

_PURE_TOL = 1e-6


@dataclass(frozen=True)
class ChannelEstimate:
    """Phase-insensitive single-mode Gaussian channel per quadrature.

    ``<x>_out = g_x <x>_in`` and ``V_x,out = g_x**2 V_x,in + sigma_x2``,
    likewise for ``p``.
    """

    g_x: float
    g_p: float
    sigma_x2: float
    sigma_p2: float
    clamped: bool = False

    def gain_matrix(self) -> np.ndarray:
        return np.diag([self.g_x, self.g_p])

    def noise_matrix(self) -> np.ndarray:
        return np.diag([self.sigma_x2, self.sigma_p2])

    def apply(self, state: GaussianState) -> GaussianState:
        if state.n_modes != 1:
            raise ValueError("channel estimate acts on single-mode states")
        g = self.gain_matrix()
        return GaussianState(g @ state.mean, g @ state.cov @ g + self.noise_matrix(), check=False)


@dataclass(frozen=True)
class UncertaintyReport:
    dx_err: float
    dp: float
    product: float
    threshold_pass: bool
    mode: str


class DuanSimon(NamedTuple):
    v_minus: float
    v_plus: float
    entangled: bool


# -- fidelity ----------------------------------------------------------------


def fidelity(reference: GaussianState, rho: GaussianState) -> float:
    """Overlap ``<psi|rho|psi>`` of a pure single-mode Gaussian with ``rho``."""
    if reference.n_modes != 1 or rho.n_modes != 1:
        raise ValueError("fidelity is defined here for single-mode states")
    if abs(reference.purity() - 1.0) > _PURE_TOL:
        raise ValueError(f"reference state is not pure (purity {reference.purity():.6f})")
    sigma = reference.cov + rho.cov
    delta = rho.mean - reference.mean
    quad = delta @ np.linalg.solve(sigma, delta)
    return float(np.exp(-0.5 * quad) / (2.0 * np.sqrt(np.linalg.det(sigma))))


def _average_fidelity_parts(ch: ChannelEstimate, ensemble_variance: float, per_quadrature: bool):
    if ensemble_variance < 0:
        raise ValueError("ensemble variance must be >= 0")
    e = ensemble_variance if per_quadrature else ensemble_variance / 2.0
    g = ch.gain_matrix()
    sigma = VACUUM_VARIANCE * (np.eye(2) + g @ g) + ch.noise_matrix()
    d = np.eye(2) - g
    a = d @ np.linalg.inv(sigma) @ d
    return e, sigma, a


def average_fidelity(ch: ChannelEstimate, ensemble_variance: float = 2.5, per_quadrature: bool = True) -> float:
    """Fidelity averaged over coherent inputs with Gaussian-distributed means.

    Means are drawn from ``N(0, ensemble_variance)`` independently in ``x``
    and ``p``; ``per_quadrature=False`` splits the variance between them.
    """
    e, sigma, a = _average_fidelity_parts(ch, ensemble_variance, per_quadrature)
    return float(1.0 / (2.0 * np.sqrt(np.linalg.det(sigma)) * np.sqrt(np.linalg.det(np.eye(2) + e * a))))


def average_fidelity_quadrature(
    ch: ChannelEstimate, ensemble_variance: float = 2.5, per_quadrature: bool = True, order: int = 60
) -> float:
    """Gauss-Hermite evaluation of the same ensemble average (cross-check)."""
    e = ensemble_variance if per_quadrature else ensemble_variance / 2.0
    if e == 0:
        return fidelity(_coherent(0.0, 0.0), ch.apply(_coherent(0.0, 0.0)))
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / weights.sum()
    total = 0.0
    for xi, wx in zip(nodes, weights):
        for pi, wp in zip(nodes, weights):
            ref = _coherent(np.sqrt(e) * xi, np.sqrt(e) * pi)
            total += wx * wp * fidelity(ref, ch.apply(ref))
    return float(total)


def _coherent(x0: float, p0: float) -> GaussianState:
    return GaussianState([x0, p0], VACUUM_VARIANCE * np.eye(2), check=False)


# -- channel estimation ------------------------------------------------------


@dataclass(frozen=True)
class ProbeRun:
    """Input coherent amplitude and measured output moments of one run."""

    input_mean: tuple[float, float]
    output_mean: tuple[float, float]
    output_var: tuple[float, float]
    input_var: tuple[float, float] = (VACUUM_VARIANCE, VACUUM_VARIANCE)


def estimate_channel(runs: Sequence[ProbeRun]) -> ChannelEstimate:
    """Gains from displaced-input runs, excess noises from the vacuum run.

    Needs one run displaced in ``x``, one displaced in ``p`` and one vacuum
    run (zero input mean). The vacuum run's output mean is used as offset.
    """
    vac = [r for r in runs if np.allclose(r.input_mean, 0.0)]
    if not vac:
        raise ValueError("channel estimation needs a vacuum-input run")
    vac = vac[0]
    gains = []
    for q in (0, 1):
        cands = [r for r in runs if abs(r.input_mean[q]) > 0 and abs(r.input_mean[1 - q]) <= abs(r.input_mean[q])]
        if not cands:
            raise ValueError(f"no run with non-zero input amplitude in quadrature {'xp'[q]}")
        r = max(cands, key=lambda r: abs(r.input_mean[q]))
        gains.append((r.output_mean[q] - vac.output_mean[q]) / r.input_mean[q])
    noises = [vac.output_var[q] - gains[q] ** 2 * vac.input_var[q] for q in (0, 1)]
    clamped = any(n < 0 for n in noises)
    if clamped:
        warnings.warn(f"negative excess-noise estimate {noises} clamped to 0", RuntimeWarning)
        noises = [max(n, 0.0) for n in noises]
    return ChannelEstimate(gains[0], gains[1], noises[0], noises[1], clamped)


def channel_from_states(inp: GaussianState, out: GaussianState, reference: GaussianState | None = None) -> ChannelEstimate:
    """Gains and noises between two single-mode states with known moments."""
    ref_out = reference if reference is not None else out
    g = []
    for q in (0, 1):
        if inp.mean[q] == 0:
            raise ValueError(f"input mean in {'xp'[q]} is zero; gain undefined")
        g.append(out.mean[q] / inp.mean[q])
    noise = [ref_out.cov[q, q] - g[q] ** 2 * inp.cov[q, q] for q in (0, 1)]
    return ChannelEstimate(g[0], g[1], noise[0], noise[1])


# -- information ---------------------------------------------------------------


def fisher_information_gaussian(error_variance: float) -> float:
    if error_variance <= 0:
        raise ValueError("error variance must be positive")
    return 1.0 / error_variance


def fisher_information_numeric(pdf: np.ndarray, grid: np.ndarray, norm_tol: float = 1e-6) -> float:
    """``int (dP/dx)^2 / P dx`` by central differences on a uniform grid."""
    pdf = np.asarray(pdf, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if np.any(pdf < 0):
        raise ValueError("pdf must be non-negative")
    total = np.trapezoid(pdf, grid)
    if abs(total - 1.0) > norm_tol:
        raise ValueError(f"pdf integrates to {total:.8f}, not 1")
    dp = np.gradient(pdf, grid)
    mask = pdf > 1e-300
    integrand = np.zeros_like(pdf)
    integrand[mask] = dp[mask] ** 2 / pdf[mask]
    return float(np.trapezoid(integrand, grid))


def residual_fisher_information(residual_variance: float) -> float:
    """Largest Fisher information compatible with a residual p-noise."""
    return 16.0 * residual_variance


def uncertainty_product(dx_err: float, dp: float, mode: str = "back_action") -> UncertaintyReport:
    """Error x disturbance product against the 1/4 bound.

    ``back_action`` passes when the product respects the bound (>= 1/4);
    ``residual`` passes when erasing pushed it below 1/4.
    """
    if dx_err < 0 or dp < 0:
        raise ValueError("standard deviations must be non-negative")
    product = dx_err * dp
    if mode == "back_action":
        ok = product >= 0.25 - 1e-9
    elif mode == "residual":
        ok = product < 0.25
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return UncertaintyReport(dx_err, dp, product, bool(ok), mode)


# -- correlations --------------------------------------------------------------

_Q = {"x": 0, "p": 1}


def conditional_variance(state: GaussianState, pair: tuple[str, str] = ("x", "x")) -> tuple[float, float]:
    """``min_g Var(q_S - g q_P)`` and the minimising gain."""
    if state.n_modes != 2:
        raise ValueError("conditional variance needs a two-mode state")
    i, j = _Q[pair[0]], 2 + _Q[pair[1]]
    vs, vp, c = state.cov[i, i], state.cov[j, j], state.cov[i, j]
    if vp <= 0:
        raise ValueError("probe variance must be positive")
    return float(c / vp), float(vs - c * c / vp)


def combined_variance(state: GaussianState, g: float, pair: tuple[str, str] = ("x", "x")) -> float:
    i, j = _Q[pair[0]], 2 + _Q[pair[1]]
    c = state.cov
    return float(c[i, i] - 2 * g * c[i, j] + g * g * c[j, j])


def duan_simon(state: GaussianState) -> DuanSimon:
    """``Var(x_S - x_P)`` and ``Var(p_S + p_P)``; entangled if both < 1/2."""
    if state.n_modes != 2:
        raise ValueError("Duan-Simon test needs a two-mode state")
    u = np.array([1.0, 0.0, -1.0, 0.0])
    v = np.array([0.0, 1.0, 0.0, 1.0])
    vm = float(u @ state.cov @ u)
    vp = float(v @ state.cov @ v)
    return DuanSimon(vm, vp, bool(vm < 0.5 and vp < 0.5))


def variance_db(v: float) -> float:
    if v <= 0:
        raise ValueError("variance must be positive")
    return float(10.0 * np.log10(v / VACUUM_VARIANCE))


def db_to_variance(db: float) -> float:
    return float(VACUUM_VARIANCE * 10 ** (db / 10.0))
