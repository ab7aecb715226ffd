"""Simulated homodyne tomography.

Two estimators are provided: a least-squares Gaussian moment fit and an
iterative maximum-likelihood (R rho R) reconstruction in a truncated number
basis. The number-basis utilities also give an independent fidelity oracle
for Gaussian states.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import sqrtm

from .gaussian import (
    VACUUM_VARIANCE,
    GaussianState,
    QuadratureSelector,
    make_rng,
    sample_quadratures,
)
from .representations import position_density_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TomogramDataset:
    """Phase-tagged homodyne outcomes."""

    thetas: np.ndarray
    outcomes: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        outcomes = np.asarray(self.outcomes, dtype=float)
        if thetas.size == 0 or thetas.shape != outcomes.shape:
            raise ValueError("dataset needs equally many (non-zero) phases and outcomes")
        if np.any(thetas < 0) or np.any(thetas >= 2 * np.pi):
            raise ValueError("phases must lie in [0, 2 pi)")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "outcomes", outcomes)

    def __len__(self) -> int:
        return self.thetas.size

    def phases(self) -> np.ndarray:
        return np.unique(self.thetas)

    def by_phase(self):
        for th in self.phases():
            yield th, self.outcomes[self.thetas == th]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "outcome"])
            for th, x in zip(self.thetas, self.outcomes):
                w.writerow([repr(float(th)), repr(float(x))])

    @classmethod
    def from_csv(cls, path: str | Path, metadata: Optional[dict] = None) -> "TomogramDataset":
        with Path(path).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["theta", "outcome"]:
                raise ValueError(f"expected header 'theta,outcome', got {header}")
            rows = [(float(a), float(b)) for a, b in reader]
        th, x = zip(*rows) if rows else ((), ())
        return cls(np.array(th), np.array(x), dict(metadata or {}, source=str(path)))


def scan_and_sample(
    state: GaussianState, phase_count: int, samples_per_phase: int, rng=None, mode: int = 0
) -> TomogramDataset:
    """Sample the marginal at ``phase_count`` uniformly spaced phases."""
    if phase_count < 1 or samples_per_phase < 1:
        raise ValueError("phase and sample counts must be >= 1")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = make_rng(rng)
    thetas = 2 * np.pi * np.arange(phase_count) / phase_count
    outcomes = np.concatenate(
        [sample_quadratures(state, QuadratureSelector(mode, th), samples_per_phase, rng) for th in thetas]
    )
    return TomogramDataset(
        np.repeat(thetas, samples_per_phase),
        outcomes,
        {"source": "simulated", "seed": seed, "phase_count": phase_count},
    )


# -- Gaussian moment estimator -----------------------------------------------


def fit_gaussian_moments(thetas, means, variances) -> GaussianState:
    """Least-squares mean vector and covariance from per-phase moments.

    Uses ``m(t) = x0 cos t + p0 sin t`` and
    ``V(t) = Vxx cos^2 t + Vpp sin^2 t + 2 Vxp sin t cos t``.
    """
    thetas = np.asarray(thetas, dtype=float)
    if np.unique(np.round(thetas % np.pi, 12)).size < 3:
        raise ValueError("at least 3 distinct phases (mod pi) are needed to identify the covariance")
    c, s = np.cos(thetas), np.sin(thetas)
    mean, *_ = np.linalg.lstsq(np.column_stack([c, s]), np.asarray(means), rcond=None)
    a = np.column_stack([c * c, s * s, 2 * s * c])
    (vxx, vpp, vxp), *_ = np.linalg.lstsq(a, np.asarray(variances), rcond=None)
    cov = _clamp_physical(np.array([[vxx, vxp], [vxp, vpp]]))
    return GaussianState(mean, cov)


def _clamp_physical(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    w = np.maximum(w, 1e-6)
    cov = (v * w) @ v.T
    root_det = np.sqrt(np.linalg.det(cov))
    if root_det < VACUUM_VARIANCE:
        cov = cov * (VACUUM_VARIANCE / root_det)
    return cov


def gaussian_mle(ds: TomogramDataset) -> GaussianState:
    """Gaussian state from per-phase sample moments."""
    thetas, means, variances = [], [], []
    for th, x in ds.by_phase():
        thetas.append(th)
        means.append(x.mean())
        variances.append(x.var())
    if len(thetas) < 3:
        raise ValueError(f"need >= 3 distinct phases, dataset has {len(thetas)}")
    return fit_gaussian_moments(thetas, means, variances)


# -- number basis ------------------------------------------------------------


def fock_wavefunctions(n_max: int, x: np.ndarray) -> np.ndarray:
    """``<x|n>`` for n = 0..n_max (hbar = 1/2), shape ``(n_max + 1, len(x))``.

    Three-term Hermite-function recurrence; stable for large n.
    """
    x = np.asarray(x, dtype=float)
    xi = np.sqrt(2.0) * x
    psi = np.zeros((n_max + 1, x.size))
    psi[0] = (2.0 / np.pi) ** 0.25 * np.exp(-0.5 * xi**2)
    if n_max >= 1:
        psi[1] = np.sqrt(2.0) * xi * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * xi * psi[n] - np.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    """Density matrix in a number basis truncated at ``dim - 1`` photons."""

    entries: np.ndarray
    trace_deficit: float = 0.0

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-9:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-6:
            raise ValueError(f"trace {np.trace(rho).real:.8f} != 1")
        if np.linalg.eigvalsh(rho).min() < -1e-9:
            raise ValueError("density matrix has negative eigenvalues")
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature mean vector and covariance matrix."""
        a = annihilation(self.dim)
        xop = 0.5 * (a + a.conj().T)
        pop = -0.5j * (a - a.conj().T)
        ex = lambda op: np.trace(self.entries @ op)
        mean = np.array([ex(xop).real, ex(pop).real])
        xx = ex(xop @ xop).real - mean[0] ** 2
        pp = ex(pop @ pop).real - mean[1] ** 2
        xp = 0.5 * ex(xop @ pop + pop @ xop).real - mean[0] * mean[1]
        return mean, np.array([[xx, xp], [xp, pp]])

    def to_json(self) -> str:
        return json.dumps(
            {
                "dim": self.dim,
                "re": self.entries.real.ravel().tolist(),
                "im": self.entries.imag.ravel().tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FockDensityMatrix":
        d = json.loads(text)
        n = d["dim"]
        rho = (np.array(d["re"]) + 1j * np.array(d["im"])).reshape(n, n)
        return cls(rho)


def gaussian_to_fock(state: GaussianState, n_max: int = 15) -> FockDensityMatrix:
    """Number-basis matrix of a single-mode Gaussian state.

    Projects the closed-form position density matrix onto Hermite functions
    by trapezoidal quadrature, which converges spectrally for these smooth,
    rapidly decaying integrands.
    """
    if state.n_modes != 1:
        raise ValueError("gaussian_to_fock expects a single-mode state")
    sd_min = np.sqrt(np.min(np.linalg.eigvalsh(state.cov)))
    sd_max = np.sqrt(np.max(np.linalg.eigvalsh(state.cov)))
    half = max(np.sqrt(n_max + 1.0) + 6.0, abs(state.mean[0]) + 10.0 * sd_max)
    step = min(0.04, sd_min / 6.0, 1.0 / (12.0 * sd_max))
    grid = np.arange(-half, half + step / 2, step)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dm = position_density_matrix(state, grid).values
    psi = fock_wavefunctions(n_max, grid)
    rho = psi @ dm @ psi.T * step**2
    rho = 0.5 * (rho + rho.conj().T)
    deficit = 1.0 - np.trace(rho).real
    if deficit > 1e-2:
        raise ValueError(f"truncation n_max={n_max} too small: trace deficit {deficit:.3g}")
    return FockDensityMatrix(rho / np.trace(rho).real, float(deficit))


def fock_fidelity(a: FockDensityMatrix, b: FockDensityMatrix) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(a) b sqrt(a)))**2``."""
    if a.dim != b.dim:
        raise ValueError("density matrices have different dimensions")
    ra = sqrtm(a.entries)
    inner = sqrtm(ra @ b.entries @ ra)
    return float(min(np.real(np.trace(inner)) ** 2, 1.0))


def fock_wigner(rho: FockDensityMatrix, xgrid: np.ndarray, pgrid: np.ndarray, points: int = 801) -> np.ndarray:
    """Wigner function ``(1/pi) int dy rho(x + y/2, x - y/2) exp(-2ipy)``."""
    half = np.sqrt(rho.dim) * 2.0 + 6.0
    y = np.linspace(-2 * half, 2 * half, points)
    out = np.zeros((xgrid.size, pgrid.size))
    kernel = np.exp(-2j * np.outer(y, pgrid))
    for i, x in enumerate(xgrid):
        u = fock_wavefunctions(rho.dim - 1, x + y / 2)
        v = fock_wavefunctions(rho.dim - 1, x - y / 2)
        vals = np.einsum("ny,nm,my->y", u, rho.entries, v)
        out[i] = np.real(np.trapezoid(vals[:, None] * kernel, y, axis=0)) / np.pi
    return out


# -- iterative maximum likelihood -------------------------------------------


@dataclass(frozen=True, eq=False)
class FockMleResult:
    rho: FockDensityMatrix
    log_likelihoods: np.ndarray
    iterations: int
    converged: bool


def _projectors(ds: TomogramDataset, n_max: int, bins: int, span: float):
    edges = np.linspace(-span, span, bins + 1)
    width = edges[1] - edges[0]
    gl_x, gl_w = np.polynomial.legendre.leggauss(4)
    sub = 0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * width * gl_x[None, :]
    psi = fock_wavefunctions(n_max, sub.ravel()).reshape(n_max + 1, bins, 4)
    # bin-integrated |<x|n><m|x>| via 4-point Gauss-Legendre
    weights = 0.5 * width * gl_w
    vecs, counts = [], []
    dropped = 0
    for th, x in ds.by_phase():
        hist, _ = np.histogram(x, bins=edges)
        dropped += x.size - hist.sum()
        phase = np.exp(1j * np.arange(n_max + 1) * th)
        keep = hist > 0
        for k in np.flatnonzero(keep):
            # each bin is a rank-4 POVM element: sum_q w_q |v_q><v_q|
            for q in range(4):
                vecs.append(np.sqrt(weights[q]) * phase * psi[:, k, q])
        counts.append(np.repeat(hist[keep], 4))
    if dropped:
        warnings.warn(f"{dropped} outcomes outside +-{span} were discarded", RuntimeWarning)
    return np.array(vecs), np.concatenate(counts).astype(float)


def fock_mle(
    ds: TomogramDataset,
    n_max: int = 15,
    iterations: int = 500,
    bins: int = 128,
    span: float = 6.0,
    tol: float = 1e-10,
) -> FockMleResult:
    """Iterative R rho R maximum-likelihood reconstruction.

    Outcomes are histogrammed per phase into ``bins`` uniform bins over
    ``[-span, span]``. Iteration stops once the log-likelihood gain per
    sample drops below ``tol``.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if np.max(np.abs(ds.outcomes)) > 2.0 * np.sqrt(n_max):
        warnings.warn("outcomes extend beyond the support of the number-basis truncation", RuntimeWarning)
    vecs, counts = _projectors(ds, n_max, bins, span)
    # the four sub-vectors of one bin share the bin count; group them
    nvec = vecs.shape[0] // 4
    grouped = vecs.reshape(nvec, 4, n_max + 1)
    f = counts.reshape(nvec, 4)[:, 0]
    f = f / f.sum()
    dim = n_max + 1
    rho = np.eye(dim, dtype=complex) / dim

    flat = grouped.reshape(-1, dim)
    flat_conj = flat.conj()

    def probs(r):
        return np.sum((flat_conj @ r) * flat, axis=1).real.reshape(nvec, 4).sum(axis=1)

    def loglik(p):
        return float(np.sum(f * np.log(np.maximum(p, 1e-300))))

    p = probs(rho)
    history = [loglik(p)]
    converged = False
    for it in range(iterations):
        w = f / np.maximum(p, 1e-300)
        r_op = (flat.T * np.repeat(w, 4)) @ flat_conj
        step = 1.0
        while True:
            # plain R rho R when step == 1; shrink only if likelihood would drop
            r_mix = (1.0 - step) * np.eye(dim) + step * r_op
            new = r_mix @ rho @ r_mix
            new = 0.5 * (new + new.conj().T)
            new /= np.trace(new).real
            p_new = probs(new)
            ll = loglik(p_new)
            if ll >= history[-1] - 1e-15 or step < 1e-6:
                break
            step *= 0.5
        rho, p = new, p_new
        history.append(ll)
        if ll - history[-2] < tol:
            converged = True
            break
    # clean tiny negative eigenvalues from round-off
    wv, vv = np.linalg.eigh(rho)
    rho = (vv * np.clip(wv, 0, None)) @ vv.conj().T
    rho /= np.trace(rho).real
    log.debug("fock_mle stopped after %d iterations", len(history) - 1)
    return FockMleResult(FockDensityMatrix(rho), np.array(history), len(history) - 1, converged)
