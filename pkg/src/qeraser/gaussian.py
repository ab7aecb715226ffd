"""Multimode Gaussian states in the hbar = 1/2 convention.

Quadratures are ordered ``(x1, p1, x2, p2, ...)`` and the vacuum variance is
1/4 (the shot-noise level). All state values are immutable; every operation
returns a new :class:`GaussianState`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

VACUUM_VARIANCE = 0.25

_SYM_RTOL = 1e-12
_PHYS_TOL = 1e-9
_DEGENERATE_VARIANCE = 1e-12


class UnphysicalStateError(ValueError):
    """Raised when moments violate the uncertainty principle."""


def symplectic_form(n: int) -> np.ndarray:
    """Block-diagonal symplectic form with ``[[0, 1], [-1, 0]]`` per mode."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def make_rng(seed=None) -> np.random.Generator:
    """Return a seeded generator; passes an existing generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False, init=False, repr=False)
class GaussianState:
    """Mean vector and covariance matrix of an n-mode Gaussian state.

    Args:
        mean: length-2n vector ``(x1, p1, ..., xn, pn)``.
        cov: 2n x 2n covariance matrix (vacuum = 0.25 * I).
        check: validate symmetry and the uncertainty principle.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __init__(self, mean, cov, check: bool = True):
        mean = np.asarray(mean, dtype=float).reshape(-1)
        cov = np.asarray(cov, dtype=float)
        if mean.size == 0 or mean.size % 2:
            raise ValueError("mean must have even, non-zero length")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if check:
            scale = max(1.0, float(np.max(np.abs(cov))))
            if np.max(np.abs(cov - cov.T)) > _SYM_RTOL * scale:
                raise ValueError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))
        if check:
            nu = self.symplectic_eigenvalues()
            if nu.min() < VACUUM_VARIANCE - _PHYS_TOL:
                raise UnphysicalStateError(
                    f"smallest symplectic eigenvalue {nu.min():.6g} < 1/4"
                )

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def symplectic_eigenvalues(self) -> np.ndarray:
        omega = symplectic_form(self.n_modes)
        ev = np.abs(np.linalg.eigvals(1j * omega @ self.cov))
        return np.sort(ev)[::2]

    def purity(self) -> float:
        return float(VACUUM_VARIANCE**self.n_modes / np.sqrt(np.linalg.det(self.cov)))

    def mode_indices(self, mode: int) -> list[int]:
        if not 0 <= mode < self.n_modes:
            raise IndexError(f"mode {mode} out of range for {self.n_modes}-mode state")
        return [2 * mode, 2 * mode + 1]

    def reduced(self, modes: Sequence[int] | int) -> "GaussianState":
        """Partial trace keeping ``modes`` in the given order."""
        if isinstance(modes, int):
            modes = [modes]
        idx = [i for m in modes for i in self.mode_indices(m)]
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)], check=False)

    def variances(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    def __repr__(self) -> str:
        return f"GaussianState(n_modes={self.n_modes}, mean={self.mean.round(6).tolist()})"


@dataclass(frozen=True, eq=False, init=False)
class SymplecticTransform:
    """Affine phase-space map ``r -> S r + d``."""

    matrix: np.ndarray
    displacement: np.ndarray

    def __init__(self, matrix, displacement=None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
            raise ValueError("matrix must be square with even dimension")
        if displacement is None:
            displacement = np.zeros(matrix.shape[0])
        displacement = np.asarray(displacement, dtype=float).reshape(-1)
        if displacement.size != matrix.shape[0]:
            raise ValueError("displacement length does not match matrix")
        object.__setattr__(self, "matrix", _frozen(matrix))
        object.__setattr__(self, "displacement", _frozen(displacement))

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def symplectic_error(self) -> float:
        omega = symplectic_form(self.n_modes)
        return float(np.max(np.abs(self.matrix @ omega @ self.matrix.T - omega)))

    def is_symplectic(self, tol: float = 1e-10) -> bool:
        return self.symplectic_error() < tol

    def __matmul__(self, other: "SymplecticTransform") -> "SymplecticTransform":
        """Composition: ``(self @ other)`` applies ``other`` first."""
        return SymplecticTransform(
            self.matrix @ other.matrix, self.matrix @ other.displacement + self.displacement
        )

    def inverse(self) -> "SymplecticTransform":
        inv = np.linalg.inv(self.matrix)
        return SymplecticTransform(inv, -inv @ self.displacement)


@dataclass(frozen=True)
class QuadratureSelector:
    """Rotated quadrature ``cos(theta) x + sin(theta) p`` of one mode."""

    mode: int
    theta: float = 0.0

    def __post_init__(self):
        if self.mode < 0:
            raise ValueError("mode index must be non-negative")
        object.__setattr__(self, "theta", float(self.theta) % (2 * np.pi))

    def vector(self, n_modes: int) -> np.ndarray:
        if self.mode >= n_modes:
            raise IndexError(f"mode {self.mode} out of range for {n_modes}-mode state")
        v = np.zeros(2 * n_modes)
        v[2 * self.mode] = np.cos(self.theta)
        v[2 * self.mode + 1] = np.sin(self.theta)
        return v


def X(mode: int) -> QuadratureSelector:
    return QuadratureSelector(mode, 0.0)


def P(mode: int) -> QuadratureSelector:
    return QuadratureSelector(mode, np.pi / 2)


# -- constructors ------------------------------------------------------------


def vacuum(n: int = 1) -> GaussianState:
    if n < 1:
        raise ValueError("number of modes must be >= 1")
    return GaussianState(np.zeros(2 * n), VACUUM_VARIANCE * np.eye(2 * n))


def coherent(x0: float, p0: float) -> GaussianState:
    return GaussianState([x0, p0], VACUUM_VARIANCE * np.eye(2))


def squeezed_vacuum(squeezing_db: float, angle: float = 0.0) -> GaussianState:
    """Pure squeezed vacuum; negative dB squeezes the quadrature at ``angle``."""
    vx = VACUUM_VARIANCE * 10 ** (squeezing_db / 10)
    vp = VACUUM_VARIANCE**2 / vx
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return GaussianState(np.zeros(2), rot @ np.diag([vx, vp]) @ rot.T)


def squeezed_thermal(vx: float, vp: float) -> GaussianState:
    if vx <= 0 or vp <= 0 or vx * vp < VACUUM_VARIANCE**2 - _PHYS_TOL:
        raise UnphysicalStateError(
            f"variances ({vx}, {vp}) violate Vx * Vp >= 1/16"
        )
    return GaussianState(np.zeros(2), np.diag([vx, vp]))


def tensor(a: GaussianState, b: GaussianState) -> GaussianState:
    n = a.cov.shape[0]
    cov = np.zeros((n + b.cov.shape[0],) * 2)
    cov[:n, :n] = a.cov
    cov[n:, n:] = b.cov
    return GaussianState(np.concatenate([a.mean, b.mean]), cov, check=False)


def tensor_all(*states: GaussianState) -> GaussianState:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


# -- transforms --------------------------------------------------------------


def identity(n: int) -> SymplecticTransform:
    return SymplecticTransform(np.eye(2 * n))


def embed(block: np.ndarray, modes: Sequence[int], n: int) -> np.ndarray:
    """Embed a 2k x 2k matrix acting on ``modes`` into a 2n x 2n identity."""
    idx = [i for m in modes for i in (2 * m, 2 * m + 1)]
    if len(set(idx)) != len(idx) or max(idx) >= 2 * n:
        raise ValueError(f"invalid modes {list(modes)} for {n} modes")
    out = np.eye(2 * n)
    out[np.ix_(idx, idx)] = block
    return out


def displacement(d: Sequence[float]) -> SymplecticTransform:
    d = np.asarray(d, dtype=float)
    return SymplecticTransform(np.eye(d.size), d)


def mode_displacement(n: int, mode: int, dx: float = 0.0, dp: float = 0.0) -> SymplecticTransform:
    d = np.zeros(2 * n)
    d[2 * mode] = dx
    d[2 * mode + 1] = dp
    return SymplecticTransform(np.eye(2 * n), d)


def phase_rotation(theta: float, mode: int = 0, n: int = 1) -> SymplecticTransform:
    c, s = np.cos(theta), np.sin(theta)
    return SymplecticTransform(embed(np.array([[c, -s], [s, c]]), [mode], n))


def squeezer(scale_x: float, mode: int = 0, n: int = 1) -> SymplecticTransform:
    """Single-mode squeeze ``x -> scale_x * x``, ``p -> p / scale_x``."""
    if scale_x <= 0:
        raise ValueError("scale must be positive")
    return SymplecticTransform(embed(np.diag([scale_x, 1.0 / scale_x]), [mode], n))


def beam_splitter(reflectivity: float, modes: tuple[int, int] = (0, 1), n: int = 2) -> SymplecticTransform:
    """Real, phase-free beam splitter on ``modes = (i, j)``.

    Mode ``i`` receives the transmitted beam ``sqrt(1-R) in_i + sqrt(R) in_j``
    and mode ``j`` the reflected beam ``sqrt(R) in_i - sqrt(1-R) in_j``.
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise ValueError(f"reflectivity {reflectivity} outside [0, 1]")
    i, j = modes
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    t, r = np.sqrt(1.0 - reflectivity), np.sqrt(reflectivity)
    block = np.kron(np.array([[t, r], [r, -t]]), np.eye(2))
    return SymplecticTransform(embed(block, [i, j], n))


def apply(state: GaussianState, t: SymplecticTransform) -> GaussianState:
    if t.n_modes != state.n_modes:
        raise ValueError(
            f"transform acts on {t.n_modes} modes, state has {state.n_modes}"
        )
    s = t.matrix
    return GaussianState(s @ state.mean + t.displacement, s @ state.cov @ s.T)


def apply_channel(state: GaussianState, gain: np.ndarray, noise: np.ndarray) -> GaussianState:
    """Gaussian channel ``mean -> T mean``, ``cov -> T cov T^T + N``."""
    gain = np.asarray(gain, dtype=float)
    noise = np.asarray(noise, dtype=float)
    return GaussianState(gain @ state.mean, gain @ state.cov @ gain.T + noise)


def loss_channel(state: GaussianState, mode: int, eta: float) -> GaussianState:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission {eta} outside [0, 1]")
    n = state.n_modes
    idx = state.mode_indices(mode)
    gain = np.eye(2 * n)
    gain[idx, idx] = np.sqrt(eta)
    noise = np.zeros((2 * n, 2 * n))
    noise[idx, idx] = (1.0 - eta) * VACUUM_VARIANCE
    return apply_channel(state, gain, noise)


# -- measurement -------------------------------------------------------------


def marginal(state: GaussianState, sel: QuadratureSelector) -> tuple[float, float]:
    """Mean and variance of the selected rotated quadrature."""
    v = sel.vector(state.n_modes)
    return float(v @ state.mean), float(v @ state.cov @ v)


def condition(state: GaussianState, sel: QuadratureSelector, outcome: float) -> Optional[GaussianState]:
    """State of the remaining modes given a homodyne ``outcome``.

    The measured mode is removed. Returns ``None`` for a single-mode input.
    """
    v = sel.vector(state.n_modes)
    m, var = float(v @ state.mean), float(v @ state.cov @ v)
    if var < _DEGENERATE_VARIANCE:
        raise UnphysicalStateError(f"measured quadrature variance {var:.3g} is degenerate")
    if state.n_modes == 1:
        return None
    rest = [i for i in range(2 * state.n_modes) if i // 2 != sel.mode]
    c = state.cov[rest] @ v
    mean = state.mean[rest] + c * (outcome - m) / var
    cov = state.cov[np.ix_(rest, rest)] - np.outer(c, c) / var
    return GaussianState(mean, cov)


def homodyne_measure(
    state: GaussianState, sel: QuadratureSelector, rng=None
) -> tuple[float, Optional[GaussianState]]:
    """Projective homodyne measurement: draw an outcome, then condition."""
    rng = make_rng(rng)
    m, var = marginal(state, sel)
    if var < _DEGENERATE_VARIANCE:
        raise UnphysicalStateError(f"measured quadrature variance {var:.3g} is degenerate")
    outcome = float(rng.normal(m, np.sqrt(var)))
    return outcome, condition(state, sel, outcome)


def sample_quadratures(state: GaussianState, sel: QuadratureSelector, count: int, rng=None) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = make_rng(rng)
    m, var = marginal(state, sel)
    return rng.normal(m, np.sqrt(var), size=count)


def permute_modes(state: GaussianState, order: Sequence[int]) -> GaussianState:
    """Reorder modes; ``order[k]`` is the old index of new mode ``k``."""
    if sorted(order) != list(range(state.n_modes)):
        raise ValueError(f"{list(order)} is not a permutation of the modes")
    return state.reduced(list(order))
