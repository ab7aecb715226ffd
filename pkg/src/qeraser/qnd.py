"""QND interaction, QND measurement and the erasing protocol.

Mode 0 is the signal and mode 1 the probe of a two-mode state. The ideal gate
``exp(2i g x_S p_P)`` acts in the Heisenberg picture as

    x_P -> x_P + g x_S,    p_S -> p_S - g p_P,

leaving ``x_S`` and ``p_P`` untouched. Erasing measures ``p_P`` and displaces
the signal momentum by ``+g p0``, which undoes the back action exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .gaussian import (
    P,
    X,
    GaussianState,
    SymplecticTransform,
    apply,
    apply_channel,
    beam_splitter,
    condition,
    embed,
    homodyne_measure,
    marginal,
    mode_displacement,
    squeezed_vacuum,
    tensor,
)

# Reflectivities that make the Mach-Zehnder composite an exact unity-gain QND.
# Rounded, these are the 72 / 38 / 38 / 28 % values of the optical setup.
EXACT_REFLECTIVITIES = (
    (5 + np.sqrt(5)) / 10,
    (3 - np.sqrt(5)) / 2,
    (3 - np.sqrt(5)) / 2,
    (5 - np.sqrt(5)) / 10,
)
NOMINAL_REFLECTIVITIES = (0.72, 0.38, 0.38, 0.28)


def ideal_qnd(g: float = 1.0, signal: int = 0, probe: int = 1, n: int = 2) -> SymplecticTransform:
    """Symplectic map of ``exp(2i g x_S p_P)`` on modes ``(signal, probe)``."""
    block = np.eye(4)
    block[2, 0] = g  # x_P += g x_S
    block[1, 3] = -g  # p_S -= g p_P
    return SymplecticTransform(embed(block, [signal, probe], n))


def feedforward_gain(reflectivity: float) -> float:
    """Feedforward gain that cancels the ancilla in a squeezer gate."""
    return float(np.sqrt((1.0 - reflectivity) / reflectivity))


# -- measurement-based squeezer ----------------------------------------------


def squeezer_gate_symplectic(
    reflectivity: float, mode: int, ancilla_mode: int, n: int, squeeze: str = "x"
) -> SymplecticTransform:
    """Beam splitter + homodyne feedforward squeezer as one symplectic map.

    The input on ``mode`` is mixed with the ancilla; the reflected port is
    kept and relabelled back onto ``mode``. The homodyne measurement of the
    transmitted port and the classical feedforward are replaced by the
    equivalent controlled displacement (deferred measurement), so tracing out
    ``ancilla_mode`` afterwards yields the outcome-averaged channel. In the
    ideal limit ``squeeze="x"`` maps ``x -> sqrt(R) x`` and ``p -> p / sqrt(R)``.
    """
    if squeeze not in ("x", "p"):
        raise ValueError(f"squeeze must be 'x' or 'p', got {squeeze!r}")
    if reflectivity <= 0.0 or reflectivity > 1.0:
        raise ValueError(f"squeezer reflectivity {reflectivity} outside (0, 1]")
    g = feedforward_gain(reflectivity)
    bs = beam_splitter(reflectivity, (mode, ancilla_mode), n)
    if squeeze == "x":
        # measure p of the transmitted port (now on `mode`), kick p of the kept port
        ff = ideal_qnd(-g, signal=ancilla_mode, probe=mode, n=n)
    else:
        ff = ideal_qnd(g, signal=mode, probe=ancilla_mode, n=n)
    swap = np.eye(2 * n)
    i, j = 2 * mode, 2 * ancilla_mode
    swap[[i, i + 1, j, j + 1]] = swap[[j, j + 1, i, i + 1]]
    return SymplecticTransform(swap) @ ff @ bs


def squeezer_gate_channel(
    reflectivity: float, ancilla: GaussianState, squeeze: str = "x"
) -> tuple[np.ndarray, np.ndarray]:
    """Outcome-averaged single-mode channel ``(T, N)`` of the squeezer gate."""
    s = squeezer_gate_symplectic(reflectivity, 0, 1, 2, squeeze).matrix
    t = s[:2, :2]
    a = s[:2, 2:]
    return t, a @ ancilla.cov @ a.T


def squeezer_gate_mf(
    state: GaussianState,
    reflectivity: float,
    ancilla: GaussianState,
    rng=None,
    squeeze: str = "x",
) -> tuple[GaussianState, float]:
    """Single-shot measurement-and-feedforward squeezer.

    Returns the conditional output mode and the homodyne outcome. Averaging
    the output over many shots reproduces :func:`squeezer_gate_channel`.
    """
    if not 0.0 < reflectivity < 1.0:
        raise ValueError(f"squeezer reflectivity must be in (0, 1), got {reflectivity}")
    if state.n_modes != 1 or ancilla.n_modes != 1:
        raise ValueError("squeezer gate acts on single-mode input and ancilla")
    g = feedforward_gain(reflectivity)
    mixed = apply(tensor(state, ancilla), beam_splitter(reflectivity, (0, 1), 2))
    sel = P(0) if squeeze == "x" else X(0)
    outcome, kept = homodyne_measure(mixed, sel, rng)
    if squeeze == "x":
        kick = mode_displacement(1, 0, dp=g * outcome)
    else:
        kick = mode_displacement(1, 0, dx=g * outcome)
    return apply(kept, kick), outcome


# -- gate description --------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Excess-noise variances added to the output quadratures."""

    signal_x: float = 0.0
    signal_p: float = 0.0
    probe_x: float = 0.0
    probe_p: float = 0.0

    def __post_init__(self):
        for name in ("signal_x", "signal_p", "probe_x", "probe_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"noise variance {name} must be >= 0")

    def matrix(self) -> np.ndarray:
        return np.diag([self.signal_x, self.signal_p, self.probe_x, self.probe_p])


@dataclass(frozen=True)
class CircuitSpec:
    """Mach-Zehnder QND: two beam splitters around two squeezer gates.

    ``squeeze`` and ``ancilla_axes`` give, per arm (mode 0, mode 1), the
    attenuated quadrature and the squeezed axis of the ancilla. The defaults
    were selected by :func:`search_orientations`.
    """

    reflectivities: tuple[float, float, float, float] = EXACT_REFLECTIVITIES
    ancilla_db: float = -5.0
    squeeze: tuple[str, str] = ("x", "p")
    ancilla_axes: tuple[str, str] = ("x", "p")

    def __post_init__(self):
        if len(self.reflectivities) != 4:
            raise ValueError("circuit needs exactly four reflectivities")
        for r in self.reflectivities:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"reflectivity {r} outside [0, 1]")
        for r in self.reflectivities[1:3]:
            if r == 0.0:
                raise ValueError("squeezer reflectivities must be > 0")
        object.__setattr__(self, "reflectivities", tuple(float(r) for r in self.reflectivities))


@dataclass(frozen=True)
class QndGate:
    """A QND gate: ``ideal``, ``noisy`` (ideal plus excess noise) or ``circuit``.

    ``exchanged`` marks that the signal/probe roles are swapped, i.e. mode 1
    is the one to be restored by erasing. ``signal_gains`` scales the signal
    input quadratures of the noisy variant (imperfect transfer gains).
    """

    gain: float = 1.0
    variant: str = "ideal"
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    circuit: Optional[CircuitSpec] = None
    exchanged: bool = False
    signal_gains: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.variant not in ("ideal", "noisy", "circuit"):
            raise ValueError(f"unknown QND variant {self.variant!r}")
        if self.variant != "noisy" and tuple(self.signal_gains) != (1.0, 1.0):
            raise ValueError("signal gains are only supported by the noisy variant")
        object.__setattr__(self, "signal_gains", tuple(float(g) for g in self.signal_gains))
        if self.variant == "circuit" and self.circuit is None:
            object.__setattr__(self, "circuit", CircuitSpec())

    @classmethod
    def ideal(cls, gain: float = 1.0) -> "QndGate":
        return cls(gain=gain)

    @classmethod
    def noisy(cls, gain: float = 1.0, signal_gains=(1.0, 1.0), **noise) -> "QndGate":
        return cls(gain=gain, variant="noisy", noise=NoiseSpec(**noise), signal_gains=signal_gains)

    @classmethod
    def from_circuit(cls, spec: Optional[CircuitSpec] = None, **kwargs) -> "QndGate":
        spec = spec if spec is not None else CircuitSpec(**kwargs)
        return cls(gain=1.0, variant="circuit", circuit=spec)

    @property
    def reflectivities(self) -> Optional[tuple[float, float, float, float]]:
        """Beam-splitter reflectivities in effect (circuit variant only)."""
        if self.circuit is None:
            return None
        r1, r2, r3, r4 = self.circuit.reflectivities
        return (r1, r2, r3, 1.0 - r4) if self.exchanged else (r1, r2, r3, r4)

    def channel(self) -> tuple[np.ndarray, np.ndarray]:
        """Two-mode channel ``(T, N)`` with outputs ordered (mode 0, mode 1)."""
        if self.variant == "circuit":
            return circuit_channel(self.circuit, exchanged=self.exchanged)
        t = ideal_qnd(self.gain).matrix
        if self.variant == "ideal":
            return t, np.zeros((4, 4))
        t = t @ np.diag([*self.signal_gains, 1.0, 1.0])
        return t, self.noise.matrix()


def _circuit_symplectic(spec: CircuitSpec, exchanged: bool) -> np.ndarray:
    r1, r2, r3, r4 = spec.reflectivities
    if exchanged:
        r4 = 1.0 - r4
    n = 4  # signal, probe, ancilla A, ancilla B
    ops = [
        beam_splitter(r1, (1, 0), n),
        squeezer_gate_symplectic(r2, 0, 2, n, spec.squeeze[0]),
        squeezer_gate_symplectic(r3, 1, 3, n, spec.squeeze[1]),
    ]
    if exchanged:
        # pi phase on arm 0 re-locks the interferometer for the flipped splitter
        ops.append(SymplecticTransform(embed(-np.eye(2), [0], n)))
    ops.append(beam_splitter(r4, (1, 0), n))
    total = SymplecticTransform(np.eye(2 * n))
    for op in ops:
        total = op @ total
    s = total.matrix
    if exchanged:
        # output ports are flipped: relabel so results stay in mode order
        s = s[[2, 3, 0, 1, 4, 5, 6, 7]]
    return s


def _ancilla(db: float, axis: str) -> GaussianState:
    return squeezed_vacuum(db, 0.0 if axis == "x" else np.pi / 2)


def circuit_channel(spec: CircuitSpec, exchanged: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Outcome-averaged two-mode channel of the Mach-Zehnder circuit."""
    s = _circuit_symplectic(spec, exchanged)
    anc = tensor(_ancilla(spec.ancilla_db, spec.ancilla_axes[0]), _ancilla(spec.ancilla_db, spec.ancilla_axes[1]))
    t = s[:4, :4]
    a = s[:4, 4:]
    return t, a @ anc.cov @ a.T


def search_orientations(
    reflectivities=EXACT_REFLECTIVITIES, ancilla_db: float = -5.0
) -> list[tuple[float, CircuitSpec]]:
    """Score all 16 squeeze/ancilla orientation choices against ``ideal_qnd(1)``.

    The score is the entrywise distance of the gain matrix from the ideal map
    plus the largest excess-noise variance. Returns (score, spec), best first.
    """
    target = ideal_qnd(1.0).matrix
    results = []
    for sq0, sq1, ax0, ax1 in itertools.product("xp", repeat=4):
        spec = CircuitSpec(tuple(reflectivities), ancilla_db, (sq0, sq1), (ax0, ax1))
        t, n = circuit_channel(spec)
        score = float(np.max(np.abs(t - target)) + np.max(np.diag(n)))
        results.append((score, spec))
    results.sort(key=lambda r: r[0])
    return results


def exchange_roles(gate: QndGate) -> QndGate:
    """Swap signal and probe roles (an involution).

    For the circuit variant the fourth reflectivity is flipped ``R -> 1 - R``
    (28 % <-> 72 %), which swaps the output ports. The flip is applied when
    the circuit is built, so :attr:`QndGate.reflectivities` shows it while
    ``gate.circuit`` keeps the nominal values.
    """
    return replace(gate, exchanged=not gate.exchanged)


def apply_qnd(gate: QndGate, state: GaussianState) -> GaussianState:
    """Apply the gate's (outcome-averaged) channel to a two-mode state."""
    if state.n_modes != 2:
        raise ValueError(f"QND acts on a two-mode state, got {state.n_modes} modes")
    t, n = gate.channel()
    return apply_channel(state, t, n)


# -- QND measurement and erasing ---------------------------------------------


@dataclass(frozen=True)
class QndMeasurementResult:
    outcome: float
    post: GaussianState
    error_variance: float


def qnd_measurement(
    state: GaussianState, rng=None, signal_input_x_variance: float = 0.25
) -> QndMeasurementResult:
    """Homodyne ``x`` of the probe after the QND interaction.

    ``error_variance`` is the measured-outcome variance minus the signal's
    input ``x`` variance, which the caller supplies from its bookkeeping.
    """
    if state.n_modes != 2:
        raise ValueError("QND measurement needs a two-mode state")
    _, v_out = marginal(state, X(1))
    outcome, post = homodyne_measure(state, X(1), rng)
    return QndMeasurementResult(outcome, post, max(v_out - signal_input_x_variance, 0.0))


@dataclass(frozen=True)
class EraseResult:
    outcome: float
    restored: GaussianState
    feedforward_gain: float


def _erase_targets(exchanged: bool):
    # (measured selector, restored mode, kicked quadrature index, kick sign)
    if exchanged:
        return X(0), 1, 0, -1.0
    return P(1), 0, 1, +1.0


def erase(state: GaussianState, feedforward_gain: float = 1.0, rng=None, exchanged: bool = False) -> EraseResult:
    """Measure the conjugate probe quadrature and feed the outcome forward.

    Default roles: measure ``p`` of mode 1, shift the signal momentum by
    ``+gain * p0``. With ``exchanged=True``: measure ``x`` of mode 0 and shift
    the ``x`` of mode 1 by ``-gain * x0``.
    """
    if state.n_modes != 2:
        raise ValueError("erasing needs a two-mode state")
    sel, _, quad, sign = _erase_targets(exchanged)
    outcome, kept = homodyne_measure(state, sel, rng)
    d = np.zeros(2)
    d[quad] = sign * feedforward_gain * outcome
    restored = GaussianState(kept.mean + d, kept.cov)
    return EraseResult(outcome, restored, feedforward_gain)


def erase_conditional(state: GaussianState, outcome: float, feedforward_gain: float = 1.0, exchanged: bool = False) -> GaussianState:
    """Deterministic form of :func:`erase` for a given outcome."""
    sel, _, quad, sign = _erase_targets(exchanged)
    kept = condition(state, sel, outcome)
    d = np.zeros(2)
    d[quad] = sign * feedforward_gain * outcome
    return GaussianState(kept.mean + d, kept.cov)


def erase_channel_matrix(feedforward_gain: float = 1.0, exchanged: bool = False) -> np.ndarray:
    """2 x 4 linear map from the two-mode quadratures to the restored mode."""
    sel, restored, quad, sign = _erase_targets(exchanged)
    m = np.zeros((2, 4))
    m[:, 2 * restored:2 * restored + 2] = np.eye(2)
    measured_index = 2 * sel.mode + (0 if sel.theta == 0.0 else 1)
    m[quad, measured_index] += sign * feedforward_gain
    return m


def erase_channel(state: GaussianState, feedforward_gain: float = 1.0, exchanged: bool = False) -> GaussianState:
    """Outcome-averaged restored state (the ensemble seen by a verifier)."""
    if state.n_modes != 2:
        raise ValueError("erasing needs a two-mode state")
    m = erase_channel_matrix(feedforward_gain, exchanged)
    return GaussianState(m @ state.mean, m @ state.cov @ m.T)


def erased_gate_channel(gate: QndGate, feedforward_gain: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """End-to-end channel ``(T, N)`` from the two inputs to the restored mode."""
    t, n = gate.channel()
    m = erase_channel_matrix(feedforward_gain, gate.exchanged)
    return m @ t, m @ n @ m.T


def excess_noise(gate: QndGate, feedforward_gain: float = 1.0) -> tuple[float, float]:
    """Excess ``x`` and ``p`` noise of the restored mode over its own input.

    Computed for vacuum inputs so that probe leakage is included.
    """
    t, n = erased_gate_channel(gate, feedforward_gain)
    restored = 1 if gate.exchanged else 0
    out = t @ (0.25 * np.eye(4)) @ t.T + n
    own = t[:, 2 * restored:2 * restored + 2]
    base = own @ (0.25 * np.eye(2)) @ own.T
    return float(out[0, 0] - base[0, 0]), float(out[1, 1] - base[1, 1])


def run_protocol(
    signal: GaussianState,
    probe: GaussianState,
    gate: QndGate,
    feedforward_gain: float = 1.0,
) -> dict[str, GaussianState]:
    """Steps (a), (b), (c) of the erasing protocol, outcome-averaged."""
    a = tensor(signal, probe)
    b = apply_qnd(gate, a)
    c = erase_channel(b, feedforward_gain, gate.exchanged)
    return {"a": a, "b": b, "c": c}


__all__ = [
    "EXACT_REFLECTIVITIES",
    "NOMINAL_REFLECTIVITIES",
    "CircuitSpec",
    "EraseResult",
    "NoiseSpec",
    "QndGate",
    "QndMeasurementResult",
    "apply_qnd",
    "circuit_channel",
    "erase",
    "erase_channel",
    "erase_channel_matrix",
    "erase_conditional",
    "erased_gate_channel",
    "exchange_roles",
    "excess_noise",
    "feedforward_gain",
    "ideal_qnd",
    "qnd_measurement",
    "run_protocol",
    "search_orientations",
    "squeezer_gate_channel",
    "squeezer_gate_mf",
    "squeezer_gate_symplectic",
]
