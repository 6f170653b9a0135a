"""Homodyne detection, Gaussian conditioning and measure-scale-displace feedforward.

A detector of efficiency ``eta`` is a beam splitter mixing in vacuum before an
ideal homodyne; electronic noise adds Gaussian variance to the recorded value.
The raw outcome of measuring quadrature ``q`` is therefore::

    y = sqrt(eta) q + sqrt(1 - eta) v + e

Feedforward loops act on the loss-compensated value ``y / sqrt(eta)``, which
is what a gain calibrated for unity optical gain does in practice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument
from .gaussian import (
    GaussianState,
    ModeSelector,
    apply,
    beam_splitter,
    phase_shift,
)

PINV_RCOND = 1e-12


class Quadrature(str, enum.Enum):
    X = "x"
    P = "p"

    def row(self, mode: int) -> int:
        return 2 * mode + (0 if self is Quadrature.X else 1)


@dataclass(frozen=True)
class HomodyneOutcome:
    value: float
    quadrature: Quadrature
    mode: int

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise InvalidArgument("homodyne outcome must be finite")


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    electronic_noise: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise InvalidArgument(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if self.electronic_noise < 0.0:
            raise InvalidArgument("electronic noise variance must be >= 0")

    @property
    def added_variance(self) -> float:
        """Variance added to a raw outcome on top of ``eta * Var(q)``."""
        return (1.0 - self.efficiency) + self.electronic_noise


IDEAL_DETECTOR = DetectorModel()


@dataclass(frozen=True)
class FeedforwardGains:
    g1: float
    g2x: float = 0.0
    g2p: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.g1, self.g2x, self.g2p])):
            raise InvalidArgument("feedforward gains must be finite")

    @classmethod
    def ideal(cls, T: float) -> "FeedforwardGains":
        g2 = np.sqrt(2.0 / T)
        return cls(ideal_g1(T), g2, -g2)


def ideal_g1(T: float) -> float:
    """Gain giving shot-noise-limited amplification behind a splitter of transmission T."""
    if not 0.0 < T <= 1.0:
        raise InvalidArgument(f"transmission must lie in (0, 1], got {T}")
    return float(np.sqrt(2.0 * (1.0 - T) / T))


# -- conditioning ------------------------------------------------------------


@dataclass(frozen=True)
class Conditioning:
    """Gaussian conditioning of a state on a set of raw quadrature outcomes.

    ``outcome_mean``/``outcome_cov`` describe the raw outcome distribution;
    the remaining modes have mean ``rest_mean + gain @ (y - outcome_mean)`` and
    covariance ``rest_cov`` for every outcome ``y``.
    """

    rows: tuple[int, ...]
    kept_modes: tuple[int, ...]
    outcome_mean: np.ndarray
    outcome_cov: np.ndarray
    rest_mean: np.ndarray
    rest_cov: np.ndarray
    gain: np.ndarray
    efficiency: float

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        return rng.multivariate_normal(self.outcome_mean, self.outcome_cov, size=size, method="eigh")

    def conditional_mean(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.rest_mean + (y - self.outcome_mean) @ self.gain.T


def condition(
    state: GaussianState, rows: Sequence[int], detector: DetectorModel = IDEAL_DETECTOR
) -> Conditioning:
    """Condition ``state`` on ideal-or-lossy outcomes of the quadratures ``rows``.

    Each row is a flat quadrature index (``2*mode`` for x, ``2*mode+1`` for p);
    the modes holding them are removed from the conditional state.
    """
    rows = tuple(int(r) for r in rows)
    measured_modes = sorted({r // 2 for r in rows})
    ModeSelector(tuple(measured_modes)).check(state.n_modes)
    if len(set(rows)) != len(rows):
        raise InvalidArgument("each quadrature can be measured once")
    if len(rows) != len(measured_modes):
        raise InvalidArgument("measure at most one quadrature per mode")
    kept = tuple(m for m in range(state.n_modes) if m not in measured_modes)
    keep_rows = [q for m in kept for q in (2 * m, 2 * m + 1)]

    eta = detector.efficiency
    V, mu = state.cov, state.mean
    s = np.sqrt(eta)
    sigma = eta * V[np.ix_(rows, rows)] + detector.added_variance * np.eye(len(rows))
    cross = s * V[np.ix_(keep_rows, rows)]
    gain = cross @ np.linalg.pinv(sigma, rcond=PINV_RCOND, hermitian=True)
    rest_cov = V[np.ix_(keep_rows, keep_rows)] - gain @ cross.T
    return Conditioning(
        rows=rows,
        kept_modes=kept,
        outcome_mean=s * mu[list(rows)],
        outcome_cov=0.5 * (sigma + sigma.T),
        rest_mean=mu[keep_rows].copy(),
        rest_cov=0.5 * (rest_cov + rest_cov.T),
        gain=gain,
        efficiency=eta,
    )


def homodyne(
    state: GaussianState,
    mode: int,
    quadrature: Quadrature | str,
    detector: DetectorModel = IDEAL_DETECTOR,
    rng: np.random.Generator | None = None,
) -> tuple[HomodyneOutcome, GaussianState]:
    """Single-shot homodyne of ``mode``.

    Returns the raw outcome and the conditional state of the other modes
    (``None`` if ``mode`` was the only one).
    """
    quadrature = Quadrature(quadrature)
    ModeSelector((mode,)).check(state.n_modes)
    rng = np.random.default_rng() if rng is None else rng
    cond = condition(state, [quadrature.row(mode)], detector)
    y = cond.sample(rng)
    return HomodyneOutcome(float(y[0]), quadrature, mode), _post_state(cond, y)


def _post_state(cond: Conditioning, y: np.ndarray) -> GaussianState | None:
    if not cond.kept_modes:
        return None
    return GaussianState(cond.conditional_mean(y), cond.rest_cov)


def _joint_layout(state: GaussianState, mode_a: int, mode_b: int) -> GaussianState:
    # mode_a <- (a + b)/sqrt2 (x read out), mode_b <- (b - a)/sqrt2 (p read out)
    return apply(beam_splitter(0.5, (mode_a, mode_b)), state)


def joint_pc_measurement(
    state: GaussianState,
    mode_a: int,
    mode_b: int,
    detector: DetectorModel = IDEAL_DETECTOR,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, GaussianState]:
    """Joint measurement of ``(x_a + x_b)/sqrt2`` and ``(p_a - p_b)/sqrt2``.

    The two modes are interfered on a balanced splitter and the two outputs
    are read out in conjugate quadratures; both modes are consumed. Returned
    values are loss-compensated (divided by ``sqrt(eta)``).
    """
    if mode_a == mode_b:
        raise InvalidArgument("joint measurement needs two distinct modes")
    ModeSelector((mode_a, mode_b)).check(state.n_modes)
    rng = np.random.default_rng() if rng is None else rng
    mixed = _joint_layout(state, mode_a, mode_b)
    cond = condition(mixed, [2 * mode_a, 2 * mode_b + 1], detector)
    y = cond.sample(rng)
    s = np.sqrt(detector.efficiency)
    return float(y[0] / s), float(-y[1] / s), _post_state(cond, y)


# -- feedforward -------------------------------------------------------------


class FeedforwardStage(NamedTuple):
    """A state right before the feedforward measurement.

    ``gain_matrix[:, k]`` is the displacement applied to every quadrature per
    unit of the loss-compensated outcome of ``rows[k]``.
    """

    state: GaussianState
    rows: tuple[int, ...]
    gain_matrix: np.ndarray

    @property
    def measured_modes(self) -> list[int]:
        return sorted({r // 2 for r in self.rows})

    @property
    def kept_modes(self) -> list[int]:
        gone = self.measured_modes
        return [m for m in range(self.state.n_modes) if m not in gone]


def feedforward_unconditional(stage: FeedforwardStage, detector: DetectorModel = IDEAL_DETECTOR) -> GaussianState:
    """Exact outcome-averaged state after measuring and displacing.

    Averaging over outcomes turns the classical feedforward into the linear map
    ``r -> (I + G Q) r + G n`` with ``n`` the detector noise referred to the
    compensated outcome; the measured modes are then discarded.
    """
    state, rows, G = stage
    dim = state.mean.size
    Q = np.zeros((len(rows), dim))
    Q[np.arange(len(rows)), list(rows)] = 1.0
    A = np.eye(dim) + G @ Q
    eta = detector.efficiency
    noise = detector.added_variance / eta
    cov = A @ state.cov @ A.T + noise * (G @ G.T)
    mean = A @ state.mean
    keep = [q for m in stage.kept_modes for q in (2 * m, 2 * m + 1)]
    cov = cov[np.ix_(keep, keep)]
    return GaussianState(mean[keep], 0.5 * (cov + cov.T))


def feedforward_conditioning(stage: FeedforwardStage, detector: DetectorModel = IDEAL_DETECTOR):
    """Per-outcome description of the feedforward.

    Returns ``(conditioning, displacement)`` where the post-feedforward mean of
    the kept modes for raw outcome ``y`` is
    ``conditioning.conditional_mean(y) + (y / sqrt(eta)) @ displacement.T``.
    """
    cond = condition(stage.state, stage.rows, detector)
    keep = [q for m in cond.kept_modes for q in (2 * m, 2 * m + 1)]
    disp = stage.gain_matrix[keep, :] / np.sqrt(detector.efficiency)
    return cond, disp


def feedforward_conditional(
    stage: FeedforwardStage,
    detector: DetectorModel = IDEAL_DETECTOR,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, GaussianState]:
    """Single-shot feedforward; returns the raw outcomes and the displaced state."""
    rng = np.random.default_rng() if rng is None else rng
    cond, disp = feedforward_conditioning(stage, detector)
    y = cond.sample(rng)
    mean = cond.conditional_mean(y) + y @ disp.T
    return y, GaussianState(mean, cond.rest_cov)


def amplifier_stage(
    state: GaussianState,
    signal: int,
    conjugate: int,
    ancilla: int,
    T: float,
    gains: FeedforwardGains,
    *,
    anticlone: int | None = None,
    conjugate_sign: int = 1,
) -> FeedforwardStage:
    """Optics of the feedforward amplifier up to (not including) detection.

    ``signal`` is split on BS(T) with ``ancilla`` entering the free port. The
    reflected light is interfered with ``conjugate`` and the pair is read out
    jointly; the outcomes displace the transmitted signal by ``g1`` and, when
    given, the ``anticlone`` mode by ``(g2x, g2p)``. ``conjugate_sign=-1``
    phase-flips the conjugate input so its mean is subtracted rather than added.
    """
    if conjugate_sign not in (1, -1):
        raise InvalidArgument("conjugate_sign must be +1 or -1")
    modes = [signal, conjugate, ancilla] + ([anticlone] if anticlone is not None else [])
    ModeSelector(tuple(modes)).check(state.n_modes)

    state = apply(beam_splitter(T, (signal, ancilla)), state)
    # reflected port picks up -sqrt(1-T) of the signal; undo the sign
    state = apply(phase_shift(np.pi, ancilla), state)
    if conjugate_sign < 0:
        state = apply(phase_shift(np.pi, conjugate), state)
    state = _joint_layout(state, ancilla, conjugate)
    rows = (2 * ancilla, 2 * conjugate + 1)

    # second outcome reads (p_c - p_r)/sqrt2 = -p_diff
    G = np.zeros((state.mean.size, 2))
    G[2 * signal, 0] = gains.g1
    G[2 * signal + 1, 1] = -gains.g1
    if anticlone is not None:
        G[2 * anticlone, 0] = gains.g2x
        G[2 * anticlone + 1, 1] = -gains.g2p
    return FeedforwardStage(state, rows, G)


def feedforward_amplifier(
    state: GaussianState,
    signal: int,
    conjugate: int,
    ancilla: int,
    T: float,
    gains: FeedforwardGains | None = None,
    detector: DetectorModel = IDEAL_DETECTOR,
    rng: np.random.Generator | None = None,
    *,
    anticlone: int | None = None,
    conjugate_sign: int = 1,
) -> GaussianState:
    """Measure-scale-displace amplifier.

    With ``rng=None`` the exact unconditional output is returned; otherwise a
    single shot is drawn. The ancilla and conjugate modes are consumed; the
    remaining modes keep their relative order. With the ideal ``g1`` and a
    perfect detector the signal leaves as
    ``x_out = x_signal/sqrt(T) + sqrt((1-T)/T) x_conjugate``.
    """
    gains = gains or FeedforwardGains.ideal(T)
    stage = amplifier_stage(
        state, signal, conjugate, ancilla, T, gains,
        anticlone=anticlone, conjugate_sign=conjugate_sign,
    )
    if rng is None:
        return feedforward_unconditional(stage, detector)
    return feedforward_conditional(stage, detector, rng)[1]
