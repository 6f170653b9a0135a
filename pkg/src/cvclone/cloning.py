"""The N+N -> M cloning machine for phase-conjugate coherent inputs.

The machine folds the ``N`` copies of ``|alpha>`` and of ``|alpha*>`` into two
collective modes, amplifies the first with the measure-and-displace loop fed by
a joint measurement against the second, and fans the result out over ``M``
clones. With an EPR ancilla in the free splitter port the second EPR half,
displaced by the same outcomes, yields ``M`` anti-clones of ``|alpha*>``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument, NumericalError
from .fidelity import AlphabetConvention, average_fidelity, fidelity_from_variances
from .gaussian import (
    GaussianState,
    SymplecticOp,
    apply,
    beam_splitter,
    coherent,
    collect_modes,
    epr_state,
    reduce_to,
    splitter_network,
    tensor,
    vacuum,
)
from .measurement import (
    DetectorModel,
    FeedforwardGains,
    FeedforwardStage,
    amplifier_stage,
    feedforward_unconditional,
)


class ClippedFidelityWarning(UserWarning):
    """The conventional-cloner formula exceeded 1 and was clipped."""


def _check_nm(N: int, M: int) -> None:
    if int(N) != N or int(M) != M or N < 1 or M < 1:
        raise InvalidArgument(f"N and M must be positive integers, got N={N}, M={M}")


# -- closed forms --------------------------------------------------------------


def conventional_fidelity_raw(N: int, M: int) -> float:
    """``2MN / (2MN + M - 2N)`` for ``2N`` identical inputs, unclipped."""
    _check_nm(N, M)
    return 2 * M * N / (2 * M * N + M - 2 * N)


def conventional_fidelity(N: int, M: int) -> float:
    """Optimal Gaussian ``2N -> M`` cloning fidelity; values above 1 (M < 2N) are clipped."""
    F = conventional_fidelity_raw(N, M)
    if F > 1.0:
        warnings.warn(
            f"conventional fidelity {F:.6g} > 1 for N={N}, M={M} (M < 2N); clipped to 1",
            ClippedFidelityWarning,
            stacklevel=2,
        )
        return 1.0
    return F


def conventional_is_clipped(N: int, M: int) -> bool:
    return conventional_fidelity_raw(N, M) > 1.0


def identical_input_variance(n_inputs: int, M: int) -> float:
    """Clone variance of the optimal ``n_inputs -> M`` cloner with identical inputs."""
    _check_nm(n_inputs, M)
    return 1.0 + 2.0 * (M - n_inputs) / (n_inputs * M)


def conventional_clone_variance(N: int, M: int) -> float:
    return identical_input_variance(2 * N, M)


def pc_fidelity(N: int, M: int) -> float:
    """Optimal ``N + N -> M`` fidelity with phase-conjugate inputs."""
    _check_nm(N, M)
    return 4 * M**2 * N / (4 * M**2 * N + (M - N) ** 2)


def optimal_transmission(N: int, M: int) -> float:
    """Splitter transmission giving unity (universal) cloning gain."""
    _check_nm(N, M)
    return 4 * M * N / (M + N) ** 2


def clone_variance(N: int, M: int) -> float:
    """Per-quadrature clone variance of the universal phase-conjugate cloner."""
    _check_nm(N, M)
    return 1.0 + (M - N) ** 2 / (2 * M**2 * N)


def added_noise_db(variance: float) -> float:
    if variance <= 0:
        raise InvalidArgument("variance must be positive")
    return float(10.0 * np.log10(variance))


def estimation_limit_variance(N: int) -> float:
    """``M -> infinity`` clone variance: coherent state re-prepared from the joint estimate."""
    _check_nm(N, 1)
    return 1.0 + 1.0 / (2 * N)


class GapRow(NamedTuple):
    M: int
    f_pc: float
    f_c: float
    gap: float


def fidelity_gap_sweep(N: int, M_range: Iterable[int]) -> list[GapRow]:
    Ms = list(M_range)
    if not Ms:
        raise InvalidArgument("M_range is empty")
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClippedFidelityWarning)
        for M in Ms:
            f_pc, f_c = pc_fidelity(N, M), conventional_fidelity(N, M)
            rows.append(GapRow(M, f_pc, f_c, f_pc - f_c))
    return rows


def unity_gain_g1(N: int, M: int, T: float, conjugate_sign: int = 1) -> float:
    """``g1`` that restores unity clone gain for an arbitrary transmission.

    Solves ``sqrt(N/M) (sqrt(T) + a (sqrt(1-T) + s)) = 1`` for ``a = g1/sqrt2``;
    at the optimal transmission this coincides with :func:`ideal_g1`.
    """
    _check_nm(N, M)
    if not 0.0 < T <= 1.0:
        raise InvalidArgument(f"transmission must lie in (0, 1], got {T}")
    denom = np.sqrt(1.0 - T) + conjugate_sign
    if abs(denom) < 1e-12:
        raise NumericalError(f"unity gain unreachable at T={T} with conjugate sign {conjugate_sign}")
    return float(np.sqrt(2.0) * (np.sqrt(M / N) - np.sqrt(T)) / denom)


# -- configuration and reports -------------------------------------------------


@dataclass(frozen=True)
class CloningConfig:
    """Parameters of one cloning machine.

    Without ``T_override`` the machine runs at the optimal transmission with
    ideal gains. With ``T_override`` and no explicit ``gains`` the loop gain
    ``g1`` is recalibrated for unity clone gain at that transmission.
    ``clone_gains`` are per-clone ``(Gx, Gp)`` factors applied to clone means
    only. ``epr_r=None`` means a vacuum ancilla (non-unitary machine).
    """

    N: int
    M: int
    T_override: float | None = None
    gains: FeedforwardGains | None = None
    detector: DetectorModel = field(default_factory=DetectorModel)
    epr_r: float | None = None
    clone_gains: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        _check_nm(self.N, self.M)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "M", int(self.M))
        if self.T_override is not None and not 0.0 < self.T_override <= 1.0:
            raise InvalidArgument(f"transmission must lie in (0, 1], got {self.T_override}")
        if self.epr_r is not None and self.epr_r < 0:
            raise InvalidArgument("EPR squeezing must be >= 0")
        if self.clone_gains is not None:
            cg = tuple((float(gx), float(gp)) for gx, gp in self.clone_gains)
            if len(cg) != self.M:
                raise InvalidArgument(f"need {self.M} clone gain pairs, got {len(cg)}")
            object.__setattr__(self, "clone_gains", cg)

    @property
    def T(self) -> float:
        return optimal_transmission(self.N, self.M) if self.T_override is None else float(self.T_override)

    @property
    def conjugate_sign(self) -> int:
        # for M < N the conjugate contribution must be subtracted to reach unity gain
        return 1 if self.M >= self.N else -1

    @property
    def resolved_gains(self) -> FeedforwardGains:
        if self.gains is not None:
            return self.gains
        ideal = FeedforwardGains.ideal(self.T)
        if self.T_override is None:
            return ideal
        g1 = unity_gain_g1(self.N, self.M, self.T, self.conjugate_sign)
        return FeedforwardGains(g1, ideal.g2x, ideal.g2p)


@dataclass(frozen=True)
class CloneStats:
    gx: float
    gp: float
    var_x: float
    var_p: float
    db_x: float
    db_p: float
    fidelity: float
    alphabet_fidelity: float | None = None

    @classmethod
    def from_moments(cls, gx: float, gp: float, var_x: float, var_p: float) -> "CloneStats":
        return cls(
            gx=float(gx),
            gp=float(gp),
            var_x=float(var_x),
            var_p=float(var_p),
            db_x=added_noise_db(var_x),
            db_p=added_noise_db(var_p),
            fidelity=fidelity_from_variances(var_x, var_p),
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["alphabet_fidelity"] is None:
            del d["alphabet_fidelity"]
        return d


@dataclass(frozen=True)
class CloneReport:
    n: int
    m: int
    t: float
    g1: float
    clones: tuple[CloneStats, ...]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "t": self.t,
            "g1": self.g1,
            "clones": [c.to_dict() for c in self.clones],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CloneReport":
        return cls(
            n=int(data["n"]),
            m=int(data["m"]),
            t=float(data["t"]),
            g1=float(data["g1"]),
            clones=tuple(CloneStats(**c) for c in data["clones"]),
        )

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @property
    def fidelities(self) -> list[float]:
        return [c.fidelity for c in self.clones]


def alphabet_average_fidelity(
    report: CloneReport,
    alphabet_variance: float,
    convention: AlphabetConvention = "amplitude",
    method: str = "quadrature",
) -> list[float]:
    """Per-clone fidelity averaged over a centred Gaussian alphabet.

    Non-unity gains ``(gx, gp)`` displace each clone away from its target by an
    amount growing with the input amplitude; variances come from the report.
    """
    return [
        average_fidelity(c.gx, c.gp, np.diag([c.var_x, c.var_p]), alphabet_variance, convention, method)
        for c in report.clones
    ]


def with_alphabet_fidelity(
    report: CloneReport, alphabet_variance: float, convention: AlphabetConvention = "amplitude"
) -> CloneReport:
    avg = alphabet_average_fidelity(report, alphabet_variance, convention)
    return replace(report, clones=tuple(replace(c, alphabet_fidelity=f) for c, f in zip(report.clones, avg)))


# -- the pipeline ----------------------------------------------------------------


class MachineLayout(NamedTuple):
    """The machine right before its feedforward measurement.

    After the measurement the kept modes are re-indexed; ``signal`` and
    ``anticlone`` (``None`` for the vacuum-ancilla machine) refer to that
    post-measurement register.
    """

    stage: FeedforwardStage
    signal: int
    anticlone: int | None


@lru_cache(maxsize=32)
def _collected_inputs(N: int, alpha: complex, epr_r: float | None) -> GaussianState:
    # independent of T and gains, so sweeps reuse it; states are immutable
    inputs = coherent([alpha] * N + [alpha.conjugate()] * N)
    ancilla = vacuum(1) if epr_r is None else epr_state(epr_r)
    state = tensor(inputs, ancilla)
    state = collect_modes(state, range(N))
    return collect_modes(state, range(N, 2 * N))


def machine_layout(config: CloningConfig, alpha: complex = 0j) -> MachineLayout:
    """Inputs, collection networks and amplifier optics for ``config``.

    Register: ``0..N-1`` copies of ``|alpha>``, ``N..2N-1`` copies of
    ``|alpha*>``, ``2N`` ancilla (EPR half), ``2N+1`` second EPR half.
    """
    N = config.N
    unitary = config.epr_r is not None
    state = _collected_inputs(N, complex(alpha), config.epr_r)
    stage = amplifier_stage(
        state,
        signal=0,
        conjugate=N,
        ancilla=2 * N,
        T=config.T,
        gains=config.resolved_gains,
        anticlone=2 * N + 1 if unitary else None,
        conjugate_sign=config.conjugate_sign,
    )
    kept = stage.kept_modes
    return MachineLayout(stage, kept.index(0), kept.index(2 * N + 1) if unitary else None)


def fan_out_op(n_modes: int, ports: Sequence[int], M: int) -> tuple[SymplecticOp, list[list[int]]]:
    """Split every mode in ``ports`` into ``M`` copies on freshly appended vacuum.

    Returns the op on the enlarged register and, per port, its ``M`` output modes.
    """
    total = n_modes + len(ports) * (M - 1)
    op = SymplecticOp(np.eye(2 * total))
    outputs = []
    nxt = n_modes
    for port in ports:
        extra = list(range(nxt, nxt + M - 1))
        nxt += M - 1
        for bs in splitter_network(port, extra):
            op = op.then(bs, total)
        outputs.append([port, *extra])
    return op, outputs


def _fan_out(state: GaussianState, ports: Sequence[int], M: int) -> list[list[GaussianState]]:
    op, outputs = fan_out_op(state.n_modes, ports, M)
    full = apply(op, tensor(state, vacuum(len(ports) * (M - 1))) if M > 1 else state)
    return [[reduce_to(full, [m]) for m in group] for group in outputs]


def _single_clone(state: GaussianState, port: int, M: int) -> GaussianState:
    # one output of an M-splitter is a 1/M tap with vacuum on the other port
    n = state.n_modes
    full = apply(beam_splitter(1.0 / M, (n, port)), tensor(state, vacuum(1)))
    return reduce_to(full, [port])


def _scale_means(states: list[GaussianState], factors) -> list[GaussianState]:
    if factors is None:
        return states
    return [GaussianState(s.mean * np.asarray(f), s.cov) for s, f in zip(states, factors)]


def _exact_outputs(config: CloningConfig, alpha: complex, single_clone: bool):
    layout = machine_layout(config, alpha)
    out = feedforward_unconditional(layout.stage, config.detector)
    ports = [layout.signal] + ([layout.anticlone] if layout.anticlone is not None else [])
    out = reduce_to(out, ports)
    ports = list(range(len(ports)))
    if single_clone:
        groups = [[_single_clone(out, p, config.M)] for p in ports]
    else:
        groups = _fan_out(out, ports, config.M)
    clones = _scale_means(groups[0], config.clone_gains)
    anticlones = groups[1] if len(groups) > 1 else None
    return clones, anticlones


_UNIT = 1 + 1j


def _stats(unit: list[GaussianState], conj: bool) -> tuple[CloneStats, ...]:
    # the machine is linear without offsets, so the response to alpha = 1 + 1j,
    # i.e. target mean (2, +-2), gives the gains and its covariance the noise
    stats = []
    for s in unit:
        gx, gp = s.mean[0] / 2.0, s.mean[1] / (-2.0 if conj else 2.0)
        stats.append(CloneStats.from_moments(gx, gp, s.var_x(0), s.var_p(0)))
    return tuple(stats)


def _report(config: CloningConfig, stats) -> CloneReport:
    return CloneReport(n=config.N, m=config.M, t=config.T, g1=config.resolved_gains.g1, clones=stats)


def run_machine_exact(
    config: CloningConfig, alpha: complex = 0j, *, single_clone: bool = False
) -> tuple[list[GaussianState], CloneReport]:
    """Exact (outcome-averaged) clone states and their report.

    Gains in the report are the mean responses to a unit input amplitude.
    ``single_clone=True`` evaluates one representative clone through a single
    ``1/M`` tap, which allows very large ``M``.
    """
    unit, _ = _exact_outputs(config, _UNIT, single_clone)
    clones = unit if complex(alpha) == _UNIT else _exact_outputs(config, alpha, single_clone)[0]
    return clones, _report(config, _stats(unit, conj=False))


def run_machine_unitary(
    config: CloningConfig, alpha: complex = 0j
) -> tuple[list[GaussianState], list[GaussianState], tuple[CloneReport, CloneReport]]:
    """EPR-assisted machine: ``M`` clones of ``|alpha>`` and ``M`` anti-clones of ``|alpha*>``.

    Anti-clone fidelities use the same variance formula, taken against the
    conjugated target.
    """
    if config.epr_r is None:
        raise InvalidArgument("the unitary machine needs epr_r")
    u_c, u_a = _exact_outputs(config, _UNIT, False)
    clones, anti = (u_c, u_a) if complex(alpha) == _UNIT else _exact_outputs(config, alpha, False)
    return clones, anti, (_report(config, _stats(u_c, False)), _report(config, _stats(u_a, True)))


def fidelity_vs_transmission(N: int, M: int, transmissions: Iterable[float]) -> np.ndarray:
    """Exact unity-gain fidelity of clone 1 at each transmission."""
    out = []
    for T in transmissions:
        _, rep = run_machine_exact(CloningConfig(N, M, T_override=float(T)), _UNIT, single_clone=True)
        out.append(rep.clones[0].fidelity)
    return np.asarray(out)
