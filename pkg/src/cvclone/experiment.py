"""Monte Carlo emulation of the cloning experiment.

One shot stands for one independent sample of the analysed sideband mode.
Each shot draws the feedforward outcomes from their Gaussian marginal,
conditions the signal on them, displaces it, fans it out over the clones and
reads every clone with a lossy verification homodyne. The identity of the
result does not depend on the number of workers: shots are generated in fixed
chunks, each with its own seed substream.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources

import numpy as np

from .cloning import (
    CloneReport,
    CloneStats,
    CloningConfig,
    added_noise_db,
    fan_out_op,
    machine_layout,
    with_alphabet_fidelity,
)
from .errors import InvalidArgument
from .fidelity import AlphabetConvention, fidelity_from_variances, fidelity_standard_error
from .measurement import feedforward_conditioning, ideal_g1

CHUNK_SHOTS = 16384

_NOISE_STREAM = 0
_CALIBRATION_STREAM = 1


def efficiency_correct(raw_var, eta: float):
    """Undo a loss of transmission ``eta``: ``1 + (raw - 1) / eta``."""
    if not 0.0 < eta <= 1.0:
        raise InvalidArgument(f"efficiency must lie in (0, 1], got {eta}")
    return 1.0 + (np.asarray(raw_var, dtype=float) - 1.0) / eta


def apply_loss(var, eta: float):
    if not 0.0 < eta <= 1.0:
        raise InvalidArgument(f"efficiency must lie in (0, 1], got {eta}")
    return eta * np.asarray(var, dtype=float) + (1.0 - eta)


@dataclass(frozen=True)
class ExperimentPlan:
    config: CloningConfig
    shots: int = 100_000
    seed: int = 0
    calibration_amplitude: complex = 3 + 3j
    verification_efficiencies: tuple[float, ...] | None = None
    workers: int = 1

    def __post_init__(self):
        if int(self.shots) != self.shots or self.shots < 2:
            raise InvalidArgument(f"shots must be an integer >= 2, got {self.shots}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgument("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise InvalidArgument("workers must be >= 1")
        effs = self.verification_efficiencies
        if effs is not None:
            effs = tuple(float(e) for e in effs)
            if len(effs) != self.config.M:
                raise InvalidArgument(f"need {self.config.M} verification efficiencies")
            if any(not 0.0 < e <= 1.0 for e in effs):
                raise InvalidArgument("verification efficiencies must lie in (0, 1]")
            object.__setattr__(self, "verification_efficiencies", effs)

    @property
    def etas(self) -> np.ndarray:
        if self.verification_efficiencies is None:
            return np.ones(self.config.M)
        return np.asarray(self.verification_efficiencies)


@dataclass(frozen=True)
class RunRecord:
    """Per-clone raw samples and the moments estimated from them.

    ``x``/``p`` have shape ``(M, shots)`` and hold raw (lossy) outcomes; the
    ``corrected_*`` variances undo the verification loss.
    """

    seed: int
    shots: int
    x: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    mean_x: list[float]
    mean_p: list[float]
    var_x: list[float]
    var_p: list[float]
    corrected_var_x: list[float]
    corrected_var_p: list[float]
    se_x: list[float]
    se_p: list[float]
    db_x: list[float]
    db_p: list[float]
    fidelity: list[float]
    fidelity_se: list[float]
    gx: list[float] | None = None
    gp: list[float] | None = None

    def to_dict(self, include_samples: bool = True) -> dict:
        d = {
            k: getattr(self, k)
            for k in (
                "seed", "shots", "mean_x", "mean_p", "var_x", "var_p",
                "corrected_var_x", "corrected_var_p", "se_x", "se_p",
                "db_x", "db_p", "fidelity", "fidelity_se", "gx", "gp",
            )
        }
        if include_samples:
            d["x"] = self.x.tolist()
            d["p"] = self.p.tolist()
        return d

    def to_json(self, include_samples: bool = True, **kw) -> str:
        return json.dumps(self.to_dict(include_samples), **kw)

    def clone_report(self, config: CloningConfig) -> CloneReport:
        gx = self.gx or [1.0] * len(self.var_x)
        gp = self.gp or [1.0] * len(self.var_x)
        clones = tuple(
            CloneStats.from_moments(gx[i], gp[i], self.corrected_var_x[i], self.corrected_var_p[i])
            for i in range(len(self.var_x))
        )
        return CloneReport(n=config.N, m=config.M, t=config.T, g1=config.resolved_gains.g1, clones=clones)


class _ShotModel:
    """Outcome-independent pieces of the per-shot model, computed once."""

    def __init__(self, config: CloningConfig, alpha: complex):
        layout = machine_layout(config, alpha)
        cond, disp = feedforward_conditioning(layout.stage, config.detector)
        sig = [2 * layout.signal, 2 * layout.signal + 1]
        self.cond = cond
        self.disp = disp[sig]
        self.sig_rows = sig
        M = config.M
        op, outputs = fan_out_op(1, [0], M)
        S = op.matrix
        sig_cov = cond.rest_cov[np.ix_(sig, sig)]
        V = np.eye(2 * M)
        V[:2, :2] = sig_cov
        order = [q for m in outputs[0] for q in (2 * m, 2 * m + 1)]
        self.mean_map = S[np.ix_(order, [0, 1])]
        cov = (S @ V @ S.T)[np.ix_(order, order)]
        self.clone_cov = 0.5 * (cov + cov.T)
        gains = np.ones((M, 2)) if config.clone_gains is None else np.asarray(config.clone_gains)
        self.scale = gains.reshape(-1)
        self.M = M

    def draw(self, rng: np.random.Generator, shots: int, etas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = self.cond.sample(rng, shots)
        sig_mean = self.cond.conditional_mean(y)[:, self.sig_rows] + y @ self.disp.T
        means = (sig_mean @ self.mean_map.T) * self.scale
        q = means + rng.multivariate_normal(np.zeros(2 * self.M), self.clone_cov, size=shots, method="eigh")
        eta = np.repeat(etas, 2)
        raw = np.sqrt(eta) * q + np.sqrt(1.0 - eta) * rng.standard_normal(q.shape)
        return raw[:, 0::2].T, raw[:, 1::2].T


def _sample(plan: ExperimentPlan, alpha: complex, stream: int) -> tuple[np.ndarray, np.ndarray]:
    model = _ShotModel(plan.config, alpha)
    sizes = [CHUNK_SHOTS] * (plan.shots // CHUNK_SHOTS)
    if plan.shots % CHUNK_SHOTS:
        sizes.append(plan.shots % CHUNK_SHOTS)
    etas = plan.etas

    def chunk(i: int):
        ss = np.random.SeedSequence(int(plan.seed), spawn_key=(stream, i))
        return model.draw(np.random.Generator(np.random.PCG64(ss)), sizes[i], etas)

    if plan.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            parts = list(pool.map(chunk, range(len(sizes))))
    else:
        parts = [chunk(i) for i in range(len(sizes))]
    return (np.concatenate([p[0] for p in parts], axis=1),
            np.concatenate([p[1] for p in parts], axis=1))


def _record(plan: ExperimentPlan, x: np.ndarray, p: np.ndarray, gains=None) -> RunRecord:
    n = plan.shots
    etas = plan.etas
    vx, vp = x.var(axis=1, ddof=1), p.var(axis=1, ddof=1)
    cx = np.array([efficiency_correct(v, e) for v, e in zip(vx, etas)], dtype=float)
    cp = np.array([efficiency_correct(v, e) for v, e in zip(vp, etas)], dtype=float)
    # standard error of a sample variance, referred through the loss correction
    k = np.sqrt(2.0 / (n - 1))
    se_x, se_p = vx * k / etas, vp * k / etas
    fid = [fidelity_from_variances(a, b) for a, b in zip(cx, cp)]
    fse = [fidelity_standard_error(a, b, sa, sb) for a, b, sa, sb in zip(cx, cp, se_x, se_p)]
    return RunRecord(
        seed=int(plan.seed),
        shots=n,
        x=x,
        p=p,
        mean_x=x.mean(axis=1).tolist(),
        mean_p=p.mean(axis=1).tolist(),
        var_x=vx.tolist(),
        var_p=vp.tolist(),
        corrected_var_x=cx.tolist(),
        corrected_var_p=cp.tolist(),
        se_x=se_x.tolist(),
        se_p=se_p.tolist(),
        db_x=[added_noise_db(v) for v in cx],
        db_p=[added_noise_db(v) for v in cp],
        fidelity=fid,
        fidelity_se=fse,
        gx=None if gains is None else list(gains[0]),
        gp=None if gains is None else list(gains[1]),
    )


def calibrate_gains(plan: ExperimentPlan) -> tuple[list[float], list[float]]:
    """Optical gains per clone from a run with modulated inputs ``alpha``, ``alpha*``.

    Each gain is the loss-compensated clone mean over the input mean.
    """
    alpha = complex(plan.calibration_amplitude)
    if alpha.real == 0.0 or alpha.imag == 0.0:
        raise InvalidArgument("calibration amplitude needs nonzero real and imaginary parts")
    x, p = _sample(plan, alpha, _CALIBRATION_STREAM)
    s = np.sqrt(plan.etas)
    gx = x.mean(axis=1) / s / (2 * alpha.real)
    gp = p.mean(axis=1) / s / (2 * alpha.imag)
    return gx.tolist(), gp.tolist()


def measure_cloning_noise(plan: ExperimentPlan) -> RunRecord:
    """Clone noise with the input modulators off (``alpha = 0``)."""
    x, p = _sample(plan, 0j, _NOISE_STREAM)
    return _record(plan, x, p)


def run_experiment(plan: ExperimentPlan) -> tuple[RunRecord, CloneReport]:
    """Gain calibration followed by the noise measurement."""
    gains = calibrate_gains(plan)
    x, p = _sample(plan, 0j, _NOISE_STREAM)
    record = _record(plan, x, p, gains)
    return record, record.clone_report(plan.config)


# -- embedded caption data ---------------------------------------------------


def _caption_number(text: str) -> float:
    text = str(text).strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text.replace(",", "."))


@lru_cache(maxsize=1)
def load_published_runs() -> dict:
    raw = resources.files("cvclone").joinpath("data/published_runs.json").read_text(encoding="utf-8")
    return json.loads(raw)


def published_run(fig: str) -> dict:
    """Caption data for ``fig`` (``"fig3"`` or ``"fig4"``) with numbers parsed."""
    runs = load_published_runs()["runs"]
    if fig not in runs:
        raise InvalidArgument(f"unknown run {fig!r}; expected one of {sorted(runs)}")
    run = runs[fig]
    return {
        "n": int(run["n"]),
        "m": int(run["m"]),
        "t": _caption_number(run["t"]),
        "verification_efficiencies": [_caption_number(e) for e in run["verification_efficiencies"]],
        "reference_lines_db": {k: _caption_number(v) for k, v in run["reference_lines_db"].items()},
        "reported_fidelities": [_caption_number(v) for v in run["reported_fidelities"]],
        "reported_alphabet_fidelities": [_caption_number(v) for v in run["reported_alphabet_fidelities"]],
        "clones": [{k: _caption_number(v) for k, v in c.items()} for c in run["clones"]],
    }


def reproduce_published_run(
    fig: str,
    alphabet_variance: float | None = None,
    convention: AlphabetConvention = "amplitude",
) -> CloneReport:
    """Fidelities implied by the measured caption variances and gains.

    ``alphabet_variance`` defaults to the published value of 10.
    """
    run = published_run(fig)
    if alphabet_variance is None:
        alphabet_variance = _caption_number(load_published_runs()["alphabet_variance"])
    clones = tuple(
        CloneStats.from_moments(c["gx"], c["gp"], c["var_x"], c["var_p"]) for c in run["clones"]
    )
    report = CloneReport(n=run["n"], m=run["m"], t=run["t"], g1=ideal_g1(run["t"]), clones=clones)
    return with_alphabet_fidelity(report, alphabet_variance, convention)
