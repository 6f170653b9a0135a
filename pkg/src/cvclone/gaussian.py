"""Multimode Gaussian states and the linear-optics operations acting on them.

Units and ordering
------------------
Quadratures are normalized so that the vacuum variance is 1 (``[x, p] = 2i``),
hence a coherent amplitude ``alpha`` has mean quadratures
``(2 Re alpha, 2 Im alpha)``. Mean vectors and covariance matrices are
interleaved per mode: ``(x1, p1, x2, p2, ...)``.

Beam splitter convention
------------------------
For input modes ``(a, b)`` the splitter with transmission ``T`` maps::

    a' =  sqrt(T) a + sqrt(1-T) b
    b' = -sqrt(1-T) a + sqrt(T) b

identically on ``x`` and ``p``. It is a rotation, so the splitter with the
reflection sign flipped is its inverse.

Phase shifts rotate ``alpha -> alpha * exp(i theta)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

_SYMMETRY_TOL = 1e-10
_VALIDITY_TOL = 1e-9


def symplectic_form(n: int) -> np.ndarray:
    """Block-diagonal form ``J = diag([[0, 1], [-1, 0]], ...)`` for ``n`` modes."""
    return _symplectic_form(int(n)).copy()


@lru_cache(maxsize=64)
def _symplectic_form(n: int) -> np.ndarray:
    J = np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    J.setflags(write=False)
    return J


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Sorted symplectic eigenvalues of a ``2n x 2n`` covariance matrix."""
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(_symplectic_form(n) @ cov))
    return np.sort(ev)[::2]


def is_symplectic(matrix: np.ndarray, atol: float = 1e-12) -> bool:
    n = matrix.shape[0] // 2
    J = _symplectic_form(n)
    return bool(np.allclose(matrix @ J @ matrix.T, J, rtol=0.0, atol=atol))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModeSelector:
    """Ordered list of distinct mode indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise InvalidArgument(f"duplicate mode indices: {idx}")
        if any(i < 0 for i in idx):
            raise InvalidArgument(f"negative mode index in {idx}")
        object.__setattr__(self, "indices", idx)

    def check(self, n_modes: int) -> None:
        if any(i >= n_modes for i in self.indices):
            raise InvalidArgument(
                f"mode indices {self.indices} out of range for {n_modes} modes"
            )

    def quadrature_indices(self) -> list[int]:
        return [q for i in self.indices for q in (2 * i, 2 * i + 1)]

    def __len__(self) -> int:
        return len(self.indices)


def _selector(modes: ModeSelector | Iterable[int] | int) -> ModeSelector:
    if isinstance(modes, ModeSelector):
        return modes
    if isinstance(modes, (int, np.integer)):
        return ModeSelector((int(modes),))
    return ModeSelector(tuple(modes))


@dataclass(frozen=True)
class GaussianState:
    """Immutable Gaussian state given by its first and second moments.

    The covariance is symmetrized on construction and checked against the
    uncertainty principle (all symplectic eigenvalues >= 1).
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.size == 0 or mean.size % 2:
            raise InvalidArgument(f"mean must have even nonzero length, got {mean.size}")
        if cov.shape != (mean.size, mean.size):
            raise InvalidArgument(
                f"cov shape {cov.shape} does not match mean length {mean.size}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidArgument("state moments must be finite")
        if np.max(np.abs(cov - cov.T)) > _SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise InvalidArgument("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if symplectic_eigenvalues(cov).min() < 1.0 - _VALIDITY_TOL:
            raise InvalidArgument("covariance violates the uncertainty principle")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))

    @classmethod
    def _derived(cls, mean: np.ndarray, cov: np.ndarray) -> "GaussianState":
        # for maps that provably keep a valid state valid (symplectic ops,
        # products, marginals): skip the eigenvalue check
        state = object.__new__(cls)
        object.__setattr__(state, "mean", _frozen(mean))
        object.__setattr__(state, "cov", _frozen(0.5 * (cov + cov.T)))
        return state

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.cov)

    def is_pure(self, atol: float = 1e-9) -> bool:
        return bool(np.allclose(self.symplectic_eigenvalues(), 1.0, atol=atol))

    def mode_mean(self, mode: int) -> np.ndarray:
        return self.mean[2 * mode : 2 * mode + 2].copy()

    def mode_cov(self, mode: int) -> np.ndarray:
        return self.cov[2 * mode : 2 * mode + 2, 2 * mode : 2 * mode + 2].copy()

    def var_x(self, mode: int) -> float:
        return float(self.cov[2 * mode, 2 * mode])

    def var_p(self, mode: int) -> float:
        return float(self.cov[2 * mode + 1, 2 * mode + 1])

    def to_dict(self) -> dict:
        """Debug dump: ``{"n_modes", "mean", "cov" (row-major)}``."""
        return {
            "n_modes": self.n_modes,
            "mean": self.mean.tolist(),
            "cov": self.cov.reshape(-1).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianState":
        n = int(data["n_modes"])
        return cls(np.asarray(data["mean"]), np.asarray(data["cov"]).reshape(2 * n, 2 * n))

    def allclose(self, other: "GaussianState", atol: float = 1e-10) -> bool:
        return (
            self.n_modes == other.n_modes
            and np.allclose(self.mean, other.mean, rtol=0.0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True)
class SymplecticOp:
    """Affine symplectic map ``r -> S r + d`` on the modes in ``modes``.

    ``modes=None`` means the op already acts on the full state.
    """

    matrix: np.ndarray
    displacement: np.ndarray = None
    modes: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        S = np.asarray(self.matrix, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
            raise InvalidArgument(f"bad symplectic matrix shape {S.shape}")
        d = np.zeros(S.shape[0]) if self.displacement is None else np.asarray(
            self.displacement, dtype=float
        )
        if d.shape != (S.shape[0],):
            raise InvalidArgument("displacement length does not match matrix")
        if self.modes is not None:
            sel = _selector(self.modes)
            if 2 * len(sel) != S.shape[0]:
                raise InvalidArgument("mode count does not match matrix size")
            object.__setattr__(self, "modes", sel.indices)
        object.__setattr__(self, "matrix", _frozen(S))
        object.__setattr__(self, "displacement", _frozen(d))

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def is_symplectic(self, atol: float = 1e-12) -> bool:
        return is_symplectic(self.matrix, atol)

    def embed(self, n_modes: int) -> "SymplecticOp":
        """Full ``2n x 2n`` representation on an ``n_modes`` register."""
        if self.modes is None:
            if self.n_modes != n_modes:
                raise InvalidArgument(
                    f"op acts on {self.n_modes} modes, state has {n_modes}"
                )
            return self
        sel = ModeSelector(self.modes)
        sel.check(n_modes)
        q = sel.quadrature_indices()
        S = np.eye(2 * n_modes)
        S[np.ix_(q, q)] = self.matrix
        d = np.zeros(2 * n_modes)
        d[q] = self.displacement
        return SymplecticOp(S, d)

    def then(self, other: "SymplecticOp", n_modes: int) -> "SymplecticOp":
        """Composition: apply ``self`` first, then ``other``."""
        a, b = self.embed(n_modes), other.embed(n_modes)
        return SymplecticOp(b.matrix @ a.matrix, b.matrix @ a.displacement + b.displacement)


def apply(op: SymplecticOp, state: GaussianState) -> GaussianState:
    if op.modes is None:
        full = op.embed(state.n_modes)
        S = full.matrix
        return GaussianState._derived(S @ state.mean + full.displacement, S @ state.cov @ S.T)
    # act only on the touched rows and columns
    sel = ModeSelector(op.modes)
    sel.check(state.n_modes)
    q = sel.quadrature_indices()
    S = op.matrix
    mean = state.mean.copy()
    mean[q] = S @ mean[q] + op.displacement
    cov = state.cov.copy()
    cov[q, :] = S @ cov[q, :]
    cov[:, q] = cov[:, q] @ S.T
    return GaussianState._derived(mean, cov)


def tensor(a: GaussianState, b: GaussianState) -> GaussianState:
    n = a.mean.size
    cov = np.zeros((n + b.mean.size,) * 2)
    cov[:n, :n] = a.cov
    cov[n:, n:] = b.cov
    return GaussianState._derived(np.concatenate([a.mean, b.mean]), cov)


def partial_trace(state: GaussianState, modes: ModeSelector | Iterable[int] | int) -> GaussianState:
    """Trace out ``modes``; the remaining modes keep their relative order."""
    sel = _selector(modes)
    sel.check(state.n_modes)
    keep = [m for m in range(state.n_modes) if m not in sel.indices]
    if not keep:
        raise InvalidArgument("cannot trace out every mode")
    return reduce_to(state, keep)


def reduce_to(state: GaussianState, modes: Sequence[int]) -> GaussianState:
    """Marginal state on ``modes``, in the given order."""
    sel = _selector(modes)
    sel.check(state.n_modes)
    q = sel.quadrature_indices()
    return GaussianState._derived(state.mean[q], state.cov[np.ix_(q, q)])


# -- states ------------------------------------------------------------------


def vacuum(n: int) -> GaussianState:
    if n < 1:
        raise InvalidArgument(f"number of modes must be >= 1, got {n}")
    return GaussianState._derived(np.zeros(2 * n), np.eye(2 * n))


def coherent(alphas: Sequence[complex] | complex) -> GaussianState:
    """Product of coherent states; mode ``k`` has mean ``(2 Re a_k, 2 Im a_k)``."""
    if np.isscalar(alphas):
        alphas = [alphas]
    alphas = np.asarray(list(alphas), dtype=complex)
    if alphas.size == 0:
        raise InvalidArgument("need at least one amplitude")
    mean = np.empty(2 * alphas.size)
    mean[0::2] = 2 * alphas.real
    mean[1::2] = 2 * alphas.imag
    return GaussianState._derived(mean, np.eye(2 * alphas.size))


def displace(state: GaussianState, mode: int, dx: float, dp: float) -> GaussianState:
    _selector(mode).check(state.n_modes)
    mean = state.mean.copy()
    mean[2 * mode] += dx
    mean[2 * mode + 1] += dp
    return GaussianState._derived(mean, state.cov)


def append_vacuum(state: GaussianState, n: int) -> GaussianState:
    return state if n == 0 else tensor(state, vacuum(n))


# -- elementary ops ----------------------------------------------------------


def beam_splitter(T: float, modes: ModeSelector | Sequence[int]) -> SymplecticOp:
    if not 0.0 <= T <= 1.0:
        raise InvalidArgument(f"transmission must lie in [0, 1], got {T}")
    sel = _selector(modes)
    if len(sel) != 2:
        raise InvalidArgument("a beam splitter acts on exactly two modes")
    t, r = np.sqrt(T), np.sqrt(1.0 - T)
    S = np.array([[t, 0, r, 0], [0, t, 0, r], [-r, 0, t, 0], [0, -r, 0, t]])
    return SymplecticOp(S, modes=sel.indices)


def phase_shift(theta: float, mode: int) -> SymplecticOp:
    c, s = np.cos(theta), np.sin(theta)
    return SymplecticOp(np.array([[c, -s], [s, c]]), modes=(mode,))


def two_mode_squeeze(r: float, modes: ModeSelector | Sequence[int]) -> SymplecticOp:
    """EPR source: correlates ``x1`` with ``x2`` and anticorrelates ``p1`` with ``p2``.

    On vacuum this gives ``Var(x1 - x2) = Var(p1 + p2) = 2 exp(-2r)``.
    """
    if r < 0:
        raise InvalidArgument(f"squeezing parameter must be >= 0, got {r}")
    sel = _selector(modes)
    if len(sel) != 2:
        raise InvalidArgument("a two-mode squeezer acts on exactly two modes")
    c, s = np.cosh(r), np.sinh(r)
    Z = np.diag([1.0, -1.0])
    S = np.block([[c * np.eye(2), s * Z], [s * Z, c * np.eye(2)]])
    return SymplecticOp(S, modes=sel.indices)


def epr_state(r: float) -> GaussianState:
    return apply(two_mode_squeeze(r, (0, 1)), vacuum(2))


# -- networks ----------------------------------------------------------------


def collection_network(modes: Sequence[int]) -> list[SymplecticOp]:
    """Cascade of ``N-1`` splitters folding ``modes`` into their symmetric sum.

    After the cascade ``modes[0]`` carries ``(1/sqrt(N)) sum_k r_k`` and the
    remaining modes carry the orthogonal combinations.
    """
    sel = _selector(modes)
    ops = []
    for k in range(2, len(sel) + 1):
        ops.append(beam_splitter((k - 1) / k, (sel.indices[0], sel.indices[k - 1])))
    return ops


def collect_modes(state: GaussianState, modes: Sequence[int]) -> GaussianState:
    for op in collection_network(modes):
        state = apply(op, state)
    return state


def collect(states: Sequence[GaussianState]) -> GaussianState:
    """Fold ``N`` single-mode inputs into one mode.

    Returns an ``N``-mode state: mode 0 is the collective mode, modes
    ``1..N-1`` are the orthogonal ports, which are vacuum for identical inputs.
    """
    if len(states) == 0:
        raise InvalidArgument("need at least one input state")
    if any(s.n_modes != 1 for s in states):
        raise InvalidArgument("collect takes single-mode inputs")
    first = states[0]
    if any(not np.allclose(s.cov, first.cov, atol=1e-10) for s in states[1:]):
        raise InvalidArgument("inputs must share the same covariance")
    if any(not np.allclose(s.mean, first.mean, atol=1e-10) for s in states[1:]):
        warnings.warn("collecting inputs with different means", stacklevel=2)
    joint = first
    for s in states[1:]:
        joint = tensor(joint, s)
    return collect_modes(joint, range(len(states)))


def splitter_network(mode: int, outputs: Sequence[int]) -> list[SymplecticOp]:
    """Cascade dividing ``mode`` equally over itself and ``outputs``.

    The k-th splitter keeps ``(M-k-1)/(M-k)`` of the remaining power, so for
    ``M = 3`` the ratios are 2:3 then 1:1.
    """
    ports = [mode, *outputs]
    M = len(ports)
    ops = []
    for k in range(M - 1):
        remaining = M - k
        # ports[k] keeps 1/remaining; the rest passes with a + sign to ports[k+1]
        ops.append(beam_splitter(1.0 / remaining, (ports[k + 1], ports[k])))
    return ops


def m_splitter(state: GaussianState, mode: int, M: int) -> GaussianState:
    """Divide ``mode`` into ``M`` equal parts using ``M-1`` fresh vacuum ports.

    The outputs occupy ``mode`` followed by the appended modes
    ``n, n+1, ..., n+M-2`` where ``n`` is the input mode count.
    """
    if M < 1:
        raise InvalidArgument(f"M must be >= 1, got {M}")
    _selector(mode).check(state.n_modes)
    n = state.n_modes
    state = append_vacuum(state, M - 1)
    for op in splitter_network(mode, range(n, n + M - 1)):
        state = apply(op, state)
    return state


def splitter_outputs(n_modes_before: int, mode: int, M: int) -> list[int]:
    """Mode indices of the ``M`` outputs produced by :func:`m_splitter`."""
    return [mode, *range(n_modes_before, n_modes_before + M - 1)]
