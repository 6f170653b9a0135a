"""Fidelity of Gaussian clones with coherent-state targets."""

from __future__ import annotations

from typing import Literal

import numpy as np

from .errors import InvalidArgument

AlphabetConvention = Literal["amplitude", "quadrature"]

GH_POINTS = 64


def fidelity_from_variances(var_x: float, var_p: float) -> float:
    """Unity-gain fidelity ``2 / sqrt((1 + var_x)(1 + var_p))``."""
    if var_x <= 0 or var_p <= 0:
        raise InvalidArgument("variances must be positive")
    return float(2.0 / np.sqrt((1.0 + var_x) * (1.0 + var_p)))


def fidelity_standard_error(var_x: float, var_p: float, se_x: float, se_p: float) -> float:
    """First-order propagation of variance standard errors through the fidelity."""
    F = fidelity_from_variances(var_x, var_p)
    dx = F / (2.0 * (1.0 + var_x))
    dp = F / (2.0 * (1.0 + var_p))
    return float(np.hypot(dx * se_x, dp * se_p))


def coherent_fidelity(target_mean, clone_mean, clone_cov) -> float | np.ndarray:
    """Overlap ``<beta|rho|beta>`` of a Gaussian clone with the coherent target.

    ``target_mean``/``clone_mean`` may carry leading batch dimensions.
    """
    W = np.asarray(clone_cov, dtype=float) + np.eye(2)
    d = np.asarray(clone_mean, dtype=float) - np.asarray(target_mean, dtype=float)
    quad = np.einsum("...i,ij,...j->...", d, np.linalg.inv(W), d)
    return 2.0 / np.sqrt(np.linalg.det(W)) * np.exp(-0.5 * quad)


def quadrature_variance(alphabet_variance: float, convention: AlphabetConvention = "amplitude") -> float:
    """Per-quadrature variance of the target mean for a Gaussian alphabet.

    ``"amplitude"``: the complex amplitude has ``<|alpha|^2> = alphabet_variance``,
    so each mean quadrature ``2 Re alpha`` has variance ``2 * alphabet_variance``.
    ``"quadrature"``: ``alphabet_variance`` is the mean-quadrature variance itself.
    """
    if alphabet_variance <= 0:
        raise InvalidArgument("alphabet variance must be positive")
    if convention == "amplitude":
        return 2.0 * alphabet_variance
    if convention == "quadrature":
        return float(alphabet_variance)
    raise InvalidArgument(f"unknown alphabet convention {convention!r}")


def _gain_matrix(gx: float, gp: float) -> np.ndarray:
    return np.diag([gx, gp]).astype(float)


def average_fidelity(
    gx: float,
    gp: float,
    clone_cov,
    alphabet_variance: float,
    convention: AlphabetConvention = "amplitude",
    method: Literal["quadrature", "closed"] = "quadrature",
) -> float:
    """Fidelity averaged over a centred Gaussian alphabet of coherent states.

    A clone of target mean ``m`` has mean ``diag(gx, gp) m`` and covariance
    ``clone_cov``, so the displacement error grows with ``|m|``.
    ``method="quadrature"`` uses tensor-product Gauss-Hermite integration;
    ``method="closed"`` uses ``F0 / sqrt(det(I + s^2 D W D))`` with
    ``D = G - I`` and ``W = (V + I)^-1``.
    """
    s2 = quadrature_variance(alphabet_variance, convention)
    V = np.asarray(clone_cov, dtype=float)
    G = _gain_matrix(gx, gp)
    if method == "closed":
        W = np.linalg.inv(V + np.eye(2))
        D = G - np.eye(2)
        F0 = 2.0 / np.sqrt(np.linalg.det(V + np.eye(2)))
        return float(F0 / np.sqrt(np.linalg.det(np.eye(2) + s2 * D @ W @ D)))
    if method != "quadrature":
        raise InvalidArgument(f"unknown method {method!r}")
    t, w = np.polynomial.hermite.hermgauss(GH_POINTS)
    tx, tp = np.meshgrid(t, t, indexing="ij")
    targets = np.sqrt(2.0 * s2) * np.stack([tx, tp], axis=-1)
    F = coherent_fidelity(targets, targets @ G.T, V)
    return float(np.einsum("i,j,ij->", w, w, F) / np.pi)
