"""Generalized forecast-error variance decomposition and spillover indices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from asymspill.errors import DegenerateCovarianceError, ValidationError
from asymspill.io import fmt10

SIGMA_VARIANCE = "variance"
SIGMA_STD = "std"
SIGMA_CONVENTIONS = (SIGMA_VARIANCE, SIGMA_STD)


@dataclass
class FevdResult:
    omega_raw: np.ndarray
    omega_norm: np.ndarray
    horizon: int
    sigma_convention: str = SIGMA_VARIANCE


@dataclass
class SpilloverSet:
    """Spillover indices in percent.

    ``from_others[i]`` is received by asset i, ``to_others[i]`` transmitted by
    it, ``pairwise[i, j]`` is the net exchange from i to j.
    """

    total: float
    from_others: np.ndarray
    to_others: np.ndarray
    net: np.ndarray
    pairwise: np.ndarray


def generalized_fevd(sigma_eps, psi, horizon: int | None = None,
                     sigma_convention: str = SIGMA_VARIANCE) -> FevdResult:
    """H-step generalized FEVD (Pesaran-Shin) with row normalization.

    ``sigma_eps`` may also be a fitted VAR, in which case its residual
    covariance is used. ``psi`` holds at least ``horizon`` MA matrices.

    Under the default ``"variance"`` convention the column scaling is
    ``1 / Sigma[j, j]``; ``"std"`` divides by ``sqrt(Sigma[j, j])`` instead.
    """
    if hasattr(sigma_eps, "sigma_eps"):
        sigma_eps = sigma_eps.sigma_eps
    sigma = np.asarray(sigma_eps, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if horizon is None:
        horizon = psi.shape[0]
    if horizon < 1 or horizon > psi.shape[0]:
        raise ValidationError(f"horizon {horizon} outside 1..{psi.shape[0]}")
    if sigma_convention not in SIGMA_CONVENTIONS:
        raise ValidationError(f"unknown sigma convention {sigma_convention!r}")
    n = sigma.shape[0]
    if sigma.shape != (n, n) or psi.shape[1:] != (n, n):
        raise ValidationError("dimension mismatch between covariance and MA matrices")

    diag = np.diag(sigma)
    if np.any(diag <= 0.0):
        raise DegenerateCovarianceError("residual covariance has a non-positive diagonal")
    scale = diag if sigma_convention == SIGMA_VARIANCE else np.sqrt(diag)

    ps = psi[:horizon] @ sigma                      # Psi_h Sigma
    num = (ps ** 2).sum(axis=0) / scale[None, :]
    den = np.einsum("hik,hik->i", ps, psi[:horizon])  # diag of Psi_h Sigma Psi_h'
    if np.any(den <= 0.0) or not np.all(np.isfinite(den)):
        raise DegenerateCovarianceError("zero forecast-error variance")
    omega = num / den[:, None]
    assert np.all(omega >= 0.0)
    rows = omega.sum(axis=1)
    return FevdResult(omega, omega / rows[:, None], horizon, sigma_convention)


def spillover_indices(fevd: FevdResult) -> SpilloverSet:
    w = fevd.omega_norm
    n = w.shape[0]
    off = w - np.diag(np.diag(w))
    from_others = 100.0 * off.sum(axis=1) / n
    to_others = 100.0 * off.sum(axis=0) / n
    total = 100.0 * off.sum() / n
    pairwise = 100.0 * (off.T - off) / n
    return SpilloverSet(float(total), from_others, to_others, to_others - from_others, pairwise)


def write_fevd_csv(fevd: FevdResult, assets, path) -> None:
    """Rows are receiving assets, columns the shock sources."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["asset", *assets]) + "\n")
        for name, row in zip(assets, fevd.omega_norm):
            fh.write(name + "," + ",".join(fmt10(x) for x in row) + "\n")
