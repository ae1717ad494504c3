"""Least-squares VAR(p) estimation and moving-average coefficients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from asymspill.errors import SingularFitError, ValidationError

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class VarSpec:
    lag_order: int = 2
    include_intercept: bool = True
    horizon: int = 10

    def __post_init__(self):
        if self.lag_order < 1:
            raise ValidationError(f"lag order must be >= 1, got {self.lag_order}")
        if self.horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {self.horizon}")

    def n_regressors(self, n_vars: int) -> int:
        return n_vars * self.lag_order + int(self.include_intercept)

    def min_window(self, n_vars: int) -> int:
        """Smallest window length with identifiable coefficients and a
        positive residual degrees-of-freedom count."""
        return max(n_vars * self.lag_order + 2,
                   self.lag_order + self.n_regressors(n_vars) + 1)

    def check_window(self, n_obs: int, n_vars: int) -> None:
        need = self.min_window(n_vars)
        if n_obs < need:
            raise ValidationError(
                f"window of {n_obs} observations too short for VAR({self.lag_order}) "
                f"with {n_vars} variables (need >= {need})"
            )


@dataclass
class VarFit:
    phi: np.ndarray  # (p, N, N)
    intercept: np.ndarray | None
    sigma_eps: np.ndarray
    residuals: np.ndarray
    spectral_radius: float
    spec: VarSpec

    @property
    def lag_order(self) -> int:
        return self.phi.shape[0]

    @property
    def n_vars(self) -> int:
        return self.phi.shape[1]

    @property
    def is_stable(self) -> bool:
        return self.spectral_radius < 1.0


def lagged_design(y: np.ndarray, p: int, intercept: bool):
    """Return (Y, X) with rows t = p..T-1 and X = [1, y_{t-1}, ..., y_{t-p}]."""
    T = y.shape[0]
    blocks = [y[p - j:T - j] for j in range(1, p + 1)]
    if intercept:
        blocks.insert(0, np.ones((T - p, 1)))
    return y[p:], np.hstack(blocks)


def companion_matrix(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    p, n, _ = phi.shape
    comp = np.zeros((n * p, n * p))
    comp[:n, :] = np.hstack(list(phi))
    if p > 1:
        comp[n:, :-n] = np.eye(n * (p - 1))
    return comp


def spectral_radius(phi) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(phi)))))


def fit_var(window, spec: VarSpec = VarSpec(), window_start=None) -> VarFit:
    """Equation-by-equation OLS fit of a VAR(p) on a (T, N) window.

    The residual covariance is scaled by ``1 / (T - p - k)`` where ``k`` is the
    per-equation regressor count. Unstable fits are returned, not rejected;
    check ``fit.is_stable``.

    Raises
    ------
    ValidationError
        If the window is too short.
    SingularFitError
        If the regressor matrix has condition number above 1e12.
    """
    y = np.asarray(window, dtype=float)
    if y.ndim != 2:
        raise ValidationError("window must be a (T, N) matrix")
    if not np.all(np.isfinite(y)):
        raise ValidationError("window contains non-finite values")
    T, n = y.shape
    p = spec.lag_order
    spec.check_window(T, n)

    Y, X = lagged_design(y, p, spec.include_intercept)
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularFitError(f"regressor matrix is rank-deficient (cond={cond:.3g})",
                               window_start=window_start)
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ coef
    k = X.shape[1]
    sigma = resid.T @ resid / (T - p - k)
    sigma = 0.5 * (sigma + sigma.T)

    off = int(spec.include_intercept)
    intercept = coef[0].copy() if spec.include_intercept else None
    phi = np.stack([coef[off + j * n: off + (j + 1) * n].T for j in range(p)])
    return VarFit(phi, intercept, sigma, resid, spectral_radius(phi), spec)


def ma_coefficients(fit, horizon: int) -> np.ndarray:
    """Psi_0..Psi_{H-1} from Psi_h = sum_{j=1}^{min(h,p)} Phi_j Psi_{h-j}.

    ``fit`` may be a :class:`VarFit` or a (p, N, N) coefficient array.
    Returns an array of shape (H, N, N).
    """
    phi = fit.phi if isinstance(fit, VarFit) else np.asarray(fit, dtype=float)
    p, n, _ = phi.shape
    psi = np.zeros((horizon, n, n))
    psi[0] = np.eye(n)
    for h in range(1, horizon):
        acc = np.zeros((n, n))
        for j in range(1, min(h, p) + 1):
            acc += phi[j - 1] @ psi[h - j]
        psi[h] = acc
    return psi


def information_criteria(window, max_lag: int = 4, include_intercept: bool = True):
    """AIC/BIC for p = 1..max_lag on a common estimation sample.

    Diagnostic only; returns a list of dicts ``{"p", "aic", "bic"}``.
    """
    y = np.asarray(window, dtype=float)
    T, n = y.shape
    out = []
    for p in range(1, max_lag + 1):
        Y, X = lagged_design(y[max_lag - p:], p, include_intercept)
        coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
        resid = Y - X @ coef
        t_eff = Y.shape[0]
        sign, logdet = np.linalg.slogdet(resid.T @ resid / t_eff)
        if sign <= 0:
            logdet = -np.inf
        n_par = X.shape[1] * n
        out.append({
            "p": p,
            "aic": float(logdet + 2.0 * n_par / t_eff),
            "bic": float(logdet + np.log(t_eff) * n_par / t_eff),
        })
    return out
