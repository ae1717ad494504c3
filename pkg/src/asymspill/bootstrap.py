"""Factor stochastic-volatility simulator and the SAM null distribution.

Model for assets i = 1, 2 on each day t in [0, 1]::

    dX_i = mu_i dt + gamma_i s_i dB_i + sqrt(1 - gamma_i^2) s_i dW + c_i dN_i
    s_i  = exp(beta0 + beta1 v_i)
    dv_i = alpha v_i dt + dB_i

discretized by Euler steps of length 1 / steps_per_day. Every day restarts
v_i from its stationary law N(0, -1 / (2 alpha)).

Random numbers: day ``d`` of replication ``r`` under root seed ``s`` draws
from ``SeedSequence(s, spawn_key=(r, d))``. Results are therefore
independent of chunking, worker count and evaluation order.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.signal import lfilter

from asymspill.asymmetry import sam_values
from asymspill.errors import NumericalError, ValidationError
from asymspill.realized import measures_from_returns
from asymspill.spillover import SIGMA_VARIANCE, generalized_fevd, spillover_indices
from asymspill.var_engine import VarSpec, fit_var, ma_coefficients

logger = logging.getLogger(__name__)

SUBSAMPLE_RETURNS = {"5min": 78, "36obs": 36}
REFERENCE_QUANTILES = (-6.6728, -0.0342, 6.7650)
QUANTILE_LEVELS = (2.5, 50.0, 97.5)
MAX_DROP_FRACTION = 0.01
CHUNK_DAYS = 16


@dataclass(frozen=True)
class SvParams:
    mu1: float = 0.0
    mu2: float = 0.0
    beta0: float = -5.0 / 16.0
    beta1: float = 1.0 / 8.0
    alpha: float = -1.0 / 40.0
    gamma1: float = -0.3
    gamma2: float = -0.3
    jump_sd: float = 0.01
    jump_intensity: float = 0.0
    steps_per_day: int = 23_400

    def __post_init__(self):
        if not (abs(self.gamma1) < 1 and abs(self.gamma2) < 1):
            raise ValidationError("|gamma_i| must be < 1")
        if not self.alpha < 0:
            raise ValidationError("alpha must be negative for a stationary v")
        if self.steps_per_day < 1:
            raise ValidationError("steps_per_day must be positive")
        if self.jump_intensity < 0 or self.jump_sd < 0:
            raise ValidationError("jump intensity and size must be non-negative")

    @property
    def dt(self) -> float:
        return 1.0 / self.steps_per_day

    @property
    def v_stationary_variance(self) -> float:
        return -1.0 / (2.0 * self.alpha)

    @property
    def spot_correlation(self) -> float:
        return float(np.sqrt((1 - self.gamma1 ** 2) * (1 - self.gamma2 ** 2)))

    def returns_per_day(self, subsample: str) -> int:
        try:
            m = SUBSAMPLE_RETURNS[subsample]
        except KeyError:
            raise ValidationError(f"unknown subsample {subsample!r}") from None
        if self.steps_per_day % m:
            raise ValidationError(
                f"steps_per_day={self.steps_per_day} is not a multiple of {m} returns")
        return m


def day_rng(seed: int, replication: int, day: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(replication, day))
    return np.random.Generator(np.random.PCG64(ss))


def _draw_day(params: SvParams, rng, v0=None):
    S = params.steps_per_day
    sd = np.sqrt(params.dt)
    if v0 is None:
        v0 = rng.standard_normal(2) * np.sqrt(params.v_stationary_variance)
    dB = rng.standard_normal((2, S)) * sd
    dW = rng.standard_normal(S) * sd
    jumps = []
    if params.jump_intensity > 0:
        counts = rng.poisson(params.jump_intensity, 2)
        for c in counts:
            jumps.append((rng.integers(0, S, c), rng.normal(0.0, params.jump_sd, c)))
    return np.asarray(v0, dtype=float), dB, dW, jumps


def _integrate(params: SvParams, v0, dB, dW, jumps):
    """Euler increments for a block of days.

    Shapes: v0 (D, 2), dB (D, 2, S), dW (D, S). Returns (dX, v) where v has
    shape (D, 2, S + 1) with v[..., k] the state at the start of step k.
    """
    a = 1.0 + params.alpha * params.dt
    zi = (a * v0)[..., None]
    v_next, _ = lfilter([1.0], [1.0, -a], dB, axis=-1, zi=zi)
    v = np.concatenate([v0[..., None], v_next], axis=-1)
    sigma = np.exp(params.beta0 + params.beta1 * v[..., :-1])
    gamma = np.array([params.gamma1, params.gamma2])[None, :, None]
    mu = np.array([params.mu1, params.mu2])[None, :, None]
    dX = mu * params.dt + sigma * (gamma * dB + np.sqrt(1.0 - gamma ** 2) * dW[:, None, :])
    for d, day_jumps in enumerate(jumps):
        for i, (idx, size) in enumerate(day_jumps):
            np.add.at(dX[d, i], idx, size)
    return dX, v


def simulate_day(params: SvParams, rng, v0=None):
    """One day on the full Euler grid.

    Returns ``(log_prices, v_end)`` with log-prices of shape (2, S + 1)
    starting at 0. ``v0`` defaults to a draw from the stationary law.
    """
    v0, dB, dW, jumps = _draw_day(params, rng, v0)
    dX, v = _integrate(params, v0[None], dB[None], dW[None], [jumps])
    paths = np.concatenate([np.zeros((2, 1)), np.cumsum(dX[0], axis=-1)], axis=-1)
    return paths, v[0, :, -1].copy()


def simulate_returns(params: SvParams, n_days: int, seed: int, replication: int = 0,
                     subsample: str = "5min", first_day: int = 0,
                     chunk_days: int = CHUNK_DAYS, v_moments: bool = False):
    """Subsampled intraday returns, shape (n_days, 2, M).

    With ``v_moments`` also returns per-day (count, sum v, sum v^2) over all
    Euler states of each asset, shape (n_days, 2, 3).
    """
    m = params.returns_per_day(subsample)
    S = params.steps_per_day
    out = np.empty((n_days, 2, m))
    mom = np.empty((n_days, 2, 3)) if v_moments else None
    for lo in range(0, n_days, chunk_days):
        hi = min(lo + chunk_days, n_days)
        draws = [_draw_day(params, day_rng(seed, replication, first_day + d))
                 for d in range(lo, hi)]
        v0 = np.stack([x[0] for x in draws])
        dB = np.stack([x[1] for x in draws])
        dW = np.stack([x[2] for x in draws])
        dX, v = _integrate(params, v0, dB, dW, [x[3] for x in draws])
        out[lo:hi] = dX.reshape(hi - lo, 2, m, S // m).sum(axis=-1)
        if v_moments:
            mom[lo:hi, :, 0] = v.shape[-1]
            mom[lo:hi, :, 1] = v.sum(axis=-1)
            mom[lo:hi, :, 2] = (v * v).sum(axis=-1)
    if v_moments:
        return out, mom
    return out


@dataclass
class SimulatedPanel:
    returns: np.ndarray  # (T, 2, M)
    rv: np.ndarray       # (T, 2)
    rs_minus: np.ndarray
    rs_plus: np.ndarray
    seed: int
    replication: int = 0

    @property
    def n_days(self) -> int:
        return self.rv.shape[0]


def simulate_panel(params: SvParams, n_days: int, seed: int, replication: int = 0,
                   subsample: str = "5min") -> SimulatedPanel:
    r = simulate_returns(params, n_days, seed, replication, subsample)
    rv, rs_minus, rs_plus = measures_from_returns(r)
    return SimulatedPanel(r, rv, rs_minus, rs_plus, seed, replication)


def diffusion_correlation(params: SvParams, n_days: int, seed: int,
                          subsample: str = "5min") -> dict:
    """Correlation of the two assets' intraday returns with jumps disabled.

    ``within_day`` averages the per-day Pearson correlations; ``pooled`` is
    the correlation of all returns stacked, which is diluted by the
    independent volatility factors.
    """
    no_jumps = SvParams(**{**asdict(params), "jump_intensity": 0.0})
    r = simulate_returns(no_jumps, n_days, seed, subsample=subsample)
    x = r[:, 0, :] - r[:, 0, :].mean(axis=1, keepdims=True)
    y = r[:, 1, :] - r[:, 1, :].mean(axis=1, keepdims=True)
    per_day = (x * y).sum(1) / np.sqrt((x * x).sum(1) * (y * y).sum(1))
    pooled = np.corrcoef(r[:, 0, :].ravel(), r[:, 1, :].ravel())[0, 1]
    return {"within_day": float(per_day.mean()), "pooled": float(pooled),
            "target": params.spot_correlation}


def v_sample_variance(params: SvParams, n_days: int, seed: int) -> np.ndarray:
    """Pooled sample variance of every simulated v_i state, per asset."""
    _, mom = simulate_returns(params, n_days, seed, v_moments=True)
    n, s1, s2 = mom.sum(axis=0).T
    mean = s1 / n
    return (s2 - n * mean ** 2) / (n - 1)


def spillover_pair(rs_plus, rs_minus, spec: VarSpec, sigma_convention=SIGMA_VARIANCE):
    """Full-sample spillover sets for the RS+ and RS- systems."""
    out = []
    for values in (rs_plus, rs_minus):
        fit = fit_var(values, spec)
        psi = ma_coefficients(fit, spec.horizon)
        out.append(spillover_indices(
            generalized_fevd(fit.sigma_eps, psi, spec.horizon, sigma_convention)))
    return out


def _replication(params, n_days, seed, rep, subsample, spec, sigma_convention, log_eps):
    panel = simulate_panel(params, n_days, seed, rep, subsample)
    plus, minus = panel.rs_plus, panel.rs_minus
    if log_eps is not None:
        plus, minus = np.log(plus + log_eps), np.log(minus + log_eps)
    try:
        sp, sm = spillover_pair(plus, minus, spec, sigma_convention)
    except NumericalError as exc:
        return None, str(exc)
    total, _ = sam_values(sp.total, sm.total)
    frm, _ = sam_values(sp.from_others, sm.from_others)
    to, _ = sam_values(sp.to_others, sm.to_others)
    return np.concatenate([total, frm, to]), None


def _run_reps(reps, *args):
    return [(rep, *_replication(args[0], args[1], args[2], rep, *args[3:])) for rep in reps]


@dataclass
class SamDistribution:
    replications: int
    sam_values: np.ndarray          # total SAM per successful replication
    quantiles: tuple
    mean: float
    dropped: list = field(default_factory=list)
    sam_from: np.ndarray | None = None   # (R_ok, 2)
    sam_to: np.ndarray | None = None

    @property
    def ci(self) -> tuple[float, float]:
        return self.quantiles[0], self.quantiles[2]

    def summary(self) -> dict:
        return {
            "replications": self.replications,
            "successful": int(len(self.sam_values)),
            "dropped": len(self.dropped),
            "q2.5": self.quantiles[0],
            "q50": self.quantiles[1],
            "q97.5": self.quantiles[2],
            "mean": self.mean,
        }


def sam_quantiles(values) -> tuple[float, float, float]:
    q = np.percentile(np.asarray(values, dtype=float), QUANTILE_LEVELS)
    return tuple(float(x) for x in q)


def bootstrap_sam(params: SvParams = SvParams(), n_days: int = 200, replications: int = 500,
                  seed: int = 0, spec: VarSpec = VarSpec(), subsample: str = "5min",
                  sigma_convention: str = SIGMA_VARIANCE, n_jobs: int = 1,
                  log_eps: float | None = None) -> SamDistribution:
    """Null distribution of SAM under the symmetric factor SV model.

    Each replication simulates ``n_days`` days, builds RS+ / RS- panels,
    fits one VAR per panel over the whole sample and records SAM. Failed
    replications are dropped; more than 1% failures is an error.
    """
    if replications < 1:
        raise ValidationError("replications must be >= 1")
    need = spec.min_window(2)
    if n_days < need:
        raise ValidationError(f"n_days={n_days} too short; need >= {need}")
    params.returns_per_day(subsample)

    args = (params, n_days, seed, subsample, spec, sigma_convention, log_eps)
    reps = list(range(replications))
    if n_jobs == 1:
        results = _run_reps(reps, *args)
    else:
        workers = n_jobs if n_jobs > 0 else 8
        chunks = [c.tolist() for c in np.array_split(reps, min(replications, 4 * workers))]
        parts = Parallel(n_jobs=n_jobs)(delayed(_run_reps)(c, *args) for c in chunks if c)
        results = [r for part in parts for r in part]
    results.sort(key=lambda t: t[0])

    kept = [vals for _, vals, _ in results if vals is not None]
    dropped = [{"replication": rep, "error": err} for rep, vals, err in results if vals is None]
    if len(dropped) > MAX_DROP_FRACTION * replications:
        raise NumericalError(
            f"{len(dropped)} of {replications} replications failed (limit 1%): "
            f"{dropped[0]['error']}")
    for d in dropped:
        logger.warning("replication %d dropped: %s", d["replication"], d["error"])
    arr = np.array(kept)
    total = arr[:, 0]
    return SamDistribution(replications, total, sam_quantiles(total), float(total.mean()),
                           dropped, arr[:, 1:3], arr[:, 3:5])


def test_symmetry(sam, band) -> list[str]:
    """Per-window decision for H0: SAM = 0.

    ``band`` is a :class:`SamDistribution` or a ``(low, high)`` pair; the
    acceptance region is the closed interval. NaN windows give ``"missing"``.
    """
    if isinstance(band, SamDistribution):
        low, high = band.ci
    else:
        low, high = band
    values = sam.sam if hasattr(sam, "sam") else np.atleast_1d(np.asarray(sam, dtype=float))
    out = []
    for s in values:
        if np.isnan(s):
            out.append("missing")
        elif low <= s <= high:
            out.append("fail-to-reject")
        else:
            out.append("reject")
    return out


test_symmetry.__test__ = False
