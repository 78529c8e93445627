"""ARIMA estimation, order selection, and forecasting.

Models are fitted by conditional sum of squares on the differenced series:
residuals are recursed with pre-sample shocks at zero, the first ``p``
differenced values serve as startup lags, and the mean is profiled out in
closed form.  The optimizer searches an unconstrained parameterisation in
which AR and MA coefficient vectors are rebuilt from partial-correlation
values squashed through tanh, so every visited point is stationary and
invertible by construction; the fitted polynomial roots are still checked
explicitly before a fit is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import FitError
from .series import Series, difference, integrate

MAX_ORDER = 5  # cap on p + q; larger models are never competitive on ~1000 days
ROOT_MARGIN = 1e-6


@dataclass(frozen=True)
class ArimaSpec:
    """Model order: AR lags ``p``, differencing ``d``, MA lags ``q``."""

    p: int
    d: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError(f"negative order in ({self.p},{self.d},{self.q})")
        if self.d not in (0, 1, 2):
            raise ValueError(f"differencing order must be 0, 1 or 2, got {self.d}")
        if self.p + self.q > MAX_ORDER:
            raise ValueError(
                f"p + q must not exceed {MAX_ORDER}, got ({self.p},{self.d},{self.q})"
            )

    def n_params(self) -> int:
        """Estimated coefficients: AR, MA, and the mean."""
        return self.p + self.q + 1


@dataclass(frozen=True)
class FitConfig:
    """Optimizer budget and tolerances for `fit`."""

    max_iterations: int = 2000
    restarts: int = 4
    seed: int = 0
    xatol: float = 1e-6
    fatol: float = 1e-10


DEFAULT_FIT_CONFIG = FitConfig()


@dataclass(frozen=True)
class ArimaFit:
    """A fitted model plus the in-sample evidence used to judge it.

    ``residuals`` live on the differenced scale and start at the first
    position with a full AR lag window, so their count is the effective
    sample size ``n_effective``.
    """

    spec: ArimaSpec
    mu: float
    phi: np.ndarray
    theta: np.ndarray
    residuals: np.ndarray
    sigma2: float
    css: float
    aic: float
    sic: float
    n_effective: int


@dataclass(frozen=True)
class Forecast:
    """Multi-step path on the original (undifferenced) scale."""

    values: np.ndarray
    horizon: int
    spec: ArimaSpec


def ar_from_pacf(pac: np.ndarray) -> np.ndarray:
    """Stationary AR coefficients from partial-correlation values in (-1, 1).

    Levinson recursion; the coefficient vector it returns has all polynomial
    roots outside the unit circle whenever every input lies inside (-1, 1).
    """
    pac = np.asarray(pac, dtype=float)
    phi = pac.copy()
    for k in range(1, len(pac)):
        phi[:k] = phi[:k] - pac[k] * phi[:k][::-1]
    return phi


def _coeffs_from_raw(raw: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.clip(np.tanh(raw), -0.9999, 0.9999)
    phi = ar_from_pacf(r[:p]) if p else np.empty(0)
    # MA polynomial 1 + theta_1 B + ... is invertible iff the mirrored AR
    # polynomial is stationary, hence the sign flip.
    theta = -ar_from_pacf(r[p:]) if q else np.empty(0)
    return phi, theta


def _css_residuals(w: np.ndarray, p: int, q: int,
                   phi: np.ndarray, theta: np.ndarray) -> tuple[float, np.ndarray]:
    """Profiled mean and residual vector for fixed AR/MA coefficients.

    With the AR part applied, residuals are linear in mu, so the optimal mean
    is a one-dimensional least-squares solve instead of a search dimension.
    """
    n = w.size
    u = w[p:].copy()
    for i in range(1, p + 1):
        u -= phi[i - 1] * w[p - i:n - i]
    ma_poly = np.concatenate([[1.0], theta])
    e_base = lfilter([1.0], ma_poly, u)
    e_mean = lfilter([1.0], ma_poly, np.ones_like(u))
    mu = float(np.dot(e_base, e_mean) / np.dot(e_mean, e_mean))
    return mu, e_base - mu * e_mean


def _roots_outside(coeffs: np.ndarray, margin: float = ROOT_MARGIN) -> bool:
    """True when the polynomial 1 - c1 z - ... - ck z^k has all roots
    strictly outside the unit circle."""
    if coeffs.size == 0:
        return True
    roots = np.roots(np.concatenate([-coeffs[::-1], [1.0]]))
    return bool(np.all(np.abs(roots) > 1.0 + margin))


def _criteria(sigma2: float, n_eff: int, k: int) -> tuple[float, float]:
    if sigma2 <= 0.0:
        return -np.inf, -np.inf
    base = n_eff * np.log(sigma2)
    return float(base + 2 * k), float(base + k * np.log(n_eff))


def fit(train: Series, spec: ArimaSpec,
        config: FitConfig = DEFAULT_FIT_CONFIG) -> ArimaFit:
    """Estimate an ARIMA model on a level series.

    Differencing happens internally according to ``spec.d``.  Estimation
    minimises the mean squared conditional residual with a Nelder-Mead
    simplex over the transformed coefficients, restarting from perturbed
    points when the simplex fails to converge; a model whose polynomial
    roots sit on or inside the unit circle is rejected.
    """
    p, d, q = spec.p, spec.d, spec.q
    if len(train) < 10 * spec.n_params():
        raise ValueError(
            f"series too short to fit ({spec.p},{spec.d},{spec.q}): "
            f"{len(train)} observations, need {10 * spec.n_params()}"
        )
    w = difference(train, d).values
    if np.ptp(w) == 0.0 and (p or q):
        raise FitError(f"differenced series is constant; ({p},{d},{q}) unidentifiable")

    if p + q == 0:
        mu = float(w.mean())
        resid = w - mu
        return _finish(spec, mu, np.empty(0), np.empty(0), resid)

    def objective(raw: np.ndarray) -> float:
        phi, theta = _coeffs_from_raw(raw, p, q)
        _, eps = _css_residuals(w, p, q, phi, theta)
        return float(np.mean(eps**2))

    rng = np.random.default_rng(config.seed)
    failures: list[str] = []
    for attempt in range(config.restarts + 1):
        x0 = np.zeros(p + q) if attempt == 0 else rng.normal(0.0, 0.5, p + q)
        result = minimize(
            objective, x0, method="Nelder-Mead",
            options={"maxiter": config.max_iterations,
                     "xatol": config.xatol, "fatol": config.fatol},
        )
        if not result.success:
            failures.append(f"attempt {attempt}: {result.message}")
            continue
        phi, theta = _coeffs_from_raw(result.x, p, q)
        if not (_roots_outside(phi) and _roots_outside(-theta)):
            failures.append(f"attempt {attempt}: roots on or inside the unit circle")
            continue
        mu, resid = _css_residuals(w, p, q, phi, theta)
        return _finish(spec, mu, phi, theta, resid)
    raise FitError(
        f"({p},{d},{q}) estimation failed after {config.restarts + 1} attempts: "
        + "; ".join(failures)
    )


def _finish(spec: ArimaSpec, mu: float, phi: np.ndarray, theta: np.ndarray,
            resid: np.ndarray) -> ArimaFit:
    n_eff = resid.size
    sigma2 = float(np.mean(resid**2))
    aic, sic = _criteria(sigma2, n_eff, spec.n_params())
    return ArimaFit(
        spec=spec, mu=mu, phi=phi, theta=theta, residuals=resid,
        sigma2=sigma2, css=float(np.sum(resid**2)), aic=aic, sic=sic,
        n_effective=n_eff,
    )


def select_order(train: Series, d: int, max_p: int = 3, max_q: int = 3,
                 criterion: str = "sic",
                 config: FitConfig = DEFAULT_FIT_CONFIG) -> ArimaFit:
    """Grid search over (p, q) at fixed d, returning the best fit.

    Ranking is by the requested information criterion; exact ties go to the
    smaller total order p + q, then to the smaller p.  Grid cells whose
    estimation fails are skipped; if every cell fails, so does the search.
    """
    if criterion not in ("aic", "sic"):
        raise ValueError(f"criterion must be 'aic' or 'sic', got {criterion!r}")
    if max_p < 0 or max_q < 0:
        raise ValueError("order bounds must be non-negative")
    candidates: list[ArimaFit] = []
    failures: list[str] = []
    for p in range(max_p + 1):
        for q in range(max_q + 1):
            if p + q > MAX_ORDER:
                continue
            try:
                candidates.append(fit(train, ArimaSpec(p, d, q), config))
            except (FitError, ValueError) as exc:
                failures.append(str(exc))
    if not candidates:
        raise FitError(
            f"no candidate order at d={d} could be fitted: " + "; ".join(failures)
        )
    key = (lambda f: (f.sic, f.spec.p + f.spec.q, f.spec.p)) if criterion == "sic" \
        else (lambda f: (f.aic, f.spec.p + f.spec.q, f.spec.p))
    return min(candidates, key=key)


def forecast(fitted: ArimaFit, anchors, horizon: int) -> Forecast:
    """Iterated multi-step forecast from the end of the training data.

    ``anchors`` must hold at least the last ``p + d`` training levels (in
    chronological order); future shocks are set to zero and recent shocks
    come from the fit's residual tail, so the path continues the training
    recursion exactly.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    p, d, q = fitted.spec.p, fitted.spec.d, fitted.spec.q
    anchors = np.asarray(anchors, dtype=float)
    need = p + d
    if anchors.ndim != 1 or anchors.size < max(need, d, 1):
        raise ValueError(
            f"need at least {max(need, d, 1)} anchor levels for "
            f"({p},{d},{q}), got {anchors.size}"
        )
    if not np.all(np.isfinite(anchors)):
        raise ValueError("anchors must be finite")

    w_hist = list(np.diff(anchors, n=d)[-p:]) if p else []
    eps_hist = list(fitted.residuals[-q:]) if q else []
    path = np.empty(horizon)
    for h in range(horizon):
        step = fitted.mu
        for i in range(1, p + 1):
            step += fitted.phi[i - 1] * w_hist[-i]
        for j in range(1, q + 1):
            step += fitted.theta[j - 1] * (eps_hist[-j] if j <= len(eps_hist) else 0.0)
        path[h] = step
        if p:
            w_hist.append(step)
        if q:
            eps_hist.append(0.0)
    if d == 0:
        return Forecast(path, horizon, fitted.spec)
    return Forecast(integrate(path, anchors[-d:]), horizon, fitted.spec)


def rolling_one_step(fitted: ArimaFit, test: Series, anchors) -> Series:
    """One-step-ahead predictions over a held-out window, parameters frozen.

    Each day's prediction conditions on all actual values through the
    previous day; after predicting, the actual value is consumed and the
    shock history updated.  ``anchors`` must be the last ``p + d`` (or more)
    training levels so the recursion continues where `fit` left off.
    """
    p, d, q = fitted.spec.p, fitted.spec.d, fitted.spec.q
    anchors = np.asarray(anchors, dtype=float)
    need = max(p + d, d, 1)
    if anchors.ndim != 1 or anchors.size < need:
        raise ValueError(
            f"need at least {need} anchor levels for ({p},{d},{q}), got {anchors.size}"
        )
    if not np.all(np.isfinite(anchors)):
        raise ValueError("anchors must be finite")
    tail = anchors[-(p + d):] if p + d else np.empty(0)
    levels = np.concatenate([tail, test.values])
    w = np.diff(levels, n=d)
    eps_hist = list(fitted.residuals[-q:]) if q else []
    preds = np.empty(len(test))
    offset = tail.size  # first test value's index within `levels`
    for t in range(len(test)):
        idx = p + t  # position in w of the value being predicted
        step = fitted.mu
        for i in range(1, p + 1):
            step += fitted.phi[i - 1] * w[idx - i]
        for j in range(1, q + 1):
            step += fitted.theta[j - 1] * (eps_hist[-j] if j <= len(eps_hist) else 0.0)
        prev = levels[offset + t - 1]
        if d == 0:
            preds[t] = step
        elif d == 1:
            preds[t] = prev + step
        else:
            preds[t] = prev + (prev - levels[offset + t - 2]) + step
        if q:
            eps_hist.append(w[idx] - step)
    return Series(preds, name=f"{test.name}_pred", diff_level=test.diff_level)


def one_step_history(fitted: ArimaFit, full: Series) -> np.ndarray:
    """One-step predictions across an entire level series, same parameters.

    Returns an array aligned with ``full``; the first ``p + d`` positions are
    NaN (no complete lag window yet).  On the stretch past the training data
    this agrees exactly with `rolling_one_step`, because both run the same
    recursion over the same differenced values.
    """
    p, d, q = fitted.spec.p, fitted.spec.d, fitted.spec.q
    start = p + d
    if len(full) <= start:
        raise ValueError(f"series too short for ({p},{d},{q}) one-step history")
    w = difference(full, d).values
    out = np.full(len(full), np.nan)
    eps_hist: list[float] = []
    levels = full.values
    for idx in range(p, w.size):
        step = fitted.mu
        for i in range(1, p + 1):
            step += fitted.phi[i - 1] * w[idx - i]
        for j in range(1, q + 1):
            step += fitted.theta[j - 1] * (eps_hist[-j] if j <= len(eps_hist) else 0.0)
        pos = idx + d
        prev = levels[pos - 1]
        if d == 0:
            out[pos] = step
        elif d == 1:
            out[pos] = prev + step
        else:
            out[pos] = prev + (prev - levels[pos - 2]) + step
        eps_hist.append(w[idx] - step)
    return out
