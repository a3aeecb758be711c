import logging
import math
from datetime import timedelta
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from app.timeseries.schemas import HourlyTrafficSeries
from app.utils.exceptions import ArgumentError, DegeneracyError, InsufficientDataError, SelectionError
from app.utils.validators import is_constant
from .schemas import ArmaModel, ArmaOrder

logger = logging.getLogger(__name__)

MAX_ORDER = 5


def difference(values: np.ndarray, d: int) -> np.ndarray:
    return np.diff(values, n=d) if d else np.asarray(values, dtype=float).copy()


def long_ar_order(n: int, p: int, q: int) -> int:
    """Order of the first-stage autoregression that proxies the innovations (0 when q == 0)."""
    if q == 0:
        return 0
    return max(1, min(max(p + q, int(round(10.0 * math.log10(n)))), n // 4))


def _lags(x: np.ndarray, count: int, start: int) -> np.ndarray:
    n = x.size
    return np.column_stack([x[start - j : n - j] for j in range(1, count + 1)]) if count else np.empty((n - start, 0))


def _roots_inside(polynomial) -> bool:
    """True if every root of `z^k + a_1 z^(k-1) + ... + a_k` lies strictly inside the unit circle."""
    if len(polynomial) <= 1:
        return True
    return bool(np.all(np.abs(np.roots(polynomial)) < 1.0))


def _recursion(y: np.ndarray, c: float, phi, theta, start: int) -> Tuple[np.ndarray, np.ndarray]:
    """One-step predictions and innovations; innovations before `start` are zero."""
    n = y.size
    predictions = np.full(n, np.nan)
    innovations = np.zeros(n)
    p, q = len(phi), len(theta)
    for t in range(start, n):
        value = c
        for i in range(p):
            value += phi[i] * y[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= 0:
                value += theta[j] * innovations[t - 1 - j]
        predictions[t] = value
        innovations[t] = y[t] - value
    return predictions, innovations


def fit_arma(series: HourlyTrafficSeries, order: ArmaOrder, burn_in: Optional[int] = None) -> ArmaModel:
    """
    Two-stage least squares: a long autoregression proxies the innovations,
    then `y_t` is regressed on a constant, p lags of `y` and q lags of the proxy.

    `burn_in` fixes the first modelled sample so competing orders are scored
    on the same observations.

    **Errors**
    - InsufficientDataError: fewer than `10 (p + q + 1)` samples after differencing
    - DegeneracyError: constant series, rank-deficient regressors or a non-finite fit
    """
    p, d, q = order.p, order.d, order.q
    y = difference(series.array, d)
    n = y.size
    if n < 10 * (p + q + 1):
        raise InsufficientDataError(f"{order.label} needs {10 * (p + q + 1)} samples after differencing (got {n})")
    if is_constant(y):
        raise DegeneracyError(f"{order.label} cannot be fitted to a constant series")

    m = long_ar_order(n, p, q)
    proxy = np.zeros(n)
    if q:
        design = np.column_stack([np.ones(n - m), _lags(y, m, m)])
        coef = linalg.lstsq(design, y[m:])[0]
        proxy[m:] = y[m:] - design @ coef

    start = max(p, m + q)
    if burn_in is not None:
        start = max(start, burn_in)
    if n - start <= p + q + 1:
        raise InsufficientDataError(f"{order.label} has no samples left after a burn-in of {start}")

    design = np.column_stack([np.ones(n - start), _lags(y, p, start), _lags(proxy, q, start)])
    coef, _, rank, _ = linalg.lstsq(design, y[start:])
    if rank < design.shape[1]:
        raise DegeneracyError(f"{order.label} regressors are collinear (rank {rank} < {design.shape[1]})")

    intercept = float(coef[0])
    phi = tuple(float(v) for v in coef[1 : 1 + p])
    theta = tuple(float(v) for v in coef[1 + p :])

    _, innovations = _recursion(y, intercept, phi, theta, start)
    sse = float(np.sum(innovations[start:] ** 2))
    if not math.isfinite(sse) or sse <= 0.0:
        raise DegeneracyError(f"{order.label} produced a non-finite or zero residual sum of squares")

    stationary = _roots_inside([1.0] + [-v for v in phi])
    invertible = _roots_inside([1.0] + list(theta))
    if not (stationary and invertible):
        logger.warning(f"arma_explosive order={order.label} stationary={stationary} invertible={invertible}")

    return ArmaModel(
        order=order,
        ar_coeffs=phi,
        ma_coeffs=theta,
        intercept=intercept,
        noise_variance=sse / (n - start),
        sse=sse,
        n_effective=n - start,
        stationary=stationary,
        invertible=invertible,
    )


def bic(model: ArmaModel) -> float:
    n = model.n_effective
    k = model.order.p + model.order.q + 1
    return n * math.log(model.sse / n) + k * math.log(n)


def select_order_bic(series: HourlyTrafficSeries, p_max: int, q_max: int, d: int) -> ArmaOrder:
    """
    Exhaustive (p, q) grid for a fixed d; all cells share one burn-in so their
    BIC values are computed over the same samples. Cells that fail to fit are skipped.
    """
    if not (0 <= p_max <= MAX_ORDER and 0 <= q_max <= MAX_ORDER):
        raise ArgumentError(f"p_max and q_max must be within 0..{MAX_ORDER}")

    n = len(series) - d
    burn_in = max(p_max, long_ar_order(max(n, 1), p_max, q_max) + q_max)
    best: Optional[Tuple[float, ArmaOrder]] = None

    for p in range(p_max + 1):
        for q in range(q_max + 1):
            if d == 0 and p + q == 0:
                continue
            order = ArmaOrder(p=p, d=d, q=q)
            try:
                model = fit_arma(series, order, burn_in=burn_in)
            except (InsufficientDataError, DegeneracyError) as error:
                logger.debug(f"bic_cell_skipped order={order.label} error={error}")
                continue
            score = bic(model)
            logger.debug(f"bic_cell order={order.label} bic={score}")
            if best is None or score < best[0]:
                best = (score, order)

    if best is None:
        raise SelectionError(f"no (p, q) cell up to ({p_max}, {q_max}) with d={d} could be fitted")
    logger.info(f"bic_selected order={best[1].label} bic={best[0]}")
    return best[1]


def _check_history(model: ArmaModel, values: np.ndarray) -> None:
    needed = max(1, model.order.p + model.order.d)
    if values.size < needed:
        raise InsufficientDataError(f"{model.order.label} needs at least {needed} history samples (got {values.size})")


def forecast(model: ArmaModel, history: HourlyTrafficSeries, steps: int) -> HourlyTrafficSeries:
    """
    Iterate the one-step recursion `steps` times with future shocks at zero;
    differenced forecasts are re-integrated from the last observed level.
    """
    if steps < 1:
        raise ArgumentError(f"steps must be positive (got {steps})")
    values = history.array
    _check_history(model, values)

    p, d = model.order.p, model.order.d
    phi, theta = model.ar_coeffs, model.ma_coeffs
    y = difference(values, d)
    _, innovations = _recursion(y, model.intercept, phi, theta, p)

    ys = list(y)
    es = list(innovations)
    out = []
    for _ in range(steps):
        value = model.intercept
        for i, coef in enumerate(phi, start=1):
            value += coef * ys[-i]
        for j, coef in enumerate(theta, start=1):
            if len(es) >= j:
                value += coef * es[-j]
        ys.append(value)
        es.append(0.0)
        out.append(value)

    result = np.asarray(out)
    if d:
        result = values[-1] + np.cumsum(result)
    return HourlyTrafficSeries.from_array(history.end, result)


def one_step_predictions(model: ArmaModel, series: HourlyTrafficSeries) -> HourlyTrafficSeries:
    """In-sample one-step predictions on the level scale, starting at hour `p + d` of `series`."""
    values = series.array
    p, d = model.order.p, model.order.d
    if values.size <= p + d:
        raise InsufficientDataError(f"{model.order.label} has no in-sample prediction on {values.size} samples")
    predictions, _ = _recursion(difference(values, d), model.intercept, model.ar_coeffs, model.ma_coeffs, p)

    levels = np.arange(p + d, values.size)
    out = predictions[levels - d]
    if d:
        out = values[levels - 1] + out
    return HourlyTrafficSeries.from_array(series.start + timedelta(hours=p + d), out)


def rolling_one_step(model: ArmaModel, history: HourlyTrafficSeries, test: HourlyTrafficSeries) -> HourlyTrafficSeries:
    """Single-step baseline: each test hour predicted from all observations before it, coefficients fixed."""
    if test.start != history.end:
        raise ArgumentError("test window must start where the history ends")
    values = np.concatenate([history.array, test.array])
    _check_history(model, history.array)

    p, d = model.order.p, model.order.d
    y = difference(values, d)
    predictions, _ = _recursion(y, model.intercept, model.ar_coeffs, model.ma_coeffs, p)

    levels = np.arange(len(history), values.size)
    out = predictions[levels - d]
    if d:
        out = values[levels - 1] + out
    return HourlyTrafficSeries.from_array(test.start, out)


def seasonal_naive(history: HourlyTrafficSeries, steps: int, period: int = 168) -> HourlyTrafficSeries:
    if period < 1 or steps < 1:
        raise ArgumentError("period and steps must be positive")
    values = history.array
    if values.size < period:
        raise InsufficientDataError(f"seasonal naive needs a full period of history ({period} h, got {values.size})")
    base = values.size - period
    out = [values[base + (h % period)] for h in range(steps)]
    return HourlyTrafficSeries.from_array(history.end, out)


def rolling_seasonal_naive(history: HourlyTrafficSeries, test: HourlyTrafficSeries, period: int = 168) -> HourlyTrafficSeries:
    values = np.concatenate([history.array, test.array])
    if len(history) < period:
        raise InsufficientDataError(f"seasonal naive needs a full period of history ({period} h, got {len(history)})")
    levels = np.arange(len(history), values.size)
    return HourlyTrafficSeries.from_array(test.start, values[levels - period])
