"""Autologistic models over binary release series, and the forecast study.

A series w is modelled by logistic regression of each value on its own
previous values: the order-l model regresses w_i on w_{i-1} ... w_{i-l}
plus a constant.  Fitting maximizes the exact likelihood by iteratively
reweighted least squares with step halving, so the objective never
decreases between iterations.  Perfect separation is detected and either
reported as an error or, when the ridge fallback is enabled, handled by
a small quadratic penalty (the stored log-likelihood stays unpenalized;
AIC is then approximate and the fit is flagged).

Model order is chosen per package as the AIC minimizer over orders
1 ... floor(0.1 * r).  The forecast experiment fits on a training prefix
and scores one-step-ahead probabilities for the last t releases against
a majority-vote baseline.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ForecastError,
    InsufficientDataError,
    NotEligibleError,
    OrderSelectionError,
    SeparationError,
    SingularModelError,
)
from .vectorize import BinarySeries

__all__ = [
    "LagDesign",
    "ModelFit",
    "Eligibility",
    "OrderSelection",
    "ForecastReport",
    "HorizonSummary",
    "ExclusionRecord",
    "ExperimentResult",
    "build_lag_design",
    "log_likelihood",
    "score",
    "fit",
    "predict",
    "select_order",
    "max_order",
    "eligibility",
    "forecast",
    "threshold_accuracy",
    "naive_baseline",
    "experiment_summary",
    "run_experiment",
    "simulate",
]

LOGLIK_TOL = 1e-8
GRADIENT_TOL = 1e-6
MAX_ITERATIONS = 100
SEPARATION_BOUND = 30.0
SEPARATION_PROBE_BOUND = 10.0
SEPARATION_PROBE_STEP = 5.0
RIDGE_LAMBDA = 1e-4
PARSIMONY_MARGIN = 4.0


@dataclass(frozen=True)
class LagDesign:
    """Responses aligned with their lagged regressors.

    Row i of ``regressors`` holds the previous values of the series,
    most recent first, for response i.  An order-0 design (intercept
    only) is allowed for diagnostics even though the builder requires
    at least one lag.
    """

    responses: tuple[int, ...]
    regressors: tuple[tuple[int, ...], ...]
    order: int

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if len(self.responses) < 1:
            raise ValueError("design needs at least one response")
        if len(self.regressors) != len(self.responses):
            raise ValueError("regressor rows must match responses")
        for row in self.regressors:
            if len(row) != self.order:
                raise ValueError("regressor row width must equal the order")

    @property
    def n(self) -> int:
        return len(self.responses)


@dataclass(frozen=True)
class ModelFit:
    """Fitted coefficients (beta[0] is the constant) and fit metadata."""

    beta: tuple[float, ...]
    loglik: float
    aic: float
    order: int
    converged: bool
    separation_detected: bool = False
    ridge: bool = False
    iterations: int = 0
    trace: tuple[float, ...] = ()


@dataclass(frozen=True)
class Eligibility:
    """Forecast-eligibility verdict with the measured quantities."""

    eligible: bool
    reason: str | None
    r: int
    window: int
    std: float | None


@dataclass(frozen=True)
class OrderSelection:
    """Selected order plus the per-order comparison AICs.

    ``aics`` holds the AICs of the candidate fits, all conditioned on
    the same initial window so their likelihoods are comparable;
    ``fit`` is the selected order refit on its own full design (more
    data, hence its ``aic`` differs from ``aics[order]``).
    """

    order: int
    aics: Mapping[int, float]
    skipped: Mapping[int, str]
    fit: ModelFit


@dataclass(frozen=True)
class ForecastReport:
    """Per-package forecast scores for one horizon."""

    package: str
    t: int
    order: int
    abs_errors: tuple[float, ...]
    mean_abs_error: float
    median_abs_error: float
    max_abs_error: float
    accuracy: float
    naive_accuracy: float
    converged: bool
    flags: tuple[str, ...] = ()
    protocol: str = "fit on the training prefix; score exactly the last t releases"


@dataclass(frozen=True)
class HorizonSummary:
    """Between-package averages for one horizon."""

    t: int
    packages: int
    mean_abs_error: float
    median_abs_error: float
    max_abs_error: float
    accuracy: float
    naive_accuracy: float


@dataclass(frozen=True)
class ExclusionRecord:
    """Why a package sat out the experiment (t is None if horizon-free)."""

    package: str
    t: int | None
    reason: str
    detail: str


@dataclass(frozen=True)
class ExperimentResult:
    """Everything the forecast experiment produced."""

    reports: tuple[ForecastReport, ...]
    exclusions: tuple[ExclusionRecord, ...]
    summaries: Mapping[int, HorizonSummary]
    orders: Mapping[str, OrderSelection]


def build_lag_design(w: BinarySeries, order: int) -> LagDesign:
    """Align each value with its previous ``order`` values."""
    if order < 1:
        raise ValueError("order must be at least 1")
    r = len(w.values)
    if r <= order:
        raise InsufficientDataError(
            f"{w.package!r}: series length {r} leaves no responses for order {order}"
        )
    responses = tuple(w.values[order:])
    regressors = tuple(
        tuple(w.values[i - k] for k in range(1, order + 1)) for i in range(order, r)
    )
    return LagDesign(responses, regressors, order)


def _design_matrix(design: LagDesign) -> tuple[np.ndarray, np.ndarray]:
    X = np.ones((design.n, design.order + 1))
    if design.order:
        X[:, 1:] = np.asarray(design.regressors, dtype=float)
    y = np.asarray(design.responses, dtype=float)
    return X, y


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    positive = eta >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-eta[positive]))
    expeta = np.exp(eta[~positive])
    out[~positive] = expeta / (1.0 + expeta)
    return out


def log_likelihood(design: LagDesign, beta: Sequence[float]) -> float:
    """Exact Bernoulli log-likelihood of the coefficients on the design."""
    X, y = _design_matrix(design)
    eta = X @ np.asarray(beta, dtype=float)
    return float(y @ eta - np.logaddexp(0.0, eta).sum())


def score(design: LagDesign, beta: Sequence[float]) -> tuple[float, ...]:
    """Analytic gradient of the log-likelihood at ``beta``."""
    X, y = _design_matrix(design)
    eta = X @ np.asarray(beta, dtype=float)
    return tuple(X.T @ (y - _sigmoid(eta)))


class _SeparationSignal(Exception):
    pass


def _irls(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    keep_trace: bool,
) -> tuple[np.ndarray, float, bool, int, tuple[float, ...]]:
    """Maximize loglik − lam·‖beta‖² by damped Newton steps.

    Returns (beta, objective, converged, iterations, trace).  With
    lam = 0 two conditions raise :class:`_SeparationSignal`: a
    coefficient running past the separation bound while the likelihood
    still improves (complete separation inflates coefficients fast), and
    a converged solution whose likelihood still strictly increases when
    a large coefficient is pushed further out (quasi-complete
    separation stalls the step size before the bound, but concavity
    makes the outward probe a sound divergence witness).  A singular
    weighted system surfaces as ``numpy.linalg.LinAlgError``.
    """
    beta = np.zeros(X.shape[1])

    def objective(b: np.ndarray) -> float:
        eta = X @ b
        ll = float(y @ eta - np.logaddexp(0.0, eta).sum())
        return ll - lam * float(b @ b)

    current = objective(beta)
    trace = [current] if keep_trace else []
    converged = False
    iterations = 0
    for iterations in range(1, MAX_ITERATIONS + 1):
        eta = X @ beta
        p = _sigmoid(eta)
        gradient = X.T @ (y - p) - 2.0 * lam * beta
        weights = p * (1.0 - p)
        hessian = (X * weights[:, None]).T @ X + 2.0 * lam * np.eye(X.shape[1])
        step = np.linalg.solve(hessian, gradient)
        candidate = beta + step
        value = objective(candidate)
        halvings = 0
        while value < current and halvings < 30:
            step /= 2.0
            candidate = beta + step
            value = objective(candidate)
            halvings += 1
        if value < current:
            break
        if lam == 0.0 and value > current and np.max(np.abs(candidate)) > SEPARATION_BOUND:
            raise _SeparationSignal(
                "perfect separation: a coefficient exceeds "
                f"{SEPARATION_BOUND} while the likelihood still improves"
            )
        improvement = value - current
        beta, current = candidate, value
        if keep_trace:
            trace.append(current)
        eta = X @ beta
        gradient = X.T @ (y - _sigmoid(eta)) - 2.0 * lam * beta
        if improvement < LOGLIK_TOL and np.max(np.abs(gradient)) < GRADIENT_TOL:
            converged = True
            break
    if lam == 0.0 and converged:
        for j in range(beta.size):
            if abs(beta[j]) <= SEPARATION_PROBE_BOUND:
                continue
            probe = beta.copy()
            probe[j] += math.copysign(SEPARATION_PROBE_STEP, beta[j])
            if objective(probe) > current:
                raise _SeparationSignal(
                    "perfect separation: the likelihood is monotone in a "
                    f"coefficient ({beta[j]:.1f} and still growing)"
                )
    return beta, current, converged, iterations, tuple(trace)


def fit(
    design: LagDesign,
    *,
    ridge_fallback: bool = False,
    keep_trace: bool = False,
) -> ModelFit:
    """Maximum-likelihood fit of the order-l autologistic coefficients.

    Constant responses and perfect separation raise
    :class:`SeparationError` unless ``ridge_fallback`` is set, in which
    case the fit is retried with a small quadratic penalty and flagged.
    """
    parameters = design.order + 1
    if design.n < parameters:
        raise InsufficientDataError(
            f"{design.n} responses cannot identify {parameters} coefficients"
        )
    X, y = _design_matrix(design)
    constant = bool(np.all(y == y[0]))
    separation = False
    ridge = False
    if constant:
        if not ridge_fallback:
            raise SeparationError("responses are constant; likelihood is unbounded")
        separation, ridge = True, True
    if not ridge:
        try:
            beta, value, converged, iterations, trace = _irls(X, y, 0.0, keep_trace)
        except _SeparationSignal as signal:
            if not ridge_fallback:
                raise SeparationError(str(signal)) from None
            separation, ridge = True, True
        except np.linalg.LinAlgError:
            if not ridge_fallback:
                raise SingularModelError(
                    "weighted least-squares system is singular"
                ) from None
            ridge = True
    if ridge:
        try:
            beta, _, converged, iterations, trace = _irls(X, y, RIDGE_LAMBDA, keep_trace)
        except np.linalg.LinAlgError:  # pragma: no cover - penalty regularizes
            raise SingularModelError("penalized system is singular") from None
        value = float(y @ (X @ beta) - np.logaddexp(0.0, X @ beta).sum())
    loglik = value
    return ModelFit(
        beta=tuple(float(b) for b in beta),
        loglik=loglik,
        aic=2.0 * parameters - 2.0 * loglik,
        order=design.order,
        converged=converged,
        separation_detected=separation,
        ridge=ridge,
        iterations=iterations,
        trace=trace,
    )


def predict(model: ModelFit, lags: Sequence[int]) -> float:
    """Conditional probability of a 1 given the lagged values."""
    if len(lags) != model.order:
        raise ValueError(f"expected {model.order} lags, got {len(lags)}")
    eta = model.beta[0] + sum(b * x for b, x in zip(model.beta[1:], lags))
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    expeta = math.exp(eta)
    return expeta / (1.0 + expeta)


def max_order(r: int, fraction: float = 0.1) -> int:
    """Largest candidate order for a series of length r."""
    return int(math.floor(fraction * r))


def _comparison_design(values: Sequence[int], order: int, window: int) -> LagDesign:
    """Lag design whose responses start at index ``window``.

    Conditioning every candidate order on the same initial window keeps
    their likelihoods over the same responses, so AICs compare like with
    like.  Per-order windows would hand longer lags fewer responses and
    shift their log-likelihoods mechanically, swamping the AIC penalty.
    """
    responses = tuple(values[window:])
    regressors = tuple(
        tuple(values[i - k] for k in range(1, order + 1))
        for i in range(window, len(values))
    )
    return LagDesign(responses=responses, regressors=regressors, order=order)


def select_order(
    w: BinarySeries,
    *,
    max_order_fraction: float = 0.1,
    ridge_fallback: bool = False,
    parsimony_margin: float = PARSIMONY_MARGIN,
) -> OrderSelection:
    """Pick the autoregressive order among 1 ... floor(fraction * r).

    Candidates are fit on a common conditioning window (responses start
    after the largest candidate's lags) so their AICs are comparable.
    The winner is the smallest order whose AIC sits within
    ``parsimony_margin`` of the minimum: gaps of a few AIC units are
    weak evidence, so orders that close count as tied and ties resolve
    toward parsimony.  A margin of 0 reduces to the plain AIC minimum.
    The returned fit re-estimates the winner on its own full design,
    which uses every response available at that order.

    Orders whose fit fails are skipped with a reason; no candidate
    fitting at all is a selection error.
    """
    if parsimony_margin < 0:
        raise ValueError("parsimony_margin must be non-negative")
    cap = max_order(len(w.values), max_order_fraction)
    if cap < 1:
        raise OrderSelectionError(
            f"{w.package!r}: {len(w.values)} releases allow no autoregressive order"
        )
    aics: dict[int, float] = {}
    skipped: dict[int, str] = {}
    candidates: dict[int, ModelFit] = {}
    for order in range(1, cap + 1):
        try:
            candidate = fit(
                _comparison_design(w.values, order, cap),
                ridge_fallback=ridge_fallback,
            )
        except (SeparationError, SingularModelError, InsufficientDataError) as exc:
            skipped[order] = str(exc)
            continue
        aics[order] = candidate.aic
        candidates[order] = candidate
    if not aics:
        raise OrderSelectionError(
            f"{w.package!r}: no order in 1..{cap} produced a usable fit"
        )
    floor = min(aics.values())
    selected = min(
        order for order, aic in aics.items() if aic <= floor + parsimony_margin
    )
    try:
        final = fit(build_lag_design(w, selected), ridge_fallback=ridge_fallback)
    except (SeparationError, SingularModelError, InsufficientDataError):
        final = candidates[selected]
    return OrderSelection(order=selected, aics=aics, skipped=skipped, fit=final)


def eligibility(
    w: BinarySeries,
    t: int,
    order: int,
    *,
    min_releases: int = 25,
    min_std: float = 0.25,
) -> Eligibility:
    """Apply the length and training-variance filters for one horizon."""
    r = len(w.values)
    window = r - (t + order)
    if r < min_releases:
        return Eligibility(False, "too-few-releases", r, window, None)
    if window < 1:
        return Eligibility(False, "no-training-data", r, window, None)
    training = w.values[:window]
    mean = sum(training) / window
    std = math.sqrt(sum((v - mean) ** 2 for v in training) / window)
    if std < min_std:
        return Eligibility(False, "low-training-variance", r, window, std)
    return Eligibility(True, None, r, window, std)


def threshold_accuracy(
    probs: Sequence[float], actuals: Sequence[int], threshold: float = 0.5
) -> float:
    """Share of positions where thresholding the probability hits the value."""
    if len(probs) != len(actuals):
        raise ValueError("probabilities and actuals differ in length")
    if not probs:
        raise ValueError("nothing to score")
    hits = sum(1 for p, a in zip(probs, actuals) if (p >= threshold) == bool(a))
    return hits / len(probs)


def naive_baseline(w: BinarySeries, t: int, tie_value: int = 1) -> float:
    """Accuracy of predicting the training prefix's majority state.

    An exactly tied prefix predicts ``tie_value`` (1 by default: assume
    vulnerable when in doubt).
    """
    r = len(w.values)
    if t < 1 or r <= t:
        raise InsufficientDataError(f"horizon {t} leaves no training data for r={r}")
    training = w.values[: r - t]
    ones = sum(training)
    if 2 * ones > len(training):
        majority = 1
    elif 2 * ones < len(training):
        majority = 0
    else:
        majority = tie_value
    test = w.values[r - t :]
    return sum(1 for v in test if v == majority) / t


def forecast(
    w: BinarySeries,
    t: int,
    order: int,
    *,
    min_releases: int = 25,
    min_std: float = 0.25,
    ridge_fallback: bool = False,
    full_sample: bool = False,
    tie_value: int = 1,
) -> ForecastReport:
    """One-step-ahead forecasts for the last t releases.

    Coefficients are estimated on the prefix before the test window
    (``full_sample=True`` instead fits on the whole series, for
    sensitivity checks); test-window predictions always condition on the
    actual observed lag values.
    """
    verdict = eligibility(w, t, order, min_releases=min_releases, min_std=min_std)
    if not verdict.eligible:
        raise NotEligibleError(f"{w.package!r}: {verdict.reason}")
    r = len(w.values)
    fit_source = w if full_sample else BinarySeries(w.package, w.values[: r - t])
    try:
        model = fit(build_lag_design(fit_source, order), ridge_fallback=ridge_fallback)
    except (SeparationError, SingularModelError, InsufficientDataError) as exc:
        raise ForecastError(f"{w.package!r}: training fit failed: {exc}") from exc
    probs = []
    actuals = []
    for i in range(r - t, r):
        lags = [w.values[i - k] for k in range(1, order + 1)]
        probs.append(predict(model, lags))
        actuals.append(w.values[i])
    abs_errors = tuple(abs(a - p) for a, p in zip(actuals, probs))
    flags = []
    if model.ridge:
        flags.append("ridge")
    if model.separation_detected:
        flags.append("separation")
    if full_sample:
        flags.append("full-sample")
    return ForecastReport(
        package=w.package,
        t=t,
        order=order,
        abs_errors=abs_errors,
        mean_abs_error=statistics.fmean(abs_errors),
        median_abs_error=statistics.median(abs_errors),
        max_abs_error=max(abs_errors),
        accuracy=threshold_accuracy(probs, actuals),
        naive_accuracy=naive_baseline(w, t, tie_value),
        converged=model.converged,
        flags=tuple(flags),
    )


def experiment_summary(
    reports: Sequence[ForecastReport],
) -> dict[int, HorizonSummary]:
    """Between-package averages per horizon, Table-style."""
    if not reports:
        raise InsufficientDataError("no forecast reports to summarize")
    by_horizon: dict[int, list[ForecastReport]] = {}
    for report in reports:
        by_horizon.setdefault(report.t, []).append(report)
    summaries = {}
    for t in sorted(by_horizon):
        group = by_horizon[t]
        summaries[t] = HorizonSummary(
            t=t,
            packages=len(group),
            mean_abs_error=statistics.fmean(r.mean_abs_error for r in group),
            median_abs_error=statistics.fmean(r.median_abs_error for r in group),
            max_abs_error=statistics.fmean(r.max_abs_error for r in group),
            accuracy=statistics.fmean(r.accuracy for r in group),
            naive_accuracy=statistics.fmean(r.naive_accuracy for r in group),
        )
    return summaries


def run_experiment(
    series: Sequence[BinarySeries],
    horizons: Sequence[int] = (5, 10),
    *,
    min_releases: int = 25,
    min_std: float = 0.25,
    max_order_fraction: float = 0.1,
    parsimony_margin: float = PARSIMONY_MARGIN,
    ridge_fallback: bool = False,
    full_sample: bool = False,
    tie_value: int = 1,
) -> ExperimentResult:
    """Select orders, filter, forecast, and summarize a whole corpus."""
    reports: list[ForecastReport] = []
    exclusions: list[ExclusionRecord] = []
    orders: dict[str, OrderSelection] = {}
    for w in sorted(series, key=lambda s: s.package):
        if len(w.values) < min_releases:
            exclusions.append(
                ExclusionRecord(
                    w.package, None, "too-few-releases", f"r={len(w.values)}"
                )
            )
            continue
        try:
            selection = select_order(
                w,
                max_order_fraction=max_order_fraction,
                ridge_fallback=ridge_fallback,
                parsimony_margin=parsimony_margin,
            )
        except OrderSelectionError as exc:
            exclusions.append(
                ExclusionRecord(w.package, None, "order-selection-failed", str(exc))
            )
            continue
        orders[w.package] = selection
        for t in horizons:
            verdict = eligibility(
                w, t, selection.order, min_releases=min_releases, min_std=min_std
            )
            if not verdict.eligible:
                detail = f"std={verdict.std:.4f}" if verdict.std is not None else ""
                exclusions.append(
                    ExclusionRecord(w.package, t, verdict.reason or "", detail)
                )
                continue
            try:
                reports.append(
                    forecast(
                        w,
                        t,
                        selection.order,
                        min_releases=min_releases,
                        min_std=min_std,
                        ridge_fallback=ridge_fallback,
                        full_sample=full_sample,
                        tie_value=tie_value,
                    )
                )
            except ForecastError as exc:
                exclusions.append(
                    ExclusionRecord(w.package, t, "forecast-failed", str(exc))
                )
    summaries = experiment_summary(reports) if reports else {}
    return ExperimentResult(
        reports=tuple(reports),
        exclusions=tuple(exclusions),
        summaries=summaries,
        orders=orders,
    )


def simulate(
    beta: Sequence[float],
    n: int,
    rng: random.Random,
    initial: Sequence[int] | None = None,
) -> list[int]:
    """Draw a series of length n from the autologistic generative model.

    ``beta[0]`` is the constant; ``beta[k]`` weights the value k steps
    back.  ``initial`` seeds the pre-series history (oldest first, the
    last element immediately precedes the series); it defaults to zeros.
    """
    order = len(beta) - 1
    if initial is not None and len(initial) != order:
        raise ValueError(f"expected {order} initial values, got {len(initial)}")
    past = list(initial) if initial is not None else [0] * order
    values: list[int] = []
    for _ in range(n):
        eta = beta[0]
        for k in range(1, order + 1):
            eta += beta[k] * past[-k]
        if eta >= 0:
            p = 1.0 / (1.0 + math.exp(-eta))
        else:
            expeta = math.exp(eta)
            p = expeta / (1.0 + expeta)
        draw = 1 if rng.random() < p else 0
        values.append(draw)
        past.append(draw)
    return values
