"""
Grid-search fitting of ARMA-GARCH regime models.

Every candidate order combination is estimated on the standardized series in
two stages. The ARMA mean is fitted first by conditional sum of squares, then
the GARCH variance is fitted by Gaussian maximum likelihood on the ARMA
residuals. Parameters are mapped back to return units and the candidate with
the lowest AIC wins.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import (
    Callable,
    Dict,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np
from scipy.optimize import minimize

from .econometrics import (
    ArmaParams,
    GarchParams,
    RegimeModel,
    aic,
    arma_residuals,
    garch_variances,
    gaussian_log_likelihood,
    log_likelihood,
    validate,
)
from .errors import (
    ConfigError,
    DegenerateInputError,
    FitError,
    LikelihoodOverflowError,
)
from .worker_pool import ProgressCallback, run_ordered

logger = logging.getLogger(__name__)

MAX_ORDER = 25
DEFAULT_MIN_LENGTH = 200
# Starting split of GARCH persistence between ARCH and GARCH terms
INITIAL_ARCH_SHARE = 0.05
INITIAL_GARCH_SHARE = 0.85
# Raw optimizer coordinates are clipped so the objective is flat beyond them
PACF_BOUND = 7.0
LOGIT_BOUND = 20.0


class ModelOrders(NamedTuple):
    """Lag orders (p, q, p_g, q_g) of one grid candidate."""
    p: int
    q: int
    p_g: int
    q_g: int

    @property
    def parameter_count(self) -> int:
        """Estimated parameters: mu, AR, MA, omega, ARCH and GARCH terms."""
        return 2 + self.p + self.q + self.p_g + self.q_g


def _as_orders(name: str, values: Sequence[int], limit: int) -> Tuple[int, ...]:
    orders = tuple(sorted(set(int(v) for v in values)))
    if not orders:
        raise ConfigError(f"Grid for {name} orders is empty")
    if orders[0] < 0 or orders[-1] > limit:
        raise ConfigError(f"{name} orders must lie in [0, {limit}]: {orders}")
    return orders


@dataclass(frozen=True)
class GridConfig:
    """
    Candidate order ranges for the grid search.

    Attributes:
        ar_orders: Candidate p values
        ma_orders: Candidate q values
        arch_orders: Candidate p_g values
        garch_orders: Candidate q_g values
        min_length: Shortest series accepted for fitting
        max_order: Largest lag accepted in any range
    """
    ar_orders: Tuple[int, ...] = tuple(range(0, 6))
    ma_orders: Tuple[int, ...] = tuple(range(0, 6))
    arch_orders: Tuple[int, ...] = tuple(range(1, 4))
    garch_orders: Tuple[int, ...] = tuple(range(1, 4))
    min_length: int = DEFAULT_MIN_LENGTH
    max_order: int = MAX_ORDER

    def __post_init__(self) -> None:
        limit = self.max_order
        object.__setattr__(self, "ar_orders", _as_orders("AR", self.ar_orders, limit))
        object.__setattr__(self, "ma_orders", _as_orders("MA", self.ma_orders, limit))
        object.__setattr__(
            self, "arch_orders", _as_orders("ARCH", self.arch_orders, limit)
        )
        object.__setattr__(
            self, "garch_orders", _as_orders("GARCH", self.garch_orders, limit)
        )
        if self.min_length < 1:
            raise ConfigError(f"Minimum fit length must be >= 1: {self.min_length}")

    @classmethod
    def from_ranges(
        cls,
        arma_orders: Sequence[int],
        garch_orders: Sequence[int],
        min_length: int = DEFAULT_MIN_LENGTH,
    ) -> "GridConfig":
        """Use one range for p and q and another for p_g and q_g."""
        return cls(
            ar_orders=tuple(arma_orders),
            ma_orders=tuple(arma_orders),
            arch_orders=tuple(garch_orders),
            garch_orders=tuple(garch_orders),
            min_length=min_length,
        )

    def candidates(self) -> Iterator[ModelOrders]:
        """Yield every order combination in lexicographic order."""
        for orders in itertools.product(
            self.ar_orders, self.ma_orders, self.arch_orders, self.garch_orders
        ):
            yield ModelOrders(*orders)

    def __len__(self) -> int:
        return (
            len(self.ar_orders)
            * len(self.ma_orders)
            * len(self.arch_orders)
            * len(self.garch_orders)
        )


@dataclass(frozen=True)
class OptimizerConfig:
    """Nelder-Mead settings shared by both fitting stages."""
    max_iterations: int = 2000
    tolerance: float = 1e-8
    max_restarts: int = 3

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1: {self.max_iterations}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be > 0: {self.tolerance}")
        if self.max_restarts < 0:
            raise ConfigError(f"max_restarts must be >= 0: {self.max_restarts}")


@dataclass(frozen=True)
class GridCandidate:
    """Outcome of one candidate; aic is None when the candidate failed."""
    orders: ModelOrders
    aic: Optional[float]
    log_likelihood: Optional[float] = None
    converged: bool = False
    iterations: int = 0
    failure: str = ""

    @property
    def succeeded(self) -> bool:
        """Whether the candidate produced a valid, converged model."""
        return self.aic is not None


@dataclass(frozen=True)
class FitReport:
    """The selected model and the full grid that led to it."""
    model: RegimeModel
    log_likelihood: float
    k: int
    aic: float
    grid: Tuple[GridCandidate, ...] = field(default_factory=tuple)
    converged: bool = True
    iterations: int = 0

    @property
    def orders(self) -> ModelOrders:
        """Orders of the selected model."""
        return ModelOrders(*self.model.orders)


class _Estimate(NamedTuple):
    x: np.ndarray
    converged: bool
    iterations: int


class _ArmaFit(NamedTuple):
    constant: float
    phi: Tuple[float, ...]
    theta: Tuple[float, ...]
    residuals: np.ndarray
    converged: bool
    iterations: int


class _CandidateOutcome(NamedTuple):
    candidate: GridCandidate
    model: Optional[RegimeModel]


def pacf_to_coefficients(partials: Sequence[float]) -> Tuple[float, ...]:
    """
    Map partial autocorrelations in (-1, 1) onto stationary AR coefficients.

    Args:
        partials: Partial autocorrelations, lag 1 first

    Returns:
        AR coefficients whose polynomial has all roots outside the unit circle
    """
    coefficients: List[float] = []
    for k, partial_k in enumerate(partials):
        coefficients = [
            coefficients[j] - partial_k * coefficients[k - 1 - j] for j in range(k)
        ] + [float(partial_k)]
    return tuple(coefficients)


def _minimize(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    optimizer: OptimizerConfig,
) -> _Estimate:
    """Nelder-Mead with restarts from the best point on non-convergence."""
    x = np.asarray(x0, dtype=float)
    start_value = objective(x)
    magnitude = abs(start_value) if math.isfinite(start_value) else 1.0
    fatol = optimizer.tolerance * max(1.0, magnitude)
    options = {
        "maxiter": optimizer.max_iterations,
        "xatol": math.sqrt(optimizer.tolerance),
        "fatol": fatol,
        "adaptive": x.size > 4,
    }
    iterations = 0
    converged = False
    for attempt in range(optimizer.max_restarts + 1):
        result = minimize(objective, x, method="Nelder-Mead", options=options)
        iterations += int(result.nit)
        if math.isfinite(result.fun) and result.fun <= objective(x):
            x = np.asarray(result.x, dtype=float)
        if result.success and math.isfinite(result.fun):
            converged = True
            break
        logger.debug("Restarting optimizer (attempt %d): %s", attempt + 1, result.message)
    return _Estimate(x, converged, iterations)


def _unpack_arma(x: np.ndarray, p: int, q: int) -> Tuple[float, Tuple[float, ...], Tuple[float, ...]]:
    constant = float(x[0])
    partials = np.tanh(np.clip(x[1:1 + p + q], -PACF_BOUND, PACF_BOUND))
    phi = pacf_to_coefficients(partials[:p])
    theta = tuple(-c for c in pacf_to_coefficients(partials[p:]))
    return constant, phi, theta


def _fit_arma(
    series: np.ndarray, p: int, q: int, optimizer: OptimizerConfig
) -> _ArmaFit:
    """Conditional sum of squares over stationary, invertible coefficients."""
    usable = series.shape[0] - p

    def objective(x: np.ndarray) -> float:
        constant, phi, theta = _unpack_arma(x, p, q)
        with np.errstate(over="ignore", invalid="ignore"):
            residuals = arma_residuals(ArmaParams(constant, phi, theta), series)
            ssr = float(np.dot(residuals, residuals))
        if not math.isfinite(ssr) or ssr <= 0.0:
            return math.inf
        return 0.5 * usable * math.log(ssr / usable)

    estimate = _minimize(objective, np.zeros(1 + p + q), optimizer)
    constant, phi, theta = _unpack_arma(estimate.x, p, q)
    residuals = arma_residuals(ArmaParams(constant, phi, theta), series)
    return _ArmaFit(
        constant, phi, theta, residuals, estimate.converged, estimate.iterations
    )


def _unpack_garch(x: np.ndarray, p_g: int, q_g: int) -> GarchParams:
    logits = np.concatenate((np.clip(x[1:], -LOGIT_BOUND, LOGIT_BOUND), [0.0]))
    weights = np.exp(logits - np.max(logits))
    weights /= np.sum(weights)
    return GarchParams(
        omega=math.exp(x[0]),
        alpha=weights[:p_g],
        beta=weights[p_g:p_g + q_g],
    )


def _fit_garch(
    residuals: np.ndarray, p_g: int, q_g: int, optimizer: OptimizerConfig
) -> Tuple[GarchParams, bool, int]:
    """Gaussian MLE with positive omega and persistence kept below one."""

    def objective(x: np.ndarray) -> float:
        if not np.all(np.isfinite(x)) or x[0] > 700.0:
            return math.inf
        garch = _unpack_garch(x, p_g, q_g)
        with np.errstate(over="ignore", invalid="ignore"):
            variances = garch_variances(garch, residuals)
        try:
            return -gaussian_log_likelihood(residuals, variances)
        except LikelihoodOverflowError:
            return math.inf

    arch_share = INITIAL_ARCH_SHARE if p_g else 0.0
    garch_share = INITIAL_GARCH_SHARE if q_g else 0.0
    slack = 1.0 - arch_share - garch_share
    start_weights = [arch_share / p_g] * p_g + [garch_share / q_g] * q_g
    variance = float(np.var(residuals)) or 1.0
    x0 = np.array(
        [math.log(variance * slack)] + [math.log(w / slack) for w in start_weights]
    )
    estimate = _minimize(objective, x0, optimizer)
    return _unpack_garch(estimate.x, p_g, q_g), estimate.converged, estimate.iterations


def _evaluate_candidate(
    returns: np.ndarray,
    location: float,
    scale: float,
    arma_fit: Optional[_ArmaFit],
    orders: ModelOrders,
    optimizer: OptimizerConfig,
    state_id: int,
) -> _CandidateOutcome:
    """Fit the variance stage of one candidate and score it on raw returns."""
    if arma_fit is None:
        return _CandidateOutcome(GridCandidate(orders, None, failure="ARMA stage failed"), None)
    garch_std, garch_converged, garch_iterations = _fit_garch(
        arma_fit.residuals, orders.p_g, orders.q_g, optimizer
    )
    iterations = arma_fit.iterations + garch_iterations
    converged = arma_fit.converged and garch_converged
    if not converged:
        return _CandidateOutcome(
            GridCandidate(orders, None, None, False, iterations, "did not converge"),
            None,
        )

    arma = ArmaParams(
        mu=location * (1.0 - math.fsum(arma_fit.phi)) + scale * arma_fit.constant,
        phi=arma_fit.phi,
        theta=arma_fit.theta,
    )
    garch = GarchParams(
        omega=garch_std.omega * scale * scale,
        alpha=garch_std.alpha,
        beta=garch_std.beta,
    )
    report = validate(arma, garch)
    if not report.is_valid:
        return _CandidateOutcome(
            GridCandidate(orders, None, None, True, iterations, "; ".join(report.messages)),
            None,
        )
    try:
        value = log_likelihood(arma, garch, returns)
    except LikelihoodOverflowError as e:
        return _CandidateOutcome(
            GridCandidate(orders, None, None, True, iterations, str(e)), None
        )
    candidate = GridCandidate(
        orders, aic(orders.parameter_count, value), value, True, iterations
    )
    return _CandidateOutcome(candidate, RegimeModel(state_id, arma, garch))


def _selection_key(outcome: _CandidateOutcome) -> Tuple[float, int, ModelOrders]:
    candidate = outcome.candidate
    assert candidate.aic is not None
    return (candidate.aic, candidate.orders.parameter_count, candidate.orders)


def fit(
    returns: Sequence[float],
    grid: GridConfig = GridConfig(),
    optimizer: OptimizerConfig = OptimizerConfig(),
    state_id: int = 1,
    series_name: str = "returns",
    workers: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> FitReport:
    """
    Select and fit the lowest-AIC ARMA-GARCH model over an order grid.

    Args:
        returns: Log-return series
        grid: Candidate orders
        optimizer: Optimizer settings
        state_id: State id given to the fitted model
        series_name: Name used in error messages
        workers: Threads used to evaluate candidates
        progress_callback: Receives (percent, message) as candidates finish

    Returns:
        FitReport with the selected model and every candidate's AIC

    Raises:
        FitError: If the series is too short or every candidate fails
        DegenerateInputError: If the series has zero variance
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.shape[0] < grid.min_length:
        raise FitError(
            f"Series '{series_name}' has {r.size} observations, "
            f"at least {grid.min_length} are required"
        )
    if not np.all(np.isfinite(r)):
        bad = int(np.flatnonzero(~np.isfinite(r))[0])
        raise FitError(f"Series '{series_name}' has a non-finite value at index {bad}")
    location = float(np.mean(r))
    scale = float(np.std(r))
    if scale == 0.0 or scale <= 1e-12 * abs(location):
        raise DegenerateInputError(f"Series '{series_name}' has zero variance")
    standardized = (r - location) / scale

    logger.info(
        "Fitting %d candidates for '%s' (%d observations)", len(grid), series_name, r.size
    )
    arma_keys = list(itertools.product(grid.ar_orders, grid.ma_orders))
    arma_results = run_ordered(
        [partial(_fit_arma, standardized, p, q, optimizer) for p, q in arma_keys],
        workers=workers,
        label="ARMA fit",
    )
    arma_fits: Dict[Tuple[int, int], Optional[_ArmaFit]] = {}
    for key, arma_fit in zip(arma_keys, arma_results):
        arma_fits[key] = arma_fit if arma_fit.converged else None
        if not arma_fit.converged:
            logger.debug("ARMA%s did not converge for '%s'", key, series_name)

    candidates = list(grid.candidates())
    outcomes = run_ordered(
        [
            partial(
                _evaluate_candidate,
                r,
                location,
                scale,
                arma_fits[(orders.p, orders.q)],
                orders,
                optimizer,
                state_id,
            )
            for orders in candidates
        ],
        workers=workers,
        progress_callback=progress_callback,
        label="Candidate",
    )
    for outcome in outcomes:
        candidate = outcome.candidate
        if candidate.succeeded:
            logger.debug("%s: AIC %.6f", tuple(candidate.orders), candidate.aic)
        else:
            logger.debug("%s failed: %s", tuple(candidate.orders), candidate.failure)

    succeeded = [outcome for outcome in outcomes if outcome.model is not None]
    if not succeeded:
        raise FitError(
            f"No candidate converged for '{series_name}' over grid "
            f"p={list(grid.ar_orders)} q={list(grid.ma_orders)} "
            f"p_g={list(grid.arch_orders)} q_g={list(grid.garch_orders)}"
        )
    best = min(succeeded, key=_selection_key)
    assert best.model is not None and best.candidate.aic is not None
    assert best.candidate.log_likelihood is not None
    logger.info(
        "Selected orders %s for '%s' (AIC %.6f)",
        tuple(best.candidate.orders),
        series_name,
        best.candidate.aic,
    )
    return FitReport(
        model=best.model,
        log_likelihood=best.candidate.log_likelihood,
        k=best.candidate.orders.parameter_count,
        aic=best.candidate.aic,
        grid=tuple(outcome.candidate for outcome in outcomes),
        converged=True,
        iterations=best.candidate.iterations,
    )
