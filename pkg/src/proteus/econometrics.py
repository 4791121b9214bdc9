"""
ARMA-GARCH regime models.

A regime model couples an ARMA(p, q) conditional mean with a GARCH(p_g, q_g)
conditional variance driven by Gaussian innovations. This module owns the
parameter types, their validation, the Gaussian likelihood recursion and the
one-step-ahead simulator the stream generator is built on.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum, auto
from typing import Deque, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter, lfiltic
from typing_extensions import Self

from .errors import (
    LikelihoodOverflowError,
    ModelValidationError,
    VarianceExplosionError,
)

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
DEFAULT_BURN_IN_STEPS = 500


class Innovation(Enum):
    """Distribution of the standardized innovations z_t."""
    NORMAL = "normal"


class ParameterViolation(Enum):
    """Invariants an ARMA-GARCH parameter set can violate."""
    NON_FINITE = auto()
    AR_NONSTATIONARY = auto()
    NON_POSITIVE_OMEGA = auto()
    NEGATIVE_ARCH = auto()
    NEGATIVE_GARCH = auto()
    INFINITE_VARIANCE = auto()


@dataclass(frozen=True)
class ValidationReport:
    """Every invariant a parameter set violates, empty when valid."""
    violations: Tuple[ParameterViolation, ...] = ()
    messages: Tuple[str, ...] = ()

    @property
    def is_valid(self) -> bool:
        """Whether no invariant is violated."""
        return not self.violations


def _as_float_tuple(values: Iterable[float]) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ArmaParams:
    """
    Conditional-mean parameters.

    Attributes:
        mu: Constant term of the mean equation (log-return per bar)
        phi: AR coefficients, lag 1 first
        theta: MA coefficients, lag 1 first
    """
    mu: float = 0.0
    phi: Tuple[float, ...] = ()
    theta: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "phi", _as_float_tuple(self.phi))
        object.__setattr__(self, "theta", _as_float_tuple(self.theta))

    @property
    def p(self) -> int:
        """AR order."""
        return len(self.phi)

    @property
    def q(self) -> int:
        """MA order."""
        return len(self.theta)

    def ar_spectral_radius(self) -> float:
        """
        Spectral radius of the AR companion matrix.

        Returns:
            Largest root modulus of z^p - phi_1 z^(p-1) - ... - phi_p
        """
        if not self.phi or not all(math.isfinite(v) for v in self.phi):
            return 0.0 if not self.phi else math.inf
        roots = np.roots(np.concatenate(([1.0], -np.asarray(self.phi))))
        if roots.size == 0:
            return 0.0
        return float(np.max(np.abs(roots)))

    def is_stationary(self) -> bool:
        """Whether all AR roots lie strictly inside the unit circle."""
        return self.ar_spectral_radius() < 1.0


@dataclass(frozen=True)
class GarchParams:
    """
    Conditional-variance parameters.

    Attributes:
        omega: Baseline variance (squared return units)
        alpha: ARCH coefficients on lagged squared residuals, lag 1 first
        beta: GARCH coefficients on lagged variances, lag 1 first
    """
    omega: float = 1.0
    alpha: Tuple[float, ...] = ()
    beta: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "alpha", _as_float_tuple(self.alpha))
        object.__setattr__(self, "beta", _as_float_tuple(self.beta))

    @property
    def p(self) -> int:
        """ARCH order (p_g)."""
        return len(self.alpha)

    @property
    def q(self) -> int:
        """GARCH order (q_g)."""
        return len(self.beta)

    @property
    def persistence(self) -> float:
        """Sum of all ARCH and GARCH coefficients."""
        return math.fsum(self.alpha) + math.fsum(self.beta)

    @property
    def unconditional_variance(self) -> float:
        """Long-run variance omega / (1 - persistence)."""
        return self.omega / (1.0 - self.persistence)


def validate(arma: ArmaParams, garch: GarchParams) -> ValidationReport:
    """
    Check stationarity and positivity invariants without raising.

    Args:
        arma: Mean parameters to check
        garch: Variance parameters to check

    Returns:
        ValidationReport naming each violated invariant
    """
    violations: list[ParameterViolation] = []
    messages: list[str] = []

    def report(violation: ParameterViolation, message: str) -> None:
        violations.append(violation)
        messages.append(message)

    values = (arma.mu, *arma.phi, *arma.theta, garch.omega, *garch.alpha, *garch.beta)
    if not all(math.isfinite(v) for v in values):
        report(ParameterViolation.NON_FINITE, "Parameters must be finite")
        return ValidationReport(tuple(violations), tuple(messages))

    radius = arma.ar_spectral_radius()
    if radius >= 1.0:
        report(
            ParameterViolation.AR_NONSTATIONARY,
            f"AR polynomial is not stationary (spectral radius {radius:.6g})",
        )
    if garch.omega <= 0.0:
        report(ParameterViolation.NON_POSITIVE_OMEGA, "omega must be positive")
    if any(a < 0.0 for a in garch.alpha):
        report(ParameterViolation.NEGATIVE_ARCH, "ARCH coefficients must be >= 0")
    if any(b < 0.0 for b in garch.beta):
        report(ParameterViolation.NEGATIVE_GARCH, "GARCH coefficients must be >= 0")
    if garch.persistence >= 1.0:
        report(
            ParameterViolation.INFINITE_VARIANCE,
            f"sum(alpha) + sum(beta) must be < 1 (got {garch.persistence:.6g})",
        )
    return ValidationReport(tuple(violations), tuple(messages))


@dataclass(frozen=True)
class RegimeModel:
    """
    One fitted generative process representing a market state.

    Construction validates the parameters, so a RegimeModel that exists is
    always stationary with finite unconditional variance.
    """
    state_id: int
    arma: ArmaParams
    garch: GarchParams
    innovation: Innovation = Innovation.NORMAL

    def __post_init__(self) -> None:
        """Validate the model after initialization."""
        if isinstance(self.state_id, bool) or int(self.state_id) != self.state_id:
            raise ModelValidationError(f"State id must be an integer: {self.state_id}")
        if self.state_id < 1:
            raise ModelValidationError(f"State id must be >= 1: {self.state_id}")
        object.__setattr__(self, "state_id", int(self.state_id))
        result = validate(self.arma, self.garch)
        if not result.is_valid:
            raise ModelValidationError(
                f"Invalid parameters for state {self.state_id}: "
                + "; ".join(result.messages)
            )

    @property
    def orders(self) -> Tuple[int, int, int, int]:
        """(p, q, p_g, q_g)."""
        return (self.arma.p, self.arma.q, self.garch.p, self.garch.q)

    @property
    def unconditional_variance(self) -> float:
        """Long-run variance of the simulated returns' innovations."""
        return self.garch.unconditional_variance


def neutralize_mean(model: RegimeModel) -> RegimeModel:
    """Return a copy of the model with its constant mean term set to zero."""
    return replace(model, arma=replace(model.arma, mu=0.0))


def arma_residuals(arma: ArmaParams, returns: np.ndarray) -> np.ndarray:
    """
    Filter ARMA residuals over the usable range t = p .. n-1.

    Pre-sample residuals are zero.

    Args:
        arma: Mean parameters
        returns: Return series

    Returns:
        Residuals, one per usable observation
    """
    r = np.asarray(returns, dtype=float)
    p = arma.p
    n = r.shape[0]
    innovations = r[p:] - arma.mu
    for lag, phi in enumerate(arma.phi, start=1):
        innovations = innovations - phi * r[p - lag:n - lag]
    if arma.q == 0:
        return innovations
    return lfilter([1.0], np.concatenate(([1.0], arma.theta)), innovations)


def garch_variances(garch: GarchParams, residuals: np.ndarray) -> np.ndarray:
    """
    Run the GARCH variance recursion over a residual series.

    Pre-sample residuals are zero and pre-sample variances equal the sample
    variance of the residuals.

    Args:
        garch: Variance parameters
        residuals: Residual series

    Returns:
        Conditional variances aligned with the residuals
    """
    eps = np.asarray(residuals, dtype=float)
    drive = np.full(eps.shape[0], garch.omega)
    if garch.p:
        drive = drive + lfilter(np.concatenate(([0.0], garch.alpha)), [1.0], eps * eps)
    if garch.q == 0:
        return drive
    denominator = np.concatenate(([1.0], -np.asarray(garch.beta)))
    presample = float(np.var(eps)) if eps.size else 0.0
    initial = lfiltic([1.0], denominator, np.full(garch.q, presample))
    variances, _ = lfilter([1.0], denominator, drive, zi=initial)
    return variances


def gaussian_log_likelihood(residuals: np.ndarray, variances: np.ndarray) -> float:
    """
    Sum of Gaussian log densities of residuals under given variances.

    Raises:
        LikelihoodOverflowError: If a variance is not positive and finite or
            the sum is not finite
    """
    if variances.size and not (
        np.all(np.isfinite(variances)) and np.all(variances > 0.0)
    ):
        raise LikelihoodOverflowError("likelihood overflow: invalid conditional variance")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        terms = LOG_2PI + np.log(variances) + residuals * residuals / variances
        value = -0.5 * float(np.sum(terms))
    if not math.isfinite(value):
        raise LikelihoodOverflowError("likelihood overflow: non-finite log-likelihood")
    return value


def log_likelihood(arma: ArmaParams, garch: GarchParams, returns: Sequence[float]) -> float:
    """
    Gaussian ARMA-GARCH log-likelihood of a return series.

    Args:
        arma: Mean parameters
        garch: Variance parameters
        returns: Return series, longer than every model order

    Returns:
        Log-likelihood summed over t = p .. n-1

    Raises:
        ValueError: If the series is too short for the orders
        LikelihoodOverflowError: If the recursion blows up
    """
    r = np.asarray(returns, dtype=float)
    longest_order = max(arma.p, arma.q, garch.p, garch.q)
    if r.ndim != 1 or r.shape[0] <= longest_order:
        raise ValueError(
            f"Series of length {r.shape[0]} is too short for order {longest_order}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        residuals = arma_residuals(arma, r)
        if not np.all(np.isfinite(residuals)):
            raise LikelihoodOverflowError("likelihood overflow: non-finite residuals")
        variances = garch_variances(garch, residuals)
    return gaussian_log_likelihood(residuals, variances)


def aic(k: int, log_likelihood: float) -> float:
    """
    Akaike Information Criterion, 2k - 2 ln L.

    Args:
        k: Number of estimated parameters
        log_likelihood: Maximized log-likelihood

    Returns:
        AIC value, lower is better
    """
    if k < 0:
        raise ValueError(f"Parameter count must be >= 0: {k}")
    return 2 * k - 2 * log_likelihood


class StepResult(NamedTuple):
    """Output of one simulation step."""
    conditional_mean: float
    sigma: float
    simulated_return: float


class RecursionState:
    """
    Residual and variance history of one model during simulation.

    Histories are stored most recent first. A state has a single owner and is
    mutated in place by ``step``.
    """

    def __init__(
        self,
        model: RegimeModel,
        residuals: Sequence[float] = (),
        variances: Sequence[float] = (),
    ) -> None:
        """
        Initialize the state.

        Args:
            model: Model whose orders size the histories
            residuals: Most recent residuals, padded with zeros
            variances: Most recent variances, padded with the model's
                unconditional variance
        """
        residual_depth = max(model.arma.q, model.garch.p)
        variance_depth = model.garch.q
        padded_residuals = list(residuals[:residual_depth])
        padded_residuals += [0.0] * (residual_depth - len(padded_residuals))
        padded_variances = list(variances[:variance_depth])
        padded_variances += [model.unconditional_variance] * (
            variance_depth - len(padded_variances)
        )
        self.residuals: Deque[float] = deque(padded_residuals, maxlen=residual_depth)
        self.variances: Deque[float] = deque(padded_variances, maxlen=variance_depth)
        self.steps_taken = 0

    @classmethod
    def initial(cls, model: RegimeModel) -> Self:
        """Zero residuals and unconditional variances."""
        return cls(model)

    def handoff(self, model: RegimeModel) -> "RecursionState":
        """
        Seed a state for another model from this history.

        Args:
            model: Model that takes over

        Returns:
            New state sharing this state's most recent residuals and variances
        """
        return RecursionState(model, list(self.residuals), list(self.variances))


def step(
    model: RegimeModel,
    state: RecursionState,
    ar_input: Iterable[float],
    z: float,
) -> StepResult:
    """
    Advance one model by one step.

    Args:
        model: Generative process
        state: The model's own recursion state, updated in place
        ar_input: Shared lagged returns, most recent first
        z: Standard-normal innovation

    Returns:
        Conditional mean, conditional standard deviation and simulated return

    Raises:
        VarianceExplosionError: If the conditional variance is not finite
    """
    garch = model.garch
    variance = garch.omega
    for alpha, residual in zip(garch.alpha, state.residuals):
        variance += alpha * residual * residual
    for beta, past_variance in zip(garch.beta, state.variances):
        variance += beta * past_variance
    if not math.isfinite(variance) or variance <= 0.0:
        raise VarianceExplosionError(state.steps_taken, (model.state_id,))

    arma = model.arma
    mean = arma.mu
    for phi, lagged_return in zip(arma.phi, ar_input):
        mean += phi * lagged_return
    for theta, residual in zip(arma.theta, state.residuals):
        mean += theta * residual

    sigma = math.sqrt(variance)
    simulated = mean + sigma * z
    state.residuals.appendleft(simulated - mean)
    state.variances.appendleft(variance)
    state.steps_taken += 1
    return StepResult(mean, sigma, simulated)


def burn_in(
    model: RegimeModel,
    n_steps: int,
    rng: np.random.Generator,
    history_depth: Optional[int] = None,
) -> Tuple[RecursionState, Deque[float]]:
    """
    Warm up a model on its own output.

    Args:
        model: Model to warm up
        n_steps: Number of private steps
        rng: Source of the private innovations
        history_depth: Length of the returned return history

    Returns:
        The warmed-up state and its own returns, most recent first
    """
    depth = max(model.arma.p, history_depth or 0, 1)
    state = RecursionState.initial(model)
    history: Deque[float] = deque(maxlen=depth)
    for z in rng.standard_normal(n_steps):
        result = step(model, state, history, float(z))
        history.appendleft(result.simulated_return)
    state.steps_taken = 0
    return state, history


def simulate(
    model: RegimeModel,
    n_steps: int,
    seed: int = 0,
    burn_in_steps: int = DEFAULT_BURN_IN_STEPS,
) -> np.ndarray:
    """
    Simulate a single-regime return path.

    Args:
        model: Generative process
        n_steps: Number of returns to emit
        seed: Seed of the innovation stream
        burn_in_steps: Discarded leading steps

    Returns:
        Array of simulated returns
    """
    if n_steps < 0 or burn_in_steps < 0:
        raise ValueError("Step counts must be >= 0")
    rng = np.random.default_rng(seed)
    state, history = burn_in(model, burn_in_steps, rng)
    returns = np.empty(n_steps)
    for t, z in enumerate(rng.standard_normal(n_steps)):
        try:
            result = step(model, state, history, float(z))
        except VarianceExplosionError as e:
            raise VarianceExplosionError(t, (model.state_id,)) from e
        returns[t] = result.simulated_return
        history.appendleft(result.simulated_return)
    logger.debug("Simulated %d steps from state %d", n_steps, model.state_id)
    return returns
