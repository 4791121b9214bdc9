"""Tests for the ARMA-GARCH model layer."""
import math
from collections import deque

import numpy as np
import pytest

from proteus.econometrics import (
    ArmaParams,
    GarchParams,
    ParameterViolation,
    RecursionState,
    RegimeModel,
    aic,
    log_likelihood,
    neutralize_mean,
    simulate,
    step,
    validate,
)
from proteus.errors import LikelihoodOverflowError, ModelValidationError, VarianceExplosionError


def test_validate_accepts_stationary_model():
    """Test that a well-formed parameter set passes."""
    report = validate(ArmaParams(0.0, (0.5,), (0.3,)), GarchParams(1e-6, (0.1,), (0.85,)))
    assert report.is_valid
    assert report.violations == ()


def test_validate_rejects_unit_root():
    """Test that phi = 1 is flagged as non-stationary."""
    report = validate(ArmaParams(0.0, (1.0,)), GarchParams(1.0))
    assert not report.is_valid
    assert ParameterViolation.AR_NONSTATIONARY in report.violations


def test_validate_rejects_explosive_coefficient():
    """Test that a huge AR coefficient is flagged."""
    report = validate(ArmaParams(0.0, (1e6,)), GarchParams(1.0))
    assert ParameterViolation.AR_NONSTATIONARY in report.violations


def test_validate_rejects_persistence_of_one():
    """Test that sum(alpha) + sum(beta) = 1 is flagged."""
    report = validate(ArmaParams(), GarchParams(1e-6, (0.15,), (0.85,)))
    assert report.violations == (ParameterViolation.INFINITE_VARIANCE,)


def test_validate_reports_every_violation():
    """Test that several violations are reported together."""
    report = validate(ArmaParams(), GarchParams(0.0, (-0.1,), (-0.2,)))
    assert set(report.violations) == {
        ParameterViolation.NON_POSITIVE_OMEGA,
        ParameterViolation.NEGATIVE_ARCH,
        ParameterViolation.NEGATIVE_GARCH,
    }
    assert len(report.messages) == 3


def test_validate_rejects_non_finite():
    """Test that NaN parameters are flagged."""
    report = validate(ArmaParams(float("nan")), GarchParams(1.0))
    assert report.violations == (ParameterViolation.NON_FINITE,)


def test_regime_model_construction_validates():
    """Test that an invalid model cannot be constructed."""
    with pytest.raises(ModelValidationError, match="state 2"):
        RegimeModel(2, ArmaParams(0.0, (1.0,)), GarchParams(1.0))
    with pytest.raises(ModelValidationError):
        RegimeModel(0, ArmaParams(), GarchParams(1.0))


def test_regime_model_helpers(garch_model):
    """Test orders and unconditional variance."""
    assert garch_model.orders == (1, 0, 1, 1)
    assert garch_model.unconditional_variance == pytest.approx(1e-6 / 0.05)
    assert garch_model.arma.is_stationary()


def test_neutralize_mean():
    """Test that only the constant term changes."""
    model = RegimeModel(3, ArmaParams(0.01, (0.2,)), GarchParams(1e-6, (0.1,), (0.8,)))
    neutral = neutralize_mean(model)
    assert neutral.arma.mu == 0.0
    assert neutral.arma.phi == model.arma.phi
    assert neutral.garch == model.garch
    assert neutral.state_id == 3


def test_log_likelihood_of_constant_series():
    """Test that a constant series at mu with omega 1 gives -n/2 ln(2 pi)."""
    n = 500
    series = np.full(n, 0.25)
    value = log_likelihood(ArmaParams(0.25), GarchParams(1.0, (0.0,), (0.0,)), series)
    assert value == pytest.approx(-n / 2 * math.log(2 * math.pi), rel=1e-12)


def test_log_likelihood_of_pure_noise_model():
    """Test the closed-form Gaussian likelihood of white noise."""
    rng = np.random.default_rng(3)
    series = rng.normal(0.0, 0.5, size=1_000)
    variance = float(np.var(series))
    value = log_likelihood(ArmaParams(), GarchParams(variance), series)
    expected = -0.5 * np.sum(np.log(2 * np.pi * variance) + series**2 / variance)
    assert value == pytest.approx(expected, rel=1e-12)


def test_log_likelihood_skips_presample_observations():
    """Test that an AR(2) model sums over t = 2 .. n-1."""
    rng = np.random.default_rng(4)
    series = rng.normal(size=300)
    arma = ArmaParams(0.1, (0.3, 0.1))
    residuals = series[2:] - 0.1 - 0.3 * series[1:-1] - 0.1 * series[:-2]
    expected = -0.5 * np.sum(np.log(2 * np.pi) + residuals**2)
    assert log_likelihood(arma, GarchParams(1.0), series) == pytest.approx(expected)


def test_log_likelihood_overflow():
    """Test that an overflowing recursion raises instead of returning inf."""
    series = np.full(300, 1e200)
    with pytest.raises(LikelihoodOverflowError):
        log_likelihood(ArmaParams(), GarchParams(1.0, (0.5,), (0.4,)), series)


def test_log_likelihood_rejects_short_series():
    """Test that a series no longer than the orders is rejected."""
    with pytest.raises(ValueError):
        log_likelihood(ArmaParams(0.0, (0.1, 0.1)), GarchParams(1.0), [0.1, 0.2])


def test_aic():
    """Test AIC = 2k - 2 ln L and its preconditions."""
    assert aic(3, -10.0) == 26.0
    assert aic(0, 5.0) == -10.0
    with pytest.raises(ValueError):
        aic(-1, 0.0)


def test_step_with_zero_coefficients():
    """Test that omega 4 and z 1.5 give a return of exactly 3."""
    model = RegimeModel(1, ArmaParams(), GarchParams(4.0, (0.0,), (0.0,)))
    state = RecursionState.initial(model)
    result = step(model, state, deque(), 1.5)
    assert result.simulated_return == 3.0
    assert result.sigma == 2.0
    assert result.conditional_mean == 0.0
    assert state.residuals[0] == 3.0
    assert state.variances[0] == 4.0
    assert state.steps_taken == 1


def test_step_uses_shared_history_and_own_residuals():
    """Test the conditional mean recursion."""
    model = RegimeModel(1, ArmaParams(0.1, (0.5,), (0.2,)), GarchParams(1.0))
    state = RecursionState(model, residuals=[2.0])
    result = step(model, state, deque([4.0]), 0.0)
    assert result.conditional_mean == pytest.approx(0.1 + 0.5 * 4.0 + 0.2 * 2.0)
    assert result.simulated_return == result.conditional_mean


def test_step_raises_on_variance_explosion():
    """Test that an infinite variance is reported with the state id."""
    model = RegimeModel(5, ArmaParams(), GarchParams(1.0, (0.5,), (0.4,)))
    state = RecursionState(model, residuals=[1e200])
    with pytest.raises(VarianceExplosionError) as exc_info:
        step(model, state, deque(), 0.0)
    assert exc_info.value.state_ids == (5,)


def test_handoff_copies_history():
    """Test that a handed-off state starts from the outgoing history."""
    model = RegimeModel(1, ArmaParams(0.0, (), (0.1,)), GarchParams(1.0, (0.1,), (0.8,)))
    state = RecursionState(model, residuals=[0.5], variances=[2.0])
    other = RegimeModel(2, ArmaParams(), GarchParams(1.0, (0.1, 0.1), (0.5,)))
    copied = state.handoff(other)
    assert list(copied.residuals) == [0.5, 0.0]
    assert list(copied.variances) == [2.0]
    assert copied is not state


def test_simulate_is_deterministic(garch_model):
    """Test that one seed gives one path."""
    first = simulate(garch_model, 1_000, seed=5)
    second = simulate(garch_model, 1_000, seed=5)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, simulate(garch_model, 1_000, seed=6))


@pytest.mark.slow
def test_simulate_pure_noise_variance():
    """Test that white noise has variance omega."""
    model = RegimeModel(1, ArmaParams(), GarchParams(2.5e-5))
    returns = simulate(model, 100_000, seed=17)
    assert np.var(returns) == pytest.approx(2.5e-5, rel=0.03)


@pytest.mark.slow
def test_simulate_ar1_autocorrelation():
    """Test that an AR(1) path without GARCH has lag-1 autocorrelation phi."""
    model = RegimeModel(1, ArmaParams(0.0, (0.6,)), GarchParams(1e-4))
    returns = simulate(model, 100_000, seed=29)
    lag1 = np.corrcoef(returns[:-1], returns[1:])[0, 1]
    assert lag1 == pytest.approx(0.6, abs=0.03)


@pytest.mark.slow
@pytest.mark.timeout(120)
def test_simulate_garch_variance_targeting():
    """Test that a GARCH(1,1) path has variance omega / (1 - alpha - beta)."""
    model = RegimeModel(1, ArmaParams(), GarchParams(1e-6, (0.10,), (0.85,)))
    returns = simulate(model, 200_000, seed=23)
    assert np.var(returns) == pytest.approx(model.unconditional_variance, rel=0.05)
