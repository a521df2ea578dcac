from dataclasses import replace
from typing import Tuple

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid
from scipy.stats import norm

from src.config_parameters import FitConfig, InferenceConfig, OptimizerConfig, SplineConfig
from src.enums.panel_enums import BandMethod
from src.estimator import FitResult, ProfileResult, SieveEstimator
from src.inference import (
    ModelSelectionError,
    SingularCurvatureError,
    aic_bic,
    baseline_band,
    infer,
    lambda_variance,
    profile_sandwich,
    sandwich_cov,
    select_model,
    wald_summary,
)
from src.panel_data import PanelDataset
from src.simulation import SCENARIO_2, gen_dataset


def _quadratic_profile(centers: np.ndarray, curvature: np.ndarray):
    def profile(b: np.ndarray) -> ProfileResult:
        offsets = np.atleast_2d(b - centers.reshape(len(centers), -1))
        subject = -0.5 * np.einsum("ij,jk,ik->i", offsets, curvature, offsets)
        return ProfileResult(float(subject.sum()), np.asarray(b, dtype=float), subject, True)

    return profile


@pytest.fixture(scope="module")
def fitted(scenario2_data: PanelDataset) -> Tuple[SieveEstimator, FitResult]:
    config = FitConfig(cutpoints=SCENARIO_2.cutpoints, inference=InferenceConfig(max_workers=2))
    estimator = SieveEstimator(scenario2_data, config)
    return estimator, estimator.fit()


def test_scalar_sandwich_matches_closed_form() -> None:
    centers = np.random.default_rng(5).normal(0.3, 1.0, size=20)
    h = 0.1
    b0 = float(centers.mean())
    profile = _quadratic_profile(centers, np.eye(1))
    cov = profile_sandwich(profile, [b0], h)

    scores = (centers - b0) - h / 2.0
    assert cov.shape == (1, 1)
    assert cov[0, 0] == pytest.approx(np.sum(scores**2) / 20**2, rel=1e-8)


def test_two_dimensional_sandwich() -> None:
    rng = np.random.default_rng(9)
    centers = rng.normal(size=(30, 2))
    curvature = np.array([[2.0, 0.5], [0.5, 1.0]])
    b0 = centers.mean(axis=0)
    h = 0.05
    cov = profile_sandwich(_quadratic_profile(centers, curvature), b0, h, max_workers=3)

    scores = -(b0 - centers) @ curvature - h * np.diag(curvature) / 2.0
    bread = np.linalg.inv(30 * curvature)
    expected = bread @ (scores.T @ scores) @ bread
    np.testing.assert_allclose(cov, expected, rtol=1e-6)
    np.testing.assert_allclose(cov, cov.T)


def test_singular_curvature() -> None:
    centers = np.linspace(-1.0, 1.0, 20)
    collinear = np.ones((2, 2))
    profile = _quadratic_profile(np.column_stack((centers, np.zeros(20))), collinear)
    with pytest.raises(SingularCurvatureError) as excinfo:
        profile_sandwich(profile, [0.0, 0.0], 0.1)
    assert excinfo.value.condition > 1e12

    fallback = profile_sandwich(profile, [0.0, 0.0], 0.1, strict=False)
    assert np.all(np.isfinite(fallback))


def test_wald_summary(fitted: Tuple[SieveEstimator, FitResult]) -> None:
    _, fit = fitted
    fit = replace(fit, beta=np.array([0.5, -0.1]))
    table = wald_summary(fit, np.diag([0.01, 0.04]))
    assert list(table.columns) == ["covariate", "estimate", "se", "ci_lower", "ci_upper", "z", "p_value"]
    assert list(table["covariate"]) == ["x1", "x2"]
    assert table["se"].tolist() == pytest.approx([0.1, 0.2])
    assert table["ci_lower"].tolist() == pytest.approx([0.5 - 0.196, -0.1 - 0.392])
    assert table["z"].tolist() == pytest.approx([5.0, -0.5])
    assert table["p_value"].tolist() == pytest.approx([2 * norm.sf(5.0), 2 * norm.sf(0.5)])


def test_aic_bic(fitted: Tuple[SieveEstimator, FitResult]) -> None:
    _, fit = fitted
    aic, bic = aic_bic(fit)
    q = 7
    assert aic == pytest.approx(-2 * fit.loglik + 2 * q)
    assert bic == pytest.approx(-2 * fit.loglik + q * np.log(fit.n_observations))


def test_profile_is_locally_concave(fitted: Tuple[SieveEstimator, FitResult]) -> None:
    estimator, fit = fitted
    h = 0.05
    center = estimator.profile_nuisance(fit.beta, fit.theta).value
    for i in range(fit.beta.size):
        step = h * np.eye(fit.beta.size)[i]
        upper = estimator.profile_nuisance(fit.beta + step, fit.theta).value
        lower = estimator.profile_nuisance(fit.beta - step, fit.theta).value
        assert upper + lower - 2.0 * center < 0.0


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_sandwich_and_criteria_on_simulated_data(seed: int) -> None:
    dataset = gen_dataset(SCENARIO_2, 150, seed=seed)
    config = FitConfig(spline=SplineConfig(interior_knots=1, order=2), cutpoints=SCENARIO_2.cutpoints)
    estimator = SieveEstimator(dataset, config)
    fit = estimator.fit()
    assert fit.converged

    cov = sandwich_cov(estimator, fit)
    assert cov.shape == (2, 2)
    np.testing.assert_allclose(cov, cov.T, rtol=1e-10)
    assert np.all(np.linalg.eigvalsh(cov) > 0.0)

    aic, bic = aic_bic(fit)
    q = 2 + 3
    assert aic == pytest.approx(-2 * fit.loglik + 2 * q)
    assert bic == pytest.approx(-2 * fit.loglik + q * np.log(dataset.n_observations))


def test_band_methods_agree_for_diagonal_covariance(fitted: Tuple[SieveEstimator, FitResult]) -> None:
    _, fit = fitted
    cov = np.diag(np.linspace(0.1, 0.5, fit.alpha.size))
    t = np.linspace(0.0, 10.0, 11)
    diagonal = lambda_variance(fit, cov, t, BandMethod.DIAGONAL)
    full = lambda_variance(fit, cov, t, BandMethod.FULL_DELTA)
    np.testing.assert_allclose(diagonal, full, atol=1e-12)
    assert diagonal[0] == pytest.approx(0.0, abs=1e-12)
    assert diagonal[-1] == pytest.approx(np.trace(cov))


def test_band_without_covariance(fitted: Tuple[SieveEstimator, FitResult]) -> None:
    _, fit = fitted
    band = baseline_band(fit, None, [0.0, 5.0, 10.0])
    assert band["lambda"].iloc[-1] == pytest.approx(fit.alpha.sum())
    assert band["se"].isna().all()


def test_band_intensity_integrates_to_mean(fitted: Tuple[SieveEstimator, FitResult]) -> None:
    _, fit = fitted
    band = baseline_band(fit, None, np.linspace(0.0, 10.0, 2001))
    assert (band["intensity"] >= 0).all()
    area = trapezoid(band["intensity"], band["t"])
    assert area == pytest.approx(band["lambda"].iloc[-1], rel=1e-3)


def test_full_inference(fitted: Tuple[SieveEstimator, FitResult]) -> None:
    estimator, fit = fitted
    result = infer(estimator, fit)

    assert result.covariance.shape == (2, 2)
    np.testing.assert_allclose(result.covariance, result.covariance.T)
    assert np.all(np.linalg.eigvalsh(result.covariance) >= -1e-12)
    assert 0.02 < result.standard_errors[0] < 0.3
    assert result.perturbation == pytest.approx(3.0 / np.sqrt(150))

    baseline = result.baseline
    assert isinstance(baseline, pd.DataFrame)
    assert len(baseline) == 101
    assert baseline["se"].iloc[0] == pytest.approx(0.0, abs=1e-10)
    assert (baseline["lower"] >= 0).all()
    assert (baseline["upper"] >= baseline["lambda"]).all()
    assert result.alpha_covariance is not None
    assert result.alpha_covariance.shape == (5, 5)


def test_select_model(scenario2_data: PanelDataset) -> None:
    table = select_model(scenario2_data, FitConfig(cutpoints=SCENARIO_2.cutpoints), [1, 2], [2, 3])
    assert len(table) == 4
    assert table["aic_best"].sum() == 1
    assert table["bic_best"].sum() == 1
    assert (table["q"] == 2 + table["interior_knots"] + table["order"]).all()
    best = table[table["bic_best"]].iloc[0]
    assert best["bic"] == table[table["converged"]]["bic"].min()


def test_select_model_errors(scenario2_data: PanelDataset) -> None:
    config = FitConfig(cutpoints=SCENARIO_2.cutpoints)
    with pytest.raises(ValueError):
        select_model(scenario2_data, config, [], [3])

    capped = replace(config, optimizer=OptimizerConfig(max_iterations=1))
    with pytest.raises(ModelSelectionError):
        select_model(scenario2_data, capped, [2], [3])
