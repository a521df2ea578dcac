from dataclasses import replace
from typing import Tuple

import numpy as np
import pytest

from src.config_parameters import FitConfig, OptimizerConfig, SplineConfig
from src.enums.panel_enums import CdfConvention, FitMode, NuisanceProfile, OptimizerStatus
from src.estimator import FitResult, SieveEstimator, fit, initial_cutpoints
from src.model_core import KnownCutpointModel, PseudoLikelihoodModel
from src.ordinal_poisson import continuous_cdf
from src.panel_data import PanelDataset
from src.simulation import SCENARIO_1, SCENARIO_2, gen_dataset


@pytest.fixture(scope="module")
def known_fit(scenario2_data: PanelDataset) -> Tuple[SieveEstimator, FitResult]:
    estimator = SieveEstimator(scenario2_data, FitConfig(cutpoints=SCENARIO_2.cutpoints))
    return estimator, estimator.fit()


def test_initialize_known(scenario2_data: PanelDataset, known_config: FitConfig) -> None:
    estimator = SieveEstimator(scenario2_data, known_config)
    assert isinstance(estimator.model, KnownCutpointModel)
    start = estimator.initialize()
    assert start.beta == pytest.approx([0.0, 0.0])
    assert start.alpha.sum() == pytest.approx(1.0)
    assert start.delta.size == 0


def test_initialize_unknown(scenario2_data: PanelDataset, unknown_config: FitConfig) -> None:
    estimator = SieveEstimator(scenario2_data, unknown_config)
    assert isinstance(estimator.model, PseudoLikelihoodModel)
    gamma = estimator.initialize().gamma
    assert gamma.size == 2
    assert gamma[0] > 0 and gamma[1] > gamma[0]


def test_known_fit_recovers_truth(known_fit: Tuple[SieveEstimator, FitResult]) -> None:
    estimator, result = known_fit
    assert result.converged
    assert result.status in (OptimizerStatus.OBJECTIVE_TOLERANCE, OptimizerStatus.GRADIENT_TOLERANCE)
    assert result.gamma is None
    assert result.cutpoints.values == (3.0, 10.0)
    assert result.beta == pytest.approx([1.0, 0.0], abs=0.3)
    assert np.all(result.alpha >= 0)
    assert result.n_parameters == 2 + 5
    assert result.n_subjects == 150
    assert estimator.model.baseline(result.theta, [5.0])[0] == pytest.approx(15.0, abs=3.5)


def test_fit_improves_on_start(known_fit: Tuple[SieveEstimator, FitResult]) -> None:
    estimator, result = known_fit
    start = estimator.model.loglik(estimator.initialize().pack())
    assert result.loglik > start
    assert result.trace[0] == pytest.approx(start)
    assert result.trace[-1] == pytest.approx(result.loglik)


def test_trace_ascends_monotonically(known_fit: Tuple[SieveEstimator, FitResult]) -> None:
    _, result = known_fit
    assert len(result.trace) == result.iterations + 1
    assert np.all(np.diff(result.trace) >= 0.0)


def test_repeat_fits_are_identical(known_fit: Tuple[SieveEstimator, FitResult]) -> None:
    estimator, result = known_fit
    again = SieveEstimator(estimator.dataset, estimator.config).fit()
    assert np.array_equal(again.theta, result.theta)
    assert again.loglik == result.loglik
    assert again.trace == result.trace
    assert again.iterations == result.iterations


def test_loglik_ignores_subject_order(known_fit: Tuple[SieveEstimator, FitResult]) -> None:
    estimator, result = known_fit
    dataset = estimator.dataset
    reversed_data = PanelDataset.from_subjects(
        list(reversed(dataset.subjects)),
        n_levels=dataset.n_levels,
        domain_end=dataset.domain_end,
        covariate_names=dataset.covariate_names,
    )
    model = SieveEstimator(reversed_data, estimator.config).model
    assert model.loglik(result.theta) == pytest.approx(result.loglik, rel=1e-12)


def test_loglik_invariant_to_covariate_scale(known_fit: Tuple[SieveEstimator, FitResult]) -> None:
    estimator, result = known_fit
    dataset = estimator.dataset
    scale = 10.0
    rescaled = PanelDataset.from_subjects(
        [replace(s, x=(s.x[0] * scale, *s.x[1:])) for s in dataset.subjects],
        n_levels=dataset.n_levels,
        domain_end=dataset.domain_end,
        covariate_names=dataset.covariate_names,
    )
    theta = result.theta.copy()
    theta[0] /= scale
    model = SieveEstimator(rescaled, estimator.config).model
    assert model.loglik(theta) == pytest.approx(result.loglik, rel=1e-10)


def test_profile_at_estimate_matches_fit(known_fit: Tuple[SieveEstimator, FitResult]) -> None:
    estimator, result = known_fit
    at_fit = estimator.profile_nuisance(result.beta, result.theta)
    assert at_fit.value == pytest.approx(result.loglik, abs=1e-3)
    assert at_fit.subject_logliks.sum() == pytest.approx(at_fit.value)
    assert at_fit.theta[:2] == pytest.approx(result.beta)

    moved = estimator.profile_nuisance(result.beta + np.array([0.2, 0.0]), result.theta)
    assert moved.value < at_fit.value
    assert moved.theta[:2] == pytest.approx(result.beta + np.array([0.2, 0.0]))


def test_profile_spline_only_keeps_cutpoints(scenario2_data: PanelDataset, unknown_config: FitConfig) -> None:
    estimator = SieveEstimator(scenario2_data, unknown_config)
    theta = estimator.initialize().pack()
    layout = estimator.layout
    result = estimator.profile_nuisance([0.5, 0.0], theta, NuisanceProfile.SPLINE_ONLY)
    assert result.theta[layout.delta] == pytest.approx(theta[layout.delta])
    assert result.theta[layout.beta] == pytest.approx([0.5, 0.0])


def test_unknown_fit(scenario2_data: PanelDataset, unknown_config: FitConfig) -> None:
    estimator = SieveEstimator(scenario2_data, unknown_config)
    start = estimator.model.loglik(estimator.initialize().pack())
    result = estimator.fit()
    assert result.mode == FitMode.UNKNOWN_CUTPOINTS
    assert result.gamma is not None and result.gamma.size == 2
    assert np.all(np.diff(np.concatenate(([0.0], result.gamma))) > 0)
    assert result.loglik > start
    assert result.beta[0] == pytest.approx(1.0, abs=0.4)
    assert result.n_parameters == 2 + 3 + 2


def test_module_level_fit(tiny_dataset: PanelDataset) -> None:
    config = FitConfig(
        spline=SplineConfig(interior_knots=0, order=2),
        optimizer=OptimizerConfig(max_iterations=50),
        cutpoints=(0, 2),
    )
    result = fit(tiny_dataset, config)
    assert np.isfinite(result.loglik)
    assert result.iterations <= 50


def test_invalid_config_rejected(scenario2_data: PanelDataset) -> None:
    with pytest.raises(ValueError):
        SieveEstimator(scenario2_data, FitConfig())


@pytest.mark.parametrize("convention", list(CdfConvention))
def test_initial_cutpoints_match_frequencies(convention: CdfConvention) -> None:
    gamma = initial_cutpoints([0.5, 0.3, 0.2], convention)
    assert gamma.size == 2
    assert gamma[0] > 0 and gamma[1] > gamma[0]
    if gamma[0] > 0.05:
        assert continuous_cdf(gamma[0], 1.0, convention) == pytest.approx(0.5, abs=1e-8)


def test_initial_cutpoints_with_empty_levels() -> None:
    gamma = initial_cutpoints([1.0, 0.0, 0.0, 0.0])
    assert np.all(np.diff(gamma) >= 0.05 - 1e-12)
    assert gamma[0] > 0


def test_all_lowest_level_drives_baseline_to_zero(scenario2_data: PanelDataset) -> None:
    flat = PanelDataset.from_subjects(
        [replace(s, responses=(1,) * len(s.visits)) for s in scenario2_data.subjects],
        n_levels=3,
        domain_end=scenario2_data.domain_end,
        covariate_names=scenario2_data.covariate_names,
    )
    estimator = SieveEstimator(flat, FitConfig(spline=SplineConfig(interior_knots=1, order=2), cutpoints=(0, 2)))
    result = estimator.fit()
    assert estimator.model.baseline(result.theta, [flat.domain_end])[0] < 0.05


@pytest.mark.slow
def test_scenario_1_fits_converge_within_100_iterations() -> None:
    config = FitConfig(cutpoints=SCENARIO_1.cutpoints, optimizer=OptimizerConfig(max_iterations=100))
    converged = [
        SieveEstimator(gen_dataset(SCENARIO_1, 200, seed=seed), config).fit().converged for seed in range(40)
    ]
    assert sum(converged) >= 38
