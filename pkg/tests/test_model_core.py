import math
from typing import Optional, Tuple

import numpy as np
import pytest

from src.enums.panel_enums import CdfConvention
from src.model_core import (
    KnownCutpointModel,
    ParameterLayout,
    ParamVector,
    PanelDesign,
    PseudoLikelihoodModel,
    delta_from_cutpoints,
    interval_mean,
    loglik_known,
    pseudo_loglik,
)
from src.ordinal_poisson import CutPoints, interval_prob
from src.panel_data import PanelDataError, PanelDataset
from src.simulation import SCENARIO_1, SCENARIO_2, SimScenario, gen_dataset, simulate_panel, true_interval_means
from src.spline_basis import KnotVector, SplineSpec, build_knots, ispline_basis

GRADIENT_POINTS = 20


def _central_gradient(fun, theta: np.ndarray, step: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        forward, backward = theta.copy(), theta.copy()
        forward[i] += step
        backward[i] -= step
        grad[i] = (fun(forward) - fun(backward)) / (2.0 * step)
    return grad


def test_param_vector_layout() -> None:
    params = ParamVector.from_natural([1.0, -1.0], [4.0, 9.0, 0.0], [1.0, 3.0])
    assert params.alpha_tilde == pytest.approx([2.0, 3.0, 0.0])
    assert params.gamma == pytest.approx([1.0, 3.0])

    layout = params.layout
    assert layout == ParameterLayout(2, 3, 2)
    assert layout.size == 7
    assert list(layout.indices(layout.delta)) == [5, 6]

    theta = params.pack()
    unpacked = ParamVector.unpack(theta, layout)
    assert unpacked.beta == pytest.approx([1.0, -1.0])
    assert unpacked.alpha == pytest.approx([4.0, 9.0, 0.0])


def test_param_vector_rejects_bad_input() -> None:
    with pytest.raises(ValueError):
        ParamVector.from_natural([0.0], [1.0, -1.0])
    with pytest.raises(ValueError):
        ParamVector.unpack(np.zeros(3), ParameterLayout(1, 3))
    with pytest.raises(ValueError):
        delta_from_cutpoints([0.0, 1.0])
    with pytest.raises(ValueError):
        delta_from_cutpoints([2.0, 1.0])


def test_interval_mean(tiny_dataset: PanelDataset, tiny_knots: KnotVector) -> None:
    alpha = np.array([0.5, 1.0, 2.0, 0.25])
    params = ParamVector.from_natural([0.8], alpha)
    subject = tiny_dataset.subjects[0]
    basis = ispline_basis(tiny_knots, [1.0, 2.5])
    expected = float((basis[1] - basis[0]) @ alpha) * math.exp(0.8 * 0.5)
    assert interval_mean(params, subject, 2, tiny_knots) == pytest.approx(expected)

    first = float(ispline_basis(tiny_knots, [1.0])[0] @ alpha) * math.exp(0.4)
    assert interval_mean(params, subject, 1, tiny_knots) == pytest.approx(first)
    with pytest.raises(IndexError):
        interval_mean(params, subject, 4, tiny_knots)


def test_known_loglik_matches_visit_sum(tiny_dataset: PanelDataset, tiny_knots: KnotVector) -> None:
    params = ParamVector.from_natural([0.3], [0.5, 1.0, 2.0, 0.25])
    cutpoints = CutPoints((0, 2))
    bounds = cutpoints.bounds()

    expected = 0.0
    for subject in tiny_dataset:
        for j, y in enumerate(subject.responses, start=1):
            mu = interval_mean(params, subject, j, tiny_knots)
            expected += math.log(interval_prob(bounds[y - 1], bounds[y], mu))

    design = PanelDesign.build(tiny_dataset, tiny_knots)
    assert loglik_known(params, design, cutpoints) == pytest.approx(expected, rel=1e-12)


def test_pseudo_loglik_equals_known_at_integer_cutpoints(
    tiny_dataset: PanelDataset, tiny_knots: KnotVector
) -> None:
    design = PanelDesign.build(tiny_dataset, tiny_knots)
    known = ParamVector.from_natural([-0.4], [1.0, 0.3, 0.8, 1.2])
    pseudo = ParamVector.from_natural([-0.4], [1.0, 0.3, 0.8, 1.2], [1.0, 3.0])
    assert pseudo_loglik(pseudo, design, CdfConvention.SHIFTED) == pytest.approx(
        loglik_known(known, design, CutPoints((1, 3))), rel=1e-10
    )


@pytest.mark.parametrize("seed", range(10))
def test_pseudo_loglik_equals_known_on_simulated_data(seed: int) -> None:
    dataset = gen_dataset(SCENARIO_1, 40, seed=seed)
    knots = build_knots(dataset.pooled_visit_times(), SplineSpec(2, 2, dataset.domain_end))
    design = PanelDesign.build(dataset, knots)
    alpha = np.random.default_rng(seed).uniform(2.0, 10.0, size=knots.n_basis)
    known = ParamVector.from_natural(SCENARIO_1.beta, alpha)
    pseudo = ParamVector.from_natural(SCENARIO_1.beta, alpha, SCENARIO_1.cutpoints)
    assert pseudo_loglik(pseudo, design, CdfConvention.SHIFTED) == pytest.approx(
        loglik_known(known, design, CutPoints(SCENARIO_1.cutpoints)), abs=1e-8
    )


def test_subject_logliks_sum_to_total(scenario1_data: PanelDataset) -> None:
    knots = build_knots(scenario1_data.pooled_visit_times(), SplineSpec(3, 2, scenario1_data.domain_end))
    model = KnownCutpointModel(scenario1_data, knots, CutPoints((1, 3, 8)))
    theta = ParamVector.from_natural([0.8, -0.7], np.full(5, 6.0)).pack()
    per_subject = model.subject_logliks(theta)
    assert per_subject.shape == (len(scenario1_data),)
    assert per_subject.sum() == pytest.approx(model.loglik(theta))
    assert np.all(per_subject <= 0.0)


def _random_theta(
    rng: np.random.Generator, beta: Tuple[float, ...], n_basis: int, gamma: Optional[Tuple[float, ...]] = None
) -> np.ndarray:
    shifted_beta = np.asarray(beta) + rng.uniform(-0.5, 0.5, size=len(beta))
    alpha = rng.uniform(3.0, 12.0, size=n_basis)
    if gamma is None:
        return ParamVector.from_natural(shifted_beta, alpha).pack()
    scaled = np.cumsum(np.diff(np.concatenate(([0.0], gamma))) * rng.uniform(0.7, 1.3, size=len(gamma)))
    return ParamVector.from_natural(shifted_beta, alpha, scaled).pack()


@pytest.mark.parametrize("scenario", [SCENARIO_1, SCENARIO_2], ids=["scenario1", "scenario2"])
def test_known_gradient_matches_finite_differences(
    scenario: SimScenario, scenario1_data: PanelDataset, scenario2_data: PanelDataset
) -> None:
    dataset = scenario1_data if scenario is SCENARIO_1 else scenario2_data
    knots = build_knots(dataset.pooled_visit_times(), SplineSpec(3, 2, dataset.domain_end))
    model = KnownCutpointModel(dataset, knots, CutPoints(scenario.cutpoints))
    rng = np.random.default_rng(31)
    for _ in range(GRADIENT_POINTS):
        theta = _random_theta(rng, scenario.beta, knots.n_basis)
        expected = _central_gradient(model.loglik, theta)
        np.testing.assert_allclose(model.gradient(theta), expected, rtol=1e-4, atol=1e-3)


@pytest.mark.parametrize("convention", list(CdfConvention))
def test_pseudo_gradient_matches_finite_differences(
    scenario1_data: PanelDataset, convention: CdfConvention
) -> None:
    knots = build_knots(scenario1_data.pooled_visit_times(), SplineSpec(2, 1, scenario1_data.domain_end))
    model = PseudoLikelihoodModel(scenario1_data, knots, convention)
    assert model.n_parameters == 8
    rng = np.random.default_rng(47)
    for _ in range(GRADIENT_POINTS):
        theta = _random_theta(rng, SCENARIO_1.beta, knots.n_basis, (1.0, 3.0, 8.0))
        expected = _central_gradient(model.loglik, theta, 1e-5)
        np.testing.assert_allclose(model.gradient(theta), expected, rtol=1e-4, atol=1e-3)


def test_pseudo_cutpoints_follow_delta(tiny_dataset: PanelDataset, tiny_knots: KnotVector) -> None:
    model = PseudoLikelihoodModel(tiny_dataset, tiny_knots)
    theta = ParamVector.from_natural([0.0], np.ones(4), [0.7, 2.2]).pack()
    cut = model.cutpoints(theta)
    assert not cut.integer_valued
    assert cut.values == pytest.approx((0.7, 2.2))


def test_known_model_checks_levels(tiny_dataset: PanelDataset, tiny_knots: KnotVector) -> None:
    with pytest.raises(PanelDataError):
        KnownCutpointModel(tiny_dataset, tiny_knots, CutPoints((1, 3, 8)))
    with pytest.raises(ValueError):
        KnownCutpointModel(tiny_dataset, tiny_knots, CutPoints((0.5, 2.0), integer_valued=False))


def test_design_rejects_short_spline_domain(tiny_dataset: PanelDataset) -> None:
    knots = build_knots([1.0], SplineSpec(3, 1, 4.0))
    with pytest.raises(PanelDataError):
        PanelDesign.build(tiny_dataset, knots)


def test_baseline_is_monotone(tiny_dataset: PanelDataset, tiny_knots: KnotVector) -> None:
    model = KnownCutpointModel(tiny_dataset, tiny_knots, CutPoints((0, 2)))
    theta = ParamVector.from_natural([0.0], [0.2, 1.0, 0.0, 3.0]).pack()
    curve = model.baseline(theta, np.linspace(0.0, 5.0, 51))
    assert curve[-1] == pytest.approx(4.2)
    assert np.all(np.diff(curve) >= -1e-12)


@pytest.mark.parametrize("direction", [(1.0, 2.5), (-1.0, -2.5)], ids=["above", "below"])
def test_pseudo_loglik_rises_toward_generating_cutpoints(direction: Tuple[float, float]) -> None:
    panel = simulate_panel(SCENARIO_2, 5000, seed=13)
    means = np.concatenate(
        [true_interval_means(SCENARIO_2, subject.x, subject.visits) for subject in panel.dataset]
    )
    responses = np.concatenate([subject.responses for subject in panel.dataset])

    def scan(gamma: np.ndarray) -> float:
        bounds = np.concatenate(([-1.0], gamma, [np.inf]))
        probs = interval_prob(bounds[responses - 1], bounds[responses], means, continuous=True)
        return float(np.sum(np.log(probs)))

    truth = np.asarray(SCENARIO_2.cutpoints, dtype=float)
    values = [scan(truth + s * np.asarray(direction)) for s in (1.0, 0.75, 0.5, 0.25, 0.0)]
    assert np.all(np.diff(values) > 0.0)
