import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from src.enums.panel_enums import BaselineForm, CovariateKind
from src.simulation import (
    PRESETS,
    SCENARIO_1,
    SCENARIO_2,
    SimScenario,
    code_levels,
    gen_dataset,
    gen_visits,
    round_visits,
    simulate_panel,
    true_interval_means,
)

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


def test_code_levels() -> None:
    levels = code_levels([0, 1, 2, 3, 8, 9, 40], (1, 3, 8))
    assert levels.tolist() == [1, 1, 2, 2, 3, 4, 4]


def test_round_visits() -> None:
    assert round_visits([0.04, 1.23, 1.18, 5.0]).tolist() == [1.2, 5.0]


def test_gen_visits(rng: np.random.Generator) -> None:
    for _ in range(200):
        visits = gen_visits(rng, 10.0, 6)
        assert 1 <= visits.size <= 6
        assert visits[0] > 0 and visits[-1] <= 10.0
        assert np.all(np.diff(visits) > 0)


def test_baseline_shapes() -> None:
    assert SCENARIO_1.baseline_mean(2.5)[0] == pytest.approx(15.0 * np.log(2.75))
    assert SCENARIO_2.baseline_mean([0.0, 5.0]).tolist() == pytest.approx([0.0, 15.0])

    custom = SimScenario(baseline=BaselineForm.CUSTOM, baseline_coefficients=(1.0, 2.0, 3.0), baseline_order=3)
    assert custom.baseline_mean(10.0)[0] == pytest.approx(6.0)
    assert custom.baseline_mean(0.0)[0] == pytest.approx(0.0)


def test_box_cox_transform() -> None:
    scenario = PRESETS["boxcox_1.1"]
    x = np.array([0.0, 1.0, 10.0])
    assert scenario.transform(x) == pytest.approx(((1.0 + x) ** 1.1 - 1.0) / 1.1)
    assert SCENARIO_1.transform(x) is x


def test_true_interval_means_telescope() -> None:
    x = np.array([0.4, 1.0])
    visits = np.array([1.5, 4.0, 9.5])
    means = true_interval_means(SCENARIO_1, x, visits)
    risk = np.exp(1.0 * 0.4 - 1.0 * 1.0)
    assert means.sum() == pytest.approx(SCENARIO_1.baseline_mean(9.5)[0] * risk)
    assert np.all(means > 0)
    assert true_interval_means(SCENARIO_1, x, visits, frailty=2.0) == pytest.approx(2.0 * means)


def test_simulate_panel_structure() -> None:
    panel = simulate_panel(SCENARIO_1, 40, seed=3)
    dataset = panel.dataset
    assert len(dataset) == 40
    assert [s.id for s in dataset] == list(range(1, 41))
    assert dataset.n_levels == 4
    assert dataset.covariate_names == ("x1", "x2")
    for subject, counts in zip(dataset, panel.latent_counts):
        assert list(subject.responses) == code_levels(counts, SCENARIO_1.cutpoints).tolist()
        assert subject.x[1] in (0.0, 1.0)
    assert np.all(panel.frailties == 1.0)


def test_simulation_is_reproducible() -> None:
    first = gen_dataset(SCENARIO_2, 25, seed=np.random.SeedSequence(8))
    second = gen_dataset(SCENARIO_2, 25, seed=np.random.SeedSequence(8))
    third = gen_dataset(SCENARIO_2, 25, seed=9)
    assert first == second
    assert first != third


def test_latent_counts_have_model_means() -> None:
    panel = simulate_panel(SCENARIO_2, 3000, seed=21)
    expected = sum(
        true_interval_means(SCENARIO_2, subject.x, subject.visits).sum() for subject in panel.dataset
    )
    observed = sum(counts.sum() for counts in panel.latent_counts)
    assert abs(observed - expected) < 4.0 * np.sqrt(expected)


def test_frailty_moments() -> None:
    panel = simulate_panel(PRESETS["frailty_0.1"], 4000, seed=5)
    assert panel.frailties.mean() == pytest.approx(1.0, abs=0.03)
    assert panel.frailties.var() == pytest.approx(0.1, abs=0.02)


@pytest.mark.parametrize(
    "changes",
    [
        {"beta": (1.0,)},
        {"cutpoints": (3, 3)},
        {"cutpoints": (1.5, 3)},
        {"frailty_variance": -0.1},
        {"box_cox": 0.9},
        {"domain_end": 0.0},
        {"max_visits": 0},
        {"baseline_coefficients": (3.0, 1.0)},
        {"baseline": BaselineForm.CUSTOM, "baseline_coefficients": (1.0, 1.0)},
    ],
)
def test_invalid_scenarios(changes: dict) -> None:
    with pytest.raises(ValueError):
        replace(SCENARIO_2, **changes)


def test_from_mapping() -> None:
    scenario = SimScenario.from_mapping(
        {"baseline": "logarithmic", "beta": [0.5, 0.5, -1.0], "covariates": ["normal"] * 3, "cutpoints": [2]}
    )
    assert scenario.baseline_coefficients == (15.0, 0.7)
    assert scenario.covariates == (CovariateKind.NORMAL,) * 3
    assert scenario.n_levels == 2
    with pytest.raises(ValueError):
        SimScenario.from_mapping({"betas": [1.0]})


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_scenario_files_match_presets(name: str) -> None:
    assert SimScenario.from_toml(SCENARIO_DIR / f"{name}.toml") == PRESETS[name]


def test_to_dict_round_trip() -> None:
    echo = PRESETS["boxcox_1.05"].to_dict()
    json.dumps(echo)
    assert SimScenario.from_mapping(echo) == PRESETS["boxcox_1.05"]


def test_sample_size_must_be_positive() -> None:
    with pytest.raises(ValueError):
        simulate_panel(SCENARIO_2, 0)
