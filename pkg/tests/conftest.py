"""Shared fixtures of the test suite."""

import numpy as np
import pytest

from src.config_parameters import FitConfig, OptimizerConfig, SplineConfig
from src.enums.panel_enums import FitMode
from src.panel_data import PanelDataset, Subject
from src.simulation import SCENARIO_1, SCENARIO_2, gen_dataset
from src.spline_basis import KnotVector, SplineSpec, build_knots


@pytest.fixture
def tiny_dataset() -> PanelDataset:
    subjects = [
        Subject(id=1, x=(0.5,), visits=(1.0, 2.5, 4.0), responses=(1, 2, 3)),
        Subject(id=2, x=(-1.0,), visits=(2.0, 5.0), responses=(1, 1)),
        Subject(id=3, x=(0.0,), visits=(0.5, 3.0, 4.5, 5.0), responses=(2, 1, 3, 2)),
    ]
    return PanelDataset.from_subjects(subjects, n_levels=3, domain_end=5.0)


@pytest.fixture
def tiny_knots(tiny_dataset: PanelDataset) -> KnotVector:
    return build_knots(tiny_dataset.pooled_visit_times(), SplineSpec(3, 1, tiny_dataset.domain_end))


@pytest.fixture(scope="session")
def scenario1_data() -> PanelDataset:
    return gen_dataset(SCENARIO_1, 50, seed=11)


@pytest.fixture(scope="session")
def scenario2_data() -> PanelDataset:
    return gen_dataset(SCENARIO_2, 150, seed=7)


@pytest.fixture
def known_config() -> FitConfig:
    return FitConfig(cutpoints=SCENARIO_2.cutpoints)


@pytest.fixture
def unknown_config() -> FitConfig:
    return FitConfig(
        spline=SplineConfig(interior_knots=1, order=2),
        optimizer=OptimizerConfig(max_iterations=300),
        mode=FitMode.UNKNOWN_CUTPOINTS,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
