import pytest

from src.config_parameters import FitConfig
from src.enums.panel_enums import CdfConvention, FitMode
from src.model_core import KnownCutpointModel, PseudoLikelihoodModel
from src.model_factory import ModelFactory
from src.panel_data import PanelDataset
from src.spline_basis import KnotVector


def test_known_mode_builds_exact_likelihood(tiny_dataset: PanelDataset, tiny_knots: KnotVector) -> None:
    model = ModelFactory.create(tiny_dataset, tiny_knots, FitConfig(cutpoints=(0, 2)))
    assert isinstance(model, KnownCutpointModel)
    assert model.fixed_cutpoints.values == (0.0, 2.0)
    assert model.n_parameters == 1 + tiny_knots.n_basis


def test_unknown_mode_builds_pseudo_likelihood(tiny_dataset: PanelDataset, tiny_knots: KnotVector) -> None:
    config = FitConfig(mode=FitMode.UNKNOWN_CUTPOINTS, convention=CdfConvention.PRINTED)
    model = ModelFactory.create(tiny_dataset, tiny_knots, config)
    assert isinstance(model, PseudoLikelihoodModel)
    assert model.convention == CdfConvention.PRINTED
    assert model.n_parameters == 1 + tiny_knots.n_basis + 2


def test_known_mode_without_cutpoints(tiny_dataset: PanelDataset, tiny_knots: KnotVector) -> None:
    with pytest.raises(ValueError):
        ModelFactory.create(tiny_dataset, tiny_knots, FitConfig())

