"""
model_factory.py

A factory module providing the likelihood model for each fitting mode of the
ordinal panel count estimator.

It includes functionality for validating modes and building a model instance from a
dataset, spline knots and a fit configuration.
"""

from typing import Callable, Dict

from src.config_parameters import FitConfig
from src.enums.panel_enums import FitMode
from src.model_core import KnownCutpointModel, OrdinalPanelModel, PseudoLikelihoodModel
from src.ordinal_poisson import CutPoints
from src.panel_data import PanelDataset
from src.spline_basis import KnotVector

ModelBuilder = Callable[[PanelDataset, KnotVector, FitConfig], OrdinalPanelModel]


def _build_known(dataset: PanelDataset, knots: KnotVector, config: FitConfig) -> OrdinalPanelModel:
    if config.cutpoints is None:
        raise ValueError("Known cut-point mode requires cut points")
    cutpoints = CutPoints(tuple(float(c) for c in config.cutpoints), integer_valued=True)
    return KnownCutpointModel(dataset, knots, cutpoints)


def _build_pseudo(dataset: PanelDataset, knots: KnotVector, config: FitConfig) -> OrdinalPanelModel:
    return PseudoLikelihoodModel(dataset, knots, config.convention)


class ModelFactory:
    """
    A factory class for creating likelihood models.

    Provides the model builder for each fitting mode.
    """

    @classmethod
    def get_model_builder(cls, mode: FitMode) -> ModelBuilder:
        """
        Retrieve a model builder based on the given mode enumeration.
        """
        method_map: Dict[FitMode, ModelBuilder] = {
            FitMode.KNOWN_CUTPOINTS: _build_known,
            FitMode.UNKNOWN_CUTPOINTS: _build_pseudo,
        }

        if mode not in method_map:
            raise ValueError(f"Unsupported fit mode: {mode}")

        return method_map[mode]

    @classmethod
    def create(cls, dataset: PanelDataset, knots: KnotVector, config: FitConfig) -> OrdinalPanelModel:
        """
        Build the likelihood model selected by `config.mode`.

        Args:
            dataset (PanelDataset): Observations.
            knots (KnotVector): Spline knots.
            config (FitConfig): Fit configuration.

        Returns:
            OrdinalPanelModel: The model for the configured mode.
        """
        return cls.get_model_builder(config.mode)(dataset, knots, config)

