"""
Module that defines the configuration parameters for the sieve estimator.

This module contains the `FitConfig` dataclass and its parts, which store the settings
of a fit: the I-spline sieve, the quasi-Newton optimizer, the variance estimation and
the cut-point mode. It also reads the flat key-value TOML files used for scenarios and
command-line defaults.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from src.enums.panel_enums import BandMethod, CdfConvention, FitMode, KnotPlacement, NuisanceProfile


@dataclass(frozen=True)
class SplineConfig:
    """
    Configuration of the I-spline sieve for the baseline mean function.

    Attributes:
        interior_knots (int): Number of interior knots m_n.
        order (int): Spline order l (degree + 1); the basis has m_n + l functions.
        placement (KnotPlacement): Rule placing the interior knots.
    """

    interior_knots: int = 2
    order: int = 3
    placement: KnotPlacement = KnotPlacement.QUANTILE

    @property
    def n_basis(self) -> int:
        """Number of I-spline basis functions."""
        return self.interior_knots + self.order

    def validate(self) -> None:
        """
        Validate the spline configuration.

        Raises:
            ValueError: If any configuration parameter is invalid.
        """
        if self.interior_knots < 0:
            raise ValueError(f"Interior knot count must be nonnegative, got {self.interior_knots}")

        if self.order < 1:
            raise ValueError(f"Spline order must be at least 1, got {self.order}")

        if self.placement not in [KnotPlacement.QUANTILE, KnotPlacement.EQUAL]:
            raise ValueError(f"Invalid knot placement: {self.placement}")


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Configuration of the quasi-Newton optimizer.

    Attributes:
        absolute_tolerance (float): Bound on the absolute log-likelihood change.
        relative_tolerance (float): Bound on the relative log-likelihood change.
        gradient_tolerance (float): Bound on the gradient sup-norm.
        max_iterations (int): Iteration cap; reaching it is reported, not raised.
        stall_gradient_tolerance (float): Gradient sup-norm under which a stalled
            line search still counts as converged.
    """

    absolute_tolerance: float = 1e-6
    relative_tolerance: float = 1e-6
    gradient_tolerance: float = 1e-5
    max_iterations: int = 500
    stall_gradient_tolerance: float = 1e-2

    def validate(self) -> None:
        """
        Validate the optimizer configuration.

        Raises:
            ValueError: If any configuration parameter is invalid.
        """
        for name in (
            "absolute_tolerance",
            "relative_tolerance",
            "gradient_tolerance",
            "stall_gradient_tolerance",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

        if self.max_iterations <= 0:
            raise ValueError("Max iterations must be a positive integer")


@dataclass(frozen=True)
class InferenceConfig:
    """
    Configuration of the sandwich variance and baseline band computation.

    Attributes:
        perturbation_constant (float): Constant c in h_n = c / sqrt(n).
        nuisance_profile (NuisanceProfile): Parameters maximized out in the profile.
        band_method (BandMethod): Variance formula for the baseline mean function.
        baseline_variance (bool): Whether to compute the spline coefficient covariance.
        max_workers (int): Threads evaluating profile stencil points; 1 runs sequentially.
    """

    perturbation_constant: float = 3.0
    nuisance_profile: NuisanceProfile = NuisanceProfile.SPLINE_AND_CUTPOINTS
    band_method: BandMethod = BandMethod.DIAGONAL
    baseline_variance: bool = True
    max_workers: int = 1

    def perturbation(self, n_subjects: int) -> float:
        """Perturbation size h_n for a sample of `n_subjects`."""
        return self.perturbation_constant / n_subjects**0.5

    def validate(self) -> None:
        """
        Validate the inference configuration.

        Raises:
            ValueError: If any configuration parameter is invalid.
        """
        if self.perturbation_constant <= 0:
            raise ValueError("Perturbation constant must be positive")

        if self.max_workers < 1:
            raise ValueError("Max workers must be at least 1")


@dataclass(frozen=True)
class FitConfig:
    """
    Main configuration of a sieve maximum likelihood fit.

    Attributes:
        spline (SplineConfig): I-spline sieve settings.
        optimizer (OptimizerConfig): Convergence settings.
        inference (InferenceConfig): Variance estimation settings.
        mode (FitMode): Known cut points (exact likelihood) or unknown (pseudo-likelihood).
        convention (CdfConvention): Continuous Poisson CDF form in unknown mode.
        cutpoints (Optional[Tuple[int, ...]]): Fixed cut points, required in known mode.
    """

    spline: SplineConfig = field(default_factory=SplineConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    mode: FitMode = FitMode.KNOWN_CUTPOINTS
    convention: CdfConvention = CdfConvention.SHIFTED
    cutpoints: Optional[Tuple[int, ...]] = None

    def validate(self) -> None:
        """
        Validate the overall fit configuration.

        Raises:
            ValueError: If any configuration parameter is invalid.
        """
        self.spline.validate()
        self.optimizer.validate()
        self.inference.validate()

        if self.mode not in [FitMode.KNOWN_CUTPOINTS, FitMode.UNKNOWN_CUTPOINTS]:
            raise ValueError(f"Invalid fit mode: {self.mode}")

        if self.convention not in [CdfConvention.SHIFTED, CdfConvention.PRINTED]:
            raise ValueError(f"Invalid CDF convention: {self.convention}")

        if self.mode == FitMode.KNOWN_CUTPOINTS:
            if self.cutpoints is None:
                raise ValueError("Known cut-point mode requires cut points")
            if any(int(c) != c or c < 0 for c in self.cutpoints):
                raise ValueError(f"Known cut points must be nonnegative integers, got {self.cutpoints}")
            if any(b <= a for a, b in zip(self.cutpoints, self.cutpoints[1:])):
                raise ValueError(f"Cut points must be strictly increasing, got {self.cutpoints}")

    def to_dict(self) -> Dict[str, Any]:
        """Plain, JSON-serializable echo of the configuration."""
        return _stringify(asdict(self))


def _stringify(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _stringify(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_stringify(item) for item in value]
    if isinstance(value, Enum):
        return str(value)
    return value


def load_flat_config(path: Path) -> Dict[str, Any]:
    """
    Read a flat key-value TOML file.

    Args:
        path (Path): File to read.

    Returns:
        Dict[str, Any]: Keys mapped to scalars or arrays.

    Raises:
        FileNotFoundError: If the file does not exist.
        ValueError: If the file is not valid TOML or contains tables.
    """
    try:
        with open(path, "rb") as f:
            values = tomllib.load(f)
    except FileNotFoundError as e:
        raise FileNotFoundError(f"The config file {path} was not found.") from e
    except tomllib.TOMLDecodeError as e:
        raise ValueError(f"Error parsing config file {path}: {e}") from e

    nested = [key for key, value in values.items() if isinstance(value, dict)]
    if nested:
        raise ValueError(f"Config file {path} must be flat, found tables: {nested}")

    return values
