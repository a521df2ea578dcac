"""
Data generation for ordinal panel count simulation studies.

Visits are drawn uniformly on (0, tau], rounded and deduplicated. Latent interval
counts are Poisson with the increment of the (optionally Box-Cox transformed) mean
function, scaled by an optional gamma frailty, and coded into ordinal levels by the
scenario's cut points.
"""

import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Tuple, Union

import numpy as np
import numpy.typing as npt

from src.config_parameters import load_flat_config
from src.enums.panel_enums import BaselineForm, CovariateKind, KnotPlacement
from src.panel_data import PanelDataset, Subject
from src.spline_basis import KnotVector, SplineSpec, TimeLike, baseline_mean, build_knots

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

BERNOULLI_PROBABILITY = 0.5
VISIT_DECIMALS = 1

_DEFAULT_COEFFICIENTS = {BaselineForm.LOGARITHMIC: (15.0, 0.7), BaselineForm.LINEAR: (3.0,)}


@dataclass(frozen=True)
class SimScenario:
    """
    Data-generating process of a simulation study.

    Attributes:
        name (str): Label used in outputs.
        baseline (BaselineForm): Shape of the true Lambda0.
        baseline_coefficients (Tuple[float, ...]): (a, b) of a log(1 + b t), (a,) of a t,
            or nonnegative I-spline coefficients on equally spaced knots.
        baseline_order (int): Spline order of a custom baseline.
        beta (Tuple[float, ...]): True regression coefficients.
        covariates (Tuple[CovariateKind, ...]): Distribution of each covariate.
        cutpoints (Tuple[int, ...]): Integer cut points coding the latent counts.
        domain_end (float): Maximum follow-up time tau.
        max_visits (int): Visit counts are uniform on 1..max_visits before deduplication.
        frailty_variance (float): Var(Z) of the mean-one gamma frailty; 0 disables it.
        box_cox (float): rho of the Box-Cox transformation; 1 is the identity.
        seed (int): Default seed of studies run on this scenario.
    """

    name: str = "scenario2"
    baseline: BaselineForm = BaselineForm.LINEAR
    baseline_coefficients: Tuple[float, ...] = (3.0,)
    baseline_order: int = 3
    beta: Tuple[float, ...] = (1.0, 0.0)
    covariates: Tuple[CovariateKind, ...] = (CovariateKind.NORMAL, CovariateKind.BERNOULLI)
    cutpoints: Tuple[int, ...] = (3, 10)
    domain_end: float = 10.0
    max_visits: int = 6
    frailty_variance: float = 0.0
    box_cox: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        """
        Validate the scenario.

        Raises:
            ValueError: If any parameter is invalid.
        """
        if len(self.beta) != len(self.covariates):
            raise ValueError(f"{len(self.beta)} coefficients for {len(self.covariates)} covariates")
        if not self.cutpoints or any(int(c) != c or c < 0 for c in self.cutpoints):
            raise ValueError(f"Cut points must be nonnegative integers, got {self.cutpoints}")
        if any(b <= a for a, b in zip(self.cutpoints, self.cutpoints[1:])):
            raise ValueError(f"Cut points must be strictly increasing, got {self.cutpoints}")
        if self.frailty_variance < 0:
            raise ValueError(f"Frailty variance must be nonnegative, got {self.frailty_variance}")
        if self.box_cox < 1:
            raise ValueError(f"Box-Cox rho must be at least 1, got {self.box_cox}")
        if self.domain_end <= 0:
            raise ValueError(f"Maximum follow-up time must be positive, got {self.domain_end}")
        if self.max_visits < 1:
            raise ValueError(f"Maximum visit count must be positive, got {self.max_visits}")
        if any(c < 0 for c in self.baseline_coefficients):
            raise ValueError(f"Baseline coefficients must be nonnegative, got {self.baseline_coefficients}")

        expected = {BaselineForm.LOGARITHMIC: 2, BaselineForm.LINEAR: 1}.get(self.baseline)
        if expected is not None and len(self.baseline_coefficients) != expected:
            raise ValueError(f"{self.baseline} baseline takes {expected} coefficients")
        if self.baseline == BaselineForm.CUSTOM and len(self.baseline_coefficients) < self.baseline_order:
            raise ValueError(
                f"Custom baseline of order {self.baseline_order} needs at least that many coefficients"
            )

    @property
    def n_levels(self) -> int:
        """Number of ordinal levels K."""
        return len(self.cutpoints) + 1

    @property
    def covariate_names(self) -> Tuple[str, ...]:
        """Names x1..xp."""
        return tuple(f"x{i + 1}" for i in range(len(self.beta)))

    def baseline_mean(self, t: TimeLike) -> npt.NDArray[np.float64]:
        """True Lambda0 at times t."""
        times = np.atleast_1d(np.asarray(t, dtype=float))
        coeffs = self.baseline_coefficients
        if self.baseline == BaselineForm.LOGARITHMIC:
            return coeffs[0] * np.log1p(coeffs[1] * times)
        if self.baseline == BaselineForm.LINEAR:
            return coeffs[0] * times
        return baseline_mean(self.custom_knots(), self.baseline_order, coeffs, times)

    def custom_knots(self) -> KnotVector:
        """Equally spaced knots carrying a custom baseline."""
        interior = len(self.baseline_coefficients) - self.baseline_order
        spec = SplineSpec(self.baseline_order, interior, self.domain_end)
        return build_knots([self.domain_end], spec, KnotPlacement.EQUAL)

    def transform(self, x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """Box-Cox transformation g(x) = ((1 + x)^rho - 1) / rho of the mean."""
        if self.box_cox == 1.0:
            return x
        return (np.power(1.0 + x, self.box_cox) - 1.0) / self.box_cox

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "SimScenario":
        """
        Build a scenario from flat key-value settings.

        Raises:
            ValueError: If a key is unknown or a value is invalid.
        """
        known = set(cls.__dataclass_fields__)
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"Unknown scenario keys: {sorted(unknown)}")

        settings: Dict[str, Any] = dict(values)
        if "baseline" in settings:
            settings["baseline"] = BaselineForm(settings["baseline"])
        if "covariates" in settings:
            settings["covariates"] = tuple(CovariateKind(kind) for kind in settings["covariates"])
        for key in ("baseline_coefficients", "beta"):
            if key in settings:
                settings[key] = tuple(float(v) for v in settings[key])
        if "cutpoints" in settings:
            settings["cutpoints"] = tuple(int(v) for v in settings["cutpoints"])
        if "baseline" in settings and "baseline_coefficients" not in settings:
            settings["baseline_coefficients"] = _DEFAULT_COEFFICIENTS.get(settings["baseline"], ())
        return cls(**settings)

    @classmethod
    def from_toml(cls, path: Path) -> "SimScenario":
        """Read a scenario from a flat TOML file."""
        return cls.from_mapping(load_flat_config(path))

    def to_dict(self) -> Dict[str, Any]:
        """Plain, JSON-serializable echo of the scenario."""
        values = asdict(self)
        values["baseline"] = str(self.baseline)
        values["covariates"] = [str(kind) for kind in self.covariates]
        values["baseline_coefficients"] = list(self.baseline_coefficients)
        values["beta"] = list(self.beta)
        values["cutpoints"] = list(self.cutpoints)
        return values


SCENARIO_1 = SimScenario(
    name="scenario1",
    baseline=BaselineForm.LOGARITHMIC,
    baseline_coefficients=(15.0, 0.7),
    beta=(1.0, -1.0),
    cutpoints=(1, 3, 8),
)
SCENARIO_2 = SimScenario()


PRESETS: Dict[str, SimScenario] = {
    "scenario1": SCENARIO_1,
    "scenario2": SCENARIO_2,
    "frailty_0.01": replace(SCENARIO_1, name="frailty_0.01", frailty_variance=0.01),
    "frailty_0.1": replace(SCENARIO_1, name="frailty_0.1", frailty_variance=0.1),
    "boxcox_1.05": replace(SCENARIO_1, name="boxcox_1.05", box_cox=1.05),
    "boxcox_1.1": replace(SCENARIO_1, name="boxcox_1.1", box_cox=1.1),
}


@dataclass(frozen=True, eq=False)
class SimulatedPanel:
    """
    A generated dataset together with its latent quantities.

    Attributes:
        dataset (PanelDataset): Observed data.
        latent_counts (Tuple[np.ndarray, ...]): Interval counts Delta_ij per subject.
        frailties (np.ndarray): Frailty Z_i of each subject, all 1 without frailty.
    """

    dataset: PanelDataset
    latent_counts: Tuple[npt.NDArray[np.int64], ...]
    frailties: npt.NDArray[np.float64]


def round_visits(draws: npt.ArrayLike, decimals: int = VISIT_DECIMALS) -> npt.NDArray[np.float64]:
    """
    Round raw visit draws, drop duplicates and zeros, and sort.

    Args:
        draws (npt.ArrayLike): Raw times.
        decimals (int): Rounding precision.

    Returns:
        np.ndarray: Strictly increasing positive visit times.
    """
    rounded = np.unique(np.round(np.asarray(draws, dtype=float), decimals))
    return rounded[rounded > 0]


def gen_visits(
    rng: np.random.Generator, domain_end: float = 10.0, max_visits: int = 6, decimals: int = VISIT_DECIMALS
) -> npt.NDArray[np.float64]:
    """
    Draw one subject's visit times.

    The visit count is uniform on 1..max_visits; that many times are drawn uniformly on
    (0, domain_end), rounded, deduplicated and sorted. A draw that leaves no visit is
    repeated.

    Args:
        rng (np.random.Generator): Random stream of the subject.
        domain_end (float): Maximum follow-up time tau.
        max_visits (int): Largest visit count.
        decimals (int): Rounding precision.

    Returns:
        np.ndarray: Visit times in (0, tau], spaced at least 10^-decimals apart.
    """
    while True:
        count = int(rng.integers(1, max_visits + 1))
        visits = round_visits(rng.uniform(0.0, domain_end, size=count), decimals)
        if visits.size:
            return visits


def _draw_covariates(rng: np.random.Generator, kinds: Tuple[CovariateKind, ...]) -> npt.NDArray[np.float64]:
    values = [
        rng.standard_normal() if kind == CovariateKind.NORMAL else float(rng.binomial(1, BERNOULLI_PROBABILITY))
        for kind in kinds
    ]
    return np.asarray(values, dtype=float)


def _draw_frailty(rng: np.random.Generator, variance: float) -> float:
    if variance <= 0:
        return 1.0
    return float(rng.gamma(shape=1.0 / variance, scale=variance))


def true_interval_means(
    scenario: SimScenario, x: npt.ArrayLike, visits: npt.ArrayLike, frailty: float = 1.0
) -> npt.NDArray[np.float64]:
    """
    True means of the latent interval counts of one subject.

    Args:
        scenario (SimScenario): Data-generating process.
        x (npt.ArrayLike): Covariates.
        visits (npt.ArrayLike): Visit times.
        frailty (float): Frailty Z of the subject.

    Returns:
        np.ndarray: Z [g(Lambda0(T_j) e^{beta x}) - g(Lambda0(T_{j-1}) e^{beta x})] per visit.
    """
    risk = float(np.exp(np.dot(scenario.beta, np.asarray(x, dtype=float))))
    times = np.concatenate(([0.0], np.asarray(visits, dtype=float)))
    cumulative = scenario.transform(scenario.baseline_mean(times) * risk)
    return frailty * np.diff(cumulative)


def code_levels(counts: npt.ArrayLike, cutpoints: Tuple[int, ...]) -> npt.NDArray[np.int64]:
    """
    Ordinal level of each count: k with gamma_{k-1} < count <= gamma_k.

    Returns:
        np.ndarray: Levels in 1..K.
    """
    return np.searchsorted(np.asarray(cutpoints, dtype=float), np.asarray(counts), side="left") + 1


def simulate_panel(scenario: SimScenario, n: int, seed: SeedLike = None) -> SimulatedPanel:
    """
    Generate n subjects and keep the latent counts and frailties.

    Args:
        scenario (SimScenario): Data-generating process.
        n (int): Number of subjects.
        seed (SeedLike): Seed, seed sequence or generator; defaults to the scenario seed.

    Returns:
        SimulatedPanel: Observed dataset and latent quantities.

    Raises:
        ValueError: If n < 1.
    """
    if n < 1:
        raise ValueError(f"Sample size must be positive, got {n}")
    rng = np.random.default_rng(scenario.seed if seed is None else seed)

    subjects: List[Subject] = []
    counts: List[npt.NDArray[np.int64]] = []
    frailties = np.ones(n)
    for i in range(n):
        x = _draw_covariates(rng, scenario.covariates)
        visits = gen_visits(rng, scenario.domain_end, scenario.max_visits)
        frailties[i] = _draw_frailty(rng, scenario.frailty_variance)
        delta = rng.poisson(true_interval_means(scenario, x, visits, frailties[i]))
        levels = code_levels(delta, scenario.cutpoints)

        counts.append(delta)
        subjects.append(
            Subject(
                id=i + 1,
                x=tuple(float(v) for v in x),
                visits=tuple(float(t) for t in visits),
                responses=tuple(int(y) for y in levels),
            )
        )

    dataset = PanelDataset.from_subjects(
        subjects,
        n_levels=scenario.n_levels,
        domain_end=scenario.domain_end,
        covariate_names=scenario.covariate_names,
    )
    logger.debug("Generated %d subjects with %d visits for %s", n, dataset.n_observations, scenario.name)
    return SimulatedPanel(dataset, tuple(counts), frailties)


def gen_dataset(scenario: SimScenario, n: int, seed: SeedLike = None) -> PanelDataset:
    """Generate an observed dataset of n subjects."""
    return simulate_panel(scenario, n, seed).dataset
