"""
Ordinal panel count observations.

A subject carries time-independent covariates, strictly increasing visit times and one
ordinal response in 1..K per visit. The latent interval counts are never stored.
"""

from dataclasses import dataclass
from typing import Hashable, Iterator, List, Sequence, Tuple

import numpy as np
import numpy.typing as npt


class PanelDataError(Exception):
    """
    Exception raised for invalid panel data, such as unsorted or duplicate
    visit times, responses outside 1..K or inconsistent covariates.
    """


@dataclass(frozen=True)
class Subject:
    """
    One subject of an ordinal panel count study.

    Attributes:
        id (Hashable): Subject identifier.
        x (Tuple[float, ...]): Covariate vector of dimension p.
        visits (Tuple[float, ...]): Visit times 0 < T_1 < ... < T_m.
        responses (Tuple[int, ...]): Ordinal levels Y_1..Y_m.
    """

    id: Hashable
    x: Tuple[float, ...]
    visits: Tuple[float, ...]
    responses: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.visits) < 1:
            raise PanelDataError(f"Subject {self.id} has no visits")
        if len(self.visits) != len(self.responses):
            raise PanelDataError(
                f"Subject {self.id} has {len(self.visits)} visits but {len(self.responses)} responses"
            )
        if self.visits[0] <= 0:
            raise PanelDataError(f"Subject {self.id} has a visit at time {self.visits[0]} <= 0")
        if any(b <= a for a, b in zip(self.visits, self.visits[1:])):
            raise PanelDataError(f"Subject {self.id} visit times are not strictly increasing: {self.visits}")
        if any(y < 1 for y in self.responses):
            raise PanelDataError(f"Subject {self.id} has a response below 1: {self.responses}")

    @property
    def n_visits(self) -> int:
        """Number of visits m."""
        return len(self.visits)

    def intervals(self) -> List[Tuple[float, float]]:
        """Observation intervals (T_{j-1}, T_j] with T_0 = 0."""
        starts = (0.0,) + self.visits[:-1]
        return list(zip(starts, self.visits))


@dataclass(frozen=True)
class PanelDataset:
    """
    A collection of subjects sharing the covariate dimension and the level count.

    Attributes:
        subjects (Tuple[Subject, ...]): Subjects in a fixed order.
        n_levels (int): Number of ordinal levels K.
        domain_end (float): Maximum observation time tau.
        covariate_names (Tuple[str, ...]): Names of the p covariates.
    """

    subjects: Tuple[Subject, ...]
    n_levels: int
    domain_end: float
    covariate_names: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.subjects:
            raise PanelDataError("Dataset has no subjects")
        if self.n_levels < 2:
            raise PanelDataError(f"At least two ordinal levels are required, got {self.n_levels}")
        p = len(self.covariate_names)
        for subject in self.subjects:
            if len(subject.x) != p:
                raise PanelDataError(f"Subject {subject.id} has {len(subject.x)} covariates, expected {p}")
            if max(subject.responses) > self.n_levels:
                raise PanelDataError(f"Subject {subject.id} has a response above K = {self.n_levels}")
            if subject.visits[-1] > self.domain_end:
                raise PanelDataError(f"Subject {subject.id} is observed after tau = {self.domain_end}")

    @classmethod
    def from_subjects(
        cls,
        subjects: Sequence[Subject],
        n_levels: int | None = None,
        domain_end: float | None = None,
        covariate_names: Sequence[str] | None = None,
    ) -> "PanelDataset":
        """
        Build a dataset, inferring K, tau and covariate names when not given.

        Args:
            subjects (Sequence[Subject]): Subjects to include.
            n_levels (int, optional): K; defaults to the largest response.
            domain_end (float, optional): tau; defaults to the last visit time.
            covariate_names (Sequence[str], optional): Defaults to x1..xp.

        Returns:
            PanelDataset: The validated dataset.
        """
        if not subjects:
            raise PanelDataError("Dataset has no subjects")
        if n_levels is None:
            n_levels = max(max(s.responses) for s in subjects)
        if domain_end is None:
            domain_end = max(s.visits[-1] for s in subjects)
        if covariate_names is None:
            covariate_names = [f"x{i + 1}" for i in range(len(subjects[0].x))]
        return cls(tuple(subjects), int(n_levels), float(domain_end), tuple(covariate_names))

    def __iter__(self) -> Iterator[Subject]:
        return iter(self.subjects)

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def n_covariates(self) -> int:
        """Covariate dimension p."""
        return len(self.covariate_names)

    @property
    def n_observations(self) -> int:
        """Total number of visits."""
        return sum(s.n_visits for s in self.subjects)

    def pooled_visit_times(self) -> npt.NDArray[np.float64]:
        """All visit times of all subjects."""
        return np.concatenate([np.asarray(s.visits, dtype=float) for s in self.subjects])

    def covariate_matrix(self) -> npt.NDArray[np.float64]:
        """Covariates as an (n, p) array."""
        return np.asarray([s.x for s in self.subjects], dtype=float).reshape(len(self), self.n_covariates)

    def level_frequencies(self) -> npt.NDArray[np.float64]:
        """Empirical frequency of each level 1..K over all visits."""
        responses = np.concatenate([np.asarray(s.responses, dtype=int) for s in self.subjects])
        counts = np.bincount(responses, minlength=self.n_levels + 1)[1:]
        return counts / counts.sum()
