"""
Likelihoods of the proportional intensity model for ordinal panel count data.

The interval mean of visit j of subject i is
    mu_ij = [Lambda0(T_ij) - Lambda0(T_i,j-1)] * exp(beta . x_i),
with Lambda0 an I-spline expansion whose coefficients alpha_i = alpha_tilde_i^2 stay
nonnegative. Known cut points give the exact Poisson likelihood; estimated cut points
gamma_1 = exp(delta_1), gamma_k = gamma_{k-1} + exp(delta_k) give the continuous
pseudo-likelihood.
"""

from abc import abstractmethod
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import numpy.typing as npt

from src.base_panel_model import BasePanelModel, NonFiniteLikelihoodError
from src.enums.panel_enums import CdfConvention
from src.ordinal_poisson import LOWER_SENTINEL, PROBABILITY_FLOOR, CutPoints, level_terms
from src.panel_data import PanelDataError, PanelDataset, Subject
from src.spline_basis import KnotVector, ispline_basis

_FD_RELATIVE_STEP = 1e-6


@dataclass(frozen=True)
class ParameterLayout:
    """
    Positions of beta, alpha_tilde and delta in the packed parameter vector.

    Attributes:
        n_covariates (int): p.
        n_basis (int): L.
        n_cutpoints (int): K - 1 when cut points are estimated, else 0.
    """

    n_covariates: int
    n_basis: int
    n_cutpoints: int = 0

    @property
    def size(self) -> int:
        """Length of the packed vector."""
        return self.n_covariates + self.n_basis + self.n_cutpoints

    @property
    def beta(self) -> slice:
        """Slice of the regression coefficients."""
        return slice(0, self.n_covariates)

    @property
    def alpha_tilde(self) -> slice:
        """Slice of the unconstrained spline coefficients."""
        return slice(self.n_covariates, self.n_covariates + self.n_basis)

    @property
    def delta(self) -> slice:
        """Slice of the unconstrained cut-point increments."""
        return slice(self.n_covariates + self.n_basis, self.size)

    def indices(self, part: slice) -> npt.NDArray[np.int64]:
        """Integer positions of a slice."""
        return np.arange(self.size)[part]


@dataclass(frozen=True, eq=False)
class ParamVector:
    """
    Unpacked parameters (beta, alpha_tilde, delta).

    Attributes:
        beta (np.ndarray): Regression coefficients, length p.
        alpha_tilde (np.ndarray): Square roots (up to sign) of the spline coefficients, length L.
        delta (np.ndarray): Log cut-point increments, length K - 1 or 0.
    """

    beta: npt.NDArray[np.float64]
    alpha_tilde: npt.NDArray[np.float64]
    delta: npt.NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))

    @property
    def alpha(self) -> npt.NDArray[np.float64]:
        """Nonnegative spline coefficients."""
        return self.alpha_tilde**2

    @property
    def gamma(self) -> npt.NDArray[np.float64]:
        """Estimated cut points, strictly increasing and positive."""
        return np.cumsum(np.exp(self.delta))

    @property
    def layout(self) -> ParameterLayout:
        """Layout matching these parameters."""
        return ParameterLayout(len(self.beta), len(self.alpha_tilde), len(self.delta))

    def pack(self) -> npt.NDArray[np.float64]:
        """Concatenate into one unconstrained vector."""
        return np.concatenate((self.beta, self.alpha_tilde, self.delta)).astype(float)

    @classmethod
    def unpack(cls, theta: npt.NDArray[np.float64], layout: ParameterLayout) -> "ParamVector":
        """Split a packed vector according to `layout`."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (layout.size,):
            raise ValueError(f"Expected a packed vector of length {layout.size}, got {theta.shape}")
        return cls(theta[layout.beta].copy(), theta[layout.alpha_tilde].copy(), theta[layout.delta].copy())

    @classmethod
    def from_natural(
        cls, beta: npt.ArrayLike, alpha: npt.ArrayLike, gamma: npt.ArrayLike | None = None
    ) -> "ParamVector":
        """Build from beta, nonnegative alpha and optionally positive increasing gamma."""
        coeffs = np.asarray(alpha, dtype=float)
        if np.any(coeffs < 0):
            raise ValueError("Spline coefficients must be nonnegative")
        delta = np.zeros(0) if gamma is None else delta_from_cutpoints(gamma)
        return cls(np.asarray(beta, dtype=float), np.sqrt(coeffs), delta)


def delta_from_cutpoints(gamma: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """
    Map positive, strictly increasing cut points to log increments.

    Raises:
        ValueError: If gamma_1 <= 0 or gamma is not strictly increasing.
    """
    values = np.asarray(gamma, dtype=float)
    increments = np.diff(np.concatenate(([0.0], values)))
    if np.any(increments <= 0):
        raise ValueError(f"Cut points must be positive and strictly increasing: {values}")
    return np.log(increments)


@dataclass(frozen=True, eq=False)
class PanelDesign:
    """
    Visit-level arrays of a dataset evaluated on one spline basis.

    Attributes:
        knots (KnotVector): Spline knots.
        covariates (np.ndarray): (n, p) covariate matrix.
        subject_index (np.ndarray): Subject row of each visit, length N.
        basis_increment (np.ndarray): (N, L) values I(T_j) - I(T_{j-1}).
        responses (np.ndarray): Observed levels 1..K, length N.
        n_levels (int): K.
    """

    knots: KnotVector
    covariates: npt.NDArray[np.float64]
    subject_index: npt.NDArray[np.int64]
    basis_increment: npt.NDArray[np.float64]
    responses: npt.NDArray[np.int64]
    n_levels: int

    @property
    def n_subjects(self) -> int:
        """n."""
        return int(self.covariates.shape[0])

    @classmethod
    def build(cls, dataset: PanelDataset, knots: KnotVector) -> "PanelDesign":
        """Evaluate the basis at every visit of `dataset`."""
        if dataset.domain_end > knots.domain_end:
            raise PanelDataError(
                f"Visits up to {dataset.domain_end} exceed the spline domain {knots.domain_end}"
            )
        starts = np.concatenate([[0.0, *s.visits[:-1]] for s in dataset.subjects])
        ends = dataset.pooled_visit_times()
        increment = ispline_basis(knots, ends) - ispline_basis(knots, starts)
        index = np.concatenate([np.full(s.n_visits, i) for i, s in enumerate(dataset.subjects)])
        responses = np.concatenate([np.asarray(s.responses, dtype=np.int64) for s in dataset.subjects])
        return cls(knots, dataset.covariate_matrix(), index, increment, responses, dataset.n_levels)


def interval_mean(params: ParamVector, subject: Subject, j: int, knots: KnotVector) -> float:
    """
    Mean mu_ij of the latent count in the j-th observation interval of a subject.

    Args:
        params (ParamVector): Model parameters.
        subject (Subject): The subject.
        j (int): Visit index, 1-based.
        knots (KnotVector): Spline knots of the baseline.

    Returns:
        float: [Lambda0(T_j) - Lambda0(T_{j-1})] exp(beta . x), with T_0 = 0.

    Raises:
        IndexError: If j is outside 1..m.
    """
    if not 1 <= j <= subject.n_visits:
        raise IndexError(f"Visit index {j} outside 1..{subject.n_visits}")
    start = 0.0 if j == 1 else subject.visits[j - 2]
    basis = ispline_basis(knots, [start, subject.visits[j - 1]])
    increment = float((basis[1] - basis[0]) @ params.alpha)
    return increment * float(np.exp(np.dot(params.beta, subject.x)))


def interval_means(
    params: ParamVector, design: PanelDesign
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Interval means of every visit together with the subject risk scores exp(beta . x).

    Returns:
        Tuple[np.ndarray, np.ndarray]: mu of length N and risk of length n.
    """
    with np.errstate(over="ignore"):
        risk = np.exp(design.covariates @ params.beta)
        mu = (design.basis_increment @ params.alpha) * risk[design.subject_index]
    return mu, risk


def _visit_terms(
    mu: npt.NDArray[np.float64], design: PanelDesign, bounds: npt.NDArray[np.float64], shift: float
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Floored log probabilities and d log p / d mu of every visit."""
    lo = bounds[design.responses - 1] + shift
    hi = bounds[design.responses] + shift
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        probs, slope = level_terms(lo, hi, mu)
        kept = probs > PROBABILITY_FLOOR
        logp = np.log(np.where(kept, probs, PROBABILITY_FLOOR))
        score = np.where(kept, slope / np.where(kept, probs, 1.0), 0.0)
    logp = np.where(np.isnan(mu), np.nan, logp)
    return logp, score


def _bounds(gamma: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.concatenate(([LOWER_SENTINEL], np.asarray(gamma, dtype=float), [np.inf]))


def _subject_sums(design: PanelDesign, values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return np.bincount(design.subject_index, weights=values, minlength=design.n_subjects)


def loglik_known(params: ParamVector, design: PanelDesign, cutpoints: CutPoints) -> float:
    """
    Exact log-likelihood with fixed integer cut points.

    Args:
        params (ParamVector): beta and alpha_tilde; delta is ignored.
        design (PanelDesign): Visit-level data.
        cutpoints (CutPoints): Integer cut points, K - 1 of them.

    Returns:
        float: sum over visits of log p_ijk, each probability floored at 1e-12.

    Raises:
        PanelDataError: If a response lies outside 1..K.
    """
    _check_levels(design, cutpoints.n_levels)
    mu, _ = interval_means(params, design)
    logp, _ = _visit_terms(mu, design, _bounds(cutpoints.values), 1.0)
    return float(np.sum(_subject_sums(design, logp)))


def pseudo_loglik(
    params: ParamVector, design: PanelDesign, convention: CdfConvention = CdfConvention.SHIFTED
) -> float:
    """
    Continuous-Poisson pseudo-log-likelihood with cut points from params.delta.

    Args:
        params (ParamVector): beta, alpha_tilde and delta.
        design (PanelDesign): Visit-level data.
        convention (CdfConvention): Continuous CDF form.

    Returns:
        float: sum over visits of the floored log level probabilities.

    Raises:
        PanelDataError: If a response lies outside 1..K.
    """
    _check_levels(design, len(params.delta) + 1)
    mu, _ = interval_means(params, design)
    logp, _ = _visit_terms(mu, design, _bounds(params.gamma), _shift(convention))
    return float(np.sum(_subject_sums(design, logp)))


def _shift(convention: CdfConvention) -> float:
    return 1.0 if convention == CdfConvention.SHIFTED else 0.0


def _check_levels(design: PanelDesign, n_levels: int) -> None:
    if design.responses.min() < 1 or design.responses.max() > n_levels:
        raise PanelDataError(f"Responses must lie in 1..{n_levels}")


class OrdinalPanelModel(BasePanelModel):
    """
    Shared likelihood machinery over a fixed dataset and spline basis.

    Subclasses supply the cut points and the gradient in the cut-point coordinates.
    """

    def __init__(self, dataset: PanelDataset, knots: KnotVector, n_cutpoints: int) -> None:
        """
        Initialize the model with a dataset and spline knots.

        Args:
            dataset (PanelDataset): Observations.
            knots (KnotVector): Spline knots covering [0, tau].
            n_cutpoints (int): Number of estimated cut points in the packed vector.
        """
        self.dataset = dataset
        self.knots = knots
        self.design = PanelDesign.build(dataset, knots)
        self.layout = ParameterLayout(dataset.n_covariates, knots.n_basis, n_cutpoints)

    @property
    def n_parameters(self) -> int:
        return self.layout.size

    def unpack(self, theta: npt.NDArray[np.float64]) -> ParamVector:
        """Split a packed vector."""
        return ParamVector.unpack(theta, self.layout)

    @abstractmethod
    def _bounds_and_shift(self, params: ParamVector) -> Tuple[npt.NDArray[np.float64], float]:
        """Cut points with sentinels and the incomplete gamma shift in effect."""

    def _terms(
        self, theta: npt.NDArray[np.float64]
    ) -> Tuple[
        ParamVector,
        npt.NDArray[np.float64],
        npt.NDArray[np.float64],
        npt.NDArray[np.float64],
        npt.NDArray[np.float64],
    ]:
        params = self.unpack(theta)
        mu, risk = interval_means(params, self.design)
        bounds, shift = self._bounds_and_shift(params)
        logp, score = _visit_terms(mu, self.design, bounds, shift)
        return params, mu, risk, logp, score

    def subject_logliks(self, theta: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        _, _, _, logp, _ = self._terms(theta)
        return _subject_sums(self.design, logp)

    def loglik(self, theta: npt.NDArray[np.float64]) -> float:
        return float(np.sum(self.subject_logliks(theta)))

    def gradient(self, theta: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        params, mu, risk, logp, score = self._terms(theta)
        if not np.all(np.isfinite(logp)):
            raise NonFiniteLikelihoodError("Log-likelihood is not finite at the requested parameters")

        design = self.design
        grad_beta = design.covariates.T @ _subject_sums(design, score * mu)
        weighted = score * risk[design.subject_index]
        grad_alpha_tilde = 2.0 * params.alpha_tilde * (design.basis_increment.T @ weighted)
        return np.concatenate((grad_beta, grad_alpha_tilde, self._cutpoint_gradient(theta)))

    def _cutpoint_gradient(self, theta: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return np.zeros(0)

    def baseline(self, theta: npt.NDArray[np.float64], t: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Baseline mean function Lambda0 at times t."""
        return ispline_basis(self.knots, t) @ self.unpack(theta).alpha


class KnownCutpointModel(OrdinalPanelModel):
    """
    Exact Poisson likelihood with fixed integer cut points.
    """

    def __init__(self, dataset: PanelDataset, knots: KnotVector, cutpoints: CutPoints) -> None:
        if not cutpoints.integer_valued:
            raise ValueError("Known cut-point likelihood needs integer-valued cut points")
        if cutpoints.n_levels != dataset.n_levels:
            raise PanelDataError(
                f"{cutpoints.n_levels} levels implied by cut points, dataset has {dataset.n_levels}"
            )
        super().__init__(dataset, knots, n_cutpoints=0)
        self.fixed_cutpoints = cutpoints

    def _bounds_and_shift(self, params: ParamVector) -> Tuple[npt.NDArray[np.float64], float]:
        return _bounds(self.fixed_cutpoints.values), 1.0

    def cutpoints(self, theta: npt.NDArray[np.float64]) -> CutPoints:
        return self.fixed_cutpoints


class PseudoLikelihoodModel(OrdinalPanelModel):
    """
    Continuous-Poisson pseudo-likelihood with estimated cut points.

    The gradient in the cut-point increments uses central differences with a relative
    step of 1e-6; all other coordinates are analytic.
    """

    def __init__(
        self, dataset: PanelDataset, knots: KnotVector, convention: CdfConvention = CdfConvention.SHIFTED
    ) -> None:
        super().__init__(dataset, knots, n_cutpoints=dataset.n_levels - 1)
        self.convention = convention

    def _bounds_and_shift(self, params: ParamVector) -> Tuple[npt.NDArray[np.float64], float]:
        return _bounds(params.gamma), _shift(self.convention)

    def cutpoints(self, theta: npt.NDArray[np.float64]) -> CutPoints:
        return CutPoints(tuple(float(g) for g in self.unpack(theta).gamma), integer_valued=False)

    def _cutpoint_gradient(self, theta: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        grad = np.zeros(self.layout.n_cutpoints)
        for k, position in enumerate(self.layout.indices(self.layout.delta)):
            step = _FD_RELATIVE_STEP * max(1.0, abs(float(theta[position])))
            forward = theta.copy()
            backward = theta.copy()
            forward[position] += step
            backward[position] -= step
            grad[k] = (self.loglik(forward) - self.loglik(backward)) / (2.0 * step)
        return grad
