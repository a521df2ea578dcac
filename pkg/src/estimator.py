"""
Sieve maximum likelihood estimation for ordinal panel count data.

This module provides the `SieveEstimator` class, which places the I-spline knots,
builds the likelihood for the configured cut-point mode, picks a starting point and
maximizes the (pseudo-)log-likelihood with a BFGS optimizer. It also evaluates profile
log-likelihoods with some coordinates held fixed, warm-started from a full fit, which
the sandwich variance relies on.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from src.config_parameters import FitConfig
from src.enums.panel_enums import CdfConvention, FitMode, NuisanceProfile, OptimizerStatus
from src.model_core import OrdinalPanelModel, ParameterLayout, ParamVector, delta_from_cutpoints
from src.model_factory import ModelFactory
from src.ordinal_poisson import CutPoints, continuous_quantile
from src.panel_data import PanelDataset
from src.quasi_newton import QuasiNewtonOptimizer
from src.spline_basis import KnotVector, SplineSpec, build_knots

logger = logging.getLogger(__name__)

INITIAL_BASELINE_TOTAL = 1.0
INITIAL_MEAN = 1.0
_MIN_INITIAL_SPACING = 0.05
_QUANTILE_CLIP = 1e-6


@dataclass
class FitResult:
    """
    Outcome of a sieve maximum likelihood fit.

    Attributes:
        beta (np.ndarray): Regression coefficients.
        alpha (np.ndarray): Nonnegative spline coefficients.
        gamma (Optional[np.ndarray]): Estimated cut points, None when they were fixed.
        loglik (float): Maximized (pseudo-)log-likelihood.
        iterations (int): Optimizer iterations.
        converged (bool): Convergence flag.
        status (OptimizerStatus): Stopping reason.
        theta (np.ndarray): Packed final parameters.
        layout (ParameterLayout): Layout of theta.
        knots (KnotVector): Spline knots of the sieve.
        cutpoints (CutPoints): Cut points in effect at the solution.
        mode (FitMode): Cut-point mode of the fit.
        n_subjects (int): Sample size n.
        n_observations (int): Total visit count.
        covariate_names (Tuple[str, ...]): Names of the beta components.
        trace (List[float]): Log-likelihood after each accepted iteration.
    """

    beta: npt.NDArray[np.float64]
    alpha: npt.NDArray[np.float64]
    gamma: Optional[npt.NDArray[np.float64]]
    loglik: float
    iterations: int
    converged: bool
    status: OptimizerStatus
    theta: npt.NDArray[np.float64]
    layout: ParameterLayout
    knots: KnotVector
    cutpoints: CutPoints
    mode: FitMode
    n_subjects: int
    n_observations: int
    covariate_names: Tuple[str, ...]
    trace: List[float] = field(default_factory=list)

    @property
    def n_parameters(self) -> int:
        """Parameter count q used by the information criteria."""
        return self.layout.size

    @property
    def params(self) -> ParamVector:
        """Unpacked final parameters."""
        return ParamVector.unpack(self.theta, self.layout)


@dataclass
class ProfileResult:
    """
    Profile log-likelihood at one point of the fixed coordinates.

    Attributes:
        value (float): Maximized log-likelihood over the free coordinates.
        theta (np.ndarray): Packed maximizer.
        subject_logliks (np.ndarray): Per-subject contributions at theta.
        converged (bool): Whether the inner optimization converged.
    """

    value: float
    theta: npt.NDArray[np.float64]
    subject_logliks: npt.NDArray[np.float64]
    converged: bool


class SieveEstimator:
    """
    Sieve maximum likelihood estimator over an I-spline sieve.

    The knots and the likelihood model are built once per dataset and configuration;
    `fit` and `profile` can then be called repeatedly.
    """

    def __init__(self, dataset: PanelDataset, config: FitConfig) -> None:
        """
        Initialize the estimator with a dataset and a fit configuration.

        Args:
            dataset (PanelDataset): Observations.
            config (FitConfig): Spline, optimizer, inference and cut-point settings.

        Raises:
            ValueError: If the configuration is invalid.
        """
        config.validate()
        self.dataset = dataset
        self.config = config

        spec = SplineSpec.from_config(config.spline, dataset.domain_end)
        self.knots: KnotVector = build_knots(dataset.pooled_visit_times(), spec, config.spline.placement)
        self.model: OrdinalPanelModel = ModelFactory.create(dataset, self.knots, config)
        self.optimizer = QuasiNewtonOptimizer(config.optimizer)

    @property
    def layout(self) -> ParameterLayout:
        """Layout of the packed parameters."""
        return self.model.layout

    def initialize(self) -> ParamVector:
        """
        Starting point of the optimization.

        beta is zero and the baseline is flat with Lambda0(tau) = 1. Estimated cut points
        start at the continuous Poisson quantiles, at mean 1, of the cumulative empirical
        level frequencies, pushed apart so they stay positive and strictly increasing.

        Returns:
            ParamVector: Initial parameters.
        """
        n_basis = self.knots.n_basis
        beta = np.zeros(self.dataset.n_covariates)
        alpha_tilde = np.full(n_basis, np.sqrt(INITIAL_BASELINE_TOTAL / n_basis))

        if self.config.mode == FitMode.KNOWN_CUTPOINTS:
            return ParamVector(beta, alpha_tilde)

        gamma = initial_cutpoints(self.dataset.level_frequencies(), self.config.convention)
        return ParamVector(beta, alpha_tilde, delta_from_cutpoints(gamma))

    def fit(self, start: Optional[npt.NDArray[np.float64]] = None) -> FitResult:
        """
        Maximize the log-likelihood (known cut points) or pseudo-log-likelihood.

        Args:
            start (np.ndarray, optional): Packed starting point; defaults to `initialize()`.

        Returns:
            FitResult: Estimates and convergence diagnostics. Non-convergence is a status.

        Raises:
            NonFiniteLikelihoodError: If the objective is not finite at the starting point.
        """
        theta0 = self.initialize().pack() if start is None else np.asarray(start, dtype=float)
        logger.info(
            "Fitting %s cut-point model: n=%d, visits=%d, L=%d, parameters=%d",
            self.config.mode,
            len(self.dataset),
            self.dataset.n_observations,
            self.knots.n_basis,
            self.layout.size,
        )

        result = self.optimizer.minimize(
            lambda z: -self.model.loglik(z), lambda z: -self.model.gradient(z), theta0
        )
        if not result.converged:
            logger.warning("Fit did not converge: %s after %d iterations", result.status, result.iterations)
        logger.info(
            "Fit finished: loglik=%.6f, iterations=%d, status=%s", -result.fun, result.iterations, result.status
        )

        params = self.model.unpack(result.x)
        estimated = self.config.mode == FitMode.UNKNOWN_CUTPOINTS
        return FitResult(
            beta=params.beta,
            alpha=params.alpha,
            gamma=params.gamma if estimated else None,
            loglik=-result.fun,
            iterations=result.iterations,
            converged=result.converged,
            status=result.status,
            theta=result.x,
            layout=self.layout,
            knots=self.knots,
            cutpoints=self.model.cutpoints(result.x),
            mode=self.config.mode,
            n_subjects=len(self.dataset),
            n_observations=self.dataset.n_observations,
            covariate_names=self.dataset.covariate_names,
            trace=[-value for value in result.trace],
        )

    def profile(
        self, fixed: Sequence[int], values: npt.ArrayLike, warm_start: npt.NDArray[np.float64]
    ) -> ProfileResult:
        """
        Maximize the log-likelihood over every coordinate not in `fixed`.

        Args:
            fixed (Sequence[int]): Packed positions held fixed.
            values (npt.ArrayLike): Values of the fixed positions.
            warm_start (np.ndarray): Packed point supplying the start of the free positions.

        Returns:
            ProfileResult: Profiled value, maximizer and per-subject contributions.
        """
        base = np.asarray(warm_start, dtype=float).copy()
        fixed_index = np.asarray(fixed, dtype=int)
        base[fixed_index] = np.asarray(values, dtype=float)
        free = np.setdiff1d(np.arange(base.size), fixed_index)

        def embed(z: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
            theta = base.copy()
            theta[free] = z
            return theta

        result = self.optimizer.minimize(
            lambda z: -self.model.loglik(embed(z)), lambda z: -self.model.gradient(embed(z))[free], base[free]
        )
        theta = embed(result.x)
        return ProfileResult(-result.fun, theta, self.model.subject_logliks(theta), result.converged)

    def profile_nuisance(
        self,
        beta: npt.ArrayLike,
        warm_start: npt.NDArray[np.float64],
        nuisance: Optional[NuisanceProfile] = None,
    ) -> ProfileResult:
        """
        Profile log-likelihood pl(beta) maximized over the nuisance parameters.

        With `NuisanceProfile.SPLINE_ONLY` the cut points stay at their warm-start values
        and only the spline coefficients are maximized out.

        Args:
            beta (npt.ArrayLike): Fixed regression coefficients.
            warm_start (np.ndarray): Packed point, normally the full-fit maximizer.
            nuisance (NuisanceProfile, optional): Defaults to the inference configuration.

        Returns:
            ProfileResult: pl(beta) with its maximizer and per-subject contributions.
        """
        nuisance = nuisance or self.config.inference.nuisance_profile
        layout = self.layout
        fixed = layout.indices(layout.beta)
        values = np.asarray(beta, dtype=float)
        if nuisance == NuisanceProfile.SPLINE_ONLY and layout.n_cutpoints:
            delta = layout.indices(layout.delta)
            fixed = np.concatenate((fixed, delta))
            values = np.concatenate((values, np.asarray(warm_start, dtype=float)[delta]))
        return self.profile(fixed, values, warm_start)


def initial_cutpoints(
    frequencies: npt.ArrayLike, convention: CdfConvention = CdfConvention.SHIFTED
) -> npt.NDArray[np.float64]:
    """
    Match level frequencies with continuous Poisson quantiles at mean 1.

    Args:
        frequencies (npt.ArrayLike): Empirical frequencies of levels 1..K.
        convention (CdfConvention): Continuous CDF form.

    Returns:
        np.ndarray: K - 1 positive, strictly increasing cut points.
    """
    cumulative = np.cumsum(np.asarray(frequencies, dtype=float))[:-1]
    cumulative = np.clip(cumulative, _QUANTILE_CLIP, 1.0 - _QUANTILE_CLIP)
    gamma = np.array([continuous_quantile(float(c), INITIAL_MEAN, convention) for c in cumulative])
    gamma[0] = max(gamma[0], _MIN_INITIAL_SPACING)
    for k in range(1, len(gamma)):
        gamma[k] = max(gamma[k], gamma[k - 1] + _MIN_INITIAL_SPACING)
    return gamma


def fit(dataset: PanelDataset, config: FitConfig) -> FitResult:
    """Fit the sieve estimator with `config` to `dataset`."""
    return SieveEstimator(dataset, config).fit()
