"""
Variance estimation, Wald tests and information criteria for sieve fits.

The covariance of a block of coordinates is a sandwich A^-1 B A^-1 built from profile
log-likelihoods at perturbed values of the block: B sums outer products of per-subject
first differences divided by h_n, A holds second differences divided by h_n^2, and
h_n = c / sqrt(n). The beta block gives the regression covariance; the same stencil on
the spline block, pushed through alpha = alpha_tilde^2, gives the baseline band.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.stats import norm

from src.config_parameters import FitConfig, SplineConfig
from src.enums.panel_enums import BandMethod
from src.estimator import FitResult, ProfileResult, SieveEstimator
from src.panel_data import PanelDataset
from src.spline_basis import TimeLike, ispline_basis, mspline_basis

logger = logging.getLogger(__name__)

Z_95 = 1.96
MAX_CONDITION = 1e12
BASELINE_GRID_POINTS = 101

ProfileFunction = Callable[[npt.NDArray[np.float64]], ProfileResult]


class SingularCurvatureError(Exception):
    """
    Exception raised when the second-difference matrix of a profile log-likelihood
    is too close to singular to invert.
    """

    def __init__(self, message: str, condition: float) -> None:
        super().__init__(message)
        self.condition = condition


class ModelSelectionError(Exception):
    """
    Exception raised when no cell of a knot and order grid yields a converged fit.
    """


@dataclass
class InferenceResult:
    """
    Variance estimates and derived summaries of a fit.

    Attributes:
        covariance (np.ndarray): Sandwich covariance of beta, p x p.
        summary (pd.DataFrame): Per-coefficient estimate, SE, 95% CI and p-value.
        alpha_covariance (Optional[np.ndarray]): Covariance of the spline coefficients.
        baseline (pd.DataFrame): Lambda0 with SE and 95% band on a time grid.
        aic (float): Akaike information criterion.
        bic (float): Bayesian information criterion.
        perturbation (float): h_n used by the stencils.
    """

    covariance: npt.NDArray[np.float64]
    summary: pd.DataFrame
    alpha_covariance: Optional[npt.NDArray[np.float64]]
    baseline: pd.DataFrame
    aic: float
    bic: float
    perturbation: float

    @property
    def standard_errors(self) -> npt.NDArray[np.float64]:
        """Standard errors of beta."""
        return np.sqrt(np.maximum(np.diag(self.covariance), 0.0))


def _stencil(center: npt.NDArray[np.float64], h: float) -> List[npt.NDArray[np.float64]]:
    d = center.size
    eye = np.eye(d)
    points = [center.copy()]
    points += [center + h * eye[i] for i in range(d)]
    points += [center + h * (eye[i] + eye[j]) for i in range(d) for j in range(i, d)]
    return points


def _evaluate(
    profile: ProfileFunction, points: Sequence[npt.NDArray[np.float64]], workers: int
) -> List[ProfileResult]:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(profile, points))
    return [profile(point) for point in points]


def _check_curvature(curvature: npt.NDArray[np.float64], strict: bool) -> npt.NDArray[np.float64]:
    condition = float(np.linalg.cond(curvature)) if np.all(np.isfinite(curvature)) else np.inf
    if condition <= MAX_CONDITION:
        return np.linalg.inv(curvature)
    message = f"Second-difference matrix is near singular (condition number {condition:.3g})"
    if strict:
        raise SingularCurvatureError(message, condition)
    logger.warning("%s; using the pseudo-inverse", message)
    return np.linalg.pinv(np.nan_to_num(curvature))


def profile_sandwich(
    profile: ProfileFunction, center: npt.ArrayLike, h: float, max_workers: int = 1, strict: bool = True
) -> npt.NDArray[np.float64]:
    """
    Sandwich covariance of a block of coordinates from profile log-likelihoods.

    Args:
        profile (ProfileFunction): Profile log-likelihood as a function of the block.
        center (npt.ArrayLike): Block value at the maximizer.
        h (float): Perturbation size.
        max_workers (int): Threads evaluating the stencil; 1 runs sequentially.
        strict (bool): Raise on a near-singular curvature instead of using a pseudo-inverse.

    Returns:
        np.ndarray: Symmetric covariance matrix of the block.

    Raises:
        SingularCurvatureError: If strict and the condition number exceeds 1e12.
    """
    center = np.asarray(center, dtype=float)
    d = center.size
    results = _evaluate(profile, _stencil(center, h), max_workers)
    if not all(r.converged for r in results):
        logger.warning("Some profile optimizations did not converge")

    base = results[0]
    singles = results[1 : d + 1]
    pairs = iter(results[d + 1 :])

    scores = np.column_stack([(r.subject_logliks - base.subject_logliks) / h for r in singles])
    meat = scores.T @ scores

    curvature = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            value = (base.value - singles[i].value - singles[j].value + next(pairs).value) / h**2
            curvature[i, j] = curvature[j, i] = value

    bread = _check_curvature(curvature, strict)
    covariance = bread @ meat @ bread
    return (covariance + covariance.T) / 2.0


def sandwich_cov(estimator: SieveEstimator, fit: FitResult) -> npt.NDArray[np.float64]:
    """
    Sandwich covariance of beta-hat from the nuisance-profiled log-likelihood.

    Args:
        estimator (SieveEstimator): Estimator that produced `fit`.
        fit (FitResult): Converged fit.

    Returns:
        np.ndarray: p x p covariance matrix.

    Raises:
        SingularCurvatureError: If the second-difference matrix is near singular.
    """
    settings = estimator.config.inference
    h = settings.perturbation(fit.n_subjects)
    points = 1 + fit.beta.size * (fit.beta.size + 3) // 2
    logger.info("Profiling beta on a %d-point stencil with h=%.4g", points, h)
    return profile_sandwich(
        lambda beta: estimator.profile_nuisance(beta, fit.theta), fit.beta, h, settings.max_workers
    )


def alpha_covariance(estimator: SieveEstimator, fit: FitResult) -> npt.NDArray[np.float64]:
    """
    Covariance of the spline coefficients alpha-hat.

    The sandwich is computed for alpha_tilde with beta and the cut points profiled out,
    then mapped to alpha = alpha_tilde^2 by the delta method.

    Args:
        estimator (SieveEstimator): Estimator that produced `fit`.
        fit (FitResult): Converged fit.

    Returns:
        np.ndarray: L x L covariance matrix of alpha.
    """
    settings = estimator.config.inference
    layout = fit.layout
    fixed = layout.indices(layout.alpha_tilde)
    alpha_tilde = fit.theta[layout.alpha_tilde]
    h = settings.perturbation(fit.n_subjects)

    tilde_cov = profile_sandwich(
        lambda values: estimator.profile(fixed, values, fit.theta),
        alpha_tilde,
        h,
        settings.max_workers,
        strict=False,
    )
    jacobian = np.diag(2.0 * alpha_tilde)
    return jacobian @ tilde_cov @ jacobian


def lambda_variance(
    fit: FitResult, alpha_cov: npt.NDArray[np.float64], t: TimeLike, method: BandMethod = BandMethod.DIAGONAL
) -> npt.NDArray[np.float64]:
    """
    Pointwise variance of Lambda0-hat(t).

    `BandMethod.DIAGONAL` sums I_l(t)^2 Var(alpha_l); `BandMethod.FULL_DELTA` also
    carries the covariances between coefficients.

    Args:
        fit (FitResult): Fit supplying the knots.
        alpha_cov (np.ndarray): Covariance of alpha-hat.
        t (TimeLike): Times in [0, tau].
        method (BandMethod): Variance formula.

    Returns:
        np.ndarray: Nonnegative variances, zero at t = 0.

    Raises:
        ValueError: If a time is outside [0, tau].
    """
    basis = ispline_basis(fit.knots, t)
    if method == BandMethod.FULL_DELTA:
        variance = np.einsum("ij,jk,ik->i", basis, alpha_cov, basis)
    else:
        variance = basis**2 @ np.diag(alpha_cov)
    return np.maximum(variance, 0.0)


def wald_summary(fit: FitResult, covariance: npt.NDArray[np.float64]) -> pd.DataFrame:
    """
    Wald table of the regression coefficients.

    Args:
        fit (FitResult): Fit supplying the estimates.
        covariance (np.ndarray): Covariance of beta-hat.

    Returns:
        pd.DataFrame: Columns covariate, estimate, se, ci_lower, ci_upper, z, p_value.
    """
    se = np.sqrt(np.maximum(np.diag(covariance), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = fit.beta / se
    return pd.DataFrame(
        {
            "covariate": list(fit.covariate_names),
            "estimate": fit.beta,
            "se": se,
            "ci_lower": fit.beta - Z_95 * se,
            "ci_upper": fit.beta + Z_95 * se,
            "z": z,
            "p_value": 2.0 * norm.sf(np.abs(z)),
        }
    )


def aic_bic(fit: FitResult) -> Tuple[float, float]:
    """
    Information criteria of a fit.

    q counts beta, the spline coefficients and, when estimated, the K - 1 cut points;
    the BIC sample size is the total number of visits.

    Returns:
        Tuple[float, float]: (AIC, BIC).
    """
    q = fit.n_parameters
    aic = -2.0 * fit.loglik + 2.0 * q
    bic = -2.0 * fit.loglik + q * np.log(fit.n_observations)
    return float(aic), float(bic)


def baseline_band(
    fit: FitResult,
    alpha_cov: Optional[npt.NDArray[np.float64]],
    grid: Optional[npt.ArrayLike] = None,
    method: BandMethod = BandMethod.DIAGONAL,
) -> pd.DataFrame:
    """
    Lambda0-hat with pointwise standard errors and a 95% band on a time grid.

    The lower band is clipped at 0. Without `alpha_cov` the SE and band columns are NaN.
    The intensity column is the fitted lambda0(t), the derivative of Lambda0-hat.

    Returns:
        pd.DataFrame: Columns t, lambda, se, lower, upper, intensity.
    """
    tau = fit.knots.domain_end
    t = np.linspace(0.0, tau, BASELINE_GRID_POINTS) if grid is None else np.asarray(grid, dtype=float)
    curve = ispline_basis(fit.knots, t) @ fit.alpha
    if alpha_cov is None:
        se = np.full_like(curve, np.nan)
    else:
        se = np.sqrt(lambda_variance(fit, alpha_cov, t, method))
    return pd.DataFrame(
        {
            "t": t,
            "lambda": curve,
            "se": se,
            "lower": np.maximum(curve - Z_95 * se, 0.0),
            "upper": curve + Z_95 * se,
            "intensity": mspline_basis(fit.knots, t) @ fit.alpha,
        }
    )


def infer(estimator: SieveEstimator, fit: FitResult, grid: Optional[npt.ArrayLike] = None) -> InferenceResult:
    """
    Run the full inference for a fit: beta covariance, Wald table, baseline band and criteria.

    Args:
        estimator (SieveEstimator): Estimator that produced `fit`.
        fit (FitResult): The fit.
        grid (npt.ArrayLike, optional): Times of the baseline band; defaults to 101 points on [0, tau].

    Returns:
        InferenceResult: All variance-based summaries.
    """
    settings = estimator.config.inference
    if not fit.converged:
        logger.warning("Computing variances for a fit that did not converge")

    covariance = sandwich_cov(estimator, fit)
    alpha_cov = alpha_covariance(estimator, fit) if settings.baseline_variance else None
    aic, bic = aic_bic(fit)
    return InferenceResult(
        covariance=covariance,
        summary=wald_summary(fit, covariance),
        alpha_covariance=alpha_cov,
        baseline=baseline_band(fit, alpha_cov, grid, settings.band_method),
        aic=aic,
        bic=bic,
        perturbation=settings.perturbation(fit.n_subjects),
    )


def select_model(
    dataset: PanelDataset, config: FitConfig, interior_grid: Sequence[int], order_grid: Sequence[int]
) -> pd.DataFrame:
    """
    Fit every (m_n, l) cell of a grid and tabulate AIC and BIC.

    Args:
        dataset (PanelDataset): Observations.
        config (FitConfig): Base configuration; only the spline part varies.
        interior_grid (Sequence[int]): Interior knot counts.
        order_grid (Sequence[int]): Spline orders.

    Returns:
        pd.DataFrame: One row per cell with loglik, q, aic, bic, converged and the
        per-criterion winner flags aic_best and bic_best.

    Raises:
        ValueError: If either grid is empty.
        ModelSelectionError: If no cell converged.
    """
    if not interior_grid or not order_grid:
        raise ValueError("Selection grid must not be empty")

    rows = []
    for interior in interior_grid:
        for order in order_grid:
            spline = SplineConfig(interior_knots=interior, order=order, placement=config.spline.placement)
            result = SieveEstimator(dataset, replace(config, spline=spline)).fit()
            aic, bic = aic_bic(result)
            logger.info(
                "m_n=%d, l=%d: loglik=%.4f, AIC=%.4f, BIC=%.4f", interior, order, result.loglik, aic, bic
            )
            rows.append(
                {
                    "interior_knots": interior,
                    "order": order,
                    "n_basis": spline.n_basis,
                    "loglik": result.loglik,
                    "q": result.n_parameters,
                    "aic": aic,
                    "bic": bic,
                    "converged": result.converged,
                }
            )

    table = pd.DataFrame(rows)
    converged = table[table["converged"]]
    if converged.empty:
        raise ModelSelectionError("No grid cell produced a converged fit")

    table["aic_best"] = table.index == converged["aic"].idxmin()
    table["bic_best"] = table.index == converged["bic"].idxmin()
    return table
