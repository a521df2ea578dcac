"""
Exact and continuous Poisson distribution functions for ordinal responses.

A latent Poisson count Delta with mean lambda is reported as level k when
gamma_{k-1} < Delta <= gamma_k, with sentinels gamma_0 = -1 and gamma_K = +inf.
The exact CDF F_lambda(k) equals the regularized upper incomplete gamma Q(k + 1, lambda),
which is also the continuous extension used when the cut points are estimated.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq
from scipy.special import gammainc, gammaincc, gammaln

from src.enums.panel_enums import CdfConvention

ArrayLike = Union[float, Sequence[float], npt.NDArray[np.float64]]

PROBABILITY_FLOOR = 1e-12
LOWER_SENTINEL = -1.0
_BOUNDARY_STEP = 1e-8


@dataclass(frozen=True)
class CutPoints:
    """
    Interior cut points (gamma_1, ..., gamma_{K-1}) of an ordinal coding.

    Attributes:
        values (Tuple[float, ...]): Strictly increasing cut points above -1.
        integer_valued (bool): True for known integer cut points, False for estimated ones.
    """

    values: Tuple[float, ...]
    integer_valued: bool = True

    def __post_init__(self) -> None:
        if len(self.values) < 1:
            raise ValueError("At least one cut point is required (K >= 2)")
        if self.values[0] <= LOWER_SENTINEL:
            raise ValueError(f"First cut point must exceed {LOWER_SENTINEL}, got {self.values[0]}")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError(f"Cut points must be strictly increasing: {self.values}")
        if self.integer_valued and any(float(v) != int(v) for v in self.values):
            raise ValueError(f"Integer-valued cut points expected: {self.values}")

    @property
    def n_levels(self) -> int:
        """Number of ordinal levels K."""
        return len(self.values) + 1

    def bounds(self) -> npt.NDArray[np.float64]:
        """Cut points with both sentinels, (-1, gamma_1, ..., gamma_{K-1}, inf)."""
        return np.concatenate(([LOWER_SENTINEL], np.asarray(self.values, dtype=float), [np.inf]))


def _shift(convention: CdfConvention) -> float:
    return 1.0 if convention == CdfConvention.SHIFTED else 0.0


def _check_mean(lam: npt.NDArray[np.float64]) -> None:
    if np.any(lam < 0):
        raise ValueError("Poisson mean must be nonnegative")


def _output(values: npt.NDArray[np.float64], scalar: bool) -> Union[float, npt.NDArray[np.float64]]:
    return float(values) if scalar else values


def _upper_regularized(shape: npt.NDArray[np.float64], lam: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Q(shape, lam) with Q = 0 for shape <= 0 and Q = 1 for shape = inf."""
    finite = np.isfinite(shape)
    positive = shape > 0
    safe = np.where(finite & positive, shape, 1.0)
    values = gammaincc(safe, lam)
    values = np.where(positive, values, 0.0)
    return np.where(finite, values, 1.0)


def _lower_regularized(shape: npt.NDArray[np.float64], lam: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """P(shape, lam) = 1 - Q(shape, lam) under the same conventions."""
    finite = np.isfinite(shape)
    positive = shape > 0
    safe = np.where(finite & positive, shape, 1.0)
    values = gammainc(safe, lam)
    values = np.where(positive, values, 1.0)
    return np.where(finite, values, 0.0)


def poisson_cdf(k: ArrayLike, lam: ArrayLike) -> Union[float, npt.NDArray[np.float64]]:
    """
    Poisson distribution function F_lambda(k) for integer k >= -1.

    Args:
        k (ArrayLike): Integer count thresholds; -1 gives 0.
        lam (ArrayLike): Nonnegative means.

    Returns:
        float or np.ndarray: sum_{j=0}^{k} exp(-lambda) lambda^j / j!.

    Raises:
        ValueError: If a mean is negative or k is not an integer >= -1.
    """
    counts = np.asarray(k, dtype=float)
    means = np.asarray(lam, dtype=float)
    _check_mean(means)
    if np.any((counts < -1) | (np.isfinite(counts) & (counts != np.floor(counts)))):
        raise ValueError("Poisson CDF thresholds must be integers >= -1")
    values = _upper_regularized(counts + 1.0, means)
    return _output(values, values.ndim == 0)


def continuous_cdf(
    x: ArrayLike, lam: ArrayLike, convention: CdfConvention = CdfConvention.SHIFTED
) -> Union[float, npt.NDArray[np.float64]]:
    """
    Continuous extension of the Poisson distribution function.

    With the shifted convention the value is Q(x + 1, lambda) for x > -1 and 0 otherwise,
    so it equals poisson_cdf at every nonnegative integer. The printed convention drops
    the unit shift: Q(x, lambda) for x > 0 and 0 otherwise.

    Args:
        x (ArrayLike): Real thresholds; +inf gives 1.
        lam (ArrayLike): Nonnegative means.
        convention (CdfConvention): Shifted or printed form.

    Returns:
        float or np.ndarray: CDF values, nondecreasing in x and decreasing in lambda.

    Raises:
        ValueError: If a mean is negative.
    """
    thresholds = np.asarray(x, dtype=float)
    means = np.asarray(lam, dtype=float)
    _check_mean(means)
    values = _upper_regularized(thresholds + _shift(convention), means)
    return _output(values, values.ndim == 0)


def dcontinuous_cdf_dlambda(
    x: ArrayLike, lam: ArrayLike, convention: CdfConvention = CdfConvention.SHIFTED
) -> Union[float, npt.NDArray[np.float64]]:
    """
    Derivative of continuous_cdf in the mean.

    For a = x + 1 (shifted) the derivative is -exp(-lambda) lambda^(a-1) / Gamma(a);
    it is 0 for a <= 0 and for x = +inf. At lambda = 0 a one-sided forward difference
    is returned.

    Args:
        x (ArrayLike): Real thresholds.
        lam (ArrayLike): Nonnegative means.
        convention (CdfConvention): Shifted or printed form.

    Returns:
        float or np.ndarray: Nonpositive derivatives.

    Raises:
        ValueError: If a mean is negative.
    """
    thresholds = np.asarray(x, dtype=float)
    means = np.asarray(lam, dtype=float)
    _check_mean(means)
    shape = thresholds + _shift(convention)
    shape, means = np.broadcast_arrays(shape, means)

    active = np.isfinite(shape) & (shape > 0)
    interior = active & (means > 0)
    safe_shape = np.where(active, shape, 1.0)
    safe_mean = np.where(interior, means, 1.0)

    with np.errstate(over="ignore", under="ignore"):
        log_density = (safe_shape - 1.0) * np.log(safe_mean) - safe_mean - gammaln(safe_shape)
        analytic = -np.exp(log_density)
    boundary = (gammaincc(safe_shape, _BOUNDARY_STEP) - 1.0) / _BOUNDARY_STEP

    values = np.where(interior, analytic, np.where(active, boundary, 0.0))
    return _output(values, values.ndim == 0)


def interval_prob(
    gamma_lo: ArrayLike,
    gamma_hi: ArrayLike,
    lam: ArrayLike,
    continuous: bool = False,
    convention: CdfConvention = CdfConvention.SHIFTED,
    floor: float = PROBABILITY_FLOOR,
) -> Union[float, npt.NDArray[np.float64]]:
    """
    Probability F_lambda(gamma_hi) - F_lambda(gamma_lo) of one ordinal level.

    The difference is taken between lower tails when lambda is below the lower threshold
    and between upper tails otherwise, so probabilities far in either tail keep their
    relative precision. The result is floored at `floor`.

    Args:
        gamma_lo (ArrayLike): Lower cut points (-1 for the first level).
        gamma_hi (ArrayLike): Upper cut points (+inf for the last level).
        lam (ArrayLike): Nonnegative means.
        continuous (bool): Use continuous_cdf instead of the exact Poisson CDF.
        convention (CdfConvention): Continuous form; the exact CDF is always shifted.
        floor (float): Lower bound applied to the result.

    Returns:
        float or np.ndarray: Level probabilities.

    Raises:
        ValueError: If gamma_lo >= gamma_hi or a mean is negative.
    """
    lo = np.asarray(gamma_lo, dtype=float)
    hi = np.asarray(gamma_hi, dtype=float)
    means = np.asarray(lam, dtype=float)
    _check_mean(means)
    if np.any(lo >= hi):
        raise ValueError("Lower cut point must be below the upper cut point")

    shift = _shift(convention) if continuous else 1.0
    values = np.maximum(_raw_interval_prob(lo + shift, hi + shift, means), floor)
    return _output(values, values.ndim == 0)


def _raw_interval_prob(
    shape_lo: npt.NDArray[np.float64], shape_hi: npt.NDArray[np.float64], lam: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    upper_tail = _upper_regularized(shape_hi, lam) - _upper_regularized(shape_lo, lam)
    lower_tail = _lower_regularized(shape_lo, lam) - _lower_regularized(shape_hi, lam)
    use_lower = lam < shape_lo
    return np.clip(np.where(use_lower, lower_tail, upper_tail), 0.0, 1.0)


def level_probabilities(
    cutpoints: CutPoints, lam: ArrayLike, convention: CdfConvention = CdfConvention.SHIFTED
) -> npt.NDArray[np.float64]:
    """
    Probabilities of all K levels at each mean, without flooring.

    Args:
        cutpoints (CutPoints): Interior cut points.
        lam (ArrayLike): Nonnegative means.
        convention (CdfConvention): Continuous form used for real-valued cut points.

    Returns:
        np.ndarray: Array of shape (len(lam), K) whose rows sum to 1.
    """
    means = np.atleast_1d(np.asarray(lam, dtype=float))
    _check_mean(means)
    bounds = cutpoints.bounds()
    shift = 1.0 if cutpoints.integer_valued else _shift(convention)
    lo = bounds[:-1][None, :] + shift
    hi = bounds[1:][None, :] + shift
    return _raw_interval_prob(lo, hi, means[:, None])


def continuous_quantile(
    prob: float, lam: float, convention: CdfConvention = CdfConvention.SHIFTED
) -> float:
    """
    Smallest real x with continuous_cdf(x, lam) = prob.

    Args:
        prob (float): Target probability in (0, 1).
        lam (float): Positive mean.
        convention (CdfConvention): Continuous form.

    Returns:
        float: Threshold x above the convention's lower limit.

    Raises:
        ValueError: If prob is outside (0, 1) or lam is not positive.
    """
    if not 0.0 < prob < 1.0:
        raise ValueError(f"Probability must lie in (0, 1), got {prob}")
    if lam <= 0:
        raise ValueError(f"Mean must be positive, got {lam}")

    lower = -_shift(convention) + 1e-10
    upper = max(1.0, lam)
    while continuous_cdf(upper, lam, convention) < prob:
        upper *= 2.0

    if continuous_cdf(lower, lam, convention) >= prob:
        return lower
    return float(brentq(lambda x: float(continuous_cdf(x, lam, convention)) - prob, lower, upper, xtol=1e-12))


def level_terms(
    shape_lo: npt.NDArray[np.float64], shape_hi: npt.NDArray[np.float64], lam: npt.NDArray[np.float64]
) -> Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Unfloored level probabilities and their derivatives in the mean.

    Thresholds are given as incomplete gamma shapes, i.e. cut points plus the
    convention's shift, so no validation happens here.

    Args:
        shape_lo (np.ndarray): Shapes of the lower cut points.
        shape_hi (np.ndarray): Shapes of the upper cut points.
        lam (np.ndarray): Nonnegative means.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Probabilities and d probability / d lambda.
    """
    probs = _raw_interval_prob(shape_lo, shape_hi, lam)
    slope = dcontinuous_cdf_dlambda(shape_hi - 1.0, lam) - dcontinuous_cdf_dlambda(shape_lo - 1.0, lam)
    return probs, np.asarray(slope, dtype=float)
