"""
Monotone I-spline bases for the baseline mean function Lambda0(t).

The knot sequence of order l repeats 0 and tau l times each, with m_n interior knots
strictly inside (0, tau), giving m_n + l basis functions. Each I-spline I_i is the
running integral of the normalized M-spline M_i; on the sequence extended by one more
boundary knot at each end, I_i equals the tail sum of the order l + 1 B-splines
B_i + ... + B_L, which is how the basis is evaluated here.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from scipy.interpolate import BSpline

from src.config_parameters import SplineConfig
from src.enums.panel_enums import KnotPlacement

logger = logging.getLogger(__name__)

TimeLike = Union[float, Sequence[float], npt.NDArray[np.float64]]

_BOUNDARY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SplineSpec:
    """
    Order, interior knot count and domain of an I-spline sieve.

    Attributes:
        order (int): Spline order l (degree + 1).
        interior_count (int): Number of interior knots m_n.
        domain_end (float): Right end tau of the domain [0, tau].
    """

    order: int
    interior_count: int
    domain_end: float

    @property
    def n_basis(self) -> int:
        """Basis dimension L = m_n + l."""
        return self.interior_count + self.order

    @classmethod
    def from_config(cls, config: SplineConfig, domain_end: float) -> "SplineSpec":
        """Build the spec of `config` on [0, domain_end]."""
        return cls(order=config.order, interior_count=config.interior_knots, domain_end=domain_end)

    def validate(self) -> None:
        """
        Validate the spline specification.

        Raises:
            ValueError: If any parameter is invalid.
        """
        if self.order < 1:
            raise ValueError(f"Spline order must be at least 1, got {self.order}")
        if self.interior_count < 0:
            raise ValueError(f"Interior knot count must be nonnegative, got {self.interior_count}")
        if not self.domain_end > 0:
            raise ValueError(f"Domain end must be positive, got {self.domain_end}")


@dataclass(frozen=True)
class KnotVector:
    """
    Full knot sequence of an I-spline basis.

    Attributes:
        knots (Tuple[float, ...]): Nondecreasing knots with l-fold repeats at 0 and tau.
        order (int): Spline order l.
    """

    knots: Tuple[float, ...]
    order: int

    def __post_init__(self) -> None:
        order = self.order
        if len(self.knots) < 2 * order:
            raise ValueError(f"Knot vector of order {order} needs at least {2 * order} knots")
        if any(k != 0.0 for k in self.knots[:order]):
            raise ValueError(f"First {order} knots must equal 0")
        if any(k != self.knots[-1] for k in self.knots[-order:]) or not self.knots[-1] > 0:
            raise ValueError(f"Last {order} knots must equal a positive tau")
        inner = (0.0,) + self.interior + (self.domain_end,)
        if any(b <= a for a, b in zip(inner, inner[1:])):
            raise ValueError(f"Interior knots must be strictly increasing inside (0, tau): {self.interior}")

    @property
    def domain_end(self) -> float:
        """Right end tau of the domain."""
        return self.knots[-1]

    @property
    def interior(self) -> Tuple[float, ...]:
        """Interior knots strictly inside (0, tau)."""
        return self.knots[self.order : len(self.knots) - self.order]

    @property
    def n_basis(self) -> int:
        """Basis dimension L = m_n + l."""
        return len(self.knots) - self.order

    def array(self) -> npt.NDArray[np.float64]:
        """Knots as a float array."""
        return np.asarray(self.knots, dtype=float)


def _nudge_apart(values: npt.NDArray[np.float64], spacing: float) -> npt.NDArray[np.float64]:
    nudged = values.copy()
    for j in range(1, len(nudged)):
        if nudged[j] <= nudged[j - 1]:
            nudged[j] = nudged[j - 1] + spacing
    return nudged


def build_knots(
    visit_times: Sequence[float], spec: SplineSpec, placement: KnotPlacement = KnotPlacement.QUANTILE
) -> KnotVector:
    """
    Place the knots of an I-spline basis.

    Interior knots sit at the empirical j / (m_n + 1) quantiles of the pooled visit times.
    Tied quantiles are nudged apart by the smallest spacing between distinct visit times
    divided by m_n + 1; if that pushes a knot out of (0, tau) the equally spaced rule is
    used instead.

    Args:
        visit_times (Sequence[float]): Pooled visit times, all in (0, tau].
        spec (SplineSpec): Order, interior knot count and tau.
        placement (KnotPlacement): Quantile or equally spaced interior knots.

    Returns:
        KnotVector: Knots with l-fold boundary repeats.

    Raises:
        ValueError: If visit_times is empty or has a time outside (0, tau].
    """
    spec.validate()
    times = np.asarray(visit_times, dtype=float)
    tau = spec.domain_end

    if times.size == 0:
        raise ValueError("Knot placement needs at least one visit time")
    if np.any(times <= 0) or np.any(times > tau):
        raise ValueError(f"Visit times must lie in (0, {tau}]")

    m = spec.interior_count
    probs = np.arange(1, m + 1) / (m + 1)
    equal = tau * probs

    if placement == KnotPlacement.EQUAL or m == 0:
        interior = equal
    else:
        interior = np.quantile(times, probs)
        distinct = np.unique(np.concatenate(([0.0], times, [tau])))
        spacing = float(np.min(np.diff(distinct))) / (m + 1)
        interior = _nudge_apart(interior, spacing)
        if interior[0] <= 0 or interior[-1] >= tau:
            logger.warning(
                "Quantile knots %s do not fit inside (0, %s); using equally spaced knots", interior, tau
            )
            interior = equal

    knots = np.concatenate((np.zeros(spec.order), interior, np.full(spec.order, tau)))
    return KnotVector(knots=tuple(float(k) for k in knots), order=spec.order)


def _check_times(kv: KnotVector, t: TimeLike) -> npt.NDArray[np.float64]:
    times = np.atleast_1d(np.asarray(t, dtype=float))
    tau = kv.domain_end
    if np.any(times < -_BOUNDARY_TOLERANCE) or np.any(times > tau + _BOUNDARY_TOLERANCE):
        raise ValueError(f"Times must lie in [0, {tau}]")
    return np.clip(times, 0.0, tau)


def ispline_basis(kv: KnotVector, t: TimeLike) -> npt.NDArray[np.float64]:
    """
    Evaluate every I-spline basis function at each time.

    Args:
        kv (KnotVector): Knots of order l.
        t (TimeLike): Times in [0, tau].

    Returns:
        np.ndarray: Matrix of shape (len(t), L), entries in [0, 1].

    Raises:
        ValueError: If a time lies outside [0, tau].
    """
    times = _check_times(kv, t)
    tau = kv.domain_end
    extended = np.concatenate(([0.0], kv.array(), [tau]))

    bsplines = BSpline.design_matrix(times, extended, kv.order).toarray()
    tails = np.cumsum(bsplines[:, ::-1], axis=1)[:, ::-1]
    values = np.clip(tails[:, 1:], 0.0, 1.0)

    values[times <= 0.0] = 0.0
    values[times >= tau] = 1.0
    return values


def ispline_values(kv: KnotVector, l: int, t: float) -> npt.NDArray[np.float64]:
    """
    Evaluate (I_1(t), ..., I_L(t)) at a single time.

    Args:
        kv (KnotVector): Knots of order l.
        l (int): Spline order; must match the knot vector.
        t (float): Time in [0, tau].

    Returns:
        np.ndarray: L basis values in [0, 1].

    Raises:
        ValueError: If t lies outside [0, tau] or l does not match the knots.
    """
    if l != kv.order:
        raise ValueError(f"Order {l} does not match knot vector of order {kv.order}")
    return ispline_basis(kv, t)[0]


def mspline_basis(kv: KnotVector, t: TimeLike) -> npt.NDArray[np.float64]:
    """
    Evaluate the normalized M-splines, the derivatives of the I-splines in t.

    Args:
        kv (KnotVector): Knots of order l.
        t (TimeLike): Times in [0, tau].

    Returns:
        np.ndarray: Matrix of shape (len(t), L); each column integrates to 1 over [0, tau].
    """
    times = _check_times(kv, t)
    knots = kv.array()
    l = kv.order

    bsplines = BSpline.design_matrix(times, knots, l - 1).toarray()
    widths = knots[l : l + kv.n_basis] - knots[: kv.n_basis]
    return l * bsplines / widths


def baseline_mean(kv: KnotVector, l: int, alpha: Sequence[float], t: TimeLike) -> npt.NDArray[np.float64]:
    """
    Baseline mean function Lambda0(t) = sum_i alpha_i I_i(t).

    Args:
        kv (KnotVector): Knots of order l.
        l (int): Spline order; must match the knot vector.
        alpha (Sequence[float]): Nonnegative coefficients of length L.
        t (TimeLike): Times in [0, tau].

    Returns:
        np.ndarray: Lambda0 at each time; nonnegative and nondecreasing in t.

    Raises:
        ValueError: If a coefficient is negative, the length is wrong or a time is out of range.
    """
    if l != kv.order:
        raise ValueError(f"Order {l} does not match knot vector of order {kv.order}")
    coeffs = np.asarray(alpha, dtype=float)
    if coeffs.shape != (kv.n_basis,):
        raise ValueError(f"Expected {kv.n_basis} coefficients, got {coeffs.shape}")
    if np.any(coeffs < 0):
        raise ValueError(f"Spline coefficients must be nonnegative: {coeffs}")
    return ispline_basis(kv, t) @ coeffs
