"""
panel_enums.py

Defines enumerations for fitting modes, spline knot placement, inference
variants and simulation scenarios of the ordinal panel count model.
"""

from enum import Enum


class FitMode(Enum):
    """
    Enumeration of likelihoods the estimator can maximize.

    Methods:
        KNOWN_CUTPOINTS: Exact Poisson likelihood with fixed integer cut points.
        UNKNOWN_CUTPOINTS: Continuous-Poisson pseudo-likelihood with estimated cut points.
    """

    KNOWN_CUTPOINTS = "known"
    UNKNOWN_CUTPOINTS = "unknown"

    def __str__(self):
        return self.value


class CdfConvention(Enum):
    """
    Enumeration of continuous extensions of the Poisson distribution function.

    Methods:
        SHIFTED: Q(x + 1, lambda), equal to the Poisson CDF at every integer x.
        PRINTED: Q(x, lambda), the form without the unit shift.
    """

    SHIFTED = "shifted"
    PRINTED = "printed"

    def __str__(self):
        return self.value


class KnotPlacement(Enum):
    """
    Enumeration of interior knot placement rules.

    Methods:
        QUANTILE: Empirical quantiles of the pooled visit times.
        EQUAL: Equally spaced on (0, tau).
    """

    QUANTILE = "quantile"
    EQUAL = "equal"

    def __str__(self):
        return self.value


class NuisanceProfile(Enum):
    """
    Enumeration of the parameters maximized out in the profile likelihood.

    Methods:
        SPLINE_AND_CUTPOINTS: Profile over spline coefficients and cut-point increments.
        SPLINE_ONLY: Profile over spline coefficients, cut points held at the fit.
    """

    SPLINE_AND_CUTPOINTS = "spline_and_cutpoints"
    SPLINE_ONLY = "spline_only"

    def __str__(self):
        return self.value


class BandMethod(Enum):
    """
    Enumeration of pointwise variance formulas for the baseline mean function.

    Methods:
        DIAGONAL: Sum of squared basis values times coefficient variances.
        FULL_DELTA: Delta method with the full coefficient covariance.
    """

    DIAGONAL = "diagonal"
    FULL_DELTA = "full_delta"

    def __str__(self):
        return self.value


class BaselineForm(Enum):
    """
    Enumeration of true baseline mean functions used by the simulator.

    Methods:
        LOGARITHMIC: 15 log(1 + 0.7 t).
        LINEAR: 3 t.
        CUSTOM: Nonnegative I-spline expansion with user coefficients.
    """

    LOGARITHMIC = "logarithmic"
    LINEAR = "linear"
    CUSTOM = "custom"

    def __str__(self):
        return self.value


class CovariateKind(Enum):
    """
    Enumeration of covariate distributions drawn by the simulator.

    Methods:
        NORMAL: Standard normal.
        BERNOULLI: Bernoulli with success probability 0.5.
    """

    NORMAL = "normal"
    BERNOULLI = "bernoulli"

    def __str__(self):
        return self.value


class OptimizerStatus(Enum):
    """
    Enumeration of reasons the quasi-Newton optimizer stopped.
    """

    OBJECTIVE_TOLERANCE = "objective_tolerance"
    GRADIENT_TOLERANCE = "gradient_tolerance"
    MAX_ITERATIONS = "max_iterations"
    STALLED = "stalled"

    def __str__(self):
        return self.value
