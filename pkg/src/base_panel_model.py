"""
Module that defines the base class for ordinal panel count likelihoods.

This module includes the abstract base class `BasePanelModel`, which defines the interface
the sieve estimator relies on: log-likelihood, per-subject contributions and gradient in
packed parameter coordinates. Subclasses decide where the cut points come from.
"""

from abc import ABC, abstractmethod

import numpy as np
import numpy.typing as npt

from src.ordinal_poisson import CutPoints


class NonFiniteLikelihoodError(Exception):
    """
    Exception raised when the log-likelihood is not finite where a finite value
    is required, which signals malformed data or an invalid parameter point.
    """


class BasePanelModel(ABC):
    """
    Abstract base class for ordinal panel count likelihoods.

    Parameters are packed into one unconstrained vector theta = (beta, alpha_tilde, delta).
    Any model that inherits from this class must implement the methods defined here.
    """

    @property
    @abstractmethod
    def n_parameters(self) -> int:
        """Length of the packed parameter vector."""

    @abstractmethod
    def loglik(self, theta: npt.NDArray[np.float64]) -> float:
        """
        Evaluate the log-likelihood.

        Args:
            theta (np.ndarray): Packed parameters.

        Returns:
            float: Sum of floored log level probabilities over all visits.
        """

    @abstractmethod
    def subject_logliks(self, theta: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """
        Evaluate each subject's log-likelihood contribution.

        Args:
            theta (np.ndarray): Packed parameters.

        Returns:
            np.ndarray: One contribution per subject, in dataset order.
        """

    @abstractmethod
    def gradient(self, theta: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """
        Evaluate the gradient of the log-likelihood in packed coordinates.

        Args:
            theta (np.ndarray): Packed parameters.

        Returns:
            np.ndarray: Partial derivatives, same length as theta.

        Raises:
            NonFiniteLikelihoodError: If the log-likelihood at theta is not finite.
        """

    @abstractmethod
    def cutpoints(self, theta: npt.NDArray[np.float64]) -> CutPoints:
        """
        Cut points in effect at theta.

        Args:
            theta (np.ndarray): Packed parameters.

        Returns:
            CutPoints: Fixed or estimated interior cut points.
        """
