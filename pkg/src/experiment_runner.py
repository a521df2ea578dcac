"""
This module runs Monte Carlo studies of the sieve estimator: it simulates replicate
datasets from a scenario, fits and infers on each, and summarizes Bias, SD, SE and
coverage of the regression coefficients, the baseline mean at fixed times and, when
estimated, the cut points.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
from tqdm import tqdm

from src.base_panel_model import NonFiniteLikelihoodError
from src.config_parameters import FitConfig
from src.enums.panel_enums import FitMode
from src.estimator import SieveEstimator
from src.inference import Z_95, SingularCurvatureError, alpha_covariance, lambda_variance, sandwich_cov
from src.simulation import SimScenario, gen_dataset
from src.spline_basis import ispline_basis

logger = logging.getLogger(__name__)

BASELINE_TARGETS: Tuple[float, ...] = (2.5, 5.0, 7.5)
CURVE_POINTS = 101


@dataclass
class ReplicateTask:
    """Inputs of one replicate, picklable for worker processes."""

    index: int
    scenario: SimScenario
    n: int
    config: FitConfig
    seed: np.random.SeedSequence


@dataclass
class ReplicateOutcome:
    """
    Estimates of one replicate.

    Attributes:
        index (int): Replicate number.
        converged (bool): Whether the fit converged and its variances were computed.
        status (str): Optimizer status or the failure reason.
        iterations (int): Optimizer iterations.
        loglik (float): Maximized log-likelihood.
        estimates (Dict[str, float]): Point estimates by target name.
        standard_errors (Dict[str, float]): Standard errors by target name.
        curve (Optional[np.ndarray]): Lambda0-hat on the study grid.
    """

    index: int
    converged: bool
    status: str
    iterations: int = 0
    loglik: float = float("nan")
    estimates: Dict[str, float] = field(default_factory=dict)
    standard_errors: Dict[str, float] = field(default_factory=dict)
    curve: Optional[npt.NDArray[np.float64]] = None


@dataclass
class SimSummary:
    """
    Summary of a simulation study.

    Attributes:
        table (pd.DataFrame): One row per target with truth, bias, sd, se and cp (percent).
        replicates (int): Replicates attempted.
        failures (int): Replicates excluded for non-convergence or failed variances.
    """

    table: pd.DataFrame
    replicates: int
    failures: int

    @property
    def used(self) -> int:
        """Replicates entering the summary."""
        return self.replicates - self.failures


@dataclass
class StudyResult:
    """Summary, per-replicate estimates and baseline curve bands of a study."""

    summary: SimSummary
    replicates: pd.DataFrame
    curves: pd.DataFrame


def beta_target(name: str) -> str:
    """Target name of a regression coefficient."""
    return f"beta_{name}"


def lambda_target(t: float) -> str:
    """Target name of the baseline mean at time t."""
    return f"Lambda({t:g})"


def gamma_target(k: int) -> str:
    """Target name of the k-th cut point, 1-based."""
    return f"gamma_{k}"


def true_values(scenario: SimScenario, mode: FitMode) -> Dict[str, float]:
    """
    True value of every study target, in summary order.

    Returns:
        Dict[str, float]: Coefficients, Lambda0 at 2.5, 5.0 and 7.5, and cut points in unknown mode.
    """
    truth = {beta_target(name): float(b) for name, b in zip(scenario.covariate_names, scenario.beta)}
    baseline = scenario.baseline_mean(np.asarray(BASELINE_TARGETS))
    truth.update({lambda_target(t): float(value) for t, value in zip(BASELINE_TARGETS, baseline)})
    if mode == FitMode.UNKNOWN_CUTPOINTS:
        truth.update({gamma_target(k + 1): float(c) for k, c in enumerate(scenario.cutpoints)})
    return truth


def curve_grid(scenario: SimScenario) -> npt.NDArray[np.float64]:
    """Time grid of the baseline curve bands."""
    return np.linspace(0.0, scenario.domain_end, CURVE_POINTS)


def study_config(scenario: SimScenario, config: FitConfig) -> FitConfig:
    """Fit configuration of a study, taking known cut points from the scenario."""
    if config.mode == FitMode.KNOWN_CUTPOINTS:
        return replace(config, cutpoints=tuple(scenario.cutpoints))
    return config


def run_replicate(task: ReplicateTask) -> ReplicateOutcome:
    """
    Simulate, fit and infer on one replicate.

    Failures of the fit or of the variance computation are returned as a non-converged
    outcome so the study can count them.

    Args:
        task (ReplicateTask): Replicate inputs.

    Returns:
        ReplicateOutcome: Estimates and standard errors of every target.
    """
    dataset = gen_dataset(task.scenario, task.n, task.seed)
    try:
        estimator = SieveEstimator(dataset, task.config)
        fit = estimator.fit()
    except NonFiniteLikelihoodError as e:
        logger.warning("Replicate %d failed: %s", task.index, e)
        return ReplicateOutcome(task.index, False, "non_finite")

    outcome = ReplicateOutcome(task.index, fit.converged, str(fit.status), fit.iterations, fit.loglik)
    if not fit.converged:
        return outcome

    grid = curve_grid(task.scenario)
    targets = np.asarray(BASELINE_TARGETS)
    outcome.curve = ispline_basis(fit.knots, grid) @ fit.alpha
    baseline = ispline_basis(fit.knots, targets) @ fit.alpha
    outcome.estimates.update({beta_target(name): float(b) for name, b in zip(fit.covariate_names, fit.beta)})
    outcome.estimates.update({lambda_target(t): float(v) for t, v in zip(BASELINE_TARGETS, baseline)})
    if fit.gamma is not None:
        outcome.estimates.update({gamma_target(k + 1): float(g) for k, g in enumerate(fit.gamma)})

    try:
        covariance = sandwich_cov(estimator, fit)
        se = np.sqrt(np.maximum(np.diag(covariance), 0.0))
        outcome.standard_errors.update({beta_target(name): float(s) for name, s in zip(fit.covariate_names, se)})
        if task.config.inference.baseline_variance:
            alpha_cov = alpha_covariance(estimator, fit)
            band = np.sqrt(lambda_variance(fit, alpha_cov, targets, task.config.inference.band_method))
            outcome.standard_errors.update({lambda_target(t): float(s) for t, s in zip(BASELINE_TARGETS, band)})
    except (SingularCurvatureError, NonFiniteLikelihoodError) as e:
        logger.warning("Replicate %d excluded: %s", task.index, e)
        outcome.converged = False
        outcome.status = "variance_failed"
    return outcome


def _run_all(tasks: List[ReplicateTask], max_workers: int, progress: bool) -> List[ReplicateOutcome]:
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as executor:
            outcomes = executor.map(run_replicate, tasks)
            return list(tqdm(outcomes, total=len(tasks), desc="replicates", disable=not progress))
    return [run_replicate(task) for task in tqdm(tasks, desc="replicates", disable=not progress)]


def summarize(truth: Dict[str, float], outcomes: List[ReplicateOutcome]) -> SimSummary:
    """
    Bias, SD, SE and coverage of every target over the converged replicates.

    CP is the percentage of replicates whose interval estimate +- 1.96 SE covers the truth;
    targets without standard errors get NaN SE and CP.

    Args:
        truth (Dict[str, float]): True values by target name.
        outcomes (List[ReplicateOutcome]): Replicate outcomes.

    Returns:
        SimSummary: Summary table and counts.
    """
    used = [o for o in outcomes if o.converged]
    rows = []
    for target, true_value in truth.items():
        estimates = np.array([o.estimates.get(target, np.nan) for o in used], dtype=float)
        errors = np.array([o.standard_errors.get(target, np.nan) for o in used], dtype=float)
        has_se = estimates.size > 0 and not np.all(np.isnan(errors))
        covered = np.abs(estimates - true_value) <= Z_95 * errors
        rows.append(
            {
                "target": target,
                "truth": true_value,
                "bias": float(np.mean(estimates) - true_value) if estimates.size else np.nan,
                "sd": float(np.std(estimates, ddof=1)) if estimates.size > 1 else np.nan,
                "se": float(np.nanmean(errors)) if has_se else np.nan,
                "cp": float(100.0 * np.mean(covered)) if has_se else np.nan,
            }
        )
    return SimSummary(pd.DataFrame(rows), len(outcomes), len(outcomes) - len(used))


def replicate_table(truth: Dict[str, float], outcomes: List[ReplicateOutcome]) -> pd.DataFrame:
    """Per-replicate status, estimates and standard errors."""
    rows = []
    for o in outcomes:
        row: Dict[str, object] = {
            "replicate": o.index,
            "converged": o.converged,
            "status": o.status,
            "iterations": o.iterations,
            "loglik": o.loglik,
        }
        for target in truth:
            row[target] = o.estimates.get(target, np.nan)
            row[f"se_{target}"] = o.standard_errors.get(target, np.nan)
        rows.append(row)
    return pd.DataFrame(rows)


def baseline_curves(scenario: SimScenario, outcomes: List[ReplicateOutcome]) -> pd.DataFrame:
    """
    True Lambda0 with the mean estimate and 2.5% / 97.5% replicate percentiles on a grid.

    Returns:
        pd.DataFrame: Columns t, truth, mean, lower, upper.
    """
    grid = curve_grid(scenario)
    curves = [o.curve for o in outcomes if o.converged and o.curve is not None]
    if curves:
        stacked = np.vstack(curves)
        mean = stacked.mean(axis=0)
        lower, upper = np.percentile(stacked, [2.5, 97.5], axis=0)
    else:
        mean = lower = upper = np.full(grid.size, np.nan)
    return pd.DataFrame(
        {"t": grid, "truth": scenario.baseline_mean(grid), "mean": mean, "lower": lower, "upper": upper}
    )


def run_study(
    scenario: SimScenario,
    n: int,
    replicates: int,
    config: FitConfig,
    seed: Optional[int] = None,
    max_workers: int = 1,
    progress: bool = True,
) -> StudyResult:
    """
    Run a Monte Carlo study.

    Each replicate draws its data from its own child of SeedSequence(seed), so results do
    not depend on the number of workers.

    Args:
        scenario (SimScenario): Data-generating process.
        n (int): Subjects per replicate.
        replicates (int): Number of replicates R.
        config (FitConfig): Fit settings; known cut points come from the scenario.
        seed (int, optional): Root seed; defaults to the scenario seed.
        max_workers (int): Worker processes; 1 runs in this process.
        progress (bool): Show a progress bar.

    Returns:
        StudyResult: Summary, per-replicate table and curve bands.

    Raises:
        ValueError: If replicates < 2 or n < 1.
    """
    if replicates < 2:
        raise ValueError(f"A study needs at least 2 replicates, got {replicates}")
    if n < 1:
        raise ValueError(f"Sample size must be positive, got {n}")

    fit_config = study_config(scenario, config)
    fit_config.validate()
    root = np.random.SeedSequence(scenario.seed if seed is None else seed)
    tasks = [
        ReplicateTask(i + 1, scenario, n, fit_config, child) for i, child in enumerate(root.spawn(replicates))
    ]

    logger.info(
        "Running %d replicates of %s with n=%d in %s mode", replicates, scenario.name, n, fit_config.mode
    )
    outcomes = _run_all(tasks, max_workers, progress)

    truth = true_values(scenario, fit_config.mode)
    summary = summarize(truth, outcomes)
    if summary.failures:
        logger.warning("%d of %d replicates excluded", summary.failures, summary.replicates)
    return StudyResult(summary, replicate_table(truth, outcomes), baseline_curves(scenario, outcomes))
