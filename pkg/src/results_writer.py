"""
Writers of fit, study and selection outputs.

CSV files begin with '#' comment lines holding the seed and the JSON echo of the run
configuration; JSON files carry both as keys. Nothing time-dependent is written, so
repeated runs with the same inputs produce identical files.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src import __version__
from src.estimator import FitResult
from src.experiment_runner import StudyResult
from src.inference import InferenceResult

logger = logging.getLogger(__name__)

COEFFICIENT_COLUMNS = ["covariate", "estimate", "se", "ci_lower", "ci_upper", "p_value"]


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _output_dir(out_dir: Path) -> Path:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"Cannot create output directory {out_dir}: {e}") from e
    return out_dir


def header_lines(seed: Optional[int], config: Dict[str, Any]) -> List[str]:
    """Comment lines embedding the seed and configuration."""
    return [f"# seed: {seed}", f"# config: {json.dumps(_jsonable(config), sort_keys=True)}"]


def write_csv(frame: pd.DataFrame, path: Path, seed: Optional[int], config: Dict[str, Any]) -> Path:
    """
    Write a table preceded by the seed and configuration comments.

    Raises:
        OSError: If the file cannot be written.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("\n".join(header_lines(seed, config)) + "\n")
            frame.to_csv(f, index=False, lineterminator="\n")
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e}") from e
    logger.info("Wrote %s", path)
    return path


def write_json(payload: Dict[str, Any], path: Path) -> Path:
    """
    Write a JSON document with sorted keys; non-finite numbers become null.

    Raises:
        OSError: If the file cannot be written.
    """
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e}") from e
    logger.info("Wrote %s", path)
    return path


def write_metadata(out_dir: Path, command: str, seed: Optional[int], config: Dict[str, Any]) -> Path:
    """Write run_metadata.json with the command, version, seed and configuration."""
    payload = {"command": command, "version": __version__, "seed": seed, "config": config}
    return write_json(payload, _output_dir(out_dir) / "run_metadata.json")


def fit_payload(fit: FitResult, inference: InferenceResult) -> Dict[str, Any]:
    """Machine-readable content of fit.json."""
    return {
        "mode": str(fit.mode),
        "converged": fit.converged,
        "status": str(fit.status),
        "iterations": fit.iterations,
        "loglik": fit.loglik,
        "aic": inference.aic,
        "bic": inference.bic,
        "n_parameters": fit.n_parameters,
        "n_subjects": fit.n_subjects,
        "n_observations": fit.n_observations,
        "beta": dict(zip(fit.covariate_names, fit.beta.tolist())),
        "covariance": inference.covariance,
        "alpha": fit.alpha,
        "knots": list(fit.knots.knots),
        "spline_order": fit.knots.order,
        "cutpoints": list(fit.cutpoints.values),
        "cutpoints_estimated": fit.gamma is not None,
        "perturbation": inference.perturbation,
    }


def emit_results(
    fit: FitResult, inference: InferenceResult, out_dir: Path, seed: Optional[int], config: Dict[str, Any]
) -> List[Path]:
    """
    Write coefficients.csv, baseline.csv, fit.json and run_metadata.json of a fit.

    Args:
        fit (FitResult): The fit.
        inference (InferenceResult): Its variance summaries.
        out_dir (Path): Output directory, created if missing.
        seed (int, optional): Seed echoed into every file.
        config (Dict[str, Any]): Configuration echoed into every file.

    Returns:
        List[Path]: Files written.

    Raises:
        OSError: If the directory or a file cannot be written.
    """
    out_dir = _output_dir(out_dir)
    payload = {**fit_payload(fit, inference), "seed": seed, "config": config}
    return [
        write_csv(inference.summary[COEFFICIENT_COLUMNS], out_dir / "coefficients.csv", seed, config),
        write_csv(inference.baseline, out_dir / "baseline.csv", seed, config),
        write_json(payload, out_dir / "fit.json"),
        write_metadata(out_dir, "fit", seed, config),
    ]


def write_study(study: StudyResult, out_dir: Path, seed: Optional[int], config: Dict[str, Any]) -> List[Path]:
    """
    Write summary.csv, baseline_curves.csv, replicates.csv and run_metadata.json of a study.

    The replicate and exclusion counts are added to the configuration echo of summary.csv.

    Raises:
        OSError: If the directory or a file cannot be written.
    """
    out_dir = _output_dir(out_dir)
    counts = {"replicates": study.summary.replicates, "excluded": study.summary.failures}
    return [
        write_csv(study.summary.table, out_dir / "summary.csv", seed, {**config, **counts}),
        write_csv(study.curves, out_dir / "baseline_curves.csv", seed, config),
        write_csv(study.replicates, out_dir / "replicates.csv", seed, config),
        write_metadata(out_dir, "simulate", seed, {**config, **counts}),
    ]


def write_selection(
    table: pd.DataFrame, out_dir: Path, seed: Optional[int], config: Dict[str, Any]
) -> List[Path]:
    """
    Write selection.csv and run_metadata.json of a knot and order grid scan.

    Raises:
        OSError: If the directory or a file cannot be written.
    """
    out_dir = _output_dir(out_dir)
    return [
        write_csv(table, out_dir / "selection.csv", seed, config),
        write_metadata(out_dir, "select", seed, config),
    ]
