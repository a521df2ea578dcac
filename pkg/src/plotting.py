"""
PNG rendering of baseline mean plot data.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  # pylint: disable=wrong-import-position
import pandas as pd  # noqa: E402  # pylint: disable=wrong-import-position

logger = logging.getLogger(__name__)

FIGURE_SIZE = (6.0, 4.0)


def plot_baseline(baseline: pd.DataFrame, path: Path) -> Path:
    """
    Draw the fitted Lambda0 with its 95% band, and the fitted intensity beside it.

    Args:
        baseline (pd.DataFrame): Columns t, lambda, se, lower, upper, intensity, as in baseline.csv.
        path (Path): PNG file to write.

    Returns:
        Path: The written file.
    """
    fig, (ax, ax_rate) = plt.subplots(1, 2, figsize=(2 * FIGURE_SIZE[0], FIGURE_SIZE[1]))
    ax.plot(baseline["t"], baseline["lambda"], color="black", label="estimate")
    if baseline["se"].notna().any():
        ax.fill_between(
            baseline["t"], baseline["lower"], baseline["upper"], color="grey", alpha=0.3, label="95% band"
        )
    ax.set_xlabel("t")
    ax.set_ylabel("baseline mean")
    ax.legend()
    ax_rate.plot(baseline["t"], baseline["intensity"], color="black")
    ax_rate.set_xlabel("t")
    ax_rate.set_ylabel("baseline intensity")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path


def plot_study_curves(curves: pd.DataFrame, path: Path, title: str = "") -> Path:
    """
    Draw the true Lambda0, the mean estimate and the 2.5% / 97.5% replicate percentiles.

    Args:
        curves (pd.DataFrame): Columns t, truth, mean, lower, upper, as in baseline_curves.csv.
        path (Path): PNG file to write.
        title (str): Figure title.

    Returns:
        Path: The written file.
    """
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    ax.plot(curves["t"], curves["truth"], color="black", label="true")
    ax.plot(curves["t"], curves["mean"], color="tab:blue", linestyle="--", label="mean estimate")
    ax.plot(curves["t"], curves["lower"], color="tab:blue", linestyle=":", label="2.5% / 97.5%")
    ax.plot(curves["t"], curves["upper"], color="tab:blue", linestyle=":")
    ax.set_xlabel("t")
    ax.set_ylabel("baseline mean")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("Wrote %s", path)
    return path
