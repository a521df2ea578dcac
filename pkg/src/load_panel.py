"""
This module reads and writes ordinal panel count data in long CSV format: one row per
visit with the columns subject_id, visit_time and response followed by the covariates.
"""

import logging
from pathlib import Path
from typing import Hashable, List, Optional

import numpy as np
import numpy.typing as npt
import pandas as pd

from src.panel_data import PanelDataError, PanelDataset, Subject

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ["subject_id", "visit_time", "response"]


def _row(index: int) -> int:
    # Index 0 is the first line after the header.
    return index + 2


def _numeric(frame: pd.DataFrame, column: str) -> npt.NDArray[np.float64]:
    values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(np.isnan(values))
    if bad.size:
        raw = frame[column].iloc[bad[0]]
        raise PanelDataError(f"Row {_row(int(bad[0]))}: cannot parse {column} value {raw!r}")
    return values


def _first(mask: npt.NDArray[np.bool_]) -> Optional[int]:
    hits = np.flatnonzero(mask)
    return int(hits[0]) if hits.size else None


def parse_panel_frame(
    frame: pd.DataFrame, n_levels: Optional[int] = None, merge_above: Optional[int] = None
) -> List[Subject]:
    """
    Validate a long-format frame and group it into subjects.

    Args:
        frame (pd.DataFrame): Rows in file order with a default integer index.
        n_levels (int, optional): Number of levels K; responses above it are rejected.
        merge_above (int, optional): Responses >= merge_above are recoded to merge_above.

    Returns:
        List[Subject]: Subjects in order of first appearance, visits sorted.

    Raises:
        PanelDataError: If the header is wrong, a field is unparseable, a response is out of
            range, a visit time repeats within a subject or a covariate varies within a subject.
    """
    if list(frame.columns[:3]) != REQUIRED_COLUMNS:
        header = list(frame.columns[:3])
        raise PanelDataError(f"Header must start with {', '.join(REQUIRED_COLUMNS)}, got {header}")
    if frame.empty:
        raise PanelDataError("No rows found")
    missing = _first(frame["subject_id"].isna().to_numpy())
    if missing is not None:
        raise PanelDataError(f"Row {_row(missing)}: missing subject_id")

    covariates = list(frame.columns[3:])
    times = _numeric(frame, "visit_time")
    responses = _numeric(frame, "response")
    values = {name: _numeric(frame, name) for name in covariates}

    index = _first(responses != np.floor(responses))
    if index is not None:
        raise PanelDataError(f"Row {_row(index)}: response {responses[index]} is not an integer")
    if merge_above is not None:
        if merge_above < 2:
            raise ValueError(f"Merge level must be at least 2, got {merge_above}")
        responses = np.minimum(responses, merge_above)

    upper = n_levels if n_levels is not None else np.inf
    index = _first((responses < 1) | (responses > upper))
    if index is not None:
        raise PanelDataError(f"Row {_row(index)}: response {int(responses[index])} outside 1..{n_levels or 'K'}")
    index = _first(times <= 0)
    if index is not None:
        raise PanelDataError(f"Row {_row(index)}: visit time {times[index]} must be positive")

    groups = frame.groupby("subject_id", sort=False).indices
    subjects: List[Subject] = []
    for subject_id in pd.unique(frame["subject_id"]):
        rows = np.asarray(groups[subject_id])
        order = rows[np.argsort(times[rows], kind="stable")]
        visit_times = times[order]

        repeated = _first(np.diff(visit_times) == 0)
        if repeated is not None:
            raise PanelDataError(
                f"Row {_row(int(order[repeated + 1]))}: duplicate visit time {visit_times[repeated]} "
                f"for subject {subject_id}"
            )

        for name in covariates:
            column = values[name][order]
            varying = _first(column != column[0])
            if varying is not None:
                raise PanelDataError(
                    f"Row {_row(int(order[varying]))}: covariate {name} varies within subject {subject_id}"
                )

        key: Hashable = subject_id.item() if isinstance(subject_id, np.generic) else subject_id
        subjects.append(
            Subject(
                id=key,
                x=tuple(float(values[name][order[0]]) for name in covariates),
                visits=tuple(float(t) for t in visit_times),
                responses=tuple(int(y) for y in responses[order]),
            )
        )
    return subjects


def ingest_csv(
    path: Path,
    n_levels: Optional[int] = None,
    merge_above: Optional[int] = None,
    domain_end: Optional[float] = None,
) -> PanelDataset:
    """
    Load a long-format ordinal panel count CSV file.

    Args:
        path (Path): UTF-8 CSV with header subject_id, visit_time, response, covariates...
        n_levels (int, optional): K; defaults to the largest response.
        merge_above (int, optional): Recode responses >= merge_above to merge_above.
        domain_end (float, optional): tau; defaults to the last visit time.

    Returns:
        PanelDataset: The validated dataset.

    Raises:
        FileNotFoundError: If the file does not exist.
        PanelDataError: If the contents are invalid; the message names the CSV row.
    """
    try:
        frame = pd.read_csv(
            path, encoding="utf-8", comment="#", skipinitialspace=True, float_precision="round_trip"
        )
    except FileNotFoundError as e:
        raise FileNotFoundError(f"The data file {path} was not found.") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise PanelDataError(f"Error reading data file {path}: {e}") from e

    frame = frame.reset_index(drop=True)
    subjects = parse_panel_frame(frame, n_levels, merge_above)
    if merge_above is not None and n_levels is None:
        n_levels = merge_above

    dataset = PanelDataset.from_subjects(
        subjects,
        n_levels=n_levels,
        domain_end=domain_end,
        covariate_names=[str(name) for name in frame.columns[3:]],
    )
    logger.info(
        "Loaded %d subjects, %d visits, %d levels from %s",
        len(dataset),
        dataset.n_observations,
        dataset.n_levels,
        path,
    )
    return dataset


def panel_frame(dataset: PanelDataset) -> pd.DataFrame:
    """Long-format frame of a dataset, one row per visit."""
    rows = []
    for subject in dataset:
        for time, response in zip(subject.visits, subject.responses):
            rows.append([subject.id, time, response, *subject.x])
    return pd.DataFrame(rows, columns=REQUIRED_COLUMNS + list(dataset.covariate_names))


def write_panel_csv(dataset: PanelDataset, path: Path) -> None:
    """
    Write a dataset in the format read by `ingest_csv`.

    Raises:
        OSError: If the file cannot be written.
    """
    try:
        panel_frame(dataset).to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise OSError(f"Cannot write data file {path}: {e}") from e
    logger.info("Wrote %d subjects to %s", len(dataset), path)
