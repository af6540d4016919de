from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..core.training import EpisodeMetrics, ScheduleRow, moving_average

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"
BASE_COLUMNS = ("episode", "steps", "accumulated_reward", "epsilon")
SCHEDULE_COLUMNS = ("year", "age", "c_max", "action", "contribution")


def _goal_names(
    metrics: Sequence[EpisodeMetrics], goal_names: Optional[Sequence[str]]
) -> list[str]:
    if goal_names is not None:
        return list(goal_names)
    names: list[str] = []
    for m in metrics:
        names.extend(name for name in m.success if name not in names)
    return names


def success_column(goal_name: str) -> str:
    return f"success_{goal_name}"


def metrics_frame(
    metrics: Sequence[EpisodeMetrics], goal_names: Optional[Sequence[str]] = None
) -> pd.DataFrame:
    """One row per episode, one success column per goal (NaN until observed)"""
    names = _goal_names(metrics, goal_names)
    frame = pd.DataFrame(
        {
            "episode": pd.Series([m.episode for m in metrics], dtype="int64"),
            "steps": pd.Series([m.steps for m in metrics], dtype="int64"),
            "accumulated_reward": pd.Series(
                [m.accumulated_reward for m in metrics], dtype="float64"
            ),
            "epsilon": pd.Series([m.epsilon for m in metrics], dtype="float64"),
        }
    )
    for name in names:
        frame[success_column(name)] = pd.Series(
            [m.success.get(name, np.nan) for m in metrics], dtype="float64"
        )
    return frame


def moving_average_frame(
    metrics: Sequence[EpisodeMetrics],
    window: int,
    goal_names: Optional[Sequence[str]] = None,
) -> pd.DataFrame:
    frame = metrics_frame(metrics, goal_names)
    out = pd.DataFrame({"episode": frame["episode"]})
    skipped = ("episode", "steps", "epsilon")
    for column in (c for c in frame.columns if c not in skipped):
        out[column] = moving_average(frame[column].to_numpy(), window)
    return out


def _write(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        frame.to_csv(
            path,
            index=False,
            float_format=FLOAT_FORMAT,
            na_rep="",
            lineterminator="\n",
        )
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror or e}") from e
    logger.debug("wrote %d rows to %s", len(frame), path)
    return path


def emit_metrics(
    path: Union[str, Path],
    metrics: Sequence[EpisodeMetrics],
    goal_names: Optional[Sequence[str]] = None,
) -> Path:
    """Write the per-episode metrics table as CSV, header first"""
    return _write(metrics_frame(metrics, goal_names), path)


def emit_moving_average(
    path: Union[str, Path],
    metrics: Sequence[EpisodeMetrics],
    window: int,
    goal_names: Optional[Sequence[str]] = None,
) -> Path:
    return _write(moving_average_frame(metrics, window, goal_names), path)


def emit_schedule(path: Union[str, Path], schedule: Sequence[ScheduleRow]) -> Path:
    frame = pd.DataFrame(
        [[getattr(row, c) for c in SCHEDULE_COLUMNS] for row in schedule],
        columns=list(SCHEDULE_COLUMNS),
    )
    return _write(frame, path)
