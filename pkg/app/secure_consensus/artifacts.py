#!/usr/bin/env python3
"""
Artifact Writers

CSV files go through pandas (UTF-8, LF line endings); JSON files are written
with sorted keys. The figure series are wide tables with one column per agent.

Author: ThinkCraft
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union
import json
import logging
import math

import numpy as np
import pandas as pd

from .sim_harness import Metrics, TimeSeries

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SERIES_FILES = (
    "positions_x.csv",
    "positions_y.csv",
    "errors_x.csv",
    "errors_y.csv",
    "coupling_strength.csv",
    "trigger_instants_proposed.csv",
    "trigger_instants_baseline.csv",
)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(_jsonable(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info(f"Wrote {path}")
    return path


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path


def write_trace(ts: TimeSeries, path: PathLike, decimation: int = 10) -> Path:
    return write_csv(ts.to_frame(decimation), path)


@dataclass
class RunSummary:
    """Contents of summary.json: digest, seeds, metrics, verification, timing."""
    digest: str
    seeds: List[int]
    metrics: Dict[str, Any]
    verification: Optional[Dict[str, Any]] = None
    wall_clock: float = 0.0
    extra: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_run(
        cls,
        digest: str,
        seed: int,
        metrics: Metrics,
        verification: Optional[Dict[str, Any]] = None,
        **extra: Any,
    ) -> "RunSummary":
        return cls(
            digest=digest,
            seeds=[seed],
            metrics=metrics.to_dict(),
            verification=verification,
            wall_clock=metrics.wall_clock,
            extra=extra,
        )

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            "scenario_digest": self.digest,
            "seeds": self.seeds,
            "metrics": self.metrics,
            "verification": self.verification,
            "wall_clock": self.wall_clock,
        }
        payload.update(self.extra)
        return payload


def _wide(ts: TimeSeries, values: np.ndarray, decimation: int) -> pd.DataFrame:
    keep = np.arange(0, ts.t.shape[0], decimation)
    frame = pd.DataFrame({"t": ts.t[keep], "sigma": ts.sigma[keep] + 1})
    for i in range(values.shape[1]):
        frame[f"agent_{i + 1}"] = values[keep, i]
    return frame


def trigger_instants(ts: TimeSeries) -> pd.DataFrame:
    """Long table (agent_id, t) of every trigger, full resolution."""
    rows = [(i + 1, float(t)) for i, times in enumerate(ts.trigger_times()) for t in times]
    return pd.DataFrame(rows, columns=["agent_id", "t"])


def series_frames(proposed: TimeSeries, baseline: TimeSeries, decimation: int = 10) -> Dict[str, pd.DataFrame]:
    """The seven plot-ready series, keyed by file name."""
    delta = proposed.delta
    coupling = proposed.d if proposed.d is not None else np.full(proposed.x.shape[:2], np.nan)
    return {
        "positions_x.csv": _wide(proposed, proposed.x[..., 0], decimation),
        "positions_y.csv": _wide(proposed, proposed.x[..., 1], decimation),
        "errors_x.csv": _wide(proposed, delta[..., 0], decimation),
        "errors_y.csv": _wide(proposed, delta[..., 1], decimation),
        "coupling_strength.csv": _wide(proposed, coupling, decimation),
        "trigger_instants_proposed.csv": trigger_instants(proposed),
        "trigger_instants_baseline.csv": trigger_instants(baseline),
    }


def write_series(out_dir: PathLike, proposed: TimeSeries, baseline: TimeSeries, decimation: int = 10) -> List[Path]:
    directory = Path(out_dir)
    return [write_csv(frame, directory / name) for name, frame in series_frames(proposed, baseline, decimation).items()]


def write_sweep(rows: Sequence[Dict[str, Any]], path: PathLike) -> Path:
    return write_csv(pd.DataFrame(list(rows)), path)
