"""Metric reductions and file emission for run reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .packet import TrafficClass
from .transport import FlowCompletionRecord


def upward_load_stddev(counts: Sequence[int]) -> float:
    """Population standard deviation of per-upward-port transmitted packet counts."""
    if not counts:
        return 0.0
    return float(np.std(np.asarray(counts, dtype=float)))


def emit_cdf(
    records: Sequence[FlowCompletionRecord], percent_points: Sequence[float] | None = None
) -> dict[str, list[tuple[float, float]]]:
    """FCT CDF points (fct seconds, cumulative fraction) per class and overall.

    With ``percent_points`` unset the CDF is sampled at every 1%; each point is
    the smallest FCT such that at least that fraction of flows finished by it.
    """
    if not records:
        raise ValueError("need at least one flow record")
    if percent_points is None:
        percent_points = [i / 100 for i in range(1, 101)]
    groups = {
        "all": [r.fct for r in records],
        "short": [r.fct for r in records if r.traffic_class == TrafficClass.SHORT],
        "large": [r.fct for r in records if r.traffic_class == TrafficClass.LARGE],
    }
    out: dict[str, list[tuple[float, float]]] = {}
    for name, fcts in groups.items():
        if not fcts:
            continue
        xs = sorted(fcts)
        n = len(xs)
        pts: list[tuple[float, float]] = []
        for q in percent_points:
            k = max(1, math.ceil(q * n - 1e-9))
            point = (xs[k - 1] / 1e9, k / n)
            if not pts or point != pts[-1]:
                pts.append(point)
        if pts[-1][1] != 1.0:
            pts.append((xs[-1] / 1e9, 1.0))
        out[name] = pts
    return out


def class_means(records: Iterable[FlowCompletionRecord]) -> dict[str, float]:
    short, large = [], []
    for r in records:
        (large if r.traffic_class == TrafficClass.LARGE else short).append(r.fct / 1e9)
    allf = short + large
    nan = float("nan")
    return {
        "mean_fct_short": float(np.mean(short)) if short else nan,
        "mean_fct_large": float(np.mean(large)) if large else nan,
        "mean_fct_all": float(np.mean(allf)) if allf else nan,
        "n_short": len(short),
        "n_large": len(large),
    }


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def write_json(path: Path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")


def fmt(x: float) -> str:
    """Stable float text for CSV output."""
    return repr(float(x))
