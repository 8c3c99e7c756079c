"""Metric summaries and deterministic CSV emission."""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np


def summarize(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return {"count": 0, "mean": 0.0, "p50": 0.0, "p90": 0.0, "p99": 0.0}
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "p50": float(np.percentile(arr, 50)),
        "p90": float(np.percentile(arr, 90)),
        "p99": float(np.percentile(arr, 99)),
    }


def cdf(values: Sequence[float]) -> list[tuple[float, float]]:
    arr = np.sort(np.asarray(values, dtype=float))
    n = arr.size
    return [(float(v), (i + 1) / n) for i, v in enumerate(arr)]


def fmt(x) -> str:
    """Stable scalar formatting so identical runs emit identical bytes."""
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])


RESULT_HEADER = [
    "request_id",
    "kind",
    "ego",
    "completion",
    "elapsed_ms",
    "messages",
    "serving_peer_count",
]


def result_row(request, result) -> list:
    return [
        request.request_id,
        request.kind,
        request.ego,
        result.completion,
        result.elapsed * 1000.0,
        result.messages_sent,
        len(set(result.serving_peers)),
    ]
