"""Kaplan-Meier survival and ``-log KM`` cumulative hazard, one event type at a time."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class StepCurve:
    """Right-continuous step function jumping at ``times``.

    ``values[i]`` holds on ``[times[i], times[i+1])``; before the first jump
    the curve equals ``initial``.
    """

    times: np.ndarray
    values: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    initial: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        vals = np.concatenate([[self.initial], self.values])
        return vals[idx + 1]

    def __len__(self):
        return len(self.times)


def km_survival(times, event_flags) -> StepCurve:
    """Product-limit estimate with ties aggregated per distinct event time.

    Subjects censored at an event time are still counted at risk there.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(event_flags, dtype=bool)
    if t.size == 0:
        raise DataError("Kaplan-Meier needs at least one observation")
    if t.shape != e.shape:
        raise DataError("times and event flags differ in length")
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise DataError("times must be finite and nonnegative")

    event_times, d = np.unique(t[e], return_counts=True)
    sorted_t = np.sort(t)
    n = t.size - np.searchsorted(sorted_t, event_times, side="left")
    surv = np.cumprod(1.0 - d / n)
    return StepCurve(event_times, surv, n, d, initial=1.0)


def km_cumhaz(curve: StepCurve) -> StepCurve:
    """``H(t) = -log S(t)``; steps where the survival estimate reaches 0 are dropped."""
    keep = curve.values > 0
    with np.errstate(divide="ignore"):
        h = -np.log(curve.values[keep])
    return StepCurve(curve.times[keep], h, curve.at_risk[keep], curve.events[keep], initial=0.0)


def write_curve_csv(curve: StepCurve, path, value_name: str = "value") -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", value_name])
        for t, v in zip(curve.times, curve.values):
            w.writerow([repr(float(t)), repr(float(v))])
    return path
