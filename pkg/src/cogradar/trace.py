"""Per-slot CSV trace and per-episode summary files.

The trace schema is the interchange contract consumed by the plotting
package: a fixed column prefix (slot counters, budget, economics, then
per-column cost/dwell/distance blocks) followed by position blocks for
trajectory plots. Training runs append three extra diagnostic columns.
Floats are written with 9 significant digits; absent values are blank;
lines end with LF.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .env import SlotReport

__all__ = ["SCHEMA_VERSION", "trace_columns", "TraceWriter", "summarize", "write_summary", "SummaryRow", "SUMMARY_COLUMNS"]

SCHEMA_VERSION = 1

_TRAINING_EXTRAS = ["critic_loss", "actor_obj", "noise_sigma"]


def trace_columns(n: int, training: bool = False) -> list[str]:
    cols = ["slot", "n_targets", "n_tracked", "n_miss", "usage", "lambda", "utility", "reward"]
    for name in ("cost", "dwell", "dist", "tx", "ty", "ex", "ey"):
        cols += [f"{name}_{i + 1}" for i in range(n)]
    if training:
        cols += list(_TRAINING_EXTRAS)
    return cols


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return f"{v:.9g}"


class TraceWriter:
    """Streams slot reports to a CSV file, one row per slot."""

    def __init__(self, path, n: int, training: bool = False):
        self.n = n
        self.training = training
        self._fh = open(path, "w", newline="\n", encoding="utf-8")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(trace_columns(n, training))

    def write(self, rep: SlotReport, extras: dict | None = None) -> None:
        n = self.n
        row = [
            rep.slot_index,
            rep.n_targets,
            rep.n_tracked,
            rep.n_miss,
            rep.budget_usage,
            rep.lam,
            rep.utility,
            rep.reward,
        ]
        row += [rep.costs[i] for i in range(n)]
        row += [rep.dwells[i] if rep.costs[i] is not None else None for i in range(n)]
        row += [rep.dists[i] for i in range(n)]
        for sel in (0, 1):
            row += [rep.true_xy[i][sel] if rep.true_xy[i] is not None else None for i in range(n)]
        for sel in (0, 1):
            row += [rep.est_xy[i][sel] if rep.est_xy[i] is not None else None for i in range(n)]
        if self.training:
            extras = extras or {}
            row += [extras.get(k) for k in _TRAINING_EXTRAS]
        self._w.writerow([_fmt(v) for v in row])

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class SummaryRow:
    """Aggregates of one evaluation episode."""

    policy: str  # "cdrl" or "fixed_<pct>"
    episode: int
    seed: int
    slots: int
    mean_utility: float
    mean_usage: float
    violation_fraction: float  # slots with usage > theta_max
    mean_confirm_latency: float  # slots; nan when nothing confirmed
    mean_tracking_cost: float  # mean over per-slot summed costs


SUMMARY_COLUMNS = [
    "policy",
    "episode",
    "seed",
    "slots",
    "mean_utility",
    "mean_usage",
    "violation_fraction",
    "mean_confirm_latency",
    "mean_tracking_cost",
]


def summarize(policy: str, episode: int, seed: int, reports: list[SlotReport], theta_max: float) -> SummaryRow:
    slots = len(reports)
    if slots == 0:
        raise ValueError("cannot summarize an empty episode")
    mean_u = sum(r.utility for r in reports) / slots
    mean_usage = sum(r.budget_usage for r in reports) / slots
    violations = sum(r.budget_usage > theta_max for r in reports) / slots
    lats = [l for r in reports for l in r.confirm_latencies]
    mean_lat = sum(lats) / len(lats) if lats else math.nan
    mean_cost = sum(sum(c for c in r.costs if c is not None) for r in reports) / slots
    return SummaryRow(
        policy=policy,
        episode=episode,
        seed=seed,
        slots=slots,
        mean_utility=mean_u,
        mean_usage=mean_usage,
        violation_fraction=violations,
        mean_confirm_latency=mean_lat,
        mean_tracking_cost=mean_cost,
    )


def write_summary(path, rows: list[SummaryRow]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow(
                [
                    r.policy,
                    r.episode,
                    r.seed,
                    r.slots,
                    _fmt(r.mean_utility),
                    _fmt(r.mean_usage),
                    _fmt(r.violation_fraction),
                    _fmt(r.mean_confirm_latency),
                    _fmt(r.mean_tracking_cost),
                ]
            )
