"""Functional success metrics and aggregation over trial records.

S_gen measures how many of a fixed budget of sampled candidates hold on a
model; S_est measures how many verified-good grasps survive an estimated
pose. The tally and binned success curves feed the plot-ready CSVs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import ParameterError, UndefinedRateError
from .oracle import GraspOutcome, OutcomeCategory, TrialRecord


@dataclass(frozen=True)
class OutcomeTally:
    success: int = 0
    slipped: int = 0
    no_contact: int = 0
    collision: int = 0

    @property
    def total(self) -> int:
        return self.success + self.slipped + self.no_contact + self.collision

    def fractions(self) -> dict:
        t = max(self.total, 1)
        return {"success": self.success / t, "slipped": self.slipped / t,
                "no_contact": self.no_contact / t,
                "collision": self.collision / t}


@dataclass
class SuccessCurve:
    metric_name: str
    bin_edges: List[float]
    rates: List[Optional[float]]     # percent; None for empty bins
    counts: List[int]


def s_gen(n_succ: int, n_total: int) -> float:
    """Generation success rate: successes per sampled candidate, percent."""
    if n_total <= 0:
        raise UndefinedRateError("generation rate needs a positive sample count")
    if not (0 <= n_succ <= n_total):
        raise ParameterError("success count outside [0, n_total]")
    return 100.0 * n_succ / n_total


def _category(outcome) -> OutcomeCategory:
    if isinstance(outcome, GraspOutcome):
        return outcome.category
    if isinstance(outcome, TrialRecord):
        return outcome.outcome.category
    return OutcomeCategory(outcome)


def s_est(outcomes: Sequence) -> float:
    """Share of verified-good grasps that still succeed, percent."""
    if len(outcomes) == 0:
        raise UndefinedRateError(
            "estimated success rate undefined over an empty grasp set")
    succ = sum(1 for o in outcomes
               if _category(o) == OutcomeCategory.SUCCESS)
    return 100.0 * succ / len(outcomes)


def tally(records: Sequence) -> OutcomeTally:
    counts = {c: 0 for c in OutcomeCategory}
    for r in records:
        counts[_category(r)] += 1
    return OutcomeTally(success=counts[OutcomeCategory.SUCCESS],
                        slipped=counts[OutcomeCategory.SLIPPED],
                        no_contact=counts[OutcomeCategory.NO_CONTACT],
                        collision=counts[OutcomeCategory.COLLISION])


def default_bin_edges(values: Sequence[float], n_bins: int = 10) -> List[float]:
    """Ten uniform bins from zero to the 95th percentile."""
    values = np.asarray(list(values), dtype=np.float64)
    hi = float(np.percentile(values, 95.0)) if len(values) else 0.0
    if hi <= 0.0:
        hi = max(float(values.max()) if len(values) else 0.0, 1e-9)
    return list(np.linspace(0.0, hi, n_bins + 1))


def success_curve(records: Sequence[TrialRecord], metric: str,
                  bin_edges: Sequence[float]) -> SuccessCurve:
    """Per-bin success rate of the records whose selected error falls in
    the bin (half-open bins, last bin closed)."""
    edges = list(bin_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ParameterError("bin edges must be strictly increasing")
    if len(records) == 0:
        raise ParameterError("success_curve needs at least one record")
    values = np.asarray([getattr(r.errors, metric) for r in records])
    succ = np.asarray([r.outcome.category == OutcomeCategory.SUCCESS
                       for r in records])
    rates: List[Optional[float]] = []
    counts: List[int] = []
    for i in range(len(edges) - 1):
        lo, hi = edges[i], edges[i + 1]
        if i == len(edges) - 2:
            mask = (values >= lo) & (values <= hi)
        else:
            mask = (values >= lo) & (values < hi)
        n = int(mask.sum())
        counts.append(n)
        rates.append(100.0 * float(succ[mask].mean()) if n else None)
    return SuccessCurve(metric_name=metric, bin_edges=edges, rates=rates,
                        counts=counts)


def write_summary_csv(path, rows: List[dict]):
    """One row per (object, gripper, condition) plus aggregate rows."""
    fields = ["object", "gripper", "condition", "n_total", "n_gt",
              "s_gen_pct", "s_est_pct", "frac_success", "frac_slipped",
              "frac_no_contact", "frac_collision", "n_trials"]
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in fields})


def write_curves_csv(path, curves: List[SuccessCurve]):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["metric", "bin_lo", "bin_hi", "rate_pct", "count"])
        for c in curves:
            for i in range(len(c.counts)):
                rate = "" if c.rates[i] is None else f"{c.rates[i]:.6g}"
                w.writerow([c.metric_name, f"{c.bin_edges[i]:.6g}",
                            f"{c.bin_edges[i + 1]:.6g}", rate, c.counts[i]])
