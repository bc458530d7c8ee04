"""MOS, unbiased standard deviations, and 95% confidence intervals.

File-level statistics use the per-stimulus sample standard deviation
(M-1 denominator). Condition-level statistics pool the per-file variances
as sigma_j = sqrt(sum_i (M_i - 1) * sigma_ji^2 / (N - 1)) with N the total
votes in the condition, which reduces to the balanced (M-1)/(N-1) form
when every file has the same number of raters.

The CI half-width is t * std / divisor. The conventional standard error
uses divisor sqrt(M); the "paper" policy divides by M instead, kept for
exact reproduction of published tables that used that form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import stats as _stats

from .data import RatingsDataset
from .errors import DataValidationError

DIVISORS = ("standard", "paper")
DF_CONVENTIONS = ("votes-1", "votes")


@dataclass(frozen=True)
class CiPolicy:
    """How a 95% CI half-width is derived from (std, votes)."""

    divisor: str = "standard"  # "standard": std/sqrt(M); "paper": std/M
    df_convention: str = "votes-1"  # degrees of freedom = M-1 or M
    large_sample_cutoff: int = 30  # t-quantile below, z_value at or above
    z_value: float = 1.96

    def __post_init__(self):
        if self.divisor not in DIVISORS:
            raise ValueError(f"unknown divisor {self.divisor!r}")
        if self.df_convention not in DF_CONVENTIONS:
            raise ValueError(f"unknown df convention {self.df_convention!r}")
        if self.large_sample_cutoff < 2:
            raise ValueError("large_sample_cutoff must be >= 2")
        if self.z_value <= 0:
            raise ValueError("z_value must be positive")


PAPER_POLICY = CiPolicy(divisor="paper")


class MosRow(NamedTuple):
    id: str
    mos: float
    std: float
    votes: int
    ci_halfwidth: float


@dataclass(frozen=True)
class MosTable:
    rows: tuple[MosRow, ...]
    granularity: str  # "file" | "condition"

    @cached_property
    def by_id(self) -> dict[str, MosRow]:
        return {r.id: r for r in self.rows}

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes))
        fh = open(path_or_file, "w", encoding="utf-8", newline="") if own else path_or_file
        try:
            writer = csv.writer(fh)
            writer.writerow(["id", "mos", "std", "votes", "ci95"])
            for r in self.rows:
                writer.writerow([r.id, repr(r.mos), repr(r.std), r.votes, repr(r.ci_halfwidth)])
        finally:
            if own:
                fh.close()


def t_quantile(votes: int, policy: CiPolicy = CiPolicy()) -> float:
    """Two-sided 95% Student-t quantile for a vote count, or the policy's
    z value once the count reaches the large-sample cutoff."""
    if votes < 2:
        raise DataValidationError(f"t quantile needs at least 2 votes, got {votes}")
    if votes >= policy.large_sample_cutoff:
        return policy.z_value
    df = votes - 1 if policy.df_convention == "votes-1" else votes
    return float(_stats.t.ppf(0.975, df))


def ci_halfwidth(std: float, votes: int, policy: CiPolicy = CiPolicy()) -> float:
    denom = np.sqrt(votes) if policy.divisor == "standard" else votes
    return t_quantile(votes, policy) * std / denom


def mos_per_file(dataset: RatingsDataset, policy: CiPolicy = CiPolicy()) -> MosTable:
    """Per-stimulus MOS, sample std (M-1 denominator) and 95% CI half-width."""
    rows = []
    for stim in dataset.stimuli:
        scores = dataset.scores_by_stimulus[stim]
        m = len(scores)
        if m < 2:
            raise DataValidationError(f"stimulus {stim!r} has fewer than 2 votes")
        mean = float(np.mean(scores))
        std = float(np.std(scores, ddof=1))
        rows.append(MosRow(stim, mean, std, m, ci_halfwidth(std, m, policy)))
    return MosTable(rows=tuple(rows), granularity="file")


def mos_per_condition(dataset: RatingsDataset, policy: CiPolicy = CiPolicy()) -> MosTable:
    """Per-condition MOS over all votes, with the pooled std and a CI that
    uses the condition's total vote count N."""
    rows = []
    for cond in dataset.conditions:
        stims = dataset.stimuli_by_condition[cond]
        all_scores = []
        pooled_num = 0.0
        n_total = 0
        for stim in stims:
            scores = dataset.scores_by_stimulus[stim]
            m = len(scores)
            if m < 2:
                raise DataValidationError(f"stimulus {stim!r} has fewer than 2 votes")
            pooled_num += (m - 1) * float(np.var(scores, ddof=1))
            n_total += m
            all_scores.append(scores)
        if n_total < 2:
            raise DataValidationError(f"condition {cond!r} has a single vote")
        votes = np.concatenate(all_scores)
        mean = float(np.mean(votes))
        std = float(np.sqrt(pooled_num / (n_total - 1)))
        rows.append(MosRow(cond, mean, std, n_total, ci_halfwidth(std, n_total, policy)))
    return MosTable(rows=tuple(rows), granularity="condition")
