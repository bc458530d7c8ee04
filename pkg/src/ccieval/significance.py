"""Pairwise condition significance via the Wilcoxon signed-rank test.

The test drops zero differences, ranks |d| with average ranks, and uses
the exact conditional permutation distribution of the positive-rank sum
for up to 25 nonzero differences (a subset-sum count over doubled ranks,
so tied ranks stay exact). Larger samples use the normal approximation
with tie correction and continuity correction. Anchor "neighborhoods"
are the conditions a chosen anchor cannot be distinguished from after
multiple-comparison correction.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.stats import norm, rankdata

from .data import RatingsDataset
from .errors import DataValidationError

EXACT_CUTOFF = 25

CORRECTIONS = ("holm", "bonferroni", "none")

PERCENTILE_ANCHORS = (5.0, 50.0, 95.0)


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    statistic: float  # sum of positive ranks (W+)
    n_nonzero: int
    exact: bool
    degenerate: bool  # all differences were zero


def _exact_tail_probs(ranks2: np.ndarray, w2: int) -> tuple[float, float]:
    """P(W+ <= w) and P(W+ >= w) under random signs, via integer counts.

    ``ranks2`` are the doubled average ranks (integers), ``w2`` the doubled
    observed statistic.
    """
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in ranks2:
        r = int(r)  # doubled ranks are >= 2, so the slice below is never empty
        counts[r:] = counts[r:] + counts[:-r]
    denom = 1 << len(ranks2)
    le = int(counts[: w2 + 1].sum())
    ge = int(counts[w2:].sum())
    return le / denom, ge / denom


def wilcoxon_signed_rank(x, y, exact_cutoff: int = EXACT_CUTOFF) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test for paired samples."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataValidationError("paired samples must be 1-D vectors of equal length")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(p_value=1.0, statistic=0.0, n_nonzero=0, exact=True, degenerate=True)
    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0].sum())
    if n <= exact_cutoff:
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        w2 = int(round(2 * w_plus))
        le, ge = _exact_tail_probs(ranks2, w2)
        p = min(1.0, 2.0 * min(le, ge))
        return WilcoxonResult(p_value=p, statistic=w_plus, n_nonzero=n, exact=True, degenerate=False)
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    diff = w_plus - mu
    correction = 0.5 * np.sign(diff)
    z = (diff - correction) / np.sqrt(var)
    p = min(1.0, 2.0 * float(norm.sf(abs(z))))
    return WilcoxonResult(p_value=p, statistic=w_plus, n_nonzero=n, exact=False, degenerate=False)


def holm_correction(p_values) -> np.ndarray:
    """Holm-Bonferroni step-down correction, monotone and capped at 1."""
    p = np.asarray(p_values, dtype=float)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted


def bonferroni_correction(p_values) -> np.ndarray:
    p = np.asarray(p_values, dtype=float)
    return np.minimum(1.0, p * len(p))


@dataclass(frozen=True)
class SignificanceMatrix:
    """Corrected p-values between anchors and all other conditions.

    Cells never tested (non-anchor vs non-anchor, or unpairable) are NaN.
    """

    condition_ids: tuple[str, ...]
    anchors: tuple[str, ...]
    p_values: np.ndarray  # symmetric, NaN where untested
    alpha: float
    unpairable: tuple[tuple[str, str], ...] = ()

    @cached_property
    def distinguishable(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.p_values < self.alpha

    def neighborhoods(self) -> dict[str, tuple[str, ...]]:
        """Anchor id -> conditions NOT significantly different from it."""
        idx = {c: i for i, c in enumerate(self.condition_ids)}
        out = {}
        for anchor in self.anchors:
            i = idx[anchor]
            members = [
                c
                for j, c in enumerate(self.condition_ids)
                if j != i and np.isfinite(self.p_values[i, j]) and self.p_values[i, j] >= self.alpha
            ]
            out[anchor] = tuple(members)
        return out

    def to_csv(self, path_or_file) -> None:
        own = isinstance(path_or_file, (str, bytes))
        fh = open(path_or_file, "w", encoding="utf-8", newline="") if own else path_or_file
        try:
            writer = csv.writer(fh)
            writer.writerow(["condition_id", *self.condition_ids])
            for i, cond in enumerate(self.condition_ids):
                row = [cond]
                for j in range(len(self.condition_ids)):
                    v = self.p_values[i, j]
                    row.append("" if not np.isfinite(v) else repr(float(v)))
                writer.writerow(row)
        finally:
            if own:
                fh.close()


def condition_mos(dataset: RatingsDataset) -> dict[str, float]:
    """Mean of all votes per condition."""
    out = {}
    for cond, stims in dataset.stimuli_by_condition.items():
        votes = np.concatenate([dataset.scores_by_stimulus[s] for s in stims])
        out[cond] = float(votes.mean())
    return out


def percentile_anchor_ids(dataset: RatingsDataset, percentiles=PERCENTILE_ANCHORS) -> tuple[str, ...]:
    """Conditions ranked nearest the requested percentiles of condition MOS."""
    mos = condition_mos(dataset)
    ranked = sorted(mos, key=lambda c: (mos[c], c))
    n = len(ranked)
    anchors = []
    for p in percentiles:
        idx = int(round(p / 100.0 * (n - 1)))
        cand = ranked[idx]
        if cand not in anchors:
            anchors.append(cand)
    return tuple(anchors)


def _paired_votes(dataset: RatingsDataset, cond_a: str, cond_b: str):
    """Paired vectors for two conditions, or None when unpairable.

    Primary pairing is vote-by-vote over matching (file slot, rater)
    layouts; if the rater layouts differ but the file counts agree, the
    per-file MOS vectors are paired instead (with a warning).
    """
    stims_a = dataset.stimuli_by_condition[cond_a]
    stims_b = dataset.stimuli_by_condition[cond_b]
    if len(stims_a) != len(stims_b):
        return None
    layouts_match = all(
        dataset.raters_of(sa) == dataset.raters_of(sb) for sa, sb in zip(stims_a, stims_b)
    )
    if layouts_match:
        xa = np.concatenate([dataset.scores_by_stimulus[s] for s in stims_a])
        xb = np.concatenate([dataset.scores_by_stimulus[s] for s in stims_b])
        return xa, xb
    warnings.warn(
        f"conditions {cond_a!r} and {cond_b!r} have mismatched rater layouts; "
        "pairing per-file MOS instead of individual votes",
        stacklevel=3,
    )
    xa = np.array([dataset.scores_by_stimulus[s].mean() for s in stims_a])
    xb = np.array([dataset.scores_by_stimulus[s].mean() for s in stims_b])
    return xa, xb


def neighborhood_analysis(
    dataset: RatingsDataset,
    anchors=None,
    alpha: float = 0.05,
    correction: str = "holm",
) -> SignificanceMatrix:
    """Test each anchor condition against every other condition.

    ``anchors`` is a list of condition ids, or None to pick the conditions
    at the 5th/50th/95th percentiles of the condition-MOS ranking. All
    anchor-vs-other p-values are corrected as one family.
    """
    if correction not in CORRECTIONS:
        raise DataValidationError(f"unknown correction {correction!r}")
    if not 0 < alpha < 1:
        raise DataValidationError(f"alpha must be in (0, 1), got {alpha}")
    conditions = dataset.conditions
    if len(conditions) < 2:
        raise DataValidationError("need at least 2 conditions")
    if anchors is None:
        anchor_ids = percentile_anchor_ids(dataset)
    else:
        anchor_ids = tuple(anchors)
        unknown = [a for a in anchor_ids if a not in conditions]
        if unknown:
            raise DataValidationError(f"unknown anchor condition(s): {', '.join(unknown)}")
    idx = {c: i for i, c in enumerate(conditions)}
    tested: list[tuple[int, int]] = []
    raw: list[float] = []
    unpairable: list[tuple[str, str]] = []
    seen: set[tuple[int, int]] = set()
    for anchor in anchor_ids:
        i = idx[anchor]
        for other in conditions:
            j = idx[other]
            if i == j:
                continue
            key = (min(i, j), max(i, j))
            if key in seen:
                continue
            seen.add(key)
            pair = _paired_votes(dataset, conditions[key[0]], conditions[key[1]])
            if pair is None:
                unpairable.append((conditions[key[0]], conditions[key[1]]))
                continue
            raw.append(wilcoxon_signed_rank(pair[0], pair[1]).p_value)
            tested.append(key)
    if correction == "holm":
        adjusted = holm_correction(raw) if raw else np.array([])
    elif correction == "bonferroni":
        adjusted = bonferroni_correction(raw) if raw else np.array([])
    else:
        adjusted = np.asarray(raw, dtype=float)
    matrix = np.full((len(conditions), len(conditions)), np.nan)
    for (i, j), p in zip(tested, adjusted):
        matrix[i, j] = p
        matrix[j, i] = p
    return SignificanceMatrix(
        condition_ids=conditions,
        anchors=anchor_ids,
        p_values=matrix,
        alpha=alpha,
        unpairable=tuple(unpairable),
    )
