"""Constrained Concordance Index.

A pair of items enters the constrained set S only when their MOS
difference is large enough that their 95% confidence intervals do not
overlap: |mos_a - mos_b| > ci_halfwidth_a + ci_halfwidth_b (strict). For
symmetric intervals this threshold equals half the full width of each
interval summed, i.e. the intervals are disjoint. Pairs with equal MOS
never qualify. The CCI is the fraction of pairs in S whose prediction
difference has the same sign as the MOS difference; a model that cannot
split a pair (equal predictions) gets no credit for it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .correlations import MetricValue
from .data import JoinedEvaluation
from .errors import DataValidationError, EmptyConstrainedSetError


class ConstrainedPair(NamedTuple):
    id_a: str
    id_b: str
    mos_delta: float
    pred_delta: float
    tau: float
    concordant: bool


@dataclass(frozen=True)
class ConstrainedPairSet:
    """The admitted pairs, one entry per unordered pair with id_a < id_b."""

    ids: tuple[str, ...]
    idx_a: np.ndarray
    idx_b: np.ndarray
    mos_delta: np.ndarray
    pred_delta: np.ndarray
    tau: np.ndarray
    concordant: np.ndarray
    total_candidate_pairs: int

    def __len__(self) -> int:
        return len(self.idx_a)

    @property
    def n_concordant(self) -> int:
        return int(np.count_nonzero(self.concordant))

    @property
    def pairs(self) -> Iterator[ConstrainedPair]:
        for k in range(len(self)):
            yield ConstrainedPair(
                id_a=self.ids[self.idx_a[k]],
                id_b=self.ids[self.idx_b[k]],
                mos_delta=float(self.mos_delta[k]),
                pred_delta=float(self.pred_delta[k]),
                tau=float(self.tau[k]),
                concordant=bool(self.concordant[k]),
            )


def _pair_masks(y: np.ndarray, y_hat: np.ndarray, ci: np.ndarray):
    dmos = y[:, None] - y[None, :]
    dpred = y_hat[:, None] - y_hat[None, :]
    tau = ci[:, None] + ci[None, :]
    valid = np.abs(dmos) > tau
    concordant = valid & (np.sign(dmos) == np.sign(dpred)) & (dpred != 0)
    return dmos, dpred, tau, valid, concordant


def concordance_counts(y, y_hat, ci_halfwidths) -> tuple[int, int]:
    """(valid pairs, concordant pairs) without materialising the set.

    This is the hot path for bootstrap experiments; counts are exact
    integers so CCI values agree bit-for-bit with pair enumeration.
    """
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    ci = np.asarray(ci_halfwidths, dtype=float)
    _, _, _, valid, concordant = _pair_masks(y, y_hat, ci)
    # Matrices are symmetric with a False diagonal; halve to unordered pairs.
    return int(np.count_nonzero(valid)) // 2, int(np.count_nonzero(concordant)) // 2


def cci_from_arrays(y, y_hat, ci_halfwidths) -> MetricValue:
    n_valid, n_conc = concordance_counts(y, y_hat, ci_halfwidths)
    if n_valid == 0:
        raise EmptyConstrainedSetError(
            "no statistically distinguishable pairs (every MOS difference "
            "falls inside the combined confidence intervals)"
        )
    return MetricValue("CCI", n_conc / n_valid, len(np.asarray(y)), n_valid)


def build_constrained_set(ev: JoinedEvaluation) -> ConstrainedPairSet:
    """Enumerate the constrained set S of a joined evaluation."""
    if len(ev) < 2:
        raise DataValidationError("need at least 2 items to form pairs")
    y, y_hat, ci = ev.mos, ev.predictions, ev.ci_halfwidths
    if not np.all(np.isfinite(ci)):
        raise DataValidationError("non-finite CI half-width")
    dmos, dpred, tau, valid, concordant = _pair_masks(y, y_hat, ci)
    n = len(ev)
    ia, ib = np.nonzero(np.triu(valid, k=1))
    return ConstrainedPairSet(
        ids=ev.ids,
        idx_a=ia,
        idx_b=ib,
        mos_delta=dmos[ia, ib],
        pred_delta=dpred[ia, ib],
        tau=tau[ia, ib],
        concordant=concordant[ia, ib],
        total_candidate_pairs=n * (n - 1) // 2,
    )


def cci(pair_set: ConstrainedPairSet) -> MetricValue:
    """Fraction of concordant pairs in the constrained set."""
    if len(pair_set) == 0:
        raise EmptyConstrainedSetError(
            "no statistically distinguishable pairs (every MOS difference "
            "falls inside the combined confidence intervals)"
        )
    return MetricValue(
        "CCI", pair_set.n_concordant / len(pair_set), len(pair_set.ids), len(pair_set)
    )


class SlopePoint(NamedTuple):
    id_a: str
    id_b: str
    mos_distance: float
    slope: float
    concordant: bool


def slope_decomposition(pair_set: ConstrainedPairSet) -> list[SlopePoint]:
    """Per-pair (MOS distance, prediction slope) points for visualisation.

    The slope pred_delta/mos_delta is positive exactly for concordant
    pairs; prediction-tied pairs sit on the zero line and count as
    discordant.
    """
    if len(pair_set) == 0:
        raise EmptyConstrainedSetError("constrained set is empty")
    out = []
    for p in pair_set.pairs:
        out.append(
            SlopePoint(
                id_a=p.id_a,
                id_b=p.id_b,
                mos_distance=abs(p.mos_delta),
                slope=p.pred_delta / p.mos_delta,
                concordant=p.concordant,
            )
        )
    return out


def write_slope_csv(points: list[SlopePoint], path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes))
    fh = open(path_or_file, "w", encoding="utf-8", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh)
        writer.writerow(["id_a", "id_b", "mos_distance", "slope", "concordant"])
        for p in points:
            writer.writerow(
                [p.id_a, p.id_b, repr(p.mos_distance), repr(p.slope), str(p.concordant).lower()]
            )
    finally:
        if own:
            fh.close()
