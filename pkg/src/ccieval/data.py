"""Rating and prediction data model plus CSV ingestion.

Subjective ratings live in a long-format table keyed by
(condition_id, stimulus_id, rater_id); objective model outputs are flat
(id, score) tables at file or condition granularity. ``join`` aligns a
MOS table with a prediction table into the (mos, ci, prediction) triples
every metric consumes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DataValidationError, GranularityMismatchError

RATINGS_COLUMNS = ("condition_id", "stimulus_id", "rater_id", "score")

GRANULARITIES = ("file", "condition")


@dataclass(frozen=True)
class Scale:
    """Rating scale: bounds plus whether scores must be integers."""

    min: float
    max: float
    kind: str = "discrete"  # "discrete" | "continuous"

    def __post_init__(self):
        if self.kind not in ("discrete", "continuous"):
            raise DataValidationError(f"unknown scale kind {self.kind!r}")
        if not self.min < self.max:
            raise DataValidationError(f"degenerate scale [{self.min}, {self.max}]")

    def contains(self, score: float) -> bool:
        if not (self.min <= score <= self.max):
            return False
        if self.kind == "discrete" and score != int(score):
            return False
        return True


ACR_SCALE = Scale(1, 5, "discrete")


class RatingEntry(NamedTuple):
    condition_id: str
    stimulus_id: str
    rater_id: str
    score: float


@dataclass(frozen=True)
class RatingsDataset:
    """Validated per-rater scores.

    Invariants enforced at construction: every (stimulus, rater) pair is
    unique, every stimulus belongs to exactly one condition, every score
    is on the scale, and every stimulus has at least two ratings (so a
    sample standard deviation exists). Raters may be assigned sparsely.
    """

    entries: tuple[RatingEntry, ...]
    scale: Scale

    def __post_init__(self):
        seen: dict[tuple[str, str], int] = {}
        condition_of: dict[str, str] = {}
        votes: dict[str, int] = {}
        for e in self.entries:
            key = (e.stimulus_id, e.rater_id)
            if key in seen:
                raise DataValidationError(
                    f"duplicate rating for stimulus {e.stimulus_id!r} by rater {e.rater_id!r}"
                )
            seen[key] = 1
            prev = condition_of.setdefault(e.stimulus_id, e.condition_id)
            if prev != e.condition_id:
                raise DataValidationError(
                    f"stimulus {e.stimulus_id!r} mapped to conditions {prev!r} and {e.condition_id!r}"
                )
            if not math.isfinite(e.score) or not self.scale.contains(e.score):
                raise DataValidationError(
                    f"score {e.score} for stimulus {e.stimulus_id!r} outside "
                    f"{self.scale.kind} scale [{self.scale.min}, {self.scale.max}]"
                )
            votes[e.stimulus_id] = votes.get(e.stimulus_id, 0) + 1
        for stim, n in votes.items():
            if n < 2:
                raise DataValidationError(
                    f"stimulus {stim!r} has {n} rating(s); at least 2 are required"
                )
        if not self.entries:
            raise DataValidationError("ratings dataset is empty")

    @cached_property
    def stimuli(self) -> tuple[str, ...]:
        return tuple(sorted({e.stimulus_id for e in self.entries}))

    @cached_property
    def conditions(self) -> tuple[str, ...]:
        return tuple(sorted({e.condition_id for e in self.entries}))

    @cached_property
    def raters(self) -> tuple[str, ...]:
        return tuple(sorted({e.rater_id for e in self.entries}))

    @cached_property
    def condition_of(self) -> dict[str, str]:
        return {e.stimulus_id: e.condition_id for e in self.entries}

    @cached_property
    def scores_by_stimulus(self) -> dict[str, np.ndarray]:
        """Vote vectors per stimulus, in rater-id order for determinism."""
        buckets: dict[str, list[tuple[str, float]]] = {}
        for e in self.entries:
            buckets.setdefault(e.stimulus_id, []).append((e.rater_id, e.score))
        return {
            stim: np.array([s for _, s in sorted(pairs)], dtype=float)
            for stim, pairs in buckets.items()
        }

    @cached_property
    def stimuli_by_condition(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {}
        for stim in self.stimuli:
            out.setdefault(self.condition_of[stim], []).append(stim)
        return {cond: tuple(stims) for cond, stims in out.items()}

    def raters_of(self, stimulus_id: str) -> tuple[str, ...]:
        return tuple(sorted(e.rater_id for e in self.entries if e.stimulus_id == stimulus_id))

    def votes_matrix(self) -> tuple[np.ndarray, tuple[str, ...], tuple[str, ...]]:
        """(stimuli x raters) score matrix with NaN for missing votes."""
        stims, raters = self.stimuli, self.raters
        sidx = {s: i for i, s in enumerate(stims)}
        ridx = {r: j for j, r in enumerate(raters)}
        mat = np.full((len(stims), len(raters)), np.nan)
        for e in self.entries:
            mat[sidx[e.stimulus_id], ridx[e.rater_id]] = e.score
        return mat, stims, raters

    def restrict_raters(self, rater_ids: Iterable[str]) -> "RatingsDataset":
        """Keep only votes by the given raters; stimuli left with fewer than
        two votes are dropped."""
        keep = set(rater_ids)
        kept = [e for e in self.entries if e.rater_id in keep]
        counts: dict[str, int] = {}
        for e in kept:
            counts[e.stimulus_id] = counts.get(e.stimulus_id, 0) + 1
        kept = [e for e in kept if counts[e.stimulus_id] >= 2]
        if not kept:
            raise DataValidationError("no stimulus retains 2 votes under this rater subset")
        return RatingsDataset(entries=tuple(kept), scale=self.scale)


@dataclass(frozen=True)
class PredictionTable:
    """Objective model scores keyed by stimulus or condition id."""

    rows: dict[str, float]
    model_name: str
    granularity: str = "file"

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise DataValidationError(f"unknown granularity {self.granularity!r}")
        for key, value in self.rows.items():
            if not math.isfinite(value):
                raise DataValidationError(f"non-finite prediction for id {key!r}")


class EvaluationItem(NamedTuple):
    id: str
    mos: float
    ci_halfwidth: float
    prediction: float


@dataclass(frozen=True)
class JoinedEvaluation:
    """Aligned (mos, ci, prediction) triples, sorted by id."""

    items: tuple[EvaluationItem, ...]
    granularity: str
    n_dropped: int = 0

    def __post_init__(self):
        if len(self.items) < 2:
            raise DataValidationError("a joined evaluation needs at least 2 items")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise DataValidationError("duplicate ids in joined evaluation")
        if list(ids) != sorted(ids):
            raise DataValidationError("joined evaluation items must be sorted by id")
        for it in self.items:
            if it.ci_halfwidth < 0:
                raise DataValidationError(f"negative CI half-width for id {it.id!r}")

    def __len__(self) -> int:
        return len(self.items)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(it.id for it in self.items)

    @cached_property
    def mos(self) -> np.ndarray:
        return np.array([it.mos for it in self.items])

    @cached_property
    def ci_halfwidths(self) -> np.ndarray:
        return np.array([it.ci_halfwidth for it in self.items])

    @cached_property
    def predictions(self) -> np.ndarray:
        return np.array([it.prediction for it in self.items])


def _parse_scale_directive(text: str) -> Scale | None:
    # Accepts "# scale: <min> <max> <kind>" above the header row.
    body = text.lstrip("#").strip()
    if not body.lower().startswith("scale:"):
        return None
    parts = body.split(":", 1)[1].split()
    if len(parts) != 3:
        raise DataValidationError(f"malformed scale directive {text!r}")
    return Scale(float(parts[0]), float(parts[1]), parts[2].lower())


def load_ratings(
    path: str,
    scale: Scale | None = None,
) -> RatingsDataset:
    """Read a long-format ratings CSV.

    The header must name condition_id, stimulus_id, rater_id and score
    (any column order). The scale comes from the ``scale`` argument, a
    leading ``# scale: min max kind`` comment line, or defaults to the
    5-point discrete ACR scale.
    """
    directive_scale = None
    with open(path, encoding="utf-8", newline="") as fh:
        pos = fh.tell()
        line = fh.readline()
        lineno = 1
        while line.startswith("#"):
            found = _parse_scale_directive(line)
            if found is not None:
                directive_scale = found
            pos = fh.tell()
            line = fh.readline()
            lineno += 1
        fh.seek(pos)
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataValidationError("missing header row", path=path, line=lineno)
        fields = [f.strip() for f in reader.fieldnames]
        missing = [c for c in RATINGS_COLUMNS if c not in fields]
        if missing:
            raise DataValidationError(
                f"missing column(s): {', '.join(missing)}", path=path, line=lineno
            )
        use_scale = scale or directive_scale or ACR_SCALE
        entries = []
        seen_pairs: dict[tuple[str, str], int] = {}
        first_condition: dict[str, str] = {}
        for rownum, row in enumerate(reader, start=lineno + 1):
            try:
                score = float(row["score"])
            except (TypeError, ValueError):
                raise DataValidationError(
                    f"non-numeric score {row.get('score')!r}", path=path, line=rownum
                ) from None
            entry = RatingEntry(
                condition_id=row["condition_id"].strip(),
                stimulus_id=row["stimulus_id"].strip(),
                rater_id=row["rater_id"].strip(),
                score=score,
            )
            # Row-level invariants are re-checked here purely to attach the
            # offending line number to the diagnostic.
            key = (entry.stimulus_id, entry.rater_id)
            if key in seen_pairs:
                raise DataValidationError(
                    f"duplicate rating for stimulus {entry.stimulus_id!r} by rater "
                    f"{entry.rater_id!r} (first seen on line {seen_pairs[key]})",
                    path=path,
                    line=rownum,
                )
            seen_pairs[key] = rownum
            if not math.isfinite(score) or not use_scale.contains(score):
                raise DataValidationError(
                    f"score {score} outside {use_scale.kind} scale "
                    f"[{use_scale.min}, {use_scale.max}]",
                    path=path,
                    line=rownum,
                )
            prev = first_condition.setdefault(entry.stimulus_id, entry.condition_id)
            if prev != entry.condition_id:
                raise DataValidationError(
                    f"stimulus {entry.stimulus_id!r} mapped to conditions "
                    f"{prev!r} and {entry.condition_id!r}",
                    path=path,
                    line=rownum,
                )
            entries.append(entry)
    try:
        return RatingsDataset(entries=tuple(entries), scale=use_scale)
    except DataValidationError as err:
        raise DataValidationError(str(err), path=path) from None


def save_ratings(dataset: RatingsDataset, path: str) -> None:
    """Write a dataset back to CSV; ``load_ratings`` round-trips it."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        s = dataset.scale
        fh.write(f"# scale: {s.min:g} {s.max:g} {s.kind}\n")
        writer = csv.writer(fh)
        writer.writerow(RATINGS_COLUMNS)
        for e in sorted(dataset.entries):
            writer.writerow([e.condition_id, e.stimulus_id, e.rater_id, f"{e.score:g}"])


def load_predictions(path: str, model_name: str, granularity: str = "file") -> PredictionTable:
    """Read a two-column (id, score) CSV of objective model outputs."""
    if granularity not in GRANULARITIES:
        raise DataValidationError(f"unknown granularity {granularity!r}")
    rows: dict[str, float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DataValidationError("expected a two-column (id, score) file", path=path, line=1)
        start = 2
        try:
            # Headerless files are accepted when the first row already parses.
            rows[header[0].strip()] = float(header[1])
        except ValueError:
            pass
        for rownum, row in enumerate(reader, start=start):
            if not row:
                continue
            if len(row) < 2:
                raise DataValidationError("expected two columns", path=path, line=rownum)
            key = row[0].strip()
            if key in rows:
                raise DataValidationError(f"duplicate id {key!r}", path=path, line=rownum)
            try:
                rows[key] = float(row[1])
            except ValueError:
                raise DataValidationError(
                    f"non-numeric score {row[1]!r}", path=path, line=rownum
                ) from None
    if not rows:
        raise DataValidationError("prediction file has no rows", path=path)
    return PredictionTable(rows=rows, model_name=model_name, granularity=granularity)


def join(mos, preds: PredictionTable) -> JoinedEvaluation:
    """Align a MOS table with a prediction table on their common ids.

    ``mos`` is a MosTable (anything with ``rows`` carrying
    id/mos/ci_halfwidth, plus ``granularity``). Ids present on only one
    side are dropped and counted in ``n_dropped``. Output order is sorted
    by id so downstream results never depend on input row order.
    """
    granularity = mos.granularity
    if preds.granularity != granularity:
        raise GranularityMismatchError(
            f"prediction table is per-{preds.granularity} but MOS table is per-{granularity}"
        )
    by_id = {row.id: row for row in mos.rows}
    common = sorted(set(by_id) & set(preds.rows))
    n_dropped = (len(by_id) - len(common)) + (len(preds.rows) - len(common))
    if not common:
        raise DataValidationError(
            f"no common ids between MOS table and predictions for model {preds.model_name!r}"
        )
    if len(common) < 2:
        raise DataValidationError("join produced fewer than 2 items")
    items = tuple(
        EvaluationItem(
            id=i, mos=by_id[i].mos, ci_halfwidth=by_id[i].ci_halfwidth, prediction=preds.rows[i]
        )
        for i in common
    )
    return JoinedEvaluation(items=items, granularity=granularity, n_dropped=n_dropped)


JOINED_COLUMNS = ("id", "mos", "ci95", "prediction")


def save_joined(ev: JoinedEvaluation, path_or_file) -> None:
    """Write a joined evaluation as CSV (id, mos, ci95, prediction)."""
    own = isinstance(path_or_file, (str, bytes))
    fh = open(path_or_file, "w", encoding="utf-8", newline="") if own else path_or_file
    try:
        fh.write(f"# granularity: {ev.granularity}\n")
        writer = csv.writer(fh)
        writer.writerow(JOINED_COLUMNS)
        for it in ev.items:
            writer.writerow([it.id, repr(it.mos), repr(it.ci_halfwidth), repr(it.prediction)])
    finally:
        if own:
            fh.close()


def load_joined(path: str) -> JoinedEvaluation:
    """Read a joined-evaluation CSV written by ``save_joined``."""
    granularity = "file"
    with open(path, encoding="utf-8", newline="") as fh:
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.lower().startswith("granularity:"):
                granularity = body.split(":", 1)[1].strip()
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in JOINED_COLUMNS):
            raise DataValidationError(
                f"expected columns {', '.join(JOINED_COLUMNS)}", path=path, line=1
            )
        items = []
        for rownum, row in enumerate(reader, start=2):
            try:
                items.append(
                    EvaluationItem(
                        id=row["id"].strip(),
                        mos=float(row["mos"]),
                        ci_halfwidth=float(row["ci95"]),
                        prediction=float(row["prediction"]),
                    )
                )
            except (TypeError, ValueError):
                raise DataValidationError("non-numeric field", path=path, line=rownum) from None
    items.sort(key=lambda it: it.id)
    try:
        return JoinedEvaluation(items=tuple(items), granularity=granularity)
    except DataValidationError as err:
        raise DataValidationError(str(err), path=path) from None


def ratings_from_rows(rows: Iterable[tuple[str, str, str, float]], scale: Scale) -> RatingsDataset:
    """Build a dataset from in-memory (condition, stimulus, rater, score) rows."""
    return RatingsDataset(entries=tuple(RatingEntry(*r) for r in rows), scale=scale)
