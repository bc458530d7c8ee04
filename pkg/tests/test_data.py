import numpy as np
import pytest

from ccieval import (
    DataValidationError,
    GranularityMismatchError,
    JoinedEvaluation,
    PredictionTable,
    Scale,
    join,
    load_joined,
    load_predictions,
    load_ratings,
    save_joined,
    save_ratings,
)
from ccieval.data import EvaluationItem, ratings_from_rows
from ccieval.mos import mos_per_file

SIMPLE = """condition_id,stimulus_id,rater_id,score
c1,f1,r1,3
c1,f1,r2,4
c1,f1,r3,3
c2,f2,r1,1
c2,f2,r2,2
c2,f2,r3,1
"""


def test_load_simple_ratings(write_csv):
    ds = load_ratings(write_csv(SIMPLE))
    assert len(ds.entries) == 6
    assert ds.stimuli == ("f1", "f2")
    assert ds.conditions == ("c1", "c2")
    assert ds.condition_of["f2"] == "c2"


def test_duplicate_rating_rejected(write_csv):
    bad = SIMPLE + "c2,f2,r1,2\n"
    with pytest.raises(DataValidationError, match="duplicate rating"):
        load_ratings(write_csv(bad))


def test_missing_column_rejected(write_csv):
    path = write_csv("condition_id,stimulus_id,score\nc1,f1,3\n")
    with pytest.raises(DataValidationError, match="rater_id"):
        load_ratings(path)


def test_score_out_of_scale_rejected(write_csv):
    bad = SIMPLE + "c2,f3,r1,6\nc2,f3,r2,1\n"
    with pytest.raises(DataValidationError, match="outside"):
        load_ratings(write_csv(bad))


def test_discrete_scale_rejects_fractional_scores(write_csv):
    bad = SIMPLE + "c2,f3,r1,2.5\nc2,f3,r2,2\n"
    with pytest.raises(DataValidationError, match="outside"):
        load_ratings(write_csv(bad))


def test_single_vote_stimulus_rejected(write_csv):
    bad = SIMPLE + "c2,f3,r1,2\n"
    with pytest.raises(DataValidationError, match="at least 2"):
        load_ratings(write_csv(bad))


def test_stimulus_in_two_conditions_rejected(write_csv):
    bad = SIMPLE + "c9,f1,r4,3\n"
    with pytest.raises(DataValidationError, match="mapped to conditions"):
        load_ratings(write_csv(bad))


def test_continuous_scale_directive(write_csv):
    text = "# scale: 0 100 continuous\n" + "condition_id,stimulus_id,rater_id,score\n" + (
        "c1,f1,r1,12.5\nc1,f1,r2,80.25\n"
    )
    ds = load_ratings(write_csv(text))
    assert ds.scale == Scale(0, 100, "continuous")
    assert ds.scores_by_stimulus["f1"].tolist() == [12.5, 80.25]


def test_scale_argument_overrides_directive(write_csv):
    text = "# scale: 1 5 discrete\n" + SIMPLE
    ds = load_ratings(write_csv(text), scale=Scale(0, 10, "continuous"))
    assert ds.scale.max == 10


def test_round_trip(tmp_path, write_csv):
    ds = load_ratings(write_csv(SIMPLE))
    out = tmp_path / "out.csv"
    save_ratings(ds, str(out))
    again = load_ratings(str(out))
    assert sorted(again.entries) == sorted(ds.entries)
    assert again.scale == ds.scale


def test_row_order_does_not_matter(write_csv):
    lines = SIMPLE.strip().split("\n")
    shuffled = "\n".join([lines[0]] + lines[:0:-1]) + "\n"
    a = load_ratings(write_csv(SIMPLE))
    b = load_ratings(write_csv(shuffled))
    assert mos_per_file(a).rows == mos_per_file(b).rows


def test_load_predictions(write_csv):
    path = write_csv("id,score\nf1,3.5\nf2,1.25\nf3,4.0\n")
    table = load_predictions(path, model_name="m")
    assert len(table.rows) == 3
    assert table.rows["f2"] == 1.25


def test_load_predictions_headerless(write_csv):
    table = load_predictions(write_csv("f1,3.5\nf2,1.5\n"), model_name="m")
    assert len(table.rows) == 2


def test_load_predictions_duplicate_id(write_csv):
    with pytest.raises(DataValidationError, match="duplicate id"):
        load_predictions(write_csv("id,score\nf1,3.5\nf1,2.0\n"), model_name="m")


def test_load_predictions_non_numeric(write_csv):
    with pytest.raises(DataValidationError, match="non-numeric"):
        load_predictions(write_csv("id,score\nf1,high\n"), model_name="m")


def _mos_table(ids):
    ds = ratings_from_rows(
        [(f"c{i}", f, "r1", 3) for i, f in enumerate(ids)]
        + [(f"c{i}", f, "r2", 4) for i, f in enumerate(ids)],
        Scale(1, 5, "discrete"),
    )
    return mos_per_file(ds)


def test_join_intersection_reports_drops():
    table = _mos_table(["a", "b", "c"])
    preds = PredictionTable(rows={"b": 1.0, "c": 2.0, "d": 3.0}, model_name="m")
    ev = join(table, preds)
    assert ev.ids == ("b", "c")
    assert ev.n_dropped == 2


def test_join_identical_keys():
    table = _mos_table(["a", "b", "c"])
    preds = PredictionTable(rows={"a": 1.0, "b": 2.0, "c": 3.0}, model_name="m")
    ev = join(table, preds)
    assert len(ev) == 3


def test_join_empty_intersection_is_error():
    table = _mos_table(["a", "b"])
    preds = PredictionTable(rows={"x": 1.0, "y": 2.0}, model_name="m")
    with pytest.raises(DataValidationError, match="no common ids"):
        join(table, preds)


def test_join_granularity_mismatch():
    table = _mos_table(["a", "b"])
    preds = PredictionTable(rows={"a": 1.0, "b": 2.0}, model_name="m", granularity="condition")
    with pytest.raises(GranularityMismatchError):
        join(table, preds)


def test_join_idempotent_on_key_set():
    from ccieval.mos import MosTable

    table = _mos_table(["a", "b", "c"])
    preds = PredictionTable(rows={"a": 1.0, "b": 2.0, "c": 3.0, "z": 0.0}, model_name="m")
    ev1 = join(table, preds)
    kept = MosTable(rows=tuple(r for r in table.rows if r.id in ev1.ids), granularity="file")
    preds2 = PredictionTable(rows={i: preds.rows[i] for i in ev1.ids}, model_name="m")
    ev2 = join(kept, preds2)
    assert ev2.ids == ev1.ids


def test_joined_evaluation_round_trip(tmp_path):
    items = (
        EvaluationItem("a", 1.5, 0.25, 2.0),
        EvaluationItem("b", 3.0, 0.0, 2.5),
        EvaluationItem("c", 4.25, 0.125, 4.0),
    )
    ev = JoinedEvaluation(items=items, granularity="condition")
    path = tmp_path / "joined.csv"
    save_joined(ev, str(path))
    again = load_joined(str(path))
    assert again.items == ev.items
    assert again.granularity == "condition"


def test_votes_matrix_shape_and_nan():
    ds = ratings_from_rows(
        [("c1", "f1", "r1", 3), ("c1", "f1", "r2", 4), ("c2", "f2", "r2", 1), ("c2", "f2", "r3", 2)],
        Scale(1, 5, "discrete"),
    )
    mat, stims, raters = ds.votes_matrix()
    assert stims == ("f1", "f2")
    assert raters == ("r1", "r2", "r3")
    assert np.isnan(mat[0, 2]) and np.isnan(mat[1, 0])
    assert mat[0, 0] == 3 and mat[1, 2] == 2


def test_restrict_raters_drops_underrated():
    ds = ratings_from_rows(
        [("c1", "f1", "r1", 3), ("c1", "f1", "r2", 4), ("c2", "f2", "r2", 1), ("c2", "f2", "r3", 2)],
        Scale(1, 5, "discrete"),
    )
    sub = ds.restrict_raters(["r2", "r3"])
    assert sub.stimuli == ("f2",)
