import json
import subprocess
import sys
from pathlib import Path

import pytest

from ccieval import load_joined
from ccieval.cli import main

# 6 raters per stimulus with one dissenting vote: CI half-widths ~0.43,
# adjacent MOS gaps 1.0, so the constrained set is well populated
def _ratings_text():
    lines = ["condition_id,stimulus_id,rater_id,score"]
    votes = {"f1": [1, 1, 1, 1, 1, 2], "f2": [2, 2, 2, 2, 2, 3],
             "f3": [4, 4, 4, 4, 4, 3], "f4": [5, 5, 5, 5, 5, 4]}
    for k, (stim, scores) in enumerate(votes.items()):
        cond = "c1" if k < 2 else "c2"
        for r, s in enumerate(scores):
            lines.append(f"{cond},{stim},r{r},{s}")
    return "\n".join(lines) + "\n"


RATINGS = _ratings_text()

PRED_A = "id,score\nf1,1.1\nf2,2.2\nf3,3.9\nf4,4.6\n"
PRED_B = "id,score\nf1,4.0\nf2,3.0\nf3,2.0\nf4,1.0\n"


@pytest.fixture
def ratings_path(write_csv):
    return write_csv(RATINGS, "ratings.csv")


def test_evaluate_two_models(ratings_path, write_csv, tmp_path, capsys):
    pa = write_csv(PRED_A, "modelA.csv")
    pb = write_csv(PRED_B, "modelB.csv")
    out = tmp_path / "out"
    code = main(["evaluate", ratings_path, f"A={pa}", f"B={pb}", "--out-dir", str(out)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["rows"]) == 8  # 2 models x 4 metrics
    by_key = {(r["model"], r["metric"]): r["value"] for r in doc["rows"]}
    assert by_key[("A", "PCC")] > 0.9
    assert by_key[("B", "SRCC")] == -1.0
    assert (out / "metrics.json").exists() and (out / "metrics.csv").exists()
    assert "manifest" in doc and doc["manifest"]["version"]
    assert ratings_path in doc["manifest"]["inputs"]


def test_evaluate_condition_granularity(ratings_path, write_csv, capsys):
    # c1 pools f1+f2 (MOS 1.667), c2 pools f3+f4 (MOS 4.333)
    preds = write_csv("id,score\nc1,1.5\nc2,4.5\n")
    code = main(["evaluate", ratings_path, f"M={preds}", "--granularity", "condition"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    by_metric = {r["metric"]: r for r in doc["rows"]}
    assert by_metric["PCC"]["n_items"] == 2
    assert by_metric["PCC"]["value"] == pytest.approx(1.0)
    assert by_metric["CCI"]["value"] == 1.0


def test_evaluate_csv_stdout(ratings_path, write_csv, capsys):
    pa = write_csv(PRED_A)
    code = main(["evaluate", ratings_path, pa, "--format", "csv"])
    assert code == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert lines[0] == "model,metric,value,n_items,n_pairs_used"
    assert len(lines) == 5


def test_evaluate_unknown_ids_exit_2(ratings_path, write_csv, capsys):
    bad = write_csv("id,score\nzz1,1.0\nzz2,2.0\n")
    code = main(["evaluate", ratings_path, bad])
    assert code == 2
    assert "no common ids" in capsys.readouterr().err


def test_evaluate_duplicate_row_diagnostic(write_csv, capsys):
    path = write_csv(RATINGS + "c2,f4,r1,5\n")
    code = main(["evaluate", path, write_csv(PRED_A)])
    assert code == 2
    err = capsys.readouterr().err
    assert "duplicate rating" in err and path in err


def test_evaluate_missing_file_exit_2(ratings_path, capsys):
    code = main(["evaluate", ratings_path, "/nonexistent/preds.csv"])
    assert code == 2


EMPTY_SET_RATINGS = (
    "condition_id,stimulus_id,rater_id,score\n"
    # distinct MOS but two-rater CIs (t quantile 12.7) swamp every difference
    "c0,f0,r1,1\nc0,f0,r2,2\n"
    "c1,f1,r1,2\nc1,f1,r2,3\n"
    "c2,f2,r1,4\nc2,f2,r2,5\n"
)


def test_evaluate_empty_constrained_set_exit_3(write_csv, capsys):
    ratings = write_csv(EMPTY_SET_RATINGS)
    preds = write_csv("id,score\nf0,1\nf1,2\nf2,3\n")
    code = main(["evaluate", ratings, preds])
    assert code == 3
    assert "no statistically distinguishable" in capsys.readouterr().err


def test_experiment_synthetic_byte_identical_across_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    outs = []
    for threads, name in ((1, "a"), (8, "b")):
        out = tmp_path / name
        code = main([
            "experiment", "--experiment", "synthetic", "--n", "300", "--target-pcc", "0.8",
            "--replicates", "10", "--seed", "7", "--grid", "10,50,100",
            "--threads", str(threads), "--out-dir", str(out),
        ])
        assert code == 0
        outs.append(out)
    a, b = outs
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "replicates.csv").read_bytes() == (b / "replicates.csv").read_bytes()


def test_experiment_rerun_reproduces_bytes(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    args = [
        "experiment", "--experiment", "synthetic", "--n", "200",
        "--replicates", "5", "--seed", "11", "--out-dir",
    ]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(args + [str(out1)]) == 0
    assert main(args + [str(out2)]) == 0
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_experiment_sample_size_from_joined(tmp_path, write_csv):
    joined = write_csv(
        "# granularity: file\nid,mos,ci95,prediction\n"
        + "".join(f"x{i:02d},{1 + i * 0.2},0.05,{1 + i * 0.21}\n" for i in range(20))
    )
    out = tmp_path / "exp"
    code = main([
        "experiment", "--experiment", "sample-size", "--joined", joined,
        "--grid", "5,10", "--replicates", "8", "--seed", "3", "--out-dir", str(out),
    ])
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["kind"] == "sample_size"
    assert doc["grid"] == [5, 10]
    assert len(doc["results"]["5"]["PCC"]["values"]) == 8


def test_experiment_rater_sampling_cli(tmp_path, monkeypatch):
    sim = tmp_path / "sim"
    assert main([
        "simulate", "--what", "rater-dataset", "--stimuli", "25", "--raters", "15",
        "--seed", "2", "--out-dir", str(sim),
    ]) == 0
    latent_rows = (sim / "latent.csv").read_text().strip().split("\n")[1:]
    preds = sim / "preds.csv"
    preds.write_text("id,score\n" + "\n".join(
        f"{line.split(',')[0]},{line.split(',')[1]}" for line in latent_rows
    ) + "\n")
    out = tmp_path / "exp2"
    code = main([
        "experiment", "--experiment", "rater-sampling", "--ratings", str(sim / "ratings.csv"),
        "--predictions", f"sim={preds}", "--grid", "5,10", "--replicates", "6",
        "--seed", "5", "--out-dir", str(out),
    ])
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["kind"] == "rater_sampling"
    assert doc["population"]["PCC"] is None


def test_experiment_restricted_range_cli(tmp_path, write_csv):
    joined = write_csv(
        "# granularity: file\nid,mos,ci95,prediction\n"
        + "".join(f"x{i:02d},{1 + i * 0.25},0.1,{1 + i * 0.3}\n" for i in range(16))
    )
    out = tmp_path / "rr"
    code = main([
        "experiment", "--experiment", "restricted-range", "--joined", joined,
        "--split", "4", "--out-dir", str(out), "--plot",
    ])
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["grid"] == ["Bad", "Excellent"]
    assert (out / "report_regions.svg").exists()


def test_experiment_plot_with_all_missing_warns_exit_0(tmp_path, write_csv, capsys):
    # constrained set is always empty: CCI missing everywhere
    joined = write_csv(
        "# granularity: file\nid,mos,ci95,prediction\n"
        + "".join(f"x{i:02d},{1 + i * 0.1},9.0,{i}\n" for i in range(12))
    )
    out = tmp_path / "missing"
    code = main([
        "experiment", "--experiment", "sample-size", "--joined", joined,
        "--grid", "4,8", "--replicates", "4", "--seed", "1", "--metrics", "CCI",
        "--out-dir", str(out), "--plot",
    ])
    assert code == 0
    assert "no plottable data" in capsys.readouterr().err
    assert not (out / "report_deviation.svg").exists()


def test_experiment_plot_written_when_data_present(tmp_path):
    out = tmp_path / "plotted"
    code = main([
        "experiment", "--experiment", "synthetic", "--n", "120", "--replicates", "5",
        "--seed", "2", "--grid", "10,40", "--out-dir", str(out), "--plot",
    ])
    assert code == 0
    svg = (out / "report_deviation.svg").read_text()
    assert svg.lstrip().startswith("<?xml")


def test_slope_plot_outputs(ratings_path, write_csv, tmp_path):
    pa = write_csv(PRED_A)
    out = tmp_path / "slope"
    code = main(["slope-plot", "--ratings", ratings_path, "--predictions", f"A={pa}",
                 "--out-dir", str(out)])
    assert code == 0
    lines = (out / "slope.csv").read_text().strip().split("\n")
    assert lines[0] == "id_a,id_b,mos_distance,slope,concordant"
    assert (out / "slope.svg").exists()
    doc = json.loads((out / "slope.json").read_text())
    assert 0.0 <= doc["cci"] <= 1.0


def test_slope_plot_empty_set_exit_3(write_csv, tmp_path):
    code = main(["slope-plot", "--ratings", write_csv(EMPTY_SET_RATINGS),
                 "--predictions", write_csv("id,score\nf0,1\nf1,2\nf2,3\n"),
                 "--out-dir", str(tmp_path / "s")])
    assert code == 3


def test_significance_cli(tmp_path, write_csv, capsys):
    rows = ["condition_id,stimulus_id,rater_id,score"]
    for c, base in (("c1", 2), ("c2", 2), ("c3", 4)):
        for f in range(2):
            for r in range(6):
                rows.append(f"{c},{c}_f{f},r{r},{min(5, base + (r % 2))}")
    ratings = write_csv("\n".join(rows) + "\n")
    out = tmp_path / "sig"
    code = main(["significance", "--ratings", ratings, "--anchors", "c1",
                 "--out-dir", str(out)])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["anchors"] == ["c1"]
    assert "c2" in doc["neighborhoods"]["c1"]
    assert (out / "significance_matrix.csv").exists()
    assert (out / "neighborhoods.json").exists()


def test_experiment_config_json_file(tmp_path, write_csv):
    joined = write_csv(
        "# granularity: file\nid,mos,ci95,prediction\n"
        + "".join(f"x{i:02d},{1 + i * 0.2},0.05,{1 + i * 0.21}\n" for i in range(20))
    )
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": [4, 9], "replicates": 6, "seed": 17}))
    out = tmp_path / "cfgrun"
    code = main([
        "experiment", "--experiment", "sample-size", "--joined", joined,
        "--config", str(cfg), "--out-dir", str(out),
    ])
    assert code == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["grid"] == [4, 9]
    assert doc["config"]["seed"] == 17
    assert len(doc["results"]["4"]["PCC"]["values"]) == 6


def test_simulate_regions_outputs(tmp_path):
    out = tmp_path / "regions"
    code = main(["simulate", "--what", "regions", "--n", "300", "--seed", "4",
                 "--out-dir", str(out)])
    assert code == 0
    doc = json.loads((out / "regions.json").read_text())
    assert len(doc["regions"]) == 3
    assert (out / "regions.svg").exists()


def test_diagnostic_includes_line_number(write_csv, capsys):
    bad = RATINGS + "c2,f4,r0,5\n"  # duplicate (f4, r0)
    path = write_csv(bad)
    code = main(["evaluate", path, path])
    assert code == 2
    err = capsys.readouterr().err
    n_lines = len(bad.strip().split("\n"))
    assert f"{path}:{n_lines}:" in err


def test_simulate_correlated_pairs_round_trip(tmp_path):
    out = tmp_path / "simc"
    code = main(["simulate", "--what", "correlated-pairs", "--n", "50",
                 "--target-pcc", "0.7", "--seed", "9", "--out-dir", str(out)])
    assert code == 0
    ev = load_joined(str(out / "joined.csv"))
    assert len(ev) == 50
    assert all(it.ci_halfwidth == 0.0 for it in ev.items)


def test_version_via_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "ccieval.cli", "--version"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "ccieval" in proc.stdout
