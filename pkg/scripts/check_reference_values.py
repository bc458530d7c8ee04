#!/usr/bin/env python3
"""Opt-in check of per-file population metrics against published values.

Expects a directory with per-dataset subdirectories (tcd_voip, p23_exp1,
p23_exp3), each holding ratings.csv plus pesq.csv / visqol.csv prediction
files; see the README. Datasets that are absent are skipped. Exits 1 on
any metric outside the 0.01 tolerance.
"""

import sys
from pathlib import Path

from ccieval import build_constrained_set, cci, join, ktau, load_predictions, load_ratings, pcc, srcc
from ccieval.mos import mos_per_file

EXPECTED = {
    "p23_exp1": {
        "pesq": {"PCC": 0.84, "SRCC": 0.90, "KTAU": 0.73, "CCI": 0.96},
        "visqol": {"PCC": 0.82, "SRCC": 0.82, "KTAU": 0.63, "CCI": 0.91},
    },
    "p23_exp3": {
        "pesq": {"PCC": 0.81, "SRCC": 0.79, "KTAU": 0.61, "CCI": 0.93},
        "visqol": {"PCC": 0.75, "SRCC": 0.72, "KTAU": 0.56, "CCI": 0.87},
    },
    "tcd_voip": {
        "pesq": {"PCC": 0.90, "SRCC": 0.90, "KTAU": 0.72, "CCI": 0.95},
        "visqol": {"PCC": 0.82, "SRCC": 0.82, "KTAU": 0.63, "CCI": 0.90},
    },
}

TOLERANCE = 0.01


def main(argv):
    if len(argv) != 2:
        print(f"usage: {argv[0]} <reference-data-dir>", file=sys.stderr)
        return 2
    root = Path(argv[1])
    failures = 0
    checked = 0
    for ds_name, models in EXPECTED.items():
        ds_dir = root / ds_name
        if not ds_dir.exists():
            print(f"{ds_name}: not present, skipped")
            continue
        table = mos_per_file(load_ratings(str(ds_dir / "ratings.csv")))
        for model, expected in models.items():
            pred_path = ds_dir / f"{model}.csv"
            if not pred_path.exists():
                print(f"{ds_name}/{model}: not present, skipped")
                continue
            preds = load_predictions(str(pred_path), model_name=model)
            ev = join(table, preds)
            got = {
                "PCC": pcc(ev.mos, ev.predictions).value,
                "SRCC": srcc(ev.mos, ev.predictions).value,
                "KTAU": ktau(ev.mos, ev.predictions).value,
                "CCI": cci(build_constrained_set(ev)).value,
            }
            for metric, target in expected.items():
                checked += 1
                ok = abs(got[metric] - target) <= TOLERANCE
                failures += not ok
                status = "ok" if ok else "MISMATCH"
                print(f"{ds_name}/{model} {metric}: {got[metric]:.3f} vs {target:.2f}  {status}")
    if checked == 0:
        print("nothing to check", file=sys.stderr)
        return 2
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
