#!/usr/bin/env python3
"""Convert the public PPG-BP release into the subjects.csv + signals/ layout.

Usage:
    convert_ppgbp.py "PPG-BP dataset.xlsx" 0_subject/ out_dir/

The spreadsheet columns are matched loosely (case-insensitive prefixes) since
the header wording differs slightly between copies of the release. Signal files
are copied as-is; the loader accepts tab-separated samples on one line.
"""

import argparse
import shutil
import sys
from pathlib import Path

import pandas as pd

COLUMNS = {
    "subject_id": ("subject_id", "subject id"),
    "sex": ("sex",),
    "age": ("age",),
    "height_cm": ("height",),
    "weight_kg": ("weight",),
    "sbp_mmhg": ("systolic",),
    "dbp_mmhg": ("diastolic",),
    "heart_rate_bpm": ("heart rate",),
    "bmi": ("bmi",),
    "hypertension": ("hypertension",),
    "diabetes": ("diabetes",),
    "cerebral_infarction": ("cerebral infarction",),
    "cerebrovascular": ("cerebrovascular",),
}

STAGES = {
    "normal": "normal",
    "prehypertension": "prehtn",
    "stage 1 hypertension": "stage1",
    "stage 2 hypertension": "stage2",
}


def find_header(raw):
    for i, row in raw.iterrows():
        cells = [str(c).strip().lower() for c in row.tolist()]
        if any(c.startswith("subject") for c in cells):
            return i
    sys.exit("no header row with a subject_ID column found")


def pick(frame, prefixes):
    for col in frame.columns:
        name = str(col).strip().lower()
        if any(name.startswith(p) for p in prefixes):
            return col
    return None


def present(value):
    if pd.isna(value):
        return False
    text = str(value).strip().lower()
    return text not in ("", "0", "no", "none", "normal", "nan")


def number(value):
    return "" if pd.isna(value) else f"{float(value):g}"


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("sheet", type=Path)
    ap.add_argument("signals", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--no-infarction", action="store_true",
                    help="do not count cerebral infarction as cerebrovascular disease")
    args = ap.parse_args()

    raw = pd.read_excel(args.sheet, header=None)
    header = find_header(raw)
    frame = pd.read_excel(args.sheet, header=header)
    cols = {key: pick(frame, prefixes) for key, prefixes in COLUMNS.items()}
    missing = [k for k in ("subject_id", "sex", "age", "height_cm", "weight_kg", "heart_rate_bpm", "bmi",
                           "hypertension", "diabetes") if cols[k] is None]
    if missing:
        sys.exit(f"columns not found: {', '.join(missing)}")

    (args.out / "signals").mkdir(parents=True, exist_ok=True)
    rows = ["subject_id,sex,age,height_cm,weight_kg,heart_rate_bpm,bmi,sbp_mmhg,dbp_mmhg,"
            "hypertension_stage,diabetes,cerebrovascular"]
    copied = 0
    for _, r in frame.iterrows():
        if pd.isna(r[cols["subject_id"]]):
            continue
        sid = str(int(r[cols["subject_id"]]))
        sex = str(r[cols["sex"]]).strip().upper()[:1]
        stage = STAGES.get(str(r[cols["hypertension"]]).strip().lower(), "")
        cvd = cols["cerebrovascular"] is not None and present(r[cols["cerebrovascular"]])
        if not args.no_infarction and cols["cerebral_infarction"] is not None:
            cvd = cvd or present(r[cols["cerebral_infarction"]])
        get = lambda k: r[cols[k]] if cols[k] is not None else float("nan")
        rows.append(",".join([
            sid, sex, number(get("age")), number(get("height_cm")), number(get("weight_kg")),
            number(get("heart_rate_bpm")), number(get("bmi")), number(get("sbp_mmhg")), number(get("dbp_mmhg")),
            stage, "1" if present(get("diabetes")) else "0", "1" if cvd else "0",
        ]))
        for k in (1, 2, 3):
            src = args.signals / f"{sid}_{k}.txt"
            if src.exists():
                shutil.copyfile(src, args.out / "signals" / src.name)
                copied += 1

    (args.out / "subjects.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"{len(rows) - 1} subjects, {copied} signal files -> {args.out}")


if __name__ == "__main__":
    main()
