#!/usr/bin/env python3
"""Convert BP4D+ physiology (and optional 2-D landmarks) into the spdfuse layout.

    python3 bp4d_to_layout.py PHYSIO_ROOT out_dir [--landmarks LM_ROOT] [--pain-task T11]

Expected input (as unpacked from the BP4D+ distribution):
    PHYSIO_ROOT/<subject>/<task>/<signal>.txt    one sample per line, 1000 Hz
    LM_ROOT/<subject>/<task>.csv                 optional; rows "x0,y0,x1,y1,..." at 25 fps
The pain task becomes label 1, every other task label 0.
"""
import argparse
import json
from pathlib import Path

PHYSIO_RATE = 1000.0
VIDEO_RATE = 25.0


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("physio_root", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--landmarks", type=Path)
    ap.add_argument("--pain-task", default="T11")
    args = ap.parse_args()

    for subject_dir in sorted(p for p in args.physio_root.iterdir() if p.is_dir()):
        for task_dir in sorted(p for p in subject_dir.iterdir() if p.is_dir()):
            tdir = args.out / subject_dir.name / task_dir.name
            tdir.mkdir(parents=True, exist_ok=True)
            rates = {}
            for sig in sorted(task_dir.glob("*.txt")):
                name = sig.stem.lower().replace(" ", "_").replace("-", "_")
                values = [float(x) for x in sig.read_text().split()]
                rates[name] = PHYSIO_RATE
                with open(tdir / f"{name}.csv", "w") as out:
                    out.write("t,value\n")
                    for k, v in enumerate(values):
                        out.write(f"{k / PHYSIO_RATE:.17g},{v:.17g}\n")
            if args.landmarks:
                lm = args.landmarks / subject_dir.name / f"{task_dir.name}.csv"
                if lm.exists():
                    rows = [line.split(",") for line in lm.read_text().splitlines() if line.strip()]
                    points = len(rows[0]) // 2
                    header = ["t"] + [f"{a}{i}" for i in range(points) for a in ("x", "y")]
                    with open(tdir / "landmarks.csv", "w") as out:
                        out.write(",".join(header) + "\n")
                        for k, row in enumerate(rows):
                            out.write(f"{k / VIDEO_RATE:.17g}," + ",".join(row) + "\n")
                    rates["landmarks"] = VIDEO_RATE
            label = 1 if task_dir.name == args.pain_task else 0
            (tdir / "meta.json").write_text(json.dumps({"label": label, "rates": rates}, indent=2) + "\n")
        print(subject_dir.name)


if __name__ == "__main__":
    main()
