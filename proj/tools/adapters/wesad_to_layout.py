#!/usr/bin/env python3
"""Convert WESAD pickles into the spdfuse dataset layout.

    python3 wesad_to_layout.py /path/to/WESAD out_dir [--device wrist|chest|both]

Every contiguous run of baseline (1), stress (2) or amusement (3) becomes one
trial; stress is label 1, the other two are label 0. Multi-axis signals are
split into one channel per axis (acc_x, acc_y, acc_z). Requires numpy.
"""
import argparse
import json
import pickle
from pathlib import Path

import numpy as np

LABEL_RATE = 700.0
WRIST_RATES = {"ACC": 32.0, "BVP": 64.0, "EDA": 4.0, "TEMP": 4.0}
CHEST_RATE = 700.0
KEEP = {1: 0, 2: 1, 3: 0}


def runs(labels):
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            yield int(labels[start]), start, i
            start = i


def channels(signal, device):
    out = []
    groups = []
    if device in ("wrist", "both"):
        groups.append(("wrist", signal["wrist"], lambda k: WRIST_RATES[k]))
    if device in ("chest", "both"):
        groups.append(("chest", signal["chest"], lambda k: CHEST_RATE))
    for prefix, data, rate_of in groups:
        for key, values in data.items():
            values = np.asarray(values, dtype=float)
            if values.ndim == 1:
                values = values[:, None]
            names = ["x", "y", "z"] if values.shape[1] == 3 else [str(i) for i in range(values.shape[1])]
            for j in range(values.shape[1]):
                suffix = "" if values.shape[1] == 1 else "_" + names[j]
                out.append((f"{prefix}_{key.lower()}{suffix}", rate_of(key), values[:, j]))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("wesad_root", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--device", choices=["wrist", "chest", "both"], default="both")
    args = ap.parse_args()

    for pkl in sorted(args.wesad_root.glob("S*/S*.pkl")):
        with open(pkl, "rb") as f:
            data = pickle.load(f, encoding="latin1")
        subject = pkl.stem
        labels = np.asarray(data["label"]).ravel()
        chans = channels(data["signal"], args.device)
        trial = 0
        for code, lo, hi in runs(labels):
            if code not in KEEP:
                continue
            trial += 1
            t0, t1 = lo / LABEL_RATE, hi / LABEL_RATE
            tdir = args.out / subject / f"T{trial:02d}"
            tdir.mkdir(parents=True, exist_ok=True)
            rates = {}
            for name, rate, values in chans:
                seg = values[int(np.ceil(t0 * rate)):int(np.floor(t1 * rate))]
                rates[name] = rate
                with open(tdir / f"{name}.csv", "w") as out:
                    out.write("t,value\n")
                    for k, v in enumerate(seg):
                        out.write(f"{k / rate:.17g},{v:.17g}\n")
            (tdir / "meta.json").write_text(json.dumps({"label": KEEP[code], "rates": rates}, indent=2) + "\n")
        print(f"{subject}: {trial} trials")


if __name__ == "__main__":
    main()
