#!/usr/bin/env python3
"""Convert WESAD chest ECG into an xgwo manifest.

Usage: wesad_to_manifest.py WESAD_DIR OUT_DIR

Each subject pickle (S*/S*.pkl) holds 700 Hz chest signals and a per-sample
label. Every contiguous run of label 1 (baseline), 2 (stress) or
3 (amusement) becomes one record, written as little-endian float32.
"""
import argparse
import pickle
from pathlib import Path

import numpy as np

RATE_HZ = 700
CLASSES = {1: "baseline", 2: "stress", 3: "amusement"}


def runs(labels):
    edges = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [len(labels)]))
    return [(s, e, int(labels[s])) for s, e in zip(starts, ends)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("wesad_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--min-seconds", type=float, default=10.0)
    args = ap.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"wesad-chest-ecg,{len(CLASSES)},{RATE_HZ}", "#classes=" + ";".join(CLASSES.values())]
    pickles = sorted(args.wesad_dir.glob("S*/S*.pkl"), key=lambda p: int(p.stem[1:]))
    if not pickles:
        raise SystemExit(f"no S*/S*.pkl under {args.wesad_dir}")
    for pkl in pickles:
        with open(pkl, "rb") as f:
            data = pickle.load(f, encoding="latin1")
        ecg = np.asarray(data["signal"]["chest"]["ECG"], dtype=np.float32).ravel()
        labels = np.asarray(data["label"]).ravel()
        subject = pkl.stem
        for i, (s, e, lab) in enumerate(runs(labels)):
            if lab not in CLASSES or (e - s) < args.min_seconds * RATE_HZ:
                continue
            name = f"{subject}_{i:03d}_c{lab}.f32"
            ecg[s:e].astype("<f4").tofile(args.out_dir / name)
            lines.append(f"{subject},{lab},{name}")
        print(f"{subject}: done")
    (args.out_dir / "manifest.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out_dir / 'manifest.csv'} ({len(lines) - 2} records)")


if __name__ == "__main__":
    main()
