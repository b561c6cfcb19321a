#!/usr/bin/env python3
"""Convert the USPS digits to the feature CSV read by `ital ingest`.

Accepts the LIBSVM files (usps[.bz2] for training, usps.t[.bz2] for test,
labels 1..10 meaning digits 0..9) or the usps.h5 archive with train/test
groups holding `data` and `target`.

    python3 tools/usps_to_csv.py --train usps.bz2 --test usps.t.bz2 --out usps.csv
    python3 tools/usps_to_csv.py --h5 usps.h5 --out usps.csv
"""

import argparse
import bz2
import csv
import sys

DIM = 256


def open_text(path):
    if path.endswith(".bz2"):
        return bz2.open(path, "rt")
    return open(path, "rt")


def read_libsvm(path):
    rows = []
    with open_text(path) as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            label = int(float(parts[0])) - 1
            values = [0.0] * DIM
            for item in parts[1:]:
                idx, val = item.split(":")
                i = int(idx) - 1
                if not 0 <= i < DIM:
                    sys.exit(f"{path}:{lineno}: feature index {idx} out of range")
                values[i] = float(val)
            rows.append((label, values))
    return rows


def read_h5(path):
    import h5py  # only needed for this input format

    out = {}
    with h5py.File(path, "r") as f:
        for split in ("train", "test"):
            data = f[split]["data"][:]
            target = f[split]["target"][:]
            out[split] = [(int(t), [float(v) for v in row]) for row, t in zip(data, target)]
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--train")
    ap.add_argument("--test")
    ap.add_argument("--h5")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    if args.h5:
        splits = read_h5(args.h5)
    elif args.train and args.test:
        splits = {"train": read_libsvm(args.train), "test": read_libsvm(args.test)}
    else:
        ap.error("give either --h5 or both --train and --test")

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "split", "labels"] + [f"f{i + 1}" for i in range(DIM)])
        n = 0
        for split in ("train", "test"):
            for label, values in splits[split]:
                if not 0 <= label <= 9:
                    sys.exit(f"unexpected label {label}")
                w.writerow([f"{split}{n:05d}", split, f"digit{label}"] + [f"{v:.6g}" for v in values])
                n += 1
    print(f"wrote {n} samples to {args.out}")


if __name__ == "__main__":
    main()
