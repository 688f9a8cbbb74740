#!/usr/bin/env python3
"""Build the benchmark files under data/ from redistributable sources.

The UCI datasets used by the replication manifest are taken from two PyPI
wheels that bundle them: `keel-ds` (KEEL repository copies of pendigits,
optdigits, segment and satimage) and `sktime` (Japanese vowels). The wheels
are fetched with `pip download` unless paths are given.

    python3 scripts/prepare_data.py [--keel WHEEL] [--sktime WHEEL] [--out data]
"""

import argparse
import io
import os
import subprocess
import tempfile
import zipfile

KEEL_RAW = "keel_ds/data/balanced/raw/"
JV_TRAIN = "sktime/datasets/data/JapaneseVowels/JapaneseVowels_TRAIN.ts"


def fetch(package, dest):
    subprocess.run(
        ["pip", "download", "--no-deps", "--timeout", "300", "-d", dest, package],
        check=True,
    )
    for name in os.listdir(dest):
        if name.startswith(package.replace("-", "_")) and name.endswith(".whl"):
            return os.path.join(dest, name)
    raise SystemExit(f"could not download {package}")


def keel_rows(wheel, name):
    with zipfile.ZipFile(wheel) as z:
        text = z.read(KEEL_RAW + name + ".dat").decode()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([v.strip() for v in line.split(",")])
    return rows


def fmt(v):
    x = float(v)
    return str(int(x)) if x.is_integer() else repr(x)


def write_arff(path, relation, attrs, classes, rows):
    with open(path, "w") as f:
        f.write(f"% {relation}: {len(rows)} instances, {len(attrs)} attributes + class\n")
        f.write(f"@relation {relation}\n\n")
        for a in attrs:
            f.write(f"@attribute {a} numeric\n")
        f.write("@attribute class {" + ",".join(classes) + "}\n\n@data\n")
        for r in rows:
            f.write(",".join(fmt(v) for v in r[:-1]) + "," + r[-1] + "\n")


def write_csv(path, attrs, rows):
    with open(path, "w") as f:
        f.write(",".join(attrs + ["class"]) + "\n")
        for r in rows:
            f.write(",".join(fmt(v) for v in r[:-1]) + "," + r[-1] + "\n")


def class_labels(rows):
    labels = sorted({r[-1] for r in rows}, key=lambda s: (len(s), s))
    return labels


def japanese_vowels(wheel):
    with zipfile.ZipFile(wheel) as z:
        text = z.read(JV_TRAIN).decode()
    rows = []
    data = False
    for line in io.StringIO(text):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.lower().startswith("@data"):
            data = True
            continue
        if not data:
            continue
        *dims, label = line.split(":")
        series = [d.split(",") for d in dims]
        for frame in range(len(series[0])):
            rows.append([series[c][frame] for c in range(len(series))] + [label])
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--keel")
    ap.add_argument("--sktime")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = ap.parse_args()
    tmp = tempfile.mkdtemp()
    keel = args.keel or fetch("keel-ds", tmp)
    sktime = args.sktime or fetch("sktime", tmp)
    os.makedirs(args.out, exist_ok=True)

    seg = keel_rows(keel, "segment")
    write_arff(os.path.join(args.out, "segment.arff"), "segment",
               [f"a{i}" for i in range(19)], class_labels(seg), seg)

    # satimage = sat.trn (4435 rows) followed by sat.tst; the training part
    # is the "Landsat" table entry.
    sat = keel_rows(keel, "satimage")[:4435]
    write_arff(os.path.join(args.out, "landsat.arff"), "landsat",
               [f"px{i}" for i in range(36)], class_labels(sat), sat)

    opt = keel_rows(keel, "optdigits")
    write_arff(os.path.join(args.out, "optdigits.arff"), "optdigits",
               [f"p{i}" for i in range(64)], class_labels(opt), opt)

    pen = keel_rows(keel, "penbased")
    write_csv(os.path.join(args.out, "pendigits.csv"), [f"xy{i}" for i in range(16)], pen)

    jv = japanese_vowels(sktime)
    write_csv(os.path.join(args.out, "japanese_vowels.csv"), [f"lpc{i}" for i in range(12)], jv)

    for name in sorted(os.listdir(args.out)):
        print(name)


if __name__ == "__main__":
    main()
