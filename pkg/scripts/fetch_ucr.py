#!/usr/bin/env python3
"""Download UCR datasets and convert them to the layout this package reads.

Each dataset lands in <dest>/<Name>/<Name>_TRAIN.tsv and <Name>_TEST.tsv,
tab-separated with the integer label first. Point the tests at the result
with SROCKET_DATA=<dest> (or use the default ./data next to the repo root).

Requires outbound network access; on machines without it, copy a prepared
directory tree into place instead.

Usage:
    python scripts/fetch_ucr.py [--dest data] [NAME ...]
"""

import argparse
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

MIRROR = "https://timeseriesclassification.com/aeon-toolkit/{name}.zip"

DEFAULT_NAMES = [
    "Adiac",
    "ArrowHead",
    "Beef",
    "BeetleFly",
    "BirdChicken",
    "Car",
    "CBF",
    "CinCECGTorso",
    "ChlorineConcentration",
    "Coffee",
]


def parse_line(line: str) -> tuple[int, list[float]]:
    tokens = line.replace(",", " ").split()
    label = float(tokens[0])
    if label != int(label):
        raise ValueError(f"non-integer label {tokens[0]!r}")
    return int(label), [float(t) for t in tokens[1:]]


def convert(raw: bytes, out_path: Path) -> int:
    rows = 0
    with out_path.open("w") as fh:
        for line in raw.decode("utf-8").splitlines():
            if not line.strip():
                continue
            label, values = parse_line(line)
            fh.write("\t".join([str(label)] + [repr(v) for v in values]) + "\n")
            rows += 1
    return rows


def fetch_one(name: str, dest: Path) -> None:
    url = MIRROR.format(name=name)
    print(f"fetching {url}")
    with urllib.request.urlopen(url, timeout=120) as resp:
        payload = resp.read()
    archive = zipfile.ZipFile(io.BytesIO(payload))
    out_dir = dest / name
    out_dir.mkdir(parents=True, exist_ok=True)
    for split in ("TRAIN", "TEST"):
        candidates = [n for n in archive.namelist()
                      if n.endswith((f"{name}_{split}.txt", f"{name}_{split}.tsv"))]
        if not candidates:
            raise FileNotFoundError(f"{name}: no {split} text file in archive")
        rows = convert(archive.read(candidates[0]), out_dir / f"{name}_{split}.tsv")
        print(f"  {name}_{split}.tsv: {rows} rows")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", default=None,
                        help="dataset names (default: the ten used by the tests)")
    parser.add_argument("--dest", default="data", help="output directory")
    args = parser.parse_args(argv)

    dest = Path(args.dest)
    failures = []
    for name in args.names or DEFAULT_NAMES:
        try:
            fetch_one(name, dest)
        except Exception as exc:  # keep going; report at the end
            print(f"  {name}: FAILED ({exc})", file=sys.stderr)
            failures.append(name)
    if failures:
        print(f"failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    print(f"done; point SROCKET_DATA at {dest.resolve()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
