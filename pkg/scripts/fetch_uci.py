#!/usr/bin/env python3
"""Download and prepare the four benchmark UCI datasets used by the
data-dependent acceptance tests (banknote, transfusion, car, cmc).

Writes header-carrying CSVs with the label in the last column to the output
directory (default: data/uci). Categorical columns of car are encoded as
ordered integers; all other datasets are natively numeric.

Requires network access to archive.ics.uci.edu.
"""

from __future__ import annotations

import argparse
import csv
import urllib.request
from pathlib import Path

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

CAR_ENCODING = {
    "buying": {"low": 0, "med": 1, "high": 2, "vhigh": 3},
    "maint": {"low": 0, "med": 1, "high": 2, "vhigh": 3},
    "doors": {"2": 2, "3": 3, "4": 4, "5more": 5},
    "persons": {"2": 2, "4": 4, "more": 6},
    "lug_boot": {"small": 0, "med": 1, "big": 2},
    "safety": {"low": 0, "med": 1, "high": 2},
}


def _fetch(url: str) -> bytes:
    print(f"fetching {url}")
    with urllib.request.urlopen(url) as response:
        return response.read()


def _write(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def banknote(out: Path) -> None:
    raw = _fetch(f"{BASE}/00267/data_banknote_authentication.txt").decode()
    rows = [line.split(",") for line in raw.strip().splitlines()]
    _write(out / "banknote.csv", ["variance", "skewness", "curtosis", "entropy", "class"], rows)


def transfusion(out: Path) -> None:
    raw = _fetch(f"{BASE}/blood-transfusion/transfusion.data").decode()
    lines = raw.strip().splitlines()[1:]  # drop the original header
    rows = [line.split(",") for line in lines]
    _write(out / "transfusion.csv", ["recency", "frequency", "monetary", "time", "class"], rows)


def car(out: Path) -> None:
    raw = _fetch(f"{BASE}/car/car.data").decode()
    names = list(CAR_ENCODING) + ["class"]
    rows = []
    for line in raw.strip().splitlines():
        cells = line.split(",")
        encoded = [str(CAR_ENCODING[name][cell]) for name, cell in zip(CAR_ENCODING, cells[:-1])]
        rows.append(encoded + [cells[-1]])
    _write(out / "car.csv", names, rows)


def cmc(out: Path) -> None:
    raw = _fetch(f"{BASE}/cmc/cmc.data").decode()
    names = [
        "wife_age", "wife_edu", "husband_edu", "children", "wife_religion",
        "wife_working", "husband_occ", "living_std", "media", "class",
    ]
    rows = [line.split(",") for line in raw.strip().splitlines()]
    _write(out / "cmc.csv", names, rows)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/uci", help="output directory")
    parser.add_argument(
        "--only", nargs="*", default=None,
        choices=["banknote", "transfusion", "car", "cmc"],
    )
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = {"banknote": banknote, "transfusion": transfusion, "car": car, "cmc": cmc}
    for name, task in tasks.items():
        if args.only is None or name in args.only:
            task(out)


if __name__ == "__main__":
    main()
