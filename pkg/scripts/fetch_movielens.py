#!/usr/bin/env python3
"""Materialise MovieLens 100K as u.data / u.user / u.item.

Two sources, tried in order:

1. ``--zip PATH``: an official ``ml-100k.zip`` from GroupLens.
2. The ML-100K copy packaged inside the ``recbole`` wheel on PyPI, fetched with
   ``pip download`` and converted from RecBole's atomic files.

Output defaults to ``data/ml-100k`` under the repository root.
"""

import argparse
import glob
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)
RECBOLE = "recbole==1.2.1"
PREFIX = "recbole/dataset_example/ml-100k/"


def from_official_zip(path, out):
    with zipfile.ZipFile(path) as z:
        for name in ("u.data", "u.user", "u.item"):
            (out / name).write_bytes(z.read(f"ml-100k/{name}"))


def _atomic_rows(text):
    lines = text.splitlines()
    return [ln.split("\t") for ln in lines[1:] if ln.strip()]


def from_recbole(out):
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, RECBOLE],
            check=True,
        )
        wheel = glob.glob(f"{tmp}/recbole-*.whl")[0]
        with zipfile.ZipFile(wheel) as z:
            inter = z.read(PREFIX + "ml-100k.inter").decode()
            user = z.read(PREFIX + "ml-100k.user").decode()
            item = z.read(PREFIX + "ml-100k.item").decode("utf-8", errors="replace")

    data = io.StringIO()
    for u, i, r, t in _atomic_rows(inter):
        data.write(f"{u}\t{i}\t{int(float(r))}\t{int(float(t))}\n")
    (out / "u.data").write_text(data.getvalue())

    users = io.StringIO()
    for uid, age, gender, occ, zipcode in _atomic_rows(user):
        users.write(f"{uid}|{age}|{gender}|{occ}|{zipcode}\n")
    (out / "u.user").write_text(users.getvalue())

    items = io.StringIO()
    for row in _atomic_rows(item):
        iid, title = row[0], row[1]
        year = row[2] if len(row) > 2 else ""
        genres = set(row[3].split()) if len(row) > 3 else set()
        flags = "|".join("1" if g in genres else "0" for g in GENRES)
        full = f"{title} ({year})" if year else title
        # release date, video release date and IMDb URL are not in the atomic files
        items.write(f"{iid}|{full}||||{flags}\n")
    (out / "u.item").write_text(items.getvalue(), encoding="latin-1", errors="replace")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--zip", help="official ml-100k.zip")
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "ml-100k"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.zip:
        from_official_zip(args.zip, out)
    else:
        from_recbole(out)
    n = sum(1 for _ in open(out / "u.data"))
    print(f"wrote {out} ({n} ratings)")


if __name__ == "__main__":
    main()
