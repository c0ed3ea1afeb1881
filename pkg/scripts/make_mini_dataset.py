#!/usr/bin/env python3
"""Generate the bundled 50-user mini dataset (MovieLens layout) used by smoke tests.

Two taste groups over 40 items: group A prefers action/sci-fi titles, group B
drama/romance. Each user rates 8-20 items; ratings are noisy around the
group preference.
"""

import argparse
from pathlib import Path

import numpy as np

GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)
OCCUPATIONS = ("engineer", "student", "writer", "artist", "programmer", "educator", "doctor", "retired")
WORDS_A = ("laser", "galaxy", "robot", "chase", "explosion", "starship", "cyborg", "heist")
WORDS_B = ("letter", "wedding", "garden", "memory", "summer", "violin", "harbor", "promise")


def generate(out: Path, seed: int = 7) -> None:
    rng = np.random.default_rng(seed)
    out.mkdir(parents=True, exist_ok=True)
    n_users, n_items = 50, 40
    item_group = np.arange(n_items) % 2  # 0: A-style, 1: B-style
    user_group = (np.arange(n_users) >= n_users // 2).astype(int)

    with open(out / "u.item", "w", encoding="latin-1") as fh:
        for j in range(n_items):
            words = WORDS_A if item_group[j] == 0 else WORDS_B
            title = " ".join(rng.choice(words, size=2, replace=False)).title()
            genres = ("Action", "Sci-Fi") if item_group[j] == 0 else ("Drama", "Romance")
            if j % 5 == 0:
                genres += ("Comedy",)
            flags = "|".join("1" if g in genres else "0" for g in GENRES)
            fh.write(f"{j + 1}|{title} ({1990 + j % 10})|01-Jan-{1990 + j % 10}||http://example.org/{j + 1}|{flags}\n")

    with open(out / "u.user", "w") as fh:
        for u in range(n_users):
            age = int(rng.integers(22, 35) if user_group[u] == 0 else rng.integers(40, 65))
            gender = "M" if rng.random() < (0.7 if user_group[u] == 0 else 0.3) else "F"
            occ = OCCUPATIONS[int(rng.integers(0, 4)) + 4 * user_group[u]]
            fh.write(f"{u + 1}|{age}|{gender}|{occ}|{10000 + u}\n")

    lines = []
    t0 = 880000000
    for u in range(n_users):
        k = int(rng.integers(8, 21))
        # mostly own-group items, a few from the other group
        own = np.flatnonzero(item_group == user_group[u])
        other = np.flatnonzero(item_group != user_group[u])
        n_other = max(1, k // 4)
        picks = np.concatenate([rng.choice(own, k - n_other, replace=False), rng.choice(other, n_other, replace=False)])
        for j in np.sort(picks):
            base = 4.3 if item_group[j] == user_group[u] else 2.2
            r = int(np.clip(np.rint(base + rng.normal(0, 0.8)), 1, 5))
            lines.append(f"{u + 1}\t{j + 1}\t{r}\t{t0 + int(rng.integers(0, 10**7))}")
    (out / "u.data").write_text("\n".join(lines) + "\n")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src" / "wsbmrec" / "data" / "mini"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    generate(Path(args.out), args.seed)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
