"""MovieLens-format ingestion, user attribute quantization and train/test splits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataIOError, ParseError, ValidationError

GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)

# upper bound (inclusive) of each age bucket; anything above the last is bucket 7
_AGE_EDGES = (17, 25, 35, 45, 50, 56)

_GENDERS = {"male": 1, "m": 1, "female": 2, "f": 2}


def _load_occupations() -> tuple[str, ...]:
    text = resources.files("wsbmrec.data").joinpath("occupations.txt").read_text()
    rows = [ln.strip() for ln in text.splitlines()]
    return tuple(r for r in rows if r and not r.startswith("#"))


OCCUPATIONS = _load_occupations()
OCCUPATION_CODES = {name: i + 1 for i, name in enumerate(OCCUPATIONS)}


@dataclass(frozen=True)
class RatingsTable:
    """Column-oriented rating records.

    ``ratings`` is float so that comment-corrected ratings can flow through the
    same pipeline; parsed files always hold integers 1..5.
    """

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        n = len(self.users)
        if not (len(self.items) == len(self.ratings) == len(self.timestamps) == n):
            raise ValidationError("ratings table columns differ in length")

    @classmethod
    def from_records(cls, records) -> "RatingsTable":
        records = list(records)
        if not records:
            return cls.empty()
        arr = np.asarray(records, dtype=np.float64)
        return cls(
            users=arr[:, 0].astype(np.int64),
            items=arr[:, 1].astype(np.int64),
            ratings=arr[:, 2].astype(np.float64),
            timestamps=(arr[:, 3] if arr.shape[1] > 3 else np.zeros(len(arr))).astype(np.int64),
        )

    @classmethod
    def empty(cls) -> "RatingsTable":
        return cls(
            np.zeros(0, np.int64), np.zeros(0, np.int64),
            np.zeros(0, np.float64), np.zeros(0, np.int64),
        )

    def __len__(self) -> int:
        return len(self.users)

    def take(self, idx) -> "RatingsTable":
        idx = np.asarray(idx)
        return RatingsTable(self.users[idx], self.items[idx], self.ratings[idx], self.timestamps[idx])

    def user_ids(self) -> np.ndarray:
        return np.unique(self.users)

    def item_ids(self) -> np.ndarray:
        return np.unique(self.items)

    def records(self):
        for u, i, r, t in zip(self.users, self.items, self.ratings, self.timestamps):
            yield int(u), int(i), float(r), int(t)

    def with_ratings(self, ratings) -> "RatingsTable":
        return RatingsTable(self.users, self.items, np.asarray(ratings, dtype=np.float64), self.timestamps)


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    age_bucket: int
    gender_code: int
    occupation_code: int

    @property
    def attribute_vector(self) -> np.ndarray:
        return np.array([self.age_bucket, self.gender_code, self.occupation_code], dtype=np.float64)


def _open_text(path, encoding="utf-8"):
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"file not found: {path}")
    return path.read_text(encoding=encoding, errors="strict" if encoding == "utf-8" else "replace")


def _dedupe_latest(users, items, ratings, times) -> RatingsTable:
    """Keep one record per (user, item): the latest timestamp, later line on ties."""
    n = len(users)
    if n == 0:
        return RatingsTable.empty()
    order = np.lexsort((np.arange(n), times, items, users))
    u, i = users[order], items[order]
    last = np.ones(n, dtype=bool)
    last[:-1] = (u[1:] != u[:-1]) | (i[1:] != i[:-1])
    keep = np.sort(order[last])
    return RatingsTable(users[keep], items[keep], ratings[keep].astype(np.float64), times[keep])


def parse_ratings(path) -> RatingsTable:
    """Read a tab-separated ``user item rating timestamp`` file (MovieLens u.data)."""
    text = _open_text(path)
    users, items, ratings, times = [], [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) != 4:
            raise ParseError(f"expected 4 fields, got {len(fields)}", path, lineno)
        try:
            u, i, r, t = (int(f) for f in fields)
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", path, lineno) from None
        if u < 1 or i < 1:
            raise ValidationError(f"{path}:{lineno}: ids must be >= 1")
        if not 1 <= r <= 5:
            raise ValidationError(f"{path}:{lineno}: rating {r} outside [1, 5]")
        if t < 0:
            raise ValidationError(f"{path}:{lineno}: negative timestamp")
        users.append(u)
        items.append(i)
        ratings.append(r)
        times.append(t)
    return _dedupe_latest(
        np.asarray(users, np.int64), np.asarray(items, np.int64),
        np.asarray(ratings, np.float64), np.asarray(times, np.int64),
    )


def write_ratings(table: RatingsTable, path) -> None:
    """Write a table in u.data layout. Non-integer ratings are written with full precision."""
    lines = []
    for u, i, r, t in table.records():
        rs = str(int(r)) if float(r).is_integer() else repr(r)
        lines.append(f"{u}\t{i}\t{rs}\t{t}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_ratings_any(path) -> RatingsTable:
    """Like :func:`parse_ratings` but accepts real-valued (corrected) ratings."""
    text = _open_text(path)
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        f = line.split("\t")
        if len(f) != 4:
            raise ParseError(f"expected 4 fields, got {len(f)}", path, lineno)
        try:
            rows.append((int(f[0]), int(f[1]), float(f[2]), int(f[3])))
        except ValueError:
            raise ParseError(f"malformed line {line!r}", path, lineno) from None
    return RatingsTable.from_records(rows)


def age_bucket(age: int) -> int:
    if age < 0:
        raise ValidationError(f"negative age {age}")
    for bucket, upper in enumerate(_AGE_EDGES, start=1):
        if age <= upper:
            return bucket
    return len(_AGE_EDGES) + 1


def quantize_user(age: int, gender: str, occupation: str) -> tuple[int, int, int]:
    """Map raw demographics to ``(age_bucket, gender_code, occupation_code)``."""
    g = _GENDERS.get(gender.strip().lower())
    if g is None:
        raise ValidationError(f"unknown gender {gender!r}")
    occ = OCCUPATION_CODES.get(occupation.strip().lower())
    if occ is None:
        raise ValidationError(f"unknown occupation {occupation!r}")
    return age_bucket(int(age)), g, occ


def parse_users(path) -> dict[int, UserProfile]:
    """Read a pipe-separated ``user|age|gender|occupation|zip`` file."""
    text = _open_text(path, encoding="latin-1")
    profiles = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        f = line.split("|")
        if len(f) < 4:
            raise ParseError("expected user|age|gender|occupation|zip", path, lineno)
        try:
            uid, age = int(f[0]), int(f[1])
        except ValueError:
            raise ParseError(f"malformed line {line!r}", path, lineno) from None
        try:
            a, g, o = quantize_user(age, f[2], f[3])
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        profiles[uid] = UserProfile(uid, a, g, o)
    return profiles


@dataclass(frozen=True)
class ItemInfo:
    item_id: int
    title: str
    genres: tuple[str, ...]


def parse_items(path) -> dict[int, ItemInfo]:
    """Read MovieLens u.item: id, title, dates, url, then 19 genre flags."""
    text = _open_text(path, encoding="latin-1")
    items = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        f = line.split("|")
        if len(f) < 5 + len(GENRES):
            raise ParseError(f"expected {5 + len(GENRES)} fields, got {len(f)}", path, lineno)
        try:
            iid = int(f[0])
            flags = [int(x) for x in f[5:5 + len(GENRES)]]
        except ValueError:
            raise ParseError(f"malformed line {line!r}", path, lineno) from None
        items[iid] = ItemInfo(iid, f[1], tuple(g for g, on in zip(GENRES, flags) if on))
    return items


def parse_descriptions(path) -> dict[int, str]:
    """Optional ``item_id<TAB>free text`` description file."""
    text = _open_text(path)
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        head, sep, body = line.partition("\t")
        if not sep:
            raise ParseError("expected item_id<TAB>text", path, lineno)
        try:
            out[int(head)] = body
        except ValueError:
            raise ParseError(f"bad item id {head!r}", path, lineno) from None
    return out


def split_ratings(table: RatingsTable, p_star: float, seed: int) -> tuple[RatingsTable, RatingsTable]:
    """Uniform record-level split with ``round(p_star * n)`` training records."""
    if not 0.0 < p_star < 1.0:
        raise ValidationError(f"p_star must lie in (0, 1), got {p_star}")
    n = len(table)
    if n == 0:
        raise ValidationError("cannot split an empty table")
    n_train = int(math.floor(p_star * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return table.take(train_idx), table.take(test_idx)
