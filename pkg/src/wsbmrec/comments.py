"""Rating correction from follow-up comments.

Labelled comments are pooled into one document per score class (1-5). A new
comment is scored by the class whose tf-idf centroid it is most cosine-similar
to, and the final rating blends that appended score with the initial rating.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import load_stopwords, tokenize
from .errors import CoverageError, DataIOError, DegenerateCentroidError, ParseError, ValidationError

SCORES = (1, 2, 3, 4, 5)
NEUTRAL = 3


@dataclass(frozen=True)
class CommentBlend:
    eta1: float = 0.5
    eta2: float = 0.5
    default_appended: float = NEUTRAL

    def __post_init__(self):
        if min(self.eta1, self.eta2) < 0 or self.eta1 + self.eta2 <= 0:
            raise ValidationError(f"comment blend needs eta1, eta2 >= 0 with a positive sum, got {self.eta1}, {self.eta2}")


@dataclass(frozen=True)
class CommentClassifier:
    keyword_sets: dict  # score -> frozenset of words
    overall: tuple  # sorted union of the keyword sets
    idf: np.ndarray
    centroids: np.ndarray  # 5 x |overall|
    tokenizer: object = tokenize
    stopwords: frozenset = frozenset()

    def vectorize(self, text: str) -> np.ndarray:
        pos = {w: k for k, w in enumerate(self.overall)}
        tf = np.zeros(len(self.overall))
        for w, c in Counter(t for t in self.tokenizer(text) if t not in self.stopwords).items():
            if w in pos:
                tf[pos[w]] = c
        return tf * self.idf


def build_classifier(labeled, stopwords=None, tokenizer=tokenize) -> CommentClassifier:
    """Fit per-score keyword sets and tf-idf centroids from ``(text, score)`` pairs."""
    stop = load_stopwords() if stopwords is None else frozenset(stopwords)
    counts = {s: Counter() for s in SCORES}
    seen = set()
    for text, score in labeled:
        score = int(score)
        if score not in counts:
            raise ValidationError(f"comment score must be in 1..5, got {score}")
        seen.add(score)
        counts[score].update(t for t in tokenizer(text) if t not in stop)
    missing = set(SCORES) - seen
    if missing:
        raise CoverageError(missing)

    keyword_sets = {s: frozenset(counts[s]) for s in SCORES}
    overall = tuple(sorted(set().union(*keyword_sets.values())))
    df = np.array([sum(w in keyword_sets[s] for s in SCORES) for w in overall], dtype=np.float64)
    idf = np.log(len(SCORES) / df) if len(overall) else np.zeros(0)
    tf = np.array([[counts[s][w] for w in overall] for s in SCORES], dtype=np.float64).reshape(len(SCORES), -1)
    centroids = tf * idf
    empty = [s for s, row in zip(SCORES, centroids) if not np.any(row > 0)]
    if empty:
        raise DegenerateCentroidError(f"score class(es) {empty} have no distinguishing keyword")
    return CommentClassifier(keyword_sets, overall, idf, centroids, tokenizer, stop)


def class_similarities(comment: str, classifier: CommentClassifier) -> np.ndarray:
    """Cosine of the comment's tf-idf vector with each class centroid (zeros if it has no keyword)."""
    av = classifier.vectorize(comment)
    na = np.linalg.norm(av)
    if na == 0:
        return np.zeros(len(SCORES))
    return classifier.centroids @ av / (np.linalg.norm(classifier.centroids, axis=1) * na)


def appended_rating(comment: str | None, classifier: CommentClassifier, default: int = NEUTRAL) -> int:
    """Score class most similar to ``comment``; ``default`` when it carries no keyword.

    Ties go to the class closest to the neutral score 3, then to the lower score.
    """
    if not comment:
        return default
    sims = class_similarities(comment, classifier)
    if not np.any(sims > 0):
        return default
    best = np.isclose(sims, sims.max(), rtol=1e-12, atol=0.0)
    tied = [s for s, b in zip(SCORES, best) if b]
    return min(tied, key=lambda s: (abs(s - NEUTRAL), s))


def final_rating(r: float, ar: float, blend: CommentBlend = CommentBlend()) -> float:
    """``eta1 * r + eta2 * ar``."""
    if not (1 <= r <= 5 and 1 <= ar <= 5):
        raise ValidationError(f"ratings must lie in [1, 5], got r={r}, ar={ar}")
    return blend.eta1 * r + blend.eta2 * ar


def read_labeled_comments(path) -> list[tuple[str, int]]:
    """CSV with header ``score,comment_text``."""
    out = []
    for lineno, row in _csv_rows(path, ("score", "comment_text")):
        try:
            out.append((row["comment_text"], int(row["score"])))
        except ValueError:
            raise ParseError(f"bad score {row['score']!r}", path, lineno) from None
    return out


def read_comment_file(path) -> list[tuple[int, int, float, str]]:
    """CSV with header ``user_id,item_id,initial_rating,comment_text``."""
    out = []
    for lineno, row in _csv_rows(path, ("user_id", "item_id", "initial_rating", "comment_text")):
        try:
            out.append((int(row["user_id"]), int(row["item_id"]), float(row["initial_rating"]), row["comment_text"] or ""))
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
    return out


def _csv_rows(path, required):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(required) <= set(reader.fieldnames):
            raise ParseError(f"header must contain {', '.join(required)}", path, 1)
        for row in reader:
            yield reader.line_num, row


def improve_ratings(comments, classifier: CommentClassifier, blend: CommentBlend = CommentBlend()):
    """Apply the correction to ``(user, item, initial, text)`` rows.

    Returns ``(user, item, initial, appended, final)`` rows in input order.
    """
    out = []
    for user, item, r, text in comments:
        ar = appended_rating(text, classifier, default=int(blend.default_appended))
        out.append((user, item, r, ar, final_rating(r, ar, blend)))
    return out
