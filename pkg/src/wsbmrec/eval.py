"""Error and top-N metrics, and the train/test sweep comparing both neighbour policies."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .errors import DimensionError, UndefinedMetricError, ValidationError, WsbmrecError
from .ingest import split_ratings
from .pipeline import apply_comments, content_model, fit_communities, load_dataset, recommenders
from .predict import BlendWeights, rank_items, sim_basic, sim_rating

log = logging.getLogger(__name__)

ERROR_METRICS = ("mae", "rmse")
LIST_METRICS = ("precision", "recall", "f_measure")
REPORT_HEADER = ("section", "p_star_or_lstar", "metric", "ours", "traditional", "improvement_pct")


def _pairs(preds, actuals):
    p = np.asarray(preds, dtype=np.float64).ravel()
    q = np.asarray(actuals, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise DimensionError(f"{p.size} predictions vs {q.size} actual ratings")
    if p.size == 0:
        raise ValidationError("metrics need at least one prediction")
    return p, q


def mae(preds, actuals) -> float:
    p, q = _pairs(preds, actuals)
    return float(np.mean(np.abs(p - q)))


def rmse(preds, actuals) -> float:
    p, q = _pairs(preds, actuals)
    return float(np.sqrt(np.mean((p - q) ** 2)))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def count(cls, recommended, liked, disliked) -> "ConfusionCounts":
        rec, liked, disliked = set(recommended), set(liked), set(disliked)
        if liked & disliked:
            raise ValidationError("an item cannot be both liked and disliked")
        return cls(len(rec & liked), len(rec & disliked), len(liked - rec), len(disliked - rec))


def classification_metrics(per_user) -> tuple[float, float, float]:
    """Macro precision, recall and F over ``(recommended, liked, disliked)`` triples.

    A user whose denominator is zero is left out of that ratio's average.
    """
    precs, recs = [], []
    for recommended, liked, disliked in per_user:
        c = ConfusionCounts.count(recommended, liked, disliked)
        if c.tp + c.fp:
            precs.append(c.tp / (c.tp + c.fp))
        if c.tp + c.fn:
            recs.append(c.tp / (c.tp + c.fn))
    if not precs or not recs:
        raise UndefinedMetricError("no user contributes to precision or recall")
    P = float(np.mean(precs))
    R = float(np.mean(recs))
    F = 0.0 if P + R == 0 else 2 * P * R / (P + R)
    return P, R, F


def traditional_baseline_neighbors(a: int, n_neighbors: int, train, profiles: dict,
                                   weights: BlendWeights = BlendWeights(), corated: bool = False) -> set[int]:
    """The ``n_neighbors`` training users most similar to ``a`` by integrated similarity.

    Ties go to the smaller user id.
    """
    others = [int(u) for u in train.user_ids() if u != a]
    scored = []
    for u in others:
        s1 = sim_basic(profiles[a], profiles[u]) if a in profiles and u in profiles else 0.0
        s = weights.alpha_basic * s1 + weights.beta_rating * sim_rating(a, u, train, corated)
        scored.append((-s, u))
    scored.sort()
    return {u for _, u in scored[:n_neighbors]}


def improvement(metric: str, ours: float, trad: float) -> float:
    """Percentage gain of ours over the baseline; positive means better."""
    if trad == 0 or not np.isfinite(trad) or not np.isfinite(ours):
        return float("nan")
    gain = trad - ours if metric in ERROR_METRICS else ours - trad
    return 100.0 * gain / trad


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)  # (section, key, metric, ours, traditional)
    meta: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def add(self, section, key, metric, ours, trad):
        self.rows.append((section, key, metric, float(ours), float(trad)))

    def value(self, section, key, metric) -> tuple[float, float]:
        for s, k, m, o, t in self.rows:
            if (s, k, m) == (section, key, metric):
                return o, t
        raise KeyError((section, key, metric))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for s, k, m, o, t in self.rows:
            w.writerow([s, _fmt(k), m, _fmt(o), _fmt(t), _fmt(improvement(m, o, t))])
        return buf.getvalue()

    def write(self, path, meta_path=None) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())
        if meta_path is not None:
            with open(meta_path, "w") as fh:
                json.dump({"cells": self.meta, "failures": self.failures}, fh, indent=2, sort_keys=True)
                fh.write("\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if np.isnan(v) else format(v, ".10g")


def top_n_lists(context, users, items, ratings, l_stars, liked_threshold: float = 3.0):
    """Per-user ranked test items plus their liked/disliked sets.

    Returns ``{L: [(recommended, liked, disliked), ...]}`` over users whose
    test items could be scored.
    """
    scores = context.predict_pairs(users, items)
    per_l = {L: [] for L in l_stars}
    order = np.argsort(users, kind="stable")
    users, items, ratings, scores = users[order], items[order], ratings[order], scores[order]
    bounds = np.flatnonzero(np.diff(users)) + 1
    for sl in np.split(np.arange(len(users)), bounds):
        if sl.size == 0:
            continue
        it, r, sc = items[sl], ratings[sl], scores[sl]
        ok = ~np.isnan(sc)
        if not ok.any():
            continue
        liked = set(it[ok & (r >= liked_threshold)].tolist())
        disliked = set(it[ok & (r < liked_threshold)].tolist())
        ranked = rank_items(it[ok], sc[ok], len(it))
        for L in l_stars:
            per_l[L].append((ranked[:L], liked, disliked))
    return per_l


def _error_cell(report, dataset, sims, config, p, seed):
    train, test = split_ratings(dataset.ratings, p, seed)
    train = apply_comments(train, config)
    _, sel = fit_communities(train, config, seed=seed)
    model = sel.model
    ours, trad = recommenders(train, dataset, sims, model, config)
    po = ours.predict_pairs(test.users, test.items)
    pt = trad.predict_pairs(test.users, test.items)
    ok = ~np.isnan(po) & ~np.isnan(pt)
    report.add("rating", p, "mae", mae(po[ok], test.ratings[ok]), mae(pt[ok], test.ratings[ok]))
    report.add("rating", p, "rmse", rmse(po[ok], test.ratings[ok]), rmse(pt[ok], test.ratings[ok]))
    report.meta[f"p_star={p}"] = {
        "n_train": len(train), "n_test": len(test), "n_unpredictable": int((~ok).sum()),
        "chosen_k": sel.chosen_k, "community_sizes": [int(s) for s in model.community_sizes()],
        "candidate_k": [int(k) for k, _, _ in sel.candidates],
        "approx_log_evidence": [float(e) for _, _, e in sel.candidates],
        "select_failures": {str(k): v for k, v in sel.failures.items()},
    }
    return train, test, ours, trad


def run_experiment(config: PipelineConfig, dataset=None, sims=None, seed: int | None = None) -> EvalReport:
    """Sweep every training proportion, then the list-length grid at ``classify_p_star``.

    Fit or prediction errors in one cell are recorded in ``report.failures``
    and the sweep continues.
    """
    seed = config.seed if seed is None else seed
    dataset = load_dataset(config) if dataset is None else dataset
    report = EvalReport()
    if sims is None:
        sims, lsa, vocab = content_model(dataset, config)
        report.meta["content"] = {"vocabulary": vocab, "lsa_dim": lsa.M, "sigma": config.sigma}

    cells = {}
    p_grid = sorted(set(config.p_stars))
    for p in p_grid:
        try:
            cells[p] = _error_cell(report, dataset, sims, config, p, seed)
            log.info("p_star=%.1f done (K=%d)", p, report.meta[f"p_star={p}"]["chosen_k"])
        except WsbmrecError as exc:
            report.failures.append({"cell": f"p_star={p}", "error": type(exc).__name__, "message": str(exc)})
            for m in ERROR_METRICS:
                report.add("rating", p, m, np.nan, np.nan)

    if not config.l_stars:
        return report
    p = config.classify_p_star
    try:
        if p not in cells:
            cells[p] = _error_cell(EvalReport(meta=report.meta), dataset, sims, config, p, seed)
        _, test, ours, trad = cells[p]
        lists = [top_n_lists(ctx, test.users, test.items, test.ratings, config.l_stars, config.liked_threshold)
                 for ctx in (ours, trad)]
        for L in config.l_stars:
            mo = classification_metrics(lists[0][L])
            mt = classification_metrics(lists[1][L])
            for name, o, t in zip(LIST_METRICS, mo, mt):
                report.add("classification", L, name, o, t)
    except WsbmrecError as exc:
        report.failures.append({"cell": f"classification p_star={p}", "error": type(exc).__name__, "message": str(exc)})
    return report


def write_plots(report: EvalReport, outdir) -> list[str]:
    """One line chart per metric; needs matplotlib (``pip install .[plots]``)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for section, metrics, xlabel in (("rating", ERROR_METRICS, "training proportion"),
                                     ("classification", LIST_METRICS, "list length")):
        for m in metrics:
            rows = sorted((k, o, t) for s, k, mm, o, t in report.rows if s == section and mm == m)
            if not rows:
                continue
            x, o, t = zip(*rows)
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.plot(x, o, "o-", label="WSBM hybrid")
            ax.plot(x, t, "s--", label="traditional hybrid")
            ax.set_xlabel(xlabel)
            ax.set_ylabel(m)
            ax.legend()
            fig.tight_layout()
            path = outdir / f"{m}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(str(path))
    return written
