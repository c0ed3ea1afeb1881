"""Command-line entry point: ``fit``, ``recommend``, ``evaluate``, ``improve-ratings``.

Exit codes: 0 success, 2 file I/O, 3 invalid input or configuration,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .comments import CommentBlend, build_classifier, improve_ratings, read_comment_file, read_labeled_comments
from .config import PipelineConfig
from .corpus import ItemSimilarityMatrix
from .errors import DataIOError, ValidationError, WsbmrecError
from .eval import run_experiment, write_plots
from .ingest import RatingsTable, UserProfile, parse_ratings, quantize_user, read_ratings_any, write_ratings
from .pipeline import apply_comments, community_map, content_model, fit_communities, load_dataset, resolve_paths
from .predict import HybridRecommender, recommend_top_n, write_recommendations
from .wsbm import load_model, save_model

log = logging.getLogger("wsbmrec")

MANIFEST = "manifest.json"
BUNDLE_FORMAT = "wsbmrec.bundle/1"
BUNDLE_FILES = ("wsbm.json", "train.tsv", "profiles.npy", "item_ids.npy", "item_sims.npy")


class Stage:
    """Tag errors raised inside a block with the pipeline stage name."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.debug("stage %s", self.name)

    def __exit__(self, etype, exc, tb):
        if isinstance(exc, WsbmrecError) and not hasattr(exc, "stage"):
            exc.stage = self.name
        return False


def parse_k_range(text: str) -> tuple[int, int]:
    """``"2..8"`` (or ``"2-8"``, ``"4"``) to an inclusive pair; rejects empty ranges."""
    for sep in ("..", "-", ":"):
        if sep in text:
            lo, hi = text.split(sep, 1)
            break
    else:
        lo = hi = text
    try:
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise ValidationError(f"bad k range {text!r}; expected e.g. 2..8") from None
    if lo < 1 or hi < lo:
        raise ValidationError(f"k range {text!r} is empty")
    return lo, hi


def parse_new_user(text: str) -> UserProfile:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValidationError(f"--new-user expects age,gender,occupation, got {text!r}")
    try:
        age = int(parts[0])
    except ValueError:
        raise ValidationError(f"bad age {parts[0]!r}") from None
    return UserProfile(0, *quantize_user(age, parts[1], parts[2]))


# -- configuration -------------------------------------------------------------

_FLAG_KEYS = {
    "ratings": "ratings", "users": "users", "items": "items", "descriptions": "descriptions",
    "comments": "comments", "labeled_comments": "labeled_comments", "sigma": "sigma", "lsa_dim": "lsa_dim",
    "alpha_mix": "alpha_mix", "weight_family": "weight_family", "restarts": "restarts", "seed": "seed",
    "alpha_basic": "alpha_basic", "beta_rating": "beta_rating", "gamma_content": "gamma_content",
    "gamma_cf": "gamma_cf", "eta1": "eta1", "eta2": "eta2", "n_neighbors": "n_neighbors",
    "n_fallback": "n_fallback", "retrain_threshold": "retrain_threshold", "max_iter": "max_iter",
}


def build_config(args) -> PipelineConfig:
    base = PipelineConfig.load(args.config).to_dict() if getattr(args, "config", None) else {}
    for attr, key in _FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            base[key] = v
    if getattr(args, "k_range", None):
        base["k_min"], base["k_max"] = parse_k_range(args.k_range)
    if getattr(args, "corated", False):
        base["corated"] = True
    if getattr(args, "p_star", None):
        base["p_stars"] = args.p_star
        if len(args.p_star) == 1:
            base["classify_p_star"] = args.p_star[0]
    cfg = PipelineConfig.from_dict(base)
    return resolve_paths(cfg, getattr(args, "data", None))


def _add_config_flags(p, data=True):
    g = p.add_argument_group("configuration (override --config)")
    g.add_argument("--config", help="flat JSON config file")
    if data:
        g.add_argument("--data", help="directory holding u.data, u.user, u.item")
        g.add_argument("--ratings")
        g.add_argument("--users")
        g.add_argument("--items")
        g.add_argument("--descriptions", help="item_id<TAB>text file appended to item documents")
        g.add_argument("--comments", help="comment CSV applied to training ratings")
        g.add_argument("--labeled-comments", dest="labeled_comments", help="score,comment_text CSV")
    g.add_argument("--sigma", type=float)
    g.add_argument("--lsa-dim", dest="lsa_dim", type=int)
    g.add_argument("--k-range", dest="k_range", help="inclusive, e.g. 2..8")
    g.add_argument("--alpha-mix", dest="alpha_mix", type=float)
    g.add_argument("--weight-family", dest="weight_family", choices=("poisson_weight", "normal_weight"))
    g.add_argument("--restarts", type=int)
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--alpha-basic", dest="alpha_basic", type=float)
    g.add_argument("--beta-rating", dest="beta_rating", type=float)
    g.add_argument("--gamma-content", dest="gamma_content", type=float)
    g.add_argument("--gamma-cf", dest="gamma_cf", type=float)
    g.add_argument("--corated", action="store_true", help="rating cosine over co-rated items only")
    g.add_argument("--n-neighbors", dest="n_neighbors", type=int, help="traditional-method neighbour count")
    g.add_argument("--n-fallback", dest="n_fallback", type=int, help="new-user neighbour count")
    g.add_argument("--retrain-threshold", dest="retrain_threshold", type=int)


# -- model bundle ---------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def save_bundle(out: Path, config: PipelineConfig, train: RatingsTable, profiles: dict, sims: ItemSimilarityMatrix,
                selection, extra: dict) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    model = selection.model
    save_model(model, out / "wsbm.json")
    write_ratings(train, out / "train.tsv")
    prof = np.array([[p.user_id, p.age_bucket, p.gender_code, p.occupation_code]
                     for _, p in sorted(profiles.items())], dtype=np.int64).reshape(-1, 4)
    np.save(out / "profiles.npy", prof)
    np.save(out / "item_ids.npy", np.asarray(sims.item_ids, dtype=np.int64))
    np.save(out / "item_sims.npy", sims.values)
    for name, arr in extra.pop("lsa").items():
        np.save(out / f"lsa_{name}.npy", arr)
    files = sorted(BUNDLE_FILES) + sorted(f"lsa_{n}.npy" for n in ("U", "S", "V"))
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": __version__,
        "fingerprint": config.fingerprint(),
        "config": config.to_dict(),
        "chosen_k": selection.chosen_k,
        "community_sizes": model.community_sizes(),
        "candidates": [{"k": int(k), "approx_log_evidence": float(e)} for k, _, e in selection.candidates],
        "posterior": [float(p) for p in selection.posterior],
        "n_users": len(model.user_ids),
        "n_items": len(sims.item_ids),
        "files": {f: _sha256(out / f) for f in files},
        **extra,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_bundle(path) -> tuple[dict, HybridRecommender]:
    d = Path(path)
    try:
        manifest = json.loads((d / MANIFEST).read_text())
    except OSError as exc:
        raise DataIOError(f"cannot read model bundle {d}: {exc.strerror}") from exc
    if manifest.get("format") != BUNDLE_FORMAT:
        raise ValidationError(f"{d} is not a {BUNDLE_FORMAT} model bundle")
    for name, digest in manifest["files"].items():
        if not (d / name).exists():
            raise DataIOError(f"model bundle is missing {name}")
        if _sha256(d / name) != digest:
            raise ValidationError(f"{name} does not match the manifest checksum")
    cfg = PipelineConfig.from_dict(manifest["config"])
    train = read_ratings_any(d / "train.tsv")
    profiles = {int(r[0]): UserProfile(*map(int, r)) for r in np.load(d / "profiles.npy")}
    sims = ItemSimilarityMatrix(np.load(d / "item_sims.npy"), tuple(int(i) for i in np.load(d / "item_ids.npy")))
    model = load_model(d / "wsbm.json")
    ctx = HybridRecommender(train, profiles, sims, cfg.blend, communities=community_map(model),
                            n_neighbors=cfg.n_neighbors, n_fallback=cfg.n_fallback, corated=cfg.corated)
    return manifest, ctx


def retrain_warning(manifest: dict, known_users) -> str | None:
    """Message when the configured ratings file holds more unseen users than the threshold."""
    path = manifest["config"].get("ratings")
    if not path or not Path(path).exists():
        return None
    new = len(set(parse_ratings(path).user_ids().tolist()) - set(known_users))
    limit = manifest["config"]["retrain_threshold"]
    if new > limit:
        return (f"{new} users in {path} joined after the last fit (threshold {limit}); "
                f"re-run `wsbmrec fit` to re-detect communities")
    return None


# -- commands -----------------------------------------------------------------

def cmd_fit(args) -> int:
    with Stage("config"):
        cfg = build_config(args)
    with Stage("ingest"):
        data = load_dataset(cfg)
    with Stage("comments"):
        train = apply_comments(data.ratings, cfg)
    with Stage("corpus"):
        sims, lsa, vocab = content_model(data, cfg)
    with Stage("wsbm"):
        _, sel = fit_communities(train, cfg)
    with Stage("persist"):
        extra = {"lsa": {"U": lsa.U, "S": lsa.S, "V": lsa.V}, "vocabulary_size": vocab, "lsa_dim": lsa.M}
        manifest = save_bundle(Path(args.out), cfg, train, data.profiles, sims, sel, extra)
    print(f"fitted K={manifest['chosen_k']} communities {manifest['community_sizes']} -> {args.out}")
    return 0


def cmd_recommend(args) -> int:
    if args.n < 1:
        raise ValidationError(f"--n must be at least 1, got {args.n}")
    with Stage("load"):
        manifest, ctx = load_bundle(args.model)
    msg = retrain_warning(manifest, ctx.user_ids.tolist())
    if msg:
        log.warning(msg)
    with Stage("recommend"):
        if args.new_user is not None:
            profile = parse_new_user(args.new_user)
            user = 0
            recs = recommend_top_n(user, args.n, ctx, profile)
        else:
            user = args.user
            if not ctx.is_known(user) and user not in ctx.profiles:
                raise ValidationError(f"user {user} is unknown; use --new-user age,gender,occupation")
            recs = recommend_top_n(user, args.n, ctx)
    write_recommendations([(user, recs)], sys.stdout)
    return 0


def cmd_evaluate(args) -> int:
    with Stage("config"):
        cfg = build_config(args)
    with Stage("evaluate"):
        report = run_experiment(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = Path(args.meta) if args.meta else out.with_suffix(".meta.json")
    report.write(out, meta)
    for f in report.failures:
        log.warning("cell %s failed: %s: %s", f["cell"], f["error"], f["message"])
    if args.plots:
        try:
            for path in write_plots(report, args.plots):
                log.info("wrote %s", path)
        except ImportError:
            log.warning("matplotlib is not installed; skipping plots (pip install 'wsbmrec[plots]')")
    print(f"wrote {out} ({len(report.rows)} rows)")
    return 0


def cmd_improve_ratings(args) -> int:
    with Stage("comments"):
        blend = CommentBlend(args.eta1, args.eta2)
        clf = build_classifier(read_labeled_comments(args.labeled_comments))
        rows = improve_ratings(read_comment_file(args.comments), clf, blend)
    own = args.out not in (None, "-")
    fh = open(args.out, "w", newline="") if own else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "item_id", "initial_rating", "appended_rating", "final_rating"])
        for u, i, r, ar, fr in rows:
            w.writerow([u, i, format(r, "g"), ar, format(fr, ".10g")])
    finally:
        if own:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wsbmrec", description="Community-aware hybrid recommender.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit content model and communities, write a model bundle")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="model directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("recommend", help="top-N list for one user as CSV")
    p.add_argument("--model", required=True, help="model directory written by fit")
    who = p.add_mutually_exclusive_group(required=True)
    who.add_argument("--user", type=int)
    who.add_argument("--new-user", dest="new_user", metavar="AGE,GENDER,OCCUPATION")
    p.add_argument("--n", type=int, default=10)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("evaluate", help="train/test sweep against the traditional method")
    _add_config_flags(p)
    p.add_argument("--p-star", dest="p_star", type=float, nargs="+", help="training proportions (default 0.1..0.9)")
    p.add_argument("--out", default="report.csv")
    p.add_argument("--meta", help="JSON sidecar with chosen K and community sizes (default <out>.meta.json)")
    p.add_argument("--plots", help="directory for metric charts (needs matplotlib)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("improve-ratings", help="correct ratings with appended comments")
    p.add_argument("--comments", required=True, help="user_id,item_id,initial_rating,comment_text CSV")
    p.add_argument("--labeled-comments", dest="labeled_comments", required=True, help="score,comment_text CSV")
    p.add_argument("--eta1", type=float, default=0.5)
    p.add_argument("--eta2", type=float, default=0.5)
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_improve_ratings)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except WsbmrecError as exc:
        stage = getattr(exc, "stage", args.command)
        print(f"wsbmrec {args.command}: error in {stage}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"wsbmrec {args.command}: {exc}", file=sys.stderr)
        return DataIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
