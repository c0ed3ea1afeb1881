"""Flat pipeline configuration shared by the evaluation driver and the CLI."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

from .comments import CommentBlend
from .errors import DataIOError, ValidationError
from .predict import BlendWeights
from .wsbm.families import WEIGHT_FAMILIES

P_STARS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
L_STARS = tuple(range(5, 101, 5))

# keys that describe file locations rather than model behaviour
PATH_KEYS = ("ratings", "users", "items", "descriptions", "comments", "labeled_comments")


@dataclass
class PipelineConfig:
    ratings: str | None = None
    users: str | None = None
    items: str | None = None
    descriptions: str | None = None
    comments: str | None = None
    labeled_comments: str | None = None

    sigma: float = 0.0
    lsa_dim: int = 100
    k_min: int = 2
    k_max: int = 8
    alpha_mix: float = 0.5
    weight_family: str = "poisson_weight"
    restarts: int = 5
    max_iter: int = 200
    tol: float = 1e-8
    weighted_degree: bool = True

    alpha_basic: float = 0.2
    beta_rating: float = 0.8
    gamma_content: float = 0.4
    gamma_cf: float = 0.6
    corated: bool = False
    eta1: float = 0.5
    eta2: float = 0.5

    n_neighbors: int = 30
    n_fallback: int = 20
    retrain_threshold: int = 50

    seed: int = 0
    p_stars: tuple = P_STARS
    l_stars: tuple = L_STARS
    classify_p_star: float = 0.8
    liked_threshold: float = 3.0

    def __post_init__(self):
        self.p_stars = tuple(float(p) for p in self.p_stars)
        self.l_stars = tuple(int(n) for n in self.l_stars)
        self.validate()

    @property
    def k_range(self) -> tuple[int, int]:
        return (self.k_min, self.k_max)

    @property
    def blend(self) -> BlendWeights:
        return BlendWeights(self.alpha_basic, self.beta_rating, self.gamma_content, self.gamma_cf)

    @property
    def comment_blend(self) -> CommentBlend:
        return CommentBlend(self.eta1, self.eta2)

    def validate(self) -> None:
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValidationError(f"k range {self.k_min}..{self.k_max} is empty or invalid")
        if not 0.0 <= self.alpha_mix <= 1.0:
            raise ValidationError(f"alpha_mix must lie in [0, 1], got {self.alpha_mix}")
        if self.weight_family not in WEIGHT_FAMILIES:
            raise ValidationError(f"weight_family must be one of {WEIGHT_FAMILIES}")
        if self.sigma < 0:
            raise ValidationError("sigma must be non-negative")
        for name in ("lsa_dim", "restarts", "max_iter", "n_neighbors", "n_fallback"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be at least 1")
        if self.retrain_threshold < 0:
            raise ValidationError("retrain_threshold must be non-negative")
        if self.tol <= 0:
            raise ValidationError("tol must be positive")
        for p in self.p_stars + (self.classify_p_star,):
            if not 0.0 < p < 1.0:
                raise ValidationError(f"p_star must lie in (0, 1), got {p}")
        if any(n < 1 for n in self.l_stars):
            raise ValidationError("list lengths must be positive")
        self.blend
        self.comment_blend

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise DataIOError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ValidationError("config must be a flat JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_stars"] = list(self.p_stars)
        d["l_stars"] = list(self.l_stars)
        return d

    def fingerprint(self) -> str:
        """Hash of the behaviour-relevant settings (file locations excluded)."""
        d = {k: v for k, v in self.to_dict().items() if k not in PATH_KEYS}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]
