"""Text persistence for fitted models (JSON; floats written with round-trip precision)."""

import json

import numpy as np

from ..errors import ValidationError
from .inference import WsbmModel

FORMAT = "wsbmrec.wsbm/1"


def model_to_dict(model: WsbmModel) -> dict:
    return {
        "format": FORMAT,
        "K": model.K,
        "alpha_mix": model.alpha_mix,
        "families": list(model.families),
        "theta": model.theta.tolist(),
        "weight_theta": np.asarray(model.weight_theta).tolist(),
        "qZ": model.qZ.tolist(),
        "q_theta": {fam: {k: np.asarray(v).tolist() for k, v in hyper.items()} for fam, hyper in model.q_theta.items()},
        "elbo": model.elbo,
        "elbo_trace": list(model.elbo_trace),
        "n_iter": model.n_iter,
        "converged": model.converged,
        "seed": model.seed,
        "user_index": list(model.user_ids),
    }


def model_from_dict(doc: dict) -> WsbmModel:
    if doc.get("format") != FORMAT:
        raise ValidationError(f"not a {FORMAT} document")
    return WsbmModel(
        K=int(doc["K"]),
        alpha_mix=float(doc["alpha_mix"]),
        families=tuple(doc["families"]),
        theta=np.asarray(doc["theta"], dtype=np.float64),
        weight_theta=np.asarray(doc["weight_theta"], dtype=np.float64),
        qZ=np.ascontiguousarray(doc["qZ"], dtype=np.float64),
        q_theta={fam: {k: np.asarray(v, dtype=np.float64) for k, v in hyper.items()} for fam, hyper in doc["q_theta"].items()},
        elbo=float(doc["elbo"]),
        user_ids=tuple(int(u) for u in doc["user_index"]),
        elbo_trace=[float(x) for x in doc.get("elbo_trace", [])],
        n_iter=int(doc.get("n_iter", 0)),
        converged=bool(doc.get("converged", False)),
        seed=doc.get("seed"),
    )


def save_model(model: WsbmModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> WsbmModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
