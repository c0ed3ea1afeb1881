import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import StubContext, flatten_instance, metrics_oracle, random_metric_instance
from wsbmrec.config import PipelineConfig
from wsbmrec.errors import DimensionError, UndefinedMetricError, ValidationError
from wsbmrec.eval import (REPORT_HEADER, EvalReport, classification_metrics, improvement, mae, rmse, run_experiment,
                          top_n_lists, traditional_baseline_neighbors)
from wsbmrec.ingest import RatingsTable, UserProfile
from wsbmrec.pipeline import load_dataset, resolve_paths


def test_error_metric_examples():
    assert mae([3, 4], [3, 5]) == 0.5
    assert mae([2, 2], [2, 2]) == 0.0
    assert mae([1], [5]) == 4.0
    assert rmse([3, 4], [3, 5]) == pytest.approx(math.sqrt(0.5))
    assert rmse([1, 2, 3], [2, 3, 4]) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        mae([], [])
    with pytest.raises(DimensionError):
        rmse([1, 2], [1])


def test_classification_examples():
    P, R, F = classification_metrics([({"a", "d"}, {"a", "b", "c"}, {"d"})])
    assert (P, R) == (0.5, pytest.approx(1 / 3)) and F == pytest.approx(0.4)
    assert classification_metrics([({"a", "b"}, {"a", "b"}, {"c"})]) == (1.0, 1.0, 1.0)
    P, _, _ = classification_metrics([({"a"}, {"a"}, set()), ({"x"}, {"y"}, {"x"})])
    assert P == 0.5
    with pytest.raises(UndefinedMetricError):
        classification_metrics([(set(), set(), {"x"})])
    with pytest.raises(ValidationError):
        classification_metrics([({"a"}, {"a"}, {"a"})])


def _package_metrics(inst):
    u, i, a, p = flatten_instance(inst)
    ctx = StubContext({(int(x), int(y)): s for x, y, s in zip(u, i, p)})
    L = inst["L"]
    P, R, F = classification_metrics(top_n_lists(ctx, u, i, a, [L])[L])
    return mae(p, a), rmse(p, a), P, R, F


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_metrics_match_counting_oracle(seed):
    inst = random_metric_instance(np.random.default_rng(seed))
    got = _package_metrics(inst)
    want = metrics_oracle(inst)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    m, r, P, R, F = got
    assert m <= r + 1e-15
    assert 0 <= F <= 2 * min(P, R) + 1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_recall_monotone_and_saturates(seed):
    inst = random_metric_instance(np.random.default_rng(seed))
    u, i, a, p = flatten_instance(inst)
    ctx = StubContext({(int(x), int(y)): s for x, y, s in zip(u, i, p)})
    Ls = list(range(1, 21))
    lists = top_n_lists(ctx, u, i, a, Ls)
    recalls = [classification_metrics(lists[L])[1] for L in Ls]
    assert all(b >= x for x, b in zip(recalls, recalls[1:]))
    assert recalls[-1] == 1.0
    # full-length lists: precision is the macro liked fraction
    fracs = [np.mean([r[1] >= 3 for r in rows]) for rows in inst["users"].values()]
    assert classification_metrics(lists[20])[0] == pytest.approx(np.mean(fracs), abs=1e-12)


def test_baseline_neighbors_examples():
    t = RatingsTable.from_records([(1, 1, 5, 0), (2, 1, 5, 0), (3, 1, 1, 0), (3, 2, 5, 0), (4, 3, 4, 0)])
    prof = {u: UserProfile(u, 2, 1, 3) for u in range(1, 5)}
    assert traditional_baseline_neighbors(1, 10, t, prof) == {2, 3, 4}
    assert traditional_baseline_neighbors(1, 1, t, prof) == {2}
    two = RatingsTable.from_records([(1, 1, 5, 0), (2, 2, 3, 0)])
    assert traditional_baseline_neighbors(1, 5, two, prof) == {2}
    # ties (3 and 4 both share only basic info) go to the smaller id
    flat = RatingsTable.from_records([(1, 1, 5, 0), (3, 9, 5, 0), (4, 8, 5, 0)])
    assert traditional_baseline_neighbors(1, 1, flat, prof) == {3}


def test_improvement_sign_convention():
    assert improvement("mae", 0.9, 1.0) == pytest.approx(10.0)
    assert improvement("precision", 0.6, 0.5) == pytest.approx(20.0)
    assert math.isnan(improvement("mae", 1.0, 0.0))


def test_report_csv_format(tmp_path):
    rep = EvalReport()
    rep.add("rating", 0.8, "mae", 0.75, 0.8)
    rep.add("classification", 5, "precision", 0.5, 0.4)
    rep.meta["x"] = {"k": 2}
    rep.write(tmp_path / "r.csv", tmp_path / "r.json")
    rows = list(csv.reader(io.StringIO((tmp_path / "r.csv").read_text())))
    assert tuple(rows[0]) == REPORT_HEADER
    assert rows[1] == ["rating", "0.8", "mae", "0.75", "0.8", "6.25"]
    assert rows[2][:2] == ["classification", "5"]
    assert json.loads((tmp_path / "r.json").read_text())["cells"] == {"x": {"k": 2}}
    with pytest.raises(KeyError):
        rep.value("rating", 0.9, "mae")


def _mini_config(mini_dir, **kw):
    cfg = resolve_paths(PipelineConfig(k_max=4, restarts=2, lsa_dim=10, **kw), mini_dir)
    return cfg


def test_run_experiment_shape_on_mini(mini_dir):
    cfg = _mini_config(mini_dir)
    rep = run_experiment(cfg)
    rating = [r for r in rep.rows if r[0] == "rating"]
    cls = [r for r in rep.rows if r[0] == "classification"]
    assert len(rating) == 18 and len(cls) == 60
    assert not rep.failures
    ours, trad = rep.value("rating", 0.8, "mae")
    assert 0 < ours < 2 and 0 < trad < 2
    assert rep.meta["p_star=0.8"]["chosen_k"] in rep.meta["p_star=0.8"]["candidate_k"]


def test_run_experiment_records_cell_failures(mini_dir, monkeypatch):
    from wsbmrec import eval as ev
    from wsbmrec.errors import NumericalError

    real = ev.fit_communities

    def flaky(train, config, seed=None):
        if len(train) < 100:
            raise NumericalError("synthetic failure", iteration=0)
        return real(train, config, seed=seed)

    monkeypatch.setattr(ev, "fit_communities", flaky)
    cfg = _mini_config(mini_dir, p_stars=(0.1, 0.8), l_stars=(5,))
    rep = run_experiment(cfg)
    assert rep.failures[0]["cell"] == "p_star=0.1" and rep.failures[0]["error"] == "NumericalError"
    assert math.isnan(rep.value("rating", 0.1, "mae")[0])
    assert not math.isnan(rep.value("rating", 0.8, "mae")[0])
    assert len([r for r in rep.rows if r[0] == "classification"]) == 3


def test_dataset_loader_on_mini(mini_dir):
    ds = load_dataset(_mini_config(mini_dir))
    assert len(ds.ratings) == 717 and len(ds.profiles) == 50 and len(ds.items) == 40
