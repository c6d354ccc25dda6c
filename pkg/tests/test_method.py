import warnings

import numpy as np
import pytest

from anovafourier.anova import sensitivity, term_family_ds
from anovafourier.bench import u_star
from anovafourier.index_sets import TermFamily, grouped
from anovafourier.lattice import Rank1Lattice, lattice_evaluate
from anovafourier.method import (ApproxModel, DetectionConfig, approximate,
                                 build_search_sets, detect, gap_intervals,
                                 tiered_sets)
from anovafourier.operator import uniform_nodes


def tiny_target(X):
    # three-dimensional target with terms {}, {1}, {2}, {1,2}
    return (1.0 + np.cos(2 * np.pi * X[:, 0])
            + 0.5 * np.sin(2 * np.pi * X[:, 1])
            + 0.25 * np.cos(2 * np.pi * (X[:, 0] + X[:, 1])))


def tiny_config(thresholds=(0.01, 0.01), count=3000, kind="scattered"):
    return DetectionConfig(d=3, d_s=2,
                           search={"type": "full_grid", "N": [4, 4]},
                           thresholds=list(thresholds),
                           sampling={"kind": kind, "count": count, "seed": 3},
                           solver={"max_iter": 120})


def test_detect_recovers_structure():
    res = detect(tiny_config(), tiny_target)
    assert (1, 2) in res.active
    assert (3,) not in res.active
    assert res.active.terms >= {(), (1,), (2,), (1, 2)}


def test_detect_threshold_one_gives_mean_only():
    res = detect(tiny_config(thresholds=(1.0, 1.0)), tiny_target)
    assert res.active.terms == {()}


def test_detect_threshold_zero_keeps_everything():
    res = detect(tiny_config(thresholds=(0.0, 0.0)), tiny_target)
    assert res.active.terms == term_family_ds(3, 2).terms


def test_detect_threshold_monotone():
    sizes = []
    for eps in (0.0, 1e-4, 1e-2, 0.2, 1.0):
        res = detect(tiny_config(thresholds=(eps, eps)), tiny_target)
        sizes.append(len(res.active))
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))


def test_detect_active_set_always_downward_closed():
    from anovafourier.index_sets import is_downward_closed
    for eps in (0.0, 0.001, 0.05, 0.5):
        res = detect(tiny_config(thresholds=(eps, eps)), tiny_target)
        assert is_downward_closed(res.active.terms)


def test_detect_lattice_scenario():
    cfg = DetectionConfig(d=3, d_s=2,
                          search={"type": "full_grid", "N": [4, 4]},
                          thresholds=[0.01, 0.01],
                          sampling={"kind": "lattice", "seed": 1})
    res = detect(cfg, tiny_target)
    assert (1, 2) in res.active
    assert "lattice" in res.pilot.provenance


def test_detect_rejects_data_for_lattice():
    cfg = DetectionConfig(d=3, d_s=2, search={"type": "full_grid", "N": [4, 4]},
                          thresholds=[0.0, 0.0], sampling={"kind": "lattice"})
    X = uniform_nodes(3, 10, seed=0)
    with pytest.raises(ValueError):
        detect(cfg, (X, np.zeros(10)))


def test_detect_underdetermined_warns():
    cfg = DetectionConfig(d=3, d_s=2, search={"type": "full_grid", "N": [8, 8]},
                          thresholds=[0.0, 0.0],
                          sampling={"kind": "scattered", "count": 50, "seed": 0},
                          solver={"max_iter": 5})
    with pytest.warns(UserWarning):
        detect(cfg, tiny_target)


def test_config_validation():
    with pytest.raises(ValueError):
        DetectionConfig(d=3, d_s=4, search={"type": "full_grid", "N": [4] * 4},
                        thresholds=[0] * 4, sampling={})
    with pytest.raises(ValueError):
        DetectionConfig(d=3, d_s=2, search={"type": "full_grid", "N": [4, 4]},
                        thresholds=[0.5], sampling={})
    with pytest.raises(ValueError):
        DetectionConfig(d=3, d_s=2, search={"type": "full_grid", "N": [4, 4]},
                        thresholds=[0.5, 1.5], sampling={})
    with pytest.raises(ValueError):
        DetectionConfig(d=3, d_s=2, search={"type": "full_grid", "N": [4]},
                        thresholds=[0.0, 0.0], sampling={})


def test_gap_intervals_perfect_and_shuffled():
    from anovafourier.bench import exact_sensitivity_report
    rep = exact_sensitivity_report(3)
    gaps = gap_intervals(rep, u_star(), 3)
    assert all(g is not None for g in gaps)
    assert all(a == 0.0 for a, b in gaps)  # no spurious mass in the exact model
    # deliberately wrong truth: gap at order 1 must close
    wrong = TermFamily.downward_closure(9, [(1, 2, 3)])
    gaps_wrong = gap_intervals(rep, wrong, 3)
    assert gaps_wrong[1] is None and gaps_wrong[2] is None


def test_approximate_and_idempotent_refit():
    cfg = tiny_config(thresholds=(0.001, 0.001))
    res = detect(cfg, tiny_target)
    sets = build_search_sets(3, 2, cfg.search, family=res.active)
    model = approximate(res.active, sets, tiny_target, cfg.sampling,
                        {"atol": 1e-12, "btol": 1e-12, "max_iter": 400})
    # same data, same family, same sets: coefficients reproduce the pilot
    pilot_vals = {}
    slices = res.pilot.index_set.block_slices()
    for b in res.pilot.index_set.blocks:
        pilot_vals[b.term] = res.pilot.coefficients.values[slices[b.term]]
    s2 = model.index_set.block_slices()
    for b in model.index_set.blocks:
        got = model.coefficients.values[s2[b.term]]
        assert np.linalg.norm(got - pilot_vals[b.term]) < 1e-6


def test_model_json_round_trip_exact(tmp_path):
    res = detect(tiny_config(), tiny_target)
    path = tmp_path / "model.json"
    res.pilot.save(path)
    loaded = ApproxModel.load(path)
    # hex binary64 encoding round-trips bit-exactly
    assert np.array_equal(loaded.coefficients.values, res.pilot.coefficients.values)
    assert np.array_equal(loaded.index_set.embedded(), res.pilot.index_set.embedded())
    x = np.array([0.3, 0.4, 0.9])
    assert loaded.evaluate(x) == res.pilot.evaluate(x)


def test_evaluate_model_mean_only():
    fam = TermFamily.from_terms(2, [()])
    sets = build_search_sets(2, 1, {"type": "full_grid", "N": [4]}, family=fam)
    g = grouped(fam, sets)
    from anovafourier.anova import CoefficientMap
    model = ApproxModel(CoefficientMap(g, np.array([2.0 + 1.0j])))
    assert model.evaluate(np.array([0.7, 0.1])) == pytest.approx(2.0 + 1.0j)


def test_evaluate_matches_dense_sum():
    rng = np.random.default_rng(0)
    res = detect(tiny_config(), tiny_target)
    model = res.pilot
    pts = rng.random((20, 3))
    emb = model.index_set.embedded()
    dense = np.exp(2j * np.pi * (pts @ emb.T)) @ model.coefficients.values
    assert np.linalg.norm(model.evaluate(pts) - dense) < 1e-12 * np.linalg.norm(dense)


def test_evaluate_reduces_mod_one():
    res = detect(tiny_config(), tiny_target)
    x = np.array([0.25, 0.5, 0.75])
    assert res.pilot.evaluate(x + 1.0) == pytest.approx(res.pilot.evaluate(x))


def test_evaluate_at_lattice_nodes_matches_fft_path():
    cfg = DetectionConfig(d=3, d_s=2, search={"type": "full_grid", "N": [4, 4]},
                          thresholds=[0.0, 0.0], sampling={"kind": "lattice", "seed": 2})
    res = detect(cfg, tiny_target)
    prov = res.pilot.provenance["lattice"]
    lat = Rank1Lattice(np.asarray(prov["z"]), prov["M"])
    direct = res.pilot.evaluate(lat.nodes())
    fft = lattice_evaluate(res.pilot.coefficients, lat)
    assert np.linalg.norm(direct - fft) < 1e-10 * np.linalg.norm(fft)


def test_tiered_sets_two_sizes():
    res = detect(tiny_config(thresholds=(0.0, 0.0)), tiny_target)
    sets, record = tiered_sets(res.active, res.report,
                               {"type": "full_grid", "N": [8, 8]}, d=3)
    sizes = {u: len(s) for u, s in sets.items() if u}
    assert len(set(sizes[u] for u in sizes if len(u) == 1)) == 2  # two tiers
    assert record  # recorded for provenance


def test_detect_zero_variance_errors():
    cfg = tiny_config()
    with pytest.raises(ValueError):
        detect(cfg, lambda X: np.zeros(X.shape[0]))
