from __future__ import annotations

import numpy as np
import pytest

from egoflow.synth import (CommunityConfig, MatchedCohortConfig,
                           RecommenderConfig, SessionConfig, SynthConfig,
                           generate, matched_cohort, oracle_report)
from egoflow.timegraph import TimeGraph
from egoflow.sessions import sessions_table


def small_cfg(**kw):
    base = dict(n_egos=30, horizon_days=60, n_pool=200, seed=7,
                mix={"uniform": 1.0}, max_links_per_ego=15)
    base.update(kw)
    return SynthConfig(**base)


def test_empty_config():
    edges, nodes, gt = generate(small_cfg(n_egos=0, n_pool=0))
    assert edges == [] and nodes == []
    assert gt.n_edges == 0


def test_same_seed_bit_identical():
    cfg = small_cfg(recommender=RecommenderConfig(enabled=True, rho=0.3,
                                                  policy="uniform"))
    out1 = generate(cfg)
    out2 = generate(cfg)
    assert out1[0] == out2[0]
    assert out1[1] == out2[1]
    assert out1[2].batches == out2[2].batches


def test_rho_extremes():
    none = generate(small_cfg(recommender=RecommenderConfig(True, 0.0, "uniform")))
    every = generate(small_cfg(recommender=RecommenderConfig(True, 1.0, "uniform")))
    assert all(o == "s" for _, _, _, o in none[0])
    assert all(o == "r" for _, _, _, o in every[0])


def test_invalid_configs_rejected():
    with pytest.raises(ValueError, match="rho"):
        generate(small_cfg(recommender=RecommenderConfig(True, 1.5, "uniform")))
    with pytest.raises(ValueError, match="weights"):
        generate(small_cfg(mix={"uniform": -1.0}))
    with pytest.raises(ValueError, match="infeasible|population"):
        generate(small_cfg(n_egos=2, n_pool=3, mix={"community": 1.0},
                           communities=CommunityConfig(sizes=(10, 10))))


def test_stream_passes_ingestion_invariants():
    cfg = small_cfg(mix={"uniform": 0.5, "preferential": 0.3, "triadic": 0.2})
    edges, nodes, gt = generate(cfg)
    g = TimeGraph.from_records(edges, nodes=nodes)
    assert g.load_report.n_self_loops == 0
    assert g.load_report.n_duplicates == 0
    assert g.n_edges == len(edges)


def test_generated_batches_match_sessionizer_exactly():
    cfg = small_cfg(max_links_per_ego=40, horizon_days=90)
    edges, nodes, gt = generate(cfg)
    g = TimeGraph.from_records(edges, nodes=nodes)
    table = sessions_table(g)
    for ego, expected in gt.batches.items():
        idx = g.index_of(ego)
        mask = table["ego"] == idx
        got = list(zip(table["start"][mask].tolist(), table["end"][mask].tolist(),
                       table["size"][mask].tolist(),
                       table["contains_recommended"][mask].tolist()))
        assert got == [(s, e, n, r) for s, e, n, r in expected]


def test_recommended_edges_have_cn_at_creation():
    cfg = small_cfg(n_egos=40, max_links_per_ego=25,
                    mix={"uniform": 0.6, "triadic": 0.4},
                    recommender=RecommenderConfig(True, 0.35, "max_cn_fof"))
    edges, nodes, gt = generate(cfg)
    out_sets: dict = {}
    in_sets: dict = {}
    for src, dst, ts, origin in edges:
        if origin == "r":
            cn = len(out_sets.get(src, set()) & in_sets.get(dst, set()))
            assert cn >= 1
        out_sets.setdefault(src, set()).add(dst)
        in_sets.setdefault(dst, set()).add(src)
    assert gt.realized["n_recommended_edges"] > 10


def test_daily_cap_enforced():
    cfg = small_cfg(n_egos=5, max_links_per_ego=800, daily_cap=200,
                    horizon_days=30, n_pool=2000,
                    session=SessionConfig(gamma_size=1.6, size_cap=600,
                                          tau_cutoff_hours=4.0))
    edges, _, _ = generate(cfg)
    per_day: dict = {}
    for src, _, ts, _ in edges:
        key = (src, ts // 86400)
        per_day[key] = per_day.get(key, 0) + 1
    assert max(per_day.values()) <= 200
    assert max(per_day.values()) == 200  # the cap actually binds


def test_in_depth_schedule_fully_sorted():
    cfg = small_cfg(n_egos=10, max_links_per_ego=30, n_pool=400,
                    mix={"community": 1.0},
                    communities=CommunityConfig(sizes=(8, 8, 8, 8),
                                                open_fraction=1.0, strictness=1.0))
    edges, nodes, gt = generate(cfg)
    report = oracle_report(cfg, edges, gt)
    assert report["in_depth_fraction"] == 1.0


def test_shuffled_schedule_not_sorted():
    cfg = small_cfg(n_egos=10, max_links_per_ego=30, n_pool=400,
                    mix={"community": 1.0},
                    communities=CommunityConfig(sizes=(8, 8, 8, 8),
                                                strictness=0.0))
    edges, nodes, gt = generate(cfg)
    report = oracle_report(cfg, edges, gt)
    assert report["in_depth_fraction"] < 0.9


def test_planted_size_exponent_recovered_by_oracle():
    cfg = SynthConfig(n_egos=800, horizon_days=45, n_pool=30_000, seed=3,
                      mix={"uniform": 1.0}, spawn_days=5,
                      session=SessionConfig(gamma_size=2.2, size_cap=1000,
                                            tau_cutoff_hours=12.0))
    edges, nodes, gt = generate(cfg)
    report = oracle_report(cfg, edges, gt)
    assert report["n_batches"] > 20_000
    assert report["batch_size_gamma"] == pytest.approx(2.2, abs=0.1)


def test_recommended_batches_planted_smaller():
    cfg = small_cfg(
        n_egos=400, max_links_per_ego=60, horizon_days=400, n_pool=5000,
        recommender=RecommenderConfig(True, 0.0, "uniform"),
        session=SessionConfig(gamma_size=2.2, size_cap=200,
                              rec_batch_p=0.4, rec_size_scale=0.88))
    edges, nodes, gt = generate(cfg)
    ratio_target = gt.planted["rec_size_ratio"]
    assert ratio_target == pytest.approx(0.88, abs=1e-3)
    rec = gt.realized["mean_size_recommended"]
    spont = gt.realized["mean_size_spontaneous"]
    assert rec < spont
    assert rec / spont == pytest.approx(ratio_target, abs=0.08)


def test_cn_gap_zero_under_uniform_policy():
    cfg = small_cfg(n_egos=60, max_links_per_ego=25, n_pool=800,
                    recommender=RecommenderConfig(True, 0.4, "uniform"))
    edges, nodes, gt = generate(cfg)
    report = oracle_report(cfg, edges, gt)
    assert report["cn_gap"] == pytest.approx(0.0, abs=0.1)


def test_cn_gap_positive_under_policy():
    cfg = small_cfg(n_egos=60, max_links_per_ego=25, n_pool=300,
                    mix={"uniform": 0.5, "triadic": 0.5},
                    recommender=RecommenderConfig(True, 0.4, "max_cn_fof"))
    edges, nodes, gt = generate(cfg)
    report = oracle_report(cfg, edges, gt)
    assert report["cn_gap"] > 0.5


def test_matched_cohort_structure():
    cfg = MatchedCohortConfig(n_groups=5, k=2, egos_per_arm=4, seed=1)
    edges, nodes, planted = matched_cohort(cfg)
    g = TimeGraph.from_records(edges, nodes=nodes)
    # every ego has k prefix links, the split link, and extra_steps more
    by_src: dict = {}
    for src, dst, ts, origin in edges:
        by_src.setdefault(src, []).append((ts, dst, origin))
    ego_rows = {s: sorted(rows) for s, rows in by_src.items()}
    n_egos = sum(1 for rows in ego_rows.values() if len(rows) >= cfg.k + 1)
    assert n_egos == 5 * 8
    for rows in ego_rows.values():
        flags = [o for _, _, o in rows]
        assert all(f == "s" for i, f in enumerate(flags) if i != cfg.k)
