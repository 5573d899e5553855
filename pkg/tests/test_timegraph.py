from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egoflow import timegraph as tgm
from egoflow.timegraph import TimeGraph, daily_timeline, degree_stats

import oracles
from conftest import random_records


def test_empty_stream():
    g = TimeGraph.from_records([])
    assert g.n_nodes == 0
    assert g.n_edges == 0
    assert g.out_neighbors_at("a", 10) == set()


def test_duplicate_collapses_to_earliest():
    g = TimeGraph.from_records([("a", "b", 100), ("a", "b", 200)])
    assert g.n_edges == 1
    assert g.edge_created_at("a", "b") == 100
    assert g.load_report.n_duplicates == 1


def test_dedup_disabled_raises_on_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        TimeGraph.from_records([("a", "b", 100), ("a", "b", 200)], dedup=False)


def test_self_loops_rejected_and_counted():
    g = TimeGraph.from_records([("a", "a", 5), ("a", "b", 7)])
    assert g.n_edges == 1
    assert g.load_report.n_self_loops == 1


def test_neighbors_at_boundary():
    g = TimeGraph.from_records([("a", "b", 100)])
    assert g.out_neighbors_at("a", 99) == set()
    assert g.out_neighbors_at("a", 100) == {"b"}
    assert g.in_neighbors_at("b", 100) == {"a"}
    assert g.out_neighbors_at("a", 100, strict=True) == set()


def test_degree_at_basics(small_graph):
    g, _ = small_graph
    assert g.degree_at("a", 10_000) == 2
    assert g.degree_at("a", 10_000, direction="in") == 2
    assert g.degree_at("zzz", 10) == 0
    with pytest.raises(ValueError):
        g.degree_at("a", 10, direction="sideways")


def test_triangle_closure_defining_case():
    g = TimeGraph.from_records([("a", "b", 1), ("b", "c", 2)])
    assert g.closes_directed_triangle("a", "c", 3) is True
    # the path must exist strictly before t
    assert g.closes_directed_triangle("a", "c", 2) is False
    assert TimeGraph.from_records([]).closes_directed_triangle("a", "c", 3) is False


def test_triangle_closure_rejects_equal_endpoints(small_graph):
    g, _ = small_graph
    with pytest.raises(ValueError):
        g.closes_directed_triangle("a", "a", 5)


def test_registration_defaults_to_first_out_edge():
    g = TimeGraph.from_records([("a", "b", 50), ("a", "c", 10)])
    assert g.registered_at("a") == 10
    assert g.registration_defaulted("a")
    assert g.registered_at("b") is None


def test_registration_from_node_file():
    g = TimeGraph.from_records([("a", "b", 50)], nodes=[("a", 5), ("b", 7)])
    assert g.registered_at("a") == 5
    assert not g.registration_defaulted("a")
    assert g.registered_at("b") == 7


def test_registration_after_first_edge_rejected():
    with pytest.raises(ValueError, match="registered after"):
        TimeGraph.from_records([("a", "b", 50)], nodes=[("a", 60)])


def test_counts_match_recount_oracle(rng):
    records = random_records(rng, 10_000, 400)
    g = TimeGraph.from_records(records)
    non_self = [r for r in records if r[0] != r[1]]
    distinct_pairs = {(r[0], r[1]) for r in non_self}
    nodes = {r[0] for r in non_self} | {r[1] for r in non_self}
    assert g.n_edges == len(distinct_pairs)
    assert g.n_nodes == len(nodes)
    rep = g.load_report
    assert rep.n_records == rep.n_edges + rep.n_duplicates + rep.n_self_loops


def test_snapshot_queries_match_linear_scan(rng):
    records = random_records(rng, 10_000, 300)
    g = TimeGraph.from_records(records)
    deduped = oracles.dedup_records([r for r in records if r[0] != r[1]])
    nodes = sorted({r[0] for r in records} | {r[1] for r in records})
    for _ in range(100):
        node = nodes[rng.integers(len(nodes))]
        t = int(rng.integers(0, 10_000))
        assert g.out_neighbors_at(node, t) == oracles.scan_out_neighbors(deduped, node, t)
        assert g.in_neighbors_at(node, t) == oracles.scan_in_neighbors(deduped, node, t)
        assert g.degree_at(node, t) == len(oracles.scan_out_neighbors(deduped, node, t))
        assert g.degree_at(node, t, "in") == len(oracles.scan_in_neighbors(deduped, node, t))


def test_triangle_queries_match_intersection_oracle(rng):
    records = random_records(rng, 5_000, 120)
    g = TimeGraph.from_records(records)
    deduped = oracles.dedup_records([r for r in records if r[0] != r[1]])
    for _ in range(1_000):
        i, j = rng.integers(0, 120, size=2)
        if i == j:
            continue
        t = int(rng.integers(0, 10_000))
        assert g.closes_directed_triangle(int(i), int(j), t) == \
            oracles.scan_closes_triangle(deduped, int(i), int(j), t)


def test_monotone_growth(rng):
    records = random_records(rng, 2_000, 80)
    g = TimeGraph.from_records(records)
    for node in range(0, 80, 7):
        prev = set()
        for t in range(0, 10_000, 500):
            cur = g.out_neighbors_at(node, t)
            assert prev <= cur
            prev = cur


def test_identical_graph_for_any_record_order(rng):
    records = random_records(rng, 3_000, 100)
    g1 = TimeGraph.from_records(records)
    shuffled = list(records)
    rng.shuffle(shuffled)
    g2 = TimeGraph.from_records(shuffled)
    assert list(g1.records()) == list(g2.records())
    assert np.array_equal(g1.reg_time, g2.reg_time)


def test_degree_stats_single_edge():
    g = TimeGraph.from_records([("a", "b", 10)])
    stats = degree_stats(g, 10)
    assert stats.mean_in == 0.5 and stats.mean_out == 0.5
    assert stats.n_edges == 1


def test_degree_stats_k_regular():
    # directed ring where each node follows the next k nodes
    k, n = 3, 12
    records = [(i, (i + d) % n, 100 + i) for i in range(n) for d in range(1, k + 1)]
    g = TimeGraph.from_records(records)
    stats = degree_stats(g)
    assert stats.mean_in == pytest.approx(k)
    assert stats.mean_out == pytest.approx(k)


def test_degree_stats_empty():
    stats = degree_stats(TimeGraph.from_records([]))
    assert stats.mean_in is None and stats.mean_out is None
    assert stats.in_hist == []


def test_degree_stats_mean_matches_recount(rng):
    records = random_records(rng, 4_000, 200)
    g = TimeGraph.from_records(records)
    t = 5_000
    deduped = oracles.dedup_records([r for r in records if r[0] != r[1]])
    live = [r for r in deduped if r[2] <= t]
    stats = degree_stats(g, t)
    assert stats.mean_out == pytest.approx(len(live) / g.n_nodes)


def test_daily_timeline_single_day():
    day = 86400
    g = TimeGraph.from_records([("a", "b", 3 * day + 5), ("b", "c", 3 * day + 9)])
    rows = daily_timeline(g)
    assert len(rows) == 1
    assert rows[0].links == 2
    assert rows[0].triangle_closing == 0


def test_daily_timeline_star_has_no_triangles(rng):
    day = 86400
    records = [("hub", f"n{i}", int(rng.integers(0, 10 * day))) for i in range(50)]
    rows = daily_timeline(TimeGraph.from_records(records))
    assert all(r.triangle_closing == 0 for r in rows)
    assert sum(r.links for r in rows) == 50


def test_daily_timeline_matches_groupby_oracle(rng):
    records = random_records(rng, 2_000, 60, t_max=10 * 86400)
    g = TimeGraph.from_records(records)
    rows = daily_timeline(g)
    deduped = oracles.dedup_records([r for r in records if r[0] != r[1]])
    by_day = {}
    for r in deduped:
        d = r[2] // 86400
        row = by_day.setdefault(d, [0, 0, 0])
        row[0] += 1
        if oracles.scan_closes_triangle(deduped, r[0], r[1], r[2]):
            row[1] += 1
        if r[3] == "r":
            row[2] += 1
    for row in rows:
        expect = by_day.get(row.day, [0, 0, 0])
        assert [row.links, row.triangle_closing, row.recommended] == expect
    assert sum(r.links for r in rows) == len(deduped)


def test_malformed_record_reports_line():
    with pytest.raises(tgm.ParseError, match="line 2"):
        TimeGraph.from_records([("a", "b", 1), ("a", "c", "soon")])


def test_negative_timestamp_rejected():
    with pytest.raises(tgm.ParseError):
        TimeGraph.from_records([("a", "b", -5)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8),
                          st.integers(0, 50)), max_size=40))
def test_property_snapshot_equals_scan(recs):
    g = TimeGraph.from_records(recs)
    deduped = oracles.dedup_records([r for r in recs if r[0] != r[1]])
    for node in range(9):
        for t in (0, 10, 25, 50):
            assert g.out_neighbors_at(node, t) == oracles.scan_out_neighbors(deduped, node, t)
