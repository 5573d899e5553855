from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from egoflow.communities import (CommunityPartition, community_pipeline,
                                 detect_communities,
                                 exact_null_mean, inversion_score,
                                 membership_likelihood, null_model,
                                 rank_sequence, size_by_rank)
from egoflow.egonet import EgoNetwork, ego_network_at
from egoflow.timegraph import TimeGraph

import oracles


def clique_pair_network():
    """Two 5-cliques joined by a single bridge edge."""
    left = [f"l{i}" for i in range(5)]
    right = [f"r{i}" for i in range(5)]
    edges = set()
    for group in (left, right):
        for u, v in itertools.combinations(group, 2):
            edges.add((u, v))
    edges.add((left[0], right[0]))
    return EgoNetwork(ego="e", t=0, members=frozenset(left + right),
                      edges=frozenset(edges)), set(left), set(right)


# -- detection ------------------------------------------------------------

def test_two_cliques_recovered_and_match_exhaustive_oracle():
    net, left, right = clique_pair_network()
    part = detect_communities(net, seed=7)
    groups = {}
    for node, label in part.assignment.items():
        groups.setdefault(label, set()).add(node)
    assert sorted(groups.values(), key=len) == sorted([left, right], key=len) or \
        set(map(frozenset, groups.values())) == {frozenset(left), frozenset(right)}
    # exhaustive search over all partitions of the 10 nodes agrees
    best_q, best_blocks = oracles.best_modularity_partition(
        sorted(net.members), net.edges)
    assert {frozenset(b) for b in best_blocks} == {frozenset(left), frozenset(right)}
    assert part.modularity == pytest.approx(best_q, abs=1e-9)


def test_single_clique_one_community():
    nodes = [f"c{i}" for i in range(6)]
    edges = frozenset((u, v) for u, v in itertools.combinations(nodes, 2))
    part = detect_communities(EgoNetwork("e", 0, frozenset(nodes), edges), seed=1)
    assert part.n_communities == 1


def test_small_ego_skipped():
    net = EgoNetwork("e", 0, frozenset(["a", "b", "c", "d"]), frozenset())
    assert detect_communities(net, seed=0) is None


def test_detection_deterministic_for_fixed_seed(rng):
    nodes = list(range(40))
    edges = set()
    for u, v in itertools.combinations(nodes, 2):
        if rng.random() < 0.15:
            edges.add((u, v))
    net = EgoNetwork("e", 0, frozenset(nodes), frozenset(edges))
    parts = [detect_communities(net, seed=123) for _ in range(3)]
    assert parts[0].assignment == parts[1].assignment == parts[2].assignment
    assert parts[0].modularity == parts[1].modularity


# -- rank sequences --------------------------------------------------------

def test_rank_sequence_worked_example():
    # additions [j1, j2, j3, j4] in communities [c1, c1, c2, c1]
    assignment = {"j1": "c1", "j2": "c1", "j3": "c2", "j4": "c1"}
    seq = rank_sequence(assignment, ["j1", "j2", "j3", "j4"])
    assert seq.ranks == (1, 1, 2, 1)
    assert seq.community_order == ("c1", "c2")


def test_rank_sequence_single_community():
    assignment = {f"j{i}": "c" for i in range(5)}
    seq = rank_sequence(assignment, [f"j{i}" for i in range(5)])
    assert seq.ranks == (1, 1, 1, 1, 1)


def test_rank_sequence_median_tie_breaks_by_first_occurrence():
    # a: positions 1, 4 (median 2.5); b: positions 2, 3 (median 2.5)
    assignment = {"x1": "a", "x2": "b", "x3": "b", "x4": "a"}
    seq = rank_sequence(assignment, ["x1", "x2", "x3", "x4"])
    assert seq.community_order == ("a", "b")
    assert seq.ranks == (1, 2, 2, 1)


def test_rank_sequence_invariant_under_relabeling():
    order = [f"j{i}" for i in range(6)]
    a1 = {"j0": 0, "j1": 0, "j2": 1, "j3": 1, "j4": 2, "j5": 0}
    a2 = {k: {0: "zebra", 1: "apple", 2: "mid"}[v] for k, v in a1.items()}
    assert rank_sequence(a1, order).ranks == rank_sequence(a2, order).ranks


def test_rank_sequence_requires_full_order():
    with pytest.raises(ValueError, match="misses"):
        rank_sequence({"a": 0, "b": 1}, ["a"])


# -- inversion score -------------------------------------------------------

def test_inversion_score_sorted_and_reversed():
    assert inversion_score([1, 1, 2, 3, 3]) == 1.0
    assert inversion_score([5, 4, 3, 2, 1]) == -1.0


def test_inversion_score_paper_example():
    assert inversion_score([1, 1, 2, 1]) == pytest.approx(2 / 3)


def test_inversion_score_too_short():
    with pytest.raises(ValueError):
        inversion_score([1])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=2, max_size=8))
def test_inversion_score_matches_quadratic_oracle(seq):
    assert inversion_score(seq) == pytest.approx(
        oracles.inversion_score_quadratic(seq))


# -- null model -------------------------------------------------------------

def test_null_mean_all_equal_is_one():
    null = null_model([2, 2, 2, 2], n_shuffles=1000, seed=1)
    assert null.mean == 1.0
    assert exact_null_mean([2, 2, 2, 2]) == 1.0


def test_null_mean_paper_example_exhaustive():
    seq = [1, 1, 2, 1]
    assert exact_null_mean(seq) == pytest.approx(0.5)
    assert oracles.exhaustive_null_mean(seq) == pytest.approx(0.5)
    null = null_model(seq, n_shuffles=4000, seed=3)
    assert null.mean == pytest.approx(0.5, abs=0.03)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=2, max_size=6))
def test_null_mean_closed_form_matches_enumeration(seq):
    assert exact_null_mean(seq) == pytest.approx(oracles.exhaustive_null_mean(seq))


def test_null_mean_distinct_converges_to_zero(rng):
    seq = rng.permutation(20).tolist()
    null = null_model(seq, n_shuffles=10_000, seed=9)
    assert exact_null_mean(seq) == 0.0
    assert abs(null.mean) <= 0.02


def test_null_model_input_validation():
    with pytest.raises(ValueError, match="shuffles"):
        null_model([1, 2], n_shuffles=10)
    with pytest.raises(ValueError):
        null_model([1], n_shuffles=1000)


# -- membership likelihood ---------------------------------------------------

def test_membership_single_community_likelihood_one():
    seqs = [(1, 1, 1, 1)] * 8
    rows = membership_likelihood(seqs, n_max=4, k_max=2)
    for n, k, lik, p_obs, p_null, count in rows:
        assert k == 1
        assert lik == pytest.approx(1.0)
        assert count == 8


def test_membership_in_depth_first_community_over_chance():
    seqs = [(1, 1, 1, 2, 2, 2)] * 10
    rows = {(r[0], r[1]): r for r in membership_likelihood(seqs, 6, 2)}
    assert rows[(1, 1)][2] == pytest.approx(1 / 0.5) == 2.0
    assert (1, 2) not in rows or rows[(1, 2)][2] == 0.0


def test_membership_shuffled_sequences_near_one(rng):
    base = [1] * 5 + [2] * 5
    seqs = [tuple(rng.permutation(base).tolist()) for _ in range(4000)]
    rows = membership_likelihood(seqs, n_max=3, k_max=2)
    for _, _, lik, _, _, _ in rows:
        assert lik == pytest.approx(1.0, abs=0.06)


# -- size by rank -------------------------------------------------------------

def test_size_by_rank_planted_profile():
    sizes = [3, 7, 4]
    assignment = {}
    order = []
    for label, size in enumerate(sizes):
        for i in range(size):
            node = f"c{label}_{i}"
            assignment[node] = label
            order.append(node)
    part = CommunityPartition("e", 0, assignment, 0.0)
    seq = rank_sequence(assignment, order)
    rows = size_by_rank([part], [seq])
    assert [(r[0], r[1]) for r in rows] == [(1, 3.0), (2, 7.0), (3, 4.0)]


# -- pipeline ------------------------------------------------------------------

def build_two_clique_graph():
    records = []
    for e in range(3):
        members = [f"e{e}a{i}" for i in range(5)] + [f"e{e}b{i}" for i in range(5)]
        for i, m in enumerate(members):
            records.append((f"ego{e}", m, 100 * (i + 1)))
        for group in (members[:5], members[5:]):
            for u, v in itertools.combinations(group, 2):
                records.append((u, v, 2000))
    records.append(("tiny", "x", 5))
    return TimeGraph.from_records(records)


def test_community_pipeline_end_to_end():
    g = build_two_clique_graph()
    results, parts, seqs, skipped = community_pipeline(g, seed=11, n_shuffles=1000)
    assert skipped >= 1  # the tiny ego and every small-degree alter
    by_ego = {r.ego: r for r in results}
    for e in range(3):
        r = by_ego[f"ego{e}"]
        assert r.n_communities == 2
        assert r.inversion == 1.0  # in-depth by construction
        assert r.inversion > r.null_mean
    # deterministic reruns
    results2, _, _, _ = community_pipeline(g, seed=11, n_shuffles=1000)
    assert results == results2
