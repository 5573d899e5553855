"""Community structure of final ego-networks and temporal exploration order.

Each ego-network (at least 5 members) is partitioned once at the final
snapshot with seeded Louvain modularity maximization on the undirected
projection. Members are then replaced by their community's temporal rank
(communities ordered by the median position of their members in the
addition sequence) and the sortedness of that rank sequence, via the
inversion score in [-1, 1], measures how strictly communities were explored
one after the other. A reshuffled null model calibrates the score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .egonet import ego_network_at
from .timegraph import TimeGraph
from .util import mean_ci, rng_for

MIN_EGO_SIZE = 5
DEFAULT_SHUFFLES = 10_000


@dataclass(frozen=True)
class CommunityPartition:
    ego: object
    t: int
    assignment: dict  # member -> community label (0..C-1)
    modularity: float

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def sizes(self) -> dict:
        out: dict = {}
        for label in self.assignment.values():
            out[label] = out.get(label, 0) + 1
        return out


@dataclass(frozen=True)
class RankSequence:
    ranks: tuple  # community rank (1..C) per addition position
    community_order: tuple  # label at rank r is community_order[r-1]


@dataclass(frozen=True)
class NullModel:
    mean: float
    ci_low: float
    ci_high: float
    n_shuffles: int


def detect_communities(net, seed: int = 0) -> CommunityPartition | None:
    """Seeded modularity partition of an ego-network; None if under 5 members.

    Labels are assigned deterministically by each community's smallest
    member id, so equal inputs and seeds give identical partitions.
    """
    members = sorted(net.members)
    if len(members) < MIN_EGO_SIZE:
        return None
    graph = nx.Graph()
    graph.add_nodes_from(members)
    graph.add_edges_from(sorted({(u, v) if u <= v else (v, u)
                                 for u, v in net.edges}))
    comms = nx.community.louvain_communities(graph, seed=seed, resolution=1.0)
    comms = sorted((sorted(c) for c in comms), key=lambda c: c[0])
    assignment = {node: k for k, comm in enumerate(comms) for node in comm}
    score = nx.community.modularity(graph, comms) if graph.number_of_edges() else 0.0
    return CommunityPartition(ego=net.ego, t=net.t, assignment=assignment,
                              modularity=score)


def rank_sequence(assignment: dict, addition_order) -> RankSequence:
    """Temporal community ranks by ascending median addition position.

    Median of an even occurrence count is the mean of the two middle
    positions; median ties break by earlier first occurrence. Positions
    are 1-based.
    """
    order = list(addition_order)
    missing = set(assignment) - set(order)
    if missing:
        raise ValueError(f"addition order misses {len(missing)} members")
    positions: dict = {}
    first_seen: dict = {}
    for pos, node in enumerate(order, start=1):
        label = assignment[node]
        positions.setdefault(label, []).append(pos)
        first_seen.setdefault(label, pos)

    def median(values):
        m = len(values)
        mid = m // 2
        if m % 2:
            return float(values[mid])
        return (values[mid - 1] + values[mid]) / 2.0

    ordered = sorted(positions, key=lambda c: (median(positions[c]), first_seen[c]))
    rank_of = {label: r for r, label in enumerate(ordered, start=1)}
    return RankSequence(ranks=tuple(rank_of[assignment[node]] for node in order),
                        community_order=tuple(ordered))


def _count_inversions(seq) -> int:
    def rec(a):
        if len(a) <= 1:
            return a, 0
        mid = len(a) // 2
        left, nl = rec(a[:mid])
        right, nr = rec(a[mid:])
        merged, inv, i, j = [], nl + nr, 0, 0
        while i < len(left) and j < len(right):
            if left[i] <= right[j]:
                merged.append(left[i])
                i += 1
            else:
                inv += len(left) - i
                merged.append(right[j])
                j += 1
        merged.extend(left[i:])
        merged.extend(right[j:])
        return merged, inv
    return rec(list(seq))[1]


def inversion_score(seq) -> float:
    """Sortedness in [-1, 1]: 1 - 2 * inversions / pairs."""
    m = len(seq)
    if m < 2:
        raise ValueError("inversion score needs at least two elements")
    return 1.0 - 2.0 * _count_inversions(seq) / math.comb(m, 2)


def exact_null_mean(seq) -> float:
    """Closed-form mean inversion score under uniform reshuffling."""
    m = len(seq)
    if m < 2:
        raise ValueError("need at least two elements")
    counts: dict = {}
    for x in seq:
        counts[x] = counts.get(x, 0) + 1
    distinct_pairs = math.comb(m, 2) - sum(math.comb(c, 2) for c in counts.values())
    return 1.0 - distinct_pairs / math.comb(m, 2)


def null_model(seq, n_shuffles: int = DEFAULT_SHUFFLES, seed: int = 0) -> NullModel:
    """Empirical inversion-score distribution under uniform reshuffling."""
    if n_shuffles < 1000:
        raise ValueError("need at least 1000 shuffles for a stable null")
    arr = np.asarray(seq)
    if arr.size < 2:
        raise ValueError("need at least two elements")
    rng = np.random.default_rng(seed)
    scores = np.empty(n_shuffles)
    for i in range(n_shuffles):
        scores[i] = inversion_score(rng.permutation(arr).tolist())
    lo, hi = np.percentile(scores, [2.5, 97.5])
    return NullModel(mean=float(scores.mean()), ci_low=float(lo),
                     ci_high=float(hi), n_shuffles=n_shuffles)


def membership_likelihood(sequences, n_max: int, k_max: int):
    """Odds that the n-th added node sits in the k-th community, over chance.

    The chance level for an ego is the share of its sequence held by rank k
    (the marginal of any position under reshuffling). Returns rows
    (n, k, likelihood, p_observed, p_null, n_egos); cells where no ego
    contributes or the null is zero are omitted.
    """
    seqs = [s.ranks if isinstance(s, RankSequence) else tuple(s) for s in sequences]
    rows = []
    for n in range(1, n_max + 1):
        pool = [s for s in seqs if len(s) >= n]
        if not pool:
            continue
        for k in range(1, k_max + 1):
            p_obs = sum(1 for s in pool if s[n - 1] == k) / len(pool)
            p_null = sum(s.count(k) / len(s) for s in pool) / len(pool)
            if p_null > 0:
                rows.append((n, k, p_obs / p_null, p_obs, p_null, len(pool)))
    return rows


def size_by_rank(partitions, sequences):
    """Mean final community size per temporal rank; rows (rank, mean, ci, count)."""
    by_rank: dict = {}
    for part, seq in zip(partitions, sequences):
        sizes = part.sizes()
        for r, label in enumerate(seq.community_order, start=1):
            by_rank.setdefault(r, []).append(sizes[label])
    rows = []
    for r in sorted(by_rank):
        mean, half = mean_ci(by_rank[r])
        rows.append((r, mean, half, len(by_rank[r])))
    return rows


@dataclass(frozen=True)
class EgoCommunityResult:
    ego: object
    n_members: int
    n_communities: int
    modularity: float
    ranks: tuple
    inversion: float | None
    null_mean: float | None
    null_ci: tuple | None


def community_pipeline(g: TimeGraph, seed: int = 0, t: int | None = None,
                       min_size: int = MIN_EGO_SIZE,
                       n_shuffles: int = DEFAULT_SHUFFLES):
    """Partition + rank + inversion + null for every large-enough ego.

    Returns (results, partitions, sequences, n_skipped); the three lists
    are aligned. Null-model RNG is derived from (seed, ego index) so
    results do not depend on processing order.
    """
    if t is None:
        t = int(g.edge_ts[-1]) if g.n_edges else 0
    degrees = g.out_indptr[1:] - g.out_indptr[:-1]
    results, partitions, sequences = [], [], []
    n_skipped = 0
    for ego_idx in np.flatnonzero(degrees >= 1).tolist():
        ego = g.id_of(ego_idx)
        if degrees[ego_idx] < min_size:
            n_skipped += 1
            continue
        net = ego_network_at(g, ego, t)
        part = detect_communities(net, seed=int(rng_for(seed, ego_idx).integers(2**31)))
        if part is None:
            n_skipped += 1
            continue
        lo, hi = g.out_indptr[ego_idx], g.out_indptr[ego_idx + 1]
        order = g.node_ids[g.out_dst[lo:hi]].tolist()
        seq = rank_sequence(part.assignment, order)
        inv = null = None
        if len(seq.ranks) >= 2:
            inv = inversion_score(seq.ranks)
            null = null_model(seq.ranks, n_shuffles=n_shuffles,
                              seed=int(rng_for(seed, ego_idx, 1).integers(2**31)))
        results.append(EgoCommunityResult(
            ego=ego, n_members=len(net.members), n_communities=part.n_communities,
            modularity=part.modularity, ranks=seq.ranks, inversion=inv,
            null_mean=None if null is None else null.mean,
            null_ci=None if null is None else (null.ci_low, null.ci_high)))
        partitions.append(part)
        sequences.append(seq)
    return results, partitions, sequences, n_skipped
