"""Ego-network extraction and structural growth trajectories.

An ego-network at time t is the subgraph induced by the ego's out-neighbors
(the ego itself and its incident links are excluded). The trajectory samples
structural indicators each time the ego adds its n-th neighbor, using the
addition's own timestamp as the snapshot instant.

Distances are maintained with an exact incremental all-pairs scheme on the
undirected projection: inserting edge (u, v) relaxes d(x, y) against
d(x, u) + 1 + d(v, y), which is exact for unit-weight insert-only graphs.
For egos above ``full_distance_max`` members this is quadratic per edge and
too costly, so distances are instead computed by C-level BFS at
geometrically spaced steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .timegraph import ORIGIN_NAMES, RECOMMENDED, TimeGraph, UNKNOWN
from .util import UnionFind, mean_ci

SENTINEL = 1 << 20  # "unreachable" marker; 2*SENTINEL + 1 fits int32

TRAJECTORY_METRICS = ("gcc_ratio", "n_components", "net_distance",
                      "spawn_probability", "distance_delta")


@dataclass(frozen=True)
class EgoNetwork:
    ego: object
    t: int
    members: frozenset
    edges: frozenset  # directed (src, dst) pairs among members

    @property
    def n_members(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class TrajectoryStep:
    n: int
    added_node: object
    added_at: int
    origin: str
    n_edges: int
    gcc_ratio: float
    n_components: int
    net_distance: float | None
    spawned_new_component: bool
    distance_delta: float | None


@dataclass
class EgoTrajectory:
    """Column-oriented per-step indicators for one ego.

    ``net_distance``/``distance_delta`` hold NaN where undefined (no intra
    edges yet, or a step skipped by distance sampling).
    """

    ego: object
    added: list
    added_at: np.ndarray
    origin: np.ndarray  # int8 codes
    n_edges: np.ndarray
    gcc_ratio: np.ndarray
    n_components: np.ndarray
    net_distance: np.ndarray
    spawned: np.ndarray
    distance_delta: np.ndarray

    @property
    def final_size(self) -> int:
        return len(self.added)

    @property
    def steps(self) -> list[TrajectoryStep]:
        out = []
        for i in range(self.final_size):
            dist = float(self.net_distance[i])
            delta = float(self.distance_delta[i])
            out.append(TrajectoryStep(
                n=i + 1, added_node=self.added[i], added_at=int(self.added_at[i]),
                origin=ORIGIN_NAMES[self.origin[i]], n_edges=int(self.n_edges[i]),
                gcc_ratio=float(self.gcc_ratio[i]), n_components=int(self.n_components[i]),
                net_distance=None if math.isnan(dist) else dist,
                spawned_new_component=bool(self.spawned[i]),
                distance_delta=None if math.isnan(delta) else delta))
        return out


@dataclass(frozen=True)
class DensificationFit:
    gamma: float
    stderr: float
    n_points: int


def ego_network_at(g: TimeGraph, ego, t: int) -> EgoNetwork:
    """Members and induced directed edges of the ego-network as of time t."""
    idx = g.index_of(ego)
    if idx is None:
        return EgoNetwork(ego=ego, t=t, members=frozenset(), edges=frozenset())
    lo = g.out_indptr[idx]
    k = g._prefix_len(g.out_indptr, g.out_ts, idx, t, strict=False)
    member_idx = g.out_dst[lo:lo + k]
    member_set = set(member_idx.tolist())
    edges = set()
    ids = g.node_ids
    for m in member_idx.tolist():
        mlo = g.out_indptr[m]
        mk = g._prefix_len(g.out_indptr, g.out_ts, m, t, strict=False)
        for d in g.out_dst[mlo:mlo + mk].tolist():
            if d in member_set:
                edges.add((ids[m], ids[d]))
    return EgoNetwork(ego=ego, t=t,
                      members=frozenset(ids[member_idx].tolist()),
                      edges=frozenset(edges))


def _distance_sample_steps(k: int, dense_until: int = 10, ratio: float = 1.3) -> set[int]:
    steps = set(range(1, min(k, dense_until) + 1))
    n = float(max(dense_until, 1))
    while n < k:
        n = max(n * ratio, n + 1)
        steps.add(min(int(round(n)), k))
    steps.add(k)
    return steps


def _gather_intra_edges(g: TimeGraph, member_idx, join_ts, t_end: int):
    """Intra-member directed edges with the trajectory step they appear at.

    Returns (u_local, v_local, step) arrays, step being the 1-based addition
    step where the edge first has both endpoints present and ts <= t_n.
    """
    pos = {m: a for a, m in enumerate(member_idx.tolist())}
    get = pos.get
    us, vs, tss_kept = [], [], []
    for m, a in pos.items():
        mlo = g.out_indptr[m]
        mk = g._prefix_len(g.out_indptr, g.out_ts, m, t_end, strict=False)
        dsts = g.out_dst[mlo:mlo + mk].tolist()
        tss = g.out_ts[mlo:mlo + mk].tolist()
        for d, ts in zip(dsts, tss):
            b = get(d)
            if b is not None:
                us.append(a)
                vs.append(b)
                tss_kept.append(ts)
    if not us:
        return np.array([], dtype=np.int64), np.array([], dtype=np.int64), \
            np.array([], dtype=np.int64)
    u_arr = np.asarray(us, dtype=np.int64)
    v_arr = np.asarray(vs, dtype=np.int64)
    n_t = np.searchsorted(join_ts, np.asarray(tss_kept, dtype=np.int64),
                          side="left") + 1
    step = np.maximum(n_t, np.maximum(u_arr, v_arr) + 1)
    return u_arr, v_arr, step


def trajectory(g: TimeGraph, ego, distance: str = "auto",
               full_distance_max: int = 500, geometric_ratio: float = 1.3) -> EgoTrajectory:
    """Per-addition structural indicators for one ego.

    distance: 'auto' computes net_distance at every step for egos up to
    ``full_distance_max`` members and at geometrically spaced steps beyond;
    'full', 'geometric', and 'none' force the respective behavior.
    """
    idx = g.index_of(ego)
    if idx is None or g.out_indptr[idx + 1] == g.out_indptr[idx]:
        raise ValueError(f"empty ego {ego!r}")
    lo, hi = g.out_indptr[idx], g.out_indptr[idx + 1]
    member_idx = g.out_dst[lo:hi]
    join_ts = g.out_ts[lo:hi]
    origin = g.edge_origin[g.out_seq[lo:hi]]
    k = len(member_idx)

    if distance == "auto":
        distance = "full" if k <= full_distance_max else "geometric"
    if distance == "full":
        dist_steps = None  # every step
    elif distance == "geometric":
        dist_steps = _distance_sample_steps(k, ratio=geometric_ratio)
    elif distance == "none":
        dist_steps = set()
    else:
        raise ValueError(f"unknown distance policy {distance!r}")

    us, vs, steps = _gather_intra_edges(g, member_idx, join_ts, int(join_ts[-1]))
    by_step = [[] for _ in range(k + 1)]
    for u, v, s in zip(us.tolist(), vs.tolist(), steps.tolist()):
        by_step[s].append((u, v))

    uf = UnionFind(k)
    n_edges_arr = np.zeros(k, dtype=np.int64)
    gcc = np.zeros(k, dtype=np.float64)
    ncomp = np.zeros(k, dtype=np.int64)
    dist_arr = np.full(k, np.nan)
    spawn = np.zeros(k, dtype=bool)
    delta = np.full(k, np.nan)

    use_incremental = dist_steps is None
    if use_incremental:
        d_matrix = np.full((k, k), SENTINEL, dtype=np.int32)
    edges_so_far = []  # only kept for the sampled-BFS path
    n_edges = 0
    prev_dist = None
    for n in range(1, k + 1):
        new = n - 1
        uf.add(new)
        if use_incremental:
            d_matrix[new, new] = 0
        step_edges = by_step[n]
        touched_new = False
        for u, v in step_edges:
            if u == new or v == new:
                touched_new = True
            uf.union(u, v)
            if use_incremental and d_matrix[u, v] > 1:
                du = d_matrix[:n, u]
                dv = d_matrix[:n, v]
                cand = np.add.outer(du, dv)
                np.minimum(cand, cand.T, out=cand)
                cand += 1
                np.minimum(d_matrix[:n, :n], cand, out=d_matrix[:n, :n])
        n_edges += len(step_edges)
        if not use_incremental:
            edges_so_far.extend(step_edges)
        n_edges_arr[new] = n_edges
        gcc[new] = uf.max_size / n
        ncomp[new] = uf.n_components
        spawn[new] = (n == 1) or not touched_new

        dist = None
        if use_incremental:
            if not step_edges:
                # an isolated joiner adds no connected pairs
                dist = prev_dist
            else:
                active = d_matrix[:n, :n]
                finite = int((active < SENTINEL).sum())
                if finite > n:
                    total = int(active.sum(dtype=np.int64))
                    sum_fin = total - (n * n - finite) * SENTINEL
                    dist = sum_fin / (finite - n)
        elif n in dist_steps:
            dist = _bfs_mean_distance(n, edges_so_far)
        if dist is not None:
            dist_arr[new] = dist
            if prev_dist is not None:
                delta[new] = dist - prev_dist
            prev_dist = dist

    return EgoTrajectory(
        ego=ego, added=g.node_ids[member_idx].tolist(), added_at=join_ts.copy(),
        origin=origin.copy(), n_edges=n_edges_arr, gcc_ratio=gcc,
        n_components=ncomp, net_distance=dist_arr, spawned=spawn,
        distance_delta=delta)


def _bfs_mean_distance(n: int, edges) -> float | None:
    """Mean distance over connected unordered pairs via batched sparse BFS."""
    if not edges:
        return None
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    u = np.fromiter((e[0] for e in edges), dtype=np.int64, count=len(edges))
    v = np.fromiter((e[1] for e in edges), dtype=np.int64, count=len(edges))
    adj = csr_matrix((np.ones(len(edges), dtype=np.int8), (u, v)), shape=(n, n))
    total, finite = 0.0, 0
    for start in range(0, n, 512):
        batch = np.arange(start, min(start + 512, n))
        dmat = dijkstra(adj, directed=False, unweighted=True, indices=batch)
        mask = np.isfinite(dmat)
        total += float(dmat[mask].sum())
        finite += int(mask.sum())
    if finite <= n:
        return None
    return total / (finite - n)


# -- population-level aggregation -------------------------------------


def _metric_values(traj: EgoTrajectory, metric: str) -> np.ndarray:
    if metric == "spawn_probability":
        return traj.spawned.astype(float)
    if metric == "n_components":
        return traj.n_components.astype(float)
    return getattr(traj, metric)


def aggregate_trajectories(trajs, metric: str, n_max: int,
                           cohort: str = "all"):
    """Per-n mean and 95% CI of a step metric across egos.

    cohort='reached_n_max' restricts to egos whose final size is at least
    n_max, controlling for composition effects in growth curves.
    Returns a list of rows (n, mean, ci_half, count); n values with no
    contributing ego are omitted.
    """
    if metric not in TRAJECTORY_METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if cohort not in ("all", "reached_n_max"):
        raise ValueError(f"unknown cohort {cohort!r}")
    pool = [t for t in trajs
            if cohort == "all" or t.final_size >= n_max]
    if not pool:
        raise ValueError(f"empty cohort for n_max={n_max}")
    buckets = [[] for _ in range(n_max)]
    for traj in pool:
        vals = _metric_values(traj, metric)
        top = min(traj.final_size, n_max)
        for i in range(top):
            v = vals[i]
            if not math.isnan(v):
                buckets[i].append(v)
    rows = []
    for i, vals in enumerate(buckets):
        if vals:
            mean, half = mean_ci(vals)
            rows.append((i + 1, mean, half, len(vals)))
    return rows


def spawn_probability_by_origin(trajs, n_max: int | None = None):
    """Per-n spawn probability split spontaneous vs recommended.

    Unknown-origin additions are bucketed with spontaneous but reported in
    the n_unknown column. Returns rows of dicts; per-origin cells with zero
    observations hold None.
    """
    counts: dict[int, list] = {}
    for traj in trajs:
        top = traj.final_size if n_max is None else min(traj.final_size, n_max)
        for i in range(top):
            row = counts.setdefault(i + 1, [0, 0, 0, 0, 0])  # s_n, s_spawn, r_n, r_spawn, unk
            if traj.origin[i] == RECOMMENDED:
                row[2] += 1
                row[3] += int(traj.spawned[i])
            else:
                row[0] += 1
                row[1] += int(traj.spawned[i])
                if traj.origin[i] == UNKNOWN:
                    row[4] += 1
    rows = []
    for n in sorted(counts):
        s_n, s_sp, r_n, r_sp, unk = counts[n]
        rows.append({
            "n": n,
            "spontaneous": (s_sp / s_n, s_n) if s_n else None,
            "recommended": (r_sp / r_n, r_n) if r_n else None,
            "n_unknown": unk,
        })
    return rows


def densification_fit(trajs) -> DensificationFit:
    """Least-squares slope of log10(mean edges) vs log10(size).

    Pools trajectory steps with at least one intra edge into per-size mean
    edge counts, then fits a line in log-log space.
    """
    sums: dict[int, list] = {}
    for traj in trajs:
        for i in range(traj.final_size):
            e = int(traj.n_edges[i])
            if e >= 1:
                row = sums.setdefault(i + 1, [0, 0])
                row[0] += e
                row[1] += 1
    if len(sums) < 2:
        raise ValueError("densification fit needs at least two distinct sizes "
                         "with nonzero edges")
    sizes = np.array(sorted(sums), dtype=float)
    means = np.array([sums[int(n)][0] / sums[int(n)][1] for n in sizes])
    x = np.log10(sizes)
    y = np.log10(means)
    xbar = x.mean()
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - y.mean())).sum()) / sxx
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    m = len(x)
    stderr = 0.0
    if m > 2:
        stderr = math.sqrt(float((resid ** 2).sum()) / (m - 2) / sxx)
    return DensificationFit(gamma=slope, stderr=stderr, n_points=m)
