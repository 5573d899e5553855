"""Synthetic timestamped follow-graph generator with planted ground truth.

Egos register over time and create links in bursty sessions: batch sizes
follow a truncated discrete power law, inter-session gaps a power law with
exponential cutoff. Each addition picks its target through a configurable
mix of uniform, preferential-attachment, triadic-closure, and planted-
community mechanisms; an optional recommender intervenes with probability
rho, either copying the platform policy (highest common-neighbor count
among friends-of-friends, ties to the popular) or, for null experiments,
picking uniformly. Everything derives from per-ego seed streams, so equal
configs give bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .util import rng_for

SECONDS_PER_DAY = 86400
SESSION_TIMEOUT = 1500
MECHANISMS = ("uniform", "preferential", "triadic", "community")


@dataclass(frozen=True)
class SessionConfig:
    gamma_size: float = 2.2
    size_cap: int = 1000  # truncation of the size distribution's support
    gamma_tau: float = 0.4
    tau_cutoff_hours: float = 24.0 * 10
    batch_size_decay: float = 0.0  # mean size scales as (batch_index)^-decay
    batch_gap_growth: float = 1.0  # interarrival multiplier per batch (activity aging)
    rec_batch_p: float = 0.0  # batch-level recommended flagging probability
    rec_size_scale: float = 1.0  # target mean-size ratio of recommended batches


@dataclass(frozen=True)
class CommunityConfig:
    sizes: tuple = ()
    open_fraction: float = 1.0
    strictness: float = 1.0
    intra_p: float = 0.0


@dataclass(frozen=True)
class RecommenderConfig:
    enabled: bool = False
    rho: float = 0.0
    policy: str = "max_cn_fof"  # or 'uniform'


@dataclass(frozen=True)
class SynthConfig:
    n_egos: int
    horizon_days: int = 120
    n_pool: int = 200
    spawn_days: int | None = None  # registration window; default horizon / 2
    mix: dict = field(default_factory=lambda: {"uniform": 1.0})
    max_links_per_ego: int = 0  # 0 = until horizon
    session: SessionConfig = field(default_factory=SessionConfig)
    communities: CommunityConfig = field(default_factory=CommunityConfig)
    recommender: RecommenderConfig = field(default_factory=RecommenderConfig)
    daily_cap: int = 0
    densification_gamma: float = 0.0
    seed: int = 0


@dataclass
class GroundTruth:
    config: SynthConfig
    n_edges: int
    origins: dict  # (src, dst) -> 'r' | 's' for ego additions
    community_labels: dict  # ego -> {alter: community index}
    batches: dict  # ego -> list of (start, end, realized_size, recommended_flag)
    planted: dict
    realized: dict


def _size_table(gamma: float, cap: int) -> tuple[np.ndarray, float]:
    """CDF table of a power law truncated to [1, cap] and its exact mean."""
    k = np.arange(1, cap + 1, dtype=float)
    pmf = k ** -gamma
    pmf /= pmf.sum()
    return np.cumsum(pmf), float((k * pmf).sum())


def _scaled_size_table(gamma: float, cap: int, target_ratio: float):
    """Exponent whose truncated mean is target_ratio times the base mean."""
    _, base_mean = _size_table(gamma, cap)
    target = max(1.0 + 1e-9, base_mean * target_ratio)
    lo, hi = gamma, gamma + 12.0
    for _ in range(80):
        mid = (lo + hi) / 2
        _, mean = _size_table(mid, cap)
        if mean > target:
            lo = mid
        else:
            hi = mid
    cdf, mean = _size_table((lo + hi) / 2, cap)
    return cdf, mean, (lo + hi) / 2


def _draw_tau(rng, gamma_tau: float, cutoff_s: float) -> int:
    """Interarrival >= timeout from x^-gamma * exp(-x / cutoff)."""
    shape = 1.0 - gamma_tau  # Gamma(shape) density is x^(shape-1) e^(-x/scale)
    for _ in range(200):
        tau = rng.gamma(shape, cutoff_s)
        if tau >= SESSION_TIMEOUT:
            return int(tau)
    return SESSION_TIMEOUT + int(rng.integers(0, 10_000))


class _EgoCommunities:
    """Per-ego planted community pools with an in-depth opening schedule."""

    def __init__(self, cfg: CommunityConfig, universe: int, ego: int, rng):
        self.cfg = cfg
        forbidden = {ego}
        self.pools = []
        chosen: set = set()
        for size in cfg.sizes:
            candidates = rng.permutation(universe)
            pool = []
            for v in candidates.tolist():
                if v not in forbidden and v not in chosen:
                    pool.append(v)
                    chosen.add(v)
                    if len(pool) == size:
                        break
            if len(pool) < size:
                raise ValueError("infeasible config: community sizes exceed population")
            self.pools.append(pool)
        self.label = {v: c for c, pool in enumerate(self.pools) for v in pool}
        self.linked = [0] * len(self.pools)
        self.current = 0

    def draw(self, rng, out_set) -> int | None:
        if not self.pools:
            return None
        # advance the pointer past communities that are linked enough
        while (self.current < len(self.pools) - 1 and
               self.linked[self.current] >=
               self.cfg.open_fraction * len(self.pools[self.current])):
            self.current += 1
        in_depth = rng.random() < self.cfg.strictness
        if in_depth:
            order = range(self.current, len(self.pools))
        else:
            order = rng.permutation(len(self.pools)).tolist()
        for c in order:
            pool = self.pools[c]
            free = [v for v in pool if v not in out_set]
            if free:
                return free[int(rng.integers(len(free)))]
        return None

    def note_link(self, target: int) -> None:
        c = self.label.get(target)
        if c is not None:
            self.linked[c] += 1


class _GraphState:
    def __init__(self, universe: int):
        self.universe = universe
        self.out_list = [[] for _ in range(universe)]
        self.out_set = [set() for _ in range(universe)]
        self.indeg = np.zeros(universe, dtype=np.int64)
        self.edge_dst: list[int] = []
        self.n_edges = 0

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.out_set[u]

    def add_edge(self, u: int, v: int) -> None:
        self.out_list[u].append(v)
        self.out_set[u].add(v)
        self.indeg[v] += 1
        self.edge_dst.append(v)
        self.n_edges += 1


def _pick_uniform(rng, state, ego):
    out = state.out_set[ego]
    for _ in range(60):
        v = int(rng.integers(state.universe))
        if v != ego and v not in out:
            return v
    free = [v for v in range(state.universe) if v != ego and v not in out]
    if not free:
        return None
    return free[int(rng.integers(len(free)))]


def _pick_preferential(rng, state, ego):
    out = state.out_set[ego]
    n, e = state.universe, state.n_edges
    for _ in range(60):
        if e == 0 or rng.random() < n / (e + n):
            v = int(rng.integers(n))
        else:
            v = state.edge_dst[int(rng.integers(e))]
        if v != ego and v not in out:
            return v
    return _pick_uniform(rng, state, ego)


def _pick_triadic(rng, state, ego):
    mine = state.out_list[ego]
    if mine:
        for _ in range(60):
            mid = mine[int(rng.integers(len(mine)))]
            theirs = state.out_list[mid]
            if not theirs:
                continue
            v = theirs[int(rng.integers(len(theirs)))]
            if v != ego and v not in state.out_set[ego]:
                return v
    return _pick_uniform(rng, state, ego)


def _pick_max_cn_fof(rng, state, ego):
    counts: dict = {}
    out = state.out_set[ego]
    for mid in state.out_list[ego]:
        for v in state.out_list[mid]:
            if v != ego and v not in out:
                counts[v] = counts.get(v, 0) + 1
    if not counts:
        return None
    return max(counts.items(),
               key=lambda kv: (kv[1], int(state.indeg[kv[0]]), -kv[0]))[0]


def generate(cfg: SynthConfig):
    """Emit (edge_records, node_records, GroundTruth) for a config.

    edge_records are (src, dst, created_at, 's'|'r') tuples in generation
    order; node_records are (node, registered_at).
    """
    weights = {m: float(cfg.mix.get(m, 0.0)) for m in MECHANISMS}
    if any(w < 0 for w in weights.values()):
        raise ValueError("mix weights must be non-negative")
    total_w = sum(weights.values())
    if total_w <= 0:
        raise ValueError("mix weights must not all be zero")
    cum = np.cumsum([weights[m] / total_w for m in MECHANISMS])
    only = [m for m in MECHANISMS if weights[m] > 0]
    single_mech = only[0] if len(only) == 1 else None
    if not 0.0 <= cfg.recommender.rho <= 1.0:
        raise ValueError("rho must be in [0, 1]")
    if weights["community"] > 0 and not cfg.communities.sizes:
        raise ValueError("community attachment weight needs planted community sizes")

    universe = cfg.n_egos + cfg.n_pool
    if weights["community"] > 0 and sum(cfg.communities.sizes) > universe - 1:
        raise ValueError("infeasible config: community sizes exceed population")
    horizon_s = cfg.horizon_days * SECONDS_PER_DAY
    spawn_days = cfg.spawn_days if cfg.spawn_days is not None else max(1, cfg.horizon_days // 2)
    spawn_s = min(spawn_days * SECONDS_PER_DAY, horizon_s)

    size_cdf, size_mean = _size_table(cfg.session.gamma_size, cfg.session.size_cap)
    rec_cdf, rec_mean, rec_gamma = size_cdf, size_mean, cfg.session.gamma_size
    if cfg.session.rec_size_scale != 1.0:
        rec_cdf, rec_mean, rec_gamma = _scaled_size_table(
            cfg.session.gamma_size, cfg.session.size_cap, cfg.session.rec_size_scale)

    # stage 1: per-ego session schedules (independent of global state)
    registrations = {}
    schedule = []  # (ts, ego, batch_index, event_in_batch, batch_flagged)
    for ego in range(cfg.n_egos):
        rng = rng_for(cfg.seed, "sched", ego)
        reg = int(round(ego * spawn_s / max(1, cfg.n_egos)))
        registrations[ego] = reg
        t = reg + int(rng.integers(0, SESSION_TIMEOUT))
        links_left = cfg.max_links_per_ego or 10**9
        b = 0
        while t <= horizon_s and links_left > 0:
            b += 1
            flagged = bool(cfg.session.rec_batch_p and
                           rng.random() < cfg.session.rec_batch_p)
            u = rng.random()
            size = int(np.searchsorted(rec_cdf if flagged else size_cdf, u)) + 1
            if cfg.session.batch_size_decay:
                scaled = size * b ** -cfg.session.batch_size_decay
                size = max(1, int(math.floor(scaled) + (rng.random() < scaled % 1)))
            size = min(size, links_left)
            ts = t
            for j in range(size):
                if ts > horizon_s:
                    break
                schedule.append((ts, ego, b, j, flagged))
                links_left -= 1
                ts += int(rng.integers(1, 46))
            tau = _draw_tau(rng, cfg.session.gamma_tau,
                            cfg.session.tau_cutoff_hours * 3600)
            if cfg.session.batch_gap_growth != 1.0:
                tau = min(tau * cfg.session.batch_gap_growth ** (b - 1), 1e15)
            t = ts + int(tau)
    schedule.sort(key=lambda ev: (ev[0], ev[1], ev[2], ev[3]))

    # stage 2: execute additions against the evolving global graph
    state = _GraphState(universe)
    exec_rngs = {}
    comms: dict = {}
    edges = []
    origins = {}
    labels: dict = {}
    realized: dict = {}
    intra_counts = {}
    day_counts: dict = {}
    rec_real, spont_real = [], []

    def emit(src, dst, ts, origin):
        if cfg.daily_cap:
            key = (src, ts // SECONDS_PER_DAY)
            if day_counts.get(key, 0) >= cfg.daily_cap:
                return False
            day_counts[key] = day_counts.get(key, 0) + 1
        edges.append((src, dst, ts, origin))
        state.add_edge(src, dst)
        return True

    for ts, ego, b, j, flagged in schedule:
        rng = exec_rngs.get(ego)
        if rng is None:
            rng = exec_rngs[ego] = rng_for(cfg.seed, "exec", ego)
        if weights["community"] > 0 and ego not in comms:
            comms[ego] = _EgoCommunities(cfg.communities, universe, ego,
                                         rng_for(cfg.seed, "pools", ego))
            labels[ego] = comms[ego].label
        recommended = False
        if cfg.recommender.enabled:
            if cfg.session.rec_batch_p:
                recommended = flagged
            else:
                recommended = rng.random() < cfg.recommender.rho
        target = None
        if recommended:
            if cfg.recommender.policy == "uniform":
                target = _pick_uniform(rng, state, ego)
            elif cfg.recommender.policy == "max_cn_fof":
                target = _pick_max_cn_fof(rng, state, ego)
            else:
                raise ValueError(f"unknown recommender policy {cfg.recommender.policy!r}")
            if target is None:
                recommended = False  # no candidate: falls through as spontaneous
        if target is None:
            if single_mech is not None:
                mech = single_mech
            else:
                r = rng.random()
                mech = MECHANISMS[0] if r < cum[0] else \
                    MECHANISMS[1] if r < cum[1] else \
                    MECHANISMS[2] if r < cum[2] else MECHANISMS[3]
            if mech == "community":
                target = comms[ego].draw(rng, state.out_set[ego])
            elif mech == "preferential":
                target = _pick_preferential(rng, state, ego)
            elif mech == "triadic":
                target = _pick_triadic(rng, state, ego)
            if target is None:
                target = _pick_uniform(rng, state, ego)
        if target is None:
            continue  # ego follows everyone already
        if not emit(ego, target, ts, "r" if recommended else "s"):
            continue  # daily cap reached
        origins[(ego, target)] = "r" if recommended else "s"
        row = realized.setdefault((ego, b), [ts, ts, 0, False])
        row[1] = ts
        row[2] += 1
        row[3] = row[3] or recommended

        if ego in comms:
            comms[ego].note_link(target)
            c = comms[ego].label.get(target)
            if c is not None and cfg.communities.intra_p > 0:
                prior = [v for v in state.out_list[ego][:-1]
                         if comms[ego].label.get(v) == c]
                for v in prior:
                    if rng.random() < cfg.communities.intra_p and \
                            not state.has_edge(target, v):
                        emit(target, v, ts, "s")
        if cfg.densification_gamma > 0:
            n_alters = len(state.out_list[ego])
            have = intra_counts.get(ego, 0)
            want = int(round(n_alters ** cfg.densification_gamma))
            want = min(want, n_alters * (n_alters - 1))
            alters = state.out_list[ego]
            tries = 0
            while have < want and tries < 20 * (want - have + 1):
                tries += 1
                a = alters[int(rng.integers(n_alters))]
                bnode = alters[int(rng.integers(n_alters))]
                if a != bnode and not state.has_edge(a, bnode):
                    if emit(a, bnode, ts, "s"):
                        have += 1
            intra_counts[ego] = have

    node_records = [(v, registrations.get(v, 0)) for v in range(universe)]
    batches = {}
    for (ego, b), (start, end, size, has_rec) in sorted(realized.items()):
        batches.setdefault(ego, []).append((start, end, size, has_rec))
        (rec_real if has_rec else spont_real).append(size)

    gt = GroundTruth(
        config=cfg, n_edges=len(edges), origins=origins,
        community_labels={e: dict(m) for e, m in labels.items()},
        batches=batches,
        planted={
            "gamma_size": cfg.session.gamma_size,
            "gamma_tau": cfg.session.gamma_tau,
            "mean_size": size_mean,
            "mean_size_recommended": rec_mean,
            "rec_size_ratio": rec_mean / size_mean,
            "rec_gamma_size": rec_gamma,
        },
        realized={
            "mean_size": float(np.mean([r[2] for rows in batches.values() for r in rows]))
            if batches else 0.0,
            "mean_size_recommended": float(np.mean(rec_real)) if rec_real else None,
            "mean_size_spontaneous": float(np.mean(spont_real)) if spont_real else None,
            "n_batches": sum(len(rows) for rows in batches.values()),
            "n_recommended_edges": sum(1 for o in origins.values() if o == "r"),
        })
    return edges, node_records, gt


# -- matched-cohort scenario ---------------------------------------------


@dataclass(frozen=True)
class MatchedCohortConfig:
    n_groups: int = 250
    k: int = 1
    egos_per_arm: int = 8
    treatment_pool: int = 100
    control_pool: int = 10
    window_days: int = 30
    extra_steps: int = 1  # links added after the split step (for k+2 evaluation)
    null_mode: bool = False  # same behavior in both arms, labels random
    seed: int = 0


def matched_cohort(cfg: MatchedCohortConfig):
    """Planted diversity-gap stream for the matching experiment.

    Every group shares an ordered k-prefix; treatment egos pick their
    (k+1)-st contact uniformly from `treatment_pool` candidates (flagged
    recommended), control egos from `control_pool`. In null mode the two
    arms are behaviorally identical and the recommended flag is assigned
    by a fair coin.
    """
    rng = rng_for(cfg.seed, "cohort")
    edges, nodes = [], []
    next_id = 0

    def take(n):
        nonlocal next_id
        ids = list(range(next_id, next_id + n))
        next_id += n
        return ids

    for gi in range(cfg.n_groups):
        base = gi * 10_000_000
        prefix = take(cfg.k)
        pool_t = take(cfg.treatment_pool)
        pool_c = take(cfg.control_pool) if not cfg.null_mode else pool_t
        egos = take(2 * cfg.egos_per_arm)
        for node in prefix + (pool_t if cfg.null_mode else pool_t + pool_c):
            nodes.append((node, base))
        arm_flags = [True] * cfg.egos_per_arm + [False] * cfg.egos_per_arm
        if cfg.null_mode:
            arm_flags = rng.permutation(arm_flags).tolist()
        for i, (ego, treated) in enumerate(zip(egos, arm_flags)):
            reg = base + int(rng.integers(0, cfg.window_days * SECONDS_PER_DAY - 1))
            nodes.append((ego, reg))
            t = reg
            for p in prefix:
                t += 60
                edges.append((ego, p, t, "s"))
            pool = pool_t if (treated or cfg.null_mode) else pool_c
            t += 600
            pick = pool[int(rng.integers(len(pool)))]
            edges.append((ego, pick, t, "r" if treated else "s"))
            seen = {pick}
            for _ in range(cfg.extra_steps):
                t += 600
                nxt = pool[int(rng.integers(len(pool)))]
                tries = 0
                while nxt in seen and tries < 50:
                    nxt = pool[int(rng.integers(len(pool)))]
                    tries += 1
                seen.add(nxt)
                edges.append((ego, nxt, t, "s"))
    planted = {"treatment_pool": cfg.treatment_pool,
               "control_pool": cfg.control_pool, "null_mode": cfg.null_mode}
    return edges, nodes, planted


# -- independent audit ------------------------------------------------------


def oracle_report(cfg: SynthConfig, edges, gt: GroundTruth) -> dict:
    """Recompute planted quantities from the raw stream with brute force.

    Uses only plain scans (no analytics modules): gap-scan sessionization
    for the batch-size tail, adjacent-pair order checks for the in-depth
    fraction, and set intersections for the recommended/spontaneous CN gap.
    """
    by_ego: dict = {}
    for src, dst, ts, origin in edges:
        by_ego.setdefault(src, []).append((ts, dst, origin))
    # batch sizes by explicit gap scan
    sizes = []
    for ego in sorted(gt.batches):
        events = sorted(t for t, _, _ in by_ego.get(ego, []))
        current = 0
        last = None
        for t in events:
            if last is not None and t - last >= SESSION_TIMEOUT:
                sizes.append(current)
                current = 0
            current += 1
            last = t
        if current:
            sizes.append(current)
    sizes_arr = np.asarray(sizes, dtype=float)
    tail = sizes_arr[sizes_arr >= 5]
    gamma_hat = None
    if len(tail) >= 50 and tail.min() < tail.max():
        gamma_hat = 1.0 + len(tail) / float(np.log(tail / 4.5).sum())

    # in-depth ordering fraction over ground-truth labels
    ordered_pairs = total_pairs = 0
    for ego, label_map in gt.community_labels.items():
        adds = sorted(by_ego.get(ego, []))
        seq = [label_map[d] for _, d, _ in adds if d in label_map]
        first_seen: dict = {}
        for c in seq:
            first_seen.setdefault(c, len(first_seen))
        ranks = [first_seen[c] for c in seq]
        for a, b in zip(ranks, ranks[1:]):
            total_pairs += 1
            ordered_pairs += a <= b
    in_depth_fraction = ordered_pairs / total_pairs if total_pairs else None

    # CN at creation, by origin, via brute-force prefix intersections
    cn_rec, cn_spont = [], []
    out_so_far: dict = {}
    in_so_far: dict = {}
    for src, dst, ts, origin in sorted(edges, key=lambda e: e[2]):
        if (src, dst) in gt.origins:
            cn = len(out_so_far.get(src, set()) & in_so_far.get(dst, set()))
            (cn_rec if origin == "r" else cn_spont).append(cn)
        out_so_far.setdefault(src, set()).add(dst)
        in_so_far.setdefault(dst, set()).add(src)

    return {
        "batch_size_gamma": gamma_hat,
        "n_batches": len(sizes),
        "in_depth_fraction": in_depth_fraction,
        "mean_cn_recommended": float(np.mean(cn_rec)) if cn_rec else None,
        "mean_cn_spontaneous": float(np.mean(cn_spont)) if cn_spont else None,
        "cn_gap": (float(np.mean(cn_rec)) - float(np.mean(cn_spont)))
        if cn_rec and cn_spont else None,
    }
