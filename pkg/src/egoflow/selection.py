"""Popularity and similarity indicators of neighbors at their addition instant.

For an ego i adding alter j at time t, all four indicators use edges that
exist strictly before t: the link being created must not count itself.
CN is |out(i) ∩ in(j)|, Jaccard divides by the union (0 when both sets are
empty), PA multiplies the two degrees, and popularity is the alter indegree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .parallel import map_ego_chunks
from .timegraph import RECOMMENDED, TimeGraph, UNKNOWN
from .util import log_bin_histogram, mean_ci

INDICATOR_NAMES = ("cn", "jaccard", "pa", "alter_indegree")


@dataclass(frozen=True)
class SelectionIndicators:
    cn: int
    jaccard: float
    pa: int
    alter_indegree: int


def _pair_index(g: TimeGraph):
    """Sorted packed (src, dst) keys with timestamps and the sort order."""
    cached = getattr(g, "_pair_index", None)
    if cached is None:
        keys = g.edge_src * g.n_nodes + g.edge_dst
        order = np.argsort(keys)
        cached = (keys[order], g.edge_ts[order], order)
        g._pair_index = cached
    return cached


def indicators_at(g: TimeGraph, i, j, t: int, strict: bool = True) -> SelectionIndicators:
    """Indicators for the pair (i, j) at time t (strictly-before by default)."""
    ii, jj = g.index_of(i), g.index_of(j)
    k_out = 0 if ii is None else g._prefix_len(g.out_indptr, g.out_ts, ii, t, strict)
    k_in = 0 if jj is None else g._prefix_len(g.in_indptr, g.in_ts, jj, t, strict)
    cn = 0
    if k_out and k_in:
        lo_a = g.out_indptr[ii]
        lo_b = g.in_indptr[jj]
        a = set(g.out_dst[lo_a:lo_a + k_out].tolist())
        b = g.in_src[lo_b:lo_b + k_in].tolist()
        cn = sum(1 for x in b if x in a)
    union = k_out + k_in - cn
    return SelectionIndicators(
        cn=cn, jaccard=cn / union if union else 0.0,
        pa=k_out * k_in, alter_indegree=k_in)


def indicators_at_addition(g: TimeGraph, ego, alter) -> SelectionIndicators:
    """Indicators evaluated at the creation instant of the edge ego->alter."""
    t = g.edge_created_at(ego, alter)
    if t is None:
        raise ValueError(f"no edge {ego!r} -> {alter!r}")
    return indicators_at(g, ego, alter, t, strict=True)


def _selection_chunk(g: TimeGraph, ego_indices, min_degree=1):
    pair_keys, pair_ts, _ = _pair_index(g)
    n_total = g.n_nodes
    n_edges_total = len(pair_keys)
    out = {name: [] for name in
           ("ego", "alter", "n", "t", "origin", "cn", "jaccard", "pa", "alter_indegree")}
    for ego in ego_indices.tolist():
        lo, hi = g.out_indptr[ego], g.out_indptr[ego + 1]
        k = hi - lo
        if k < min_degree:
            continue
        alters = g.out_dst[lo:hi]
        join_ts = g.out_ts[lo:hi]
        origins = g.edge_origin[g.out_seq[lo:hi]]
        alters_list = alters.tolist()
        ts_list = join_ts.tolist()
        join_time = {}
        for pos, (jj, t) in enumerate(zip(alters_list, ts_list)):
            k_out = int(np.searchsorted(join_ts, t, side="left"))
            jlo = g.in_indptr[jj]
            p = g._prefix_len(g.in_indptr, g.in_ts, jj, t, strict=True)
            cn = 0
            if p and k_out:
                if p <= k_out:
                    for x in g.in_src[jlo:jlo + p].tolist():
                        jt = join_time.get(x)
                        if jt is not None and jt < t:
                            cn += 1
                else:
                    keys = alters[:k_out].astype(np.int64) * n_total + jj
                    posq = np.searchsorted(pair_keys, keys)
                    posq[posq >= n_edges_total] = 0
                    hitmask = (pair_keys[posq] == keys) & (pair_ts[posq] < t)
                    cn = int(hitmask.sum())
            union = k_out + p - cn
            out["ego"].append(ego)
            out["alter"].append(jj)
            out["n"].append(pos + 1)
            out["t"].append(t)
            out["origin"].append(origins[pos])
            out["cn"].append(cn)
            out["jaccard"].append(cn / union if union else 0.0)
            out["pa"].append(k_out * p)
            out["alter_indegree"].append(p)
            join_time[jj] = t
    dtypes = {"jaccard": np.float64, "origin": np.int8}
    return {name: np.asarray(vals, dtype=dtypes.get(name, np.int64))
            for name, vals in out.items()}


def selection_table(g: TimeGraph, ego_indices=None, workers: int = 1):
    """Indicator row per (ego, n-th addition) over the whole graph.

    Returns a dict of aligned numpy arrays: ego, alter (node indices), n,
    t, origin code, cn, jaccard, pa, alter_indegree.
    """
    if ego_indices is None:
        degrees = g.out_indptr[1:] - g.out_indptr[:-1]
        ego_indices = np.flatnonzero(degrees >= 1)
    _pair_index(g)  # build before forking so workers share it
    chunks = map_ego_chunks(g, _selection_chunk, ego_indices, workers=workers)
    return {name: np.concatenate([c[name] for c in chunks]) for name in chunks[0]}


def indicator_profile(g: TimeGraph, metric: str, n_max: int,
                      cohort: str = "all", split_by_origin: bool = False,
                      table=None, workers: int = 1):
    """Per-n mean and 95% CI of one indicator, optionally split by origin.

    Unknown-origin additions fall into the spontaneous bucket. Rows are
    (n, origin, mean, ci_half, count) with origin 'all' when not splitting;
    empty cells are omitted.
    """
    if metric not in INDICATOR_NAMES:
        raise ValueError(f"unknown indicator {metric!r}")
    if table is None:
        table = selection_table(g, workers=workers)
    mask = table["n"] <= n_max
    if cohort == "reached_n_max":
        degrees = g.out_indptr[1:] - g.out_indptr[:-1]
        mask &= degrees[table["ego"]] >= n_max
        if not mask.any():
            raise ValueError(f"empty cohort for n_max={n_max}")
    elif cohort != "all":
        raise ValueError(f"unknown cohort {cohort!r}")
    values = table[metric][mask]
    ns = table["n"][mask]
    rec = table["origin"][mask] == RECOMMENDED
    rows = []
    if split_by_origin:
        groups = [("spontaneous", ~rec), ("recommended", rec)]
    else:
        groups = [("all", np.ones(len(ns), dtype=bool))]
    for name, gmask in groups:
        gn = ns[gmask]
        gv = values[gmask]
        for n in np.unique(gn).tolist():
            sel = gv[gn == n]
            mean, half = mean_ci(sel)
            rows.append((int(n), name, mean, half, int(sel.size)))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def indicator_distributions(g: TimeGraph, table=None, workers: int = 1):
    """Log-binned histograms of each indicator, split by origin bucket."""
    if table is None:
        table = selection_table(g, workers=workers)
    rec = table["origin"] == RECOMMENDED
    out = {}
    for metric in INDICATOR_NAMES:
        out[metric] = {
            "spontaneous": log_bin_histogram(table[metric][~rec]),
            "recommended": log_bin_histogram(table[metric][rec]),
        }
    return out


def origin_counts(table) -> dict:
    """Report-level counts; unknown tracked separately from the split."""
    origin = table["origin"]
    return {
        "recommended": int((origin == RECOMMENDED).sum()),
        "unknown": int((origin == UNKNOWN).sum()),
        "spontaneous_bucket": int((origin != RECOMMENDED).sum()),
    }
