"""Immutable time graph over timestamped directed follow events.

Edges are deduplicated so that a pair (src, dst) exists from the earliest
time src ever followed dst; snapshot queries answer "the graph as of time t"
exactly. All query methods are pure and safe to call from multiple threads
or forked workers once the graph is built.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Iterator

import numpy as np

SPONTANEOUS = 0
RECOMMENDED = 1
UNKNOWN = 2

ORIGIN_NAMES = ("spontaneous", "recommended", "unknown")

_ORIGIN_PARSE = {
    "s": SPONTANEOUS,
    "r": RECOMMENDED,
    "": UNKNOWN,
    "spontaneous": SPONTANEOUS,
    "recommended": RECOMMENDED,
    "unknown": UNKNOWN,
    None: UNKNOWN,
    SPONTANEOUS: SPONTANEOUS,
    RECOMMENDED: RECOMMENDED,
    UNKNOWN: UNKNOWN,
}

SECONDS_PER_DAY = 86400


class ParseError(ValueError):
    """Malformed input record; carries the 1-based record number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def parse_origin(value) -> int:
    try:
        return _ORIGIN_PARSE[value]
    except (KeyError, TypeError):
        raise ParseError(f"unknown origin value {value!r}") from None


@dataclass(frozen=True)
class EdgeRecord:
    """One deduplicated directed follow event."""

    src: object
    dst: object
    created_at: int
    origin: str
    seq: int


@dataclass(frozen=True)
class LoadReport:
    """Ingestion accounting; n_records = n_edges + n_duplicates + n_self_loops."""

    n_records: int
    n_edges: int
    n_duplicates: int
    n_self_loops: int
    n_nodes: int
    n_missing_registration: int


@dataclass(frozen=True)
class DegreeStats:
    n_nodes: int
    n_edges: int
    mean_in: float | None
    mean_out: float | None
    in_hist: list
    out_hist: list
    n_zero_in: int
    n_zero_out: int


@dataclass(frozen=True)
class DailyCounts:
    day: int  # UTC epoch day
    date: str
    links: int
    triangle_closing: int
    recommended: int


class TimeGraph:
    """Indexed snapshot-queryable multigraph; immutable after construction.

    Internal layout (node indices are positions in the sorted id universe):

    - ``edge_src/edge_dst/edge_ts/edge_origin``: canonical edge arrays sorted
      by (created_at, src, dst); position in these arrays is the edge's seq.
    - ``out_indptr/out_dst/out_ts/out_seq``: CSR out-adjacency, rows sorted
      by (created_at, seq); ``in_*`` is the symmetric in-adjacency.
    - ``reg_time``: registration seconds per node, -1 where unknown;
      ``reg_defaulted`` marks nodes whose value came from their first
      outgoing edge rather than the node table.
    """

    def __init__(self):
        raise TypeError("use TimeGraph.from_records or TimeGraph.from_arrays")

    # -- construction -------------------------------------------------

    @classmethod
    def from_records(cls, edges: Iterable, nodes: Iterable | None = None,
                     dedup: bool = True) -> "TimeGraph":
        """Build from an iterable of (src, dst, created_at[, origin]) records.

        ``nodes`` is an optional iterable of (node, registered_at). Records
        may also be EdgeRecord instances (seq is ignored on input).
        """
        srcs, dsts, tss, origins = [], [], [], []
        for lineno, rec in enumerate(edges, start=1):
            if isinstance(rec, EdgeRecord):
                rec = (rec.src, rec.dst, rec.created_at, rec.origin)
            if len(rec) == 3:
                src, dst, ts = rec
                origin = UNKNOWN
            elif len(rec) == 4:
                src, dst, ts, raw = rec
                origin = parse_origin(raw)
            else:
                raise ParseError(f"expected 3 or 4 fields, got {len(rec)}", lineno)
            try:
                ts = int(ts)
            except (TypeError, ValueError):
                raise ParseError(f"bad timestamp {ts!r}", lineno) from None
            srcs.append(src)
            dsts.append(dst)
            tss.append(ts)
            origins.append(origin)

        node_ids = node_reg = None
        if nodes is not None:
            node_ids, node_reg = [], []
            for lineno, rec in enumerate(nodes, start=1):
                node, reg = rec
                try:
                    node_reg.append(int(reg))
                except (TypeError, ValueError):
                    raise ParseError(f"bad registration time {reg!r}", lineno) from None
                node_ids.append(node)

        return cls.from_arrays(
            np.asarray(srcs, dtype=object), np.asarray(dsts, dtype=object),
            np.asarray(tss, dtype=np.int64), np.asarray(origins, dtype=np.int8),
            node_ids=None if node_ids is None else np.asarray(node_ids, dtype=object),
            node_reg=None if node_reg is None else np.asarray(node_reg, dtype=np.int64),
            dedup=dedup)

    @classmethod
    def from_arrays(cls, src, dst, ts, origin=None, node_ids=None, node_reg=None,
                    dedup: bool = True) -> "TimeGraph":
        src = np.asarray(src)
        dst = np.asarray(dst)
        ts = np.asarray(ts, dtype=np.int64)
        n_records = len(src)
        if origin is None:
            origin = np.full(n_records, UNKNOWN, dtype=np.int8)
        else:
            origin = np.asarray(origin, dtype=np.int8)
        if not (len(dst) == len(ts) == len(origin) == n_records):
            raise ValueError("edge arrays must have equal length")
        if n_records and ts.min() < 0:
            raise ParseError("negative timestamp in edge stream")

        keep = src != dst
        n_self_loops = int(n_records - keep.sum())
        if n_self_loops:
            src, dst, ts, origin = src[keep], dst[keep], ts[keep], origin[keep]

        parts = [src, dst]
        if node_ids is not None:
            parts.append(np.asarray(node_ids))
        universe = np.concatenate(parts)
        if universe.dtype.kind in "OUS":
            # hash-based factorization; avoids per-element python comparisons
            import pandas as pd

            codes, uniques = pd.factorize(universe)
            order = np.argsort(uniques, kind="stable")
            ids = uniques[order]
            rank = np.empty(len(uniques), dtype=np.int64)
            rank[order] = np.arange(len(uniques))
            mapped = rank[codes] if len(codes) else codes.astype(np.int64)
        else:
            ids, mapped = np.unique(universe, return_inverse=True)
        n = len(ids)
        m = len(src)
        src_idx = mapped[:m].astype(np.int64)
        dst_idx = mapped[m:2 * m].astype(np.int64)

        # collapse repeat follows of the same pair to the earliest timestamp
        n_dup = 0
        if len(src_idx):
            pair = src_idx.astype(np.int64) * n + dst_idx
            order = np.lexsort((origin, ts, pair))
            pair_sorted = pair[order]
            first = np.ones(len(order), dtype=bool)
            first[1:] = pair_sorted[1:] != pair_sorted[:-1]
            n_dup = int(len(order) - first.sum())
            if n_dup and not dedup:
                raise ValueError(f"{n_dup} duplicate (src, dst) records with dedup disabled")
            keep_idx = order[first]
            src_idx, dst_idx = src_idx[keep_idx], dst_idx[keep_idx]
            ts, origin = ts[keep_idx], origin[keep_idx]

        # canonical total order: (created_at, src, dst); position becomes seq
        if len(src_idx):
            order = np.lexsort((dst_idx, src_idx, ts))
            src_idx, dst_idx = src_idx[order], dst_idx[order]
            ts, origin = ts[order], origin[order]

        g = object.__new__(cls)
        g.node_ids = ids
        g._id_to_idx = {node: i for i, node in enumerate(ids.tolist())}
        g.edge_src = src_idx.astype(np.int64)
        g.edge_dst = dst_idx.astype(np.int64)
        g.edge_ts = ts
        g.edge_origin = origin
        g._build_adjacency()
        g._build_registration(node_ids, node_reg)
        g.load_report = LoadReport(
            n_records=n_records, n_edges=g.n_edges, n_duplicates=n_dup,
            n_self_loops=n_self_loops, n_nodes=n,
            n_missing_registration=int(np.sum(g.reg_time < 0)))
        return g

    def _build_adjacency(self) -> None:
        n, e = len(self.node_ids), len(self.edge_src)
        seq = np.arange(e, dtype=np.int64)
        out_order = np.argsort(self.edge_src, kind="stable")
        self.out_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.edge_src, minlength=n), out=self.out_indptr[1:])
        self.out_dst = self.edge_dst[out_order]
        self.out_ts = self.edge_ts[out_order]
        self.out_seq = seq[out_order]
        in_order = np.argsort(self.edge_dst, kind="stable")
        self.in_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.edge_dst, minlength=n), out=self.in_indptr[1:])
        self.in_src = self.edge_src[in_order]
        self.in_ts = self.edge_ts[in_order]
        self.in_seq = seq[in_order]

    def _build_registration(self, node_ids, node_reg) -> None:
        n = len(self.node_ids)
        reg = np.full(n, -1, dtype=np.int64)
        defaulted = np.ones(n, dtype=bool)
        if node_ids is not None:
            idx = np.fromiter((self._id_to_idx[v] for v in np.asarray(node_ids).tolist()),
                              dtype=np.int64, count=len(node_ids))
            reg[idx] = node_reg
            defaulted[idx] = False
        has_out = self.out_indptr[1:] > self.out_indptr[:-1]
        first_out = np.full(n, -1, dtype=np.int64)
        first_out[has_out] = self.out_ts[self.out_indptr[:-1][has_out]]
        bad = has_out & (reg >= 0) & (reg > first_out)
        if bad.any():
            node = self.node_ids[int(np.flatnonzero(bad)[0])]
            raise ValueError(
                f"node {node!r} registered after its first outgoing edge")
        fill = (reg < 0) & has_out
        reg[fill] = first_out[fill]
        self.reg_time = reg
        self.reg_defaulted = defaulted

    # -- basic accessors ----------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_src)

    def index_of(self, node) -> int | None:
        return self._id_to_idx.get(node)

    def id_of(self, idx: int):
        return self.node_ids[idx]

    def registered_at(self, node) -> int | None:
        idx = self._id_to_idx.get(node)
        if idx is None or self.reg_time[idx] < 0:
            return None
        return int(self.reg_time[idx])

    def registration_defaulted(self, node) -> bool:
        idx = self._id_to_idx.get(node)
        return True if idx is None else bool(self.reg_defaulted[idx])

    def records(self) -> Iterator[EdgeRecord]:
        ids = self.node_ids
        for seq in range(self.n_edges):
            yield EdgeRecord(
                src=ids[self.edge_src[seq]], dst=ids[self.edge_dst[seq]],
                created_at=int(self.edge_ts[seq]),
                origin=ORIGIN_NAMES[self.edge_origin[seq]], seq=seq)

    def edge_created_at(self, src, dst) -> int | None:
        """Creation time of the (deduplicated) edge src->dst, or None."""
        i, j = self._id_to_idx.get(src), self._id_to_idx.get(dst)
        if i is None or j is None:
            return None
        lo, hi = self.out_indptr[i], self.out_indptr[i + 1]
        pos = np.flatnonzero(self.out_dst[lo:hi] == j)
        if len(pos) == 0:
            return None
        return int(self.out_ts[lo + pos[0]])

    # -- snapshot queries ----------------------------------------------

    def _prefix_len(self, indptr, tsarr, idx: int, t: int, strict: bool) -> int:
        lo, hi = indptr[idx], indptr[idx + 1]
        side = "left" if strict else "right"
        return int(np.searchsorted(tsarr[lo:hi], t, side=side))

    def out_neighbors_at(self, node, t: int, strict: bool = False) -> set:
        """Exactly { j : (node, j) exists with created_at <= t } (< t if strict)."""
        idx = self._id_to_idx.get(node)
        if idx is None:
            return set()
        lo = self.out_indptr[idx]
        k = self._prefix_len(self.out_indptr, self.out_ts, idx, t, strict)
        return set(self.node_ids[self.out_dst[lo:lo + k]].tolist())

    def in_neighbors_at(self, node, t: int, strict: bool = False) -> set:
        idx = self._id_to_idx.get(node)
        if idx is None:
            return set()
        lo = self.in_indptr[idx]
        k = self._prefix_len(self.in_indptr, self.in_ts, idx, t, strict)
        return set(self.node_ids[self.in_src[lo:lo + k]].tolist())

    def degree_at(self, node, t: int, direction: str = "out", strict: bool = False) -> int:
        idx = self._id_to_idx.get(node)
        if idx is None:
            return 0
        if direction == "out":
            return self._prefix_len(self.out_indptr, self.out_ts, idx, t, strict)
        if direction == "in":
            return self._prefix_len(self.in_indptr, self.in_ts, idx, t, strict)
        raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")

    def closes_directed_triangle(self, i, j, t: int) -> bool:
        """True iff some l had i->l and l->j strictly before t."""
        if i == j:
            raise ValueError("triangle closure is undefined for i == j")
        ii, jj = self._id_to_idx.get(i), self._id_to_idx.get(j)
        if ii is None or jj is None:
            return False
        return self._closes_triangle_idx(ii, jj, t)

    def _closes_triangle_idx(self, ii: int, jj: int, t: int) -> bool:
        ka = self._prefix_len(self.out_indptr, self.out_ts, ii, t, strict=True)
        if ka == 0:
            return False
        kb = self._prefix_len(self.in_indptr, self.in_ts, jj, t, strict=True)
        if kb == 0:
            return False
        lo_a = self.out_indptr[ii]
        lo_b = self.in_indptr[jj]
        a = self.out_dst[lo_a:lo_a + ka]
        b = self.in_src[lo_b:lo_b + kb]
        if ka > kb:
            a, b = b, a
        return not set(a.tolist()).isdisjoint(b.tolist())

    def degrees_at(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """(in_degree, out_degree) arrays over all node indices at time t."""
        mask = self.edge_ts <= t
        out = np.bincount(self.edge_src[mask], minlength=self.n_nodes)
        ind = np.bincount(self.edge_dst[mask], minlength=self.n_nodes)
        return ind, out


def degree_stats(g: TimeGraph, t: int | None = None) -> DegreeStats:
    """Log-binned in/out degree histograms and exact means at time t."""
    if t is None:
        t = int(g.edge_ts[-1]) if g.n_edges else 0
    ind, out = g.degrees_at(t)
    n_edges = int(out.sum())
    if g.n_nodes == 0:
        return DegreeStats(0, 0, None, None, [], [], 0, 0)
    mean = n_edges / g.n_nodes
    from .util import log_bin_histogram

    return DegreeStats(
        n_nodes=g.n_nodes, n_edges=n_edges, mean_in=mean, mean_out=mean,
        in_hist=log_bin_histogram(ind), out_hist=log_bin_histogram(out),
        n_zero_in=int(np.sum(ind == 0)), n_zero_out=int(np.sum(out == 0)))


def daily_timeline(g: TimeGraph) -> list[DailyCounts]:
    """Per-UTC-day counts of all, triangle-closing, and recommended links.

    Triangle closure is evaluated at each edge's own creation time (strictly
    earlier edges only). Quadratic in neighborhood sizes; intended for
    desk-scale graphs, not the hot pipeline.
    """
    if g.n_edges == 0:
        return []
    days = g.edge_ts // SECONDS_PER_DAY
    first, last = int(days[0]), int(days.max())
    n_days = last - first + 1
    links = np.bincount(days - first, minlength=n_days)
    rec = np.bincount((days - first)[g.edge_origin == RECOMMENDED], minlength=n_days)
    tri = np.zeros(n_days, dtype=np.int64)
    for seq in range(g.n_edges):
        if g._closes_triangle_idx(int(g.edge_src[seq]), int(g.edge_dst[seq]),
                                  int(g.edge_ts[seq])):
            tri[days[seq] - first] += 1
    out = []
    for d in range(n_days):
        date = datetime.fromtimestamp((first + d) * SECONDS_PER_DAY, tz=timezone.utc)
        out.append(DailyCounts(day=first + d, date=date.strftime("%Y-%m-%d"),
                               links=int(links[d]), triangle_closing=int(tri[d]),
                               recommended=int(rec[d])))
    return out
