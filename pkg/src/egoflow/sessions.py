"""Link-creation sessions (batches), heavy-tail fits, early-life concentration.

A batch is a maximal run of one ego's additions where no inter-event gap
reaches the timeout (default 25 minutes); a gap equal to the timeout splits.
Batch sizes and interarrival times are fitted with the discrete power-law
maximum-likelihood estimator (solving the Hurwitz-zeta likelihood equation
numerically), selecting x_min by Kolmogorov-Smirnov distance against the
zeta model when not fixed. The familiar closed form
1 + n / sum(ln(x / (x_min - 1/2))) seeds the solver but is too biased at
small cutoffs to serve as the estimate itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import zeta

from .parallel import map_ego_chunks
from .timegraph import RECOMMENDED, SECONDS_PER_DAY, TimeGraph
from .util import log_bin_histogram, mean_ci

DEFAULT_TIMEOUT = 1500  # seconds; 25 minutes
MIN_TAIL = 50


@dataclass(frozen=True)
class Batch:
    ego: object
    batch_index: int  # 1-based ordinal within the ego
    start: int
    end: int
    size: int
    contains_recommended: bool
    tau_hours: float | None  # gap from this batch's end to the next start


@dataclass(frozen=True)
class PowerLawFit:
    gamma: float
    x_min: float
    n_tail: int
    ks: float
    method: str = "discrete"
    x_max: float | None = None


def _batch_bounds(ts: np.ndarray, timeout: int) -> np.ndarray:
    """Start offsets of each batch within a sorted event-time array."""
    if len(ts) == 0:
        return np.zeros(0, dtype=np.int64)
    splits = np.flatnonzero(np.diff(ts) >= timeout) + 1
    return np.concatenate(([0], splits))


def sessionize(events, timeout: int = DEFAULT_TIMEOUT, origins=None,
               ego=None) -> list[Batch]:
    """Split one ego's sorted addition timestamps into batches."""
    ts = np.asarray(events, dtype=np.int64)
    if len(ts) == 0:
        return []
    if np.any(np.diff(ts) < 0):
        raise ValueError("events must be sorted")
    rec = None
    if origins is not None:
        rec = np.asarray(origins) == RECOMMENDED
    starts = _batch_bounds(ts, timeout)
    ends = np.concatenate((starts[1:], [len(ts)]))
    batches = []
    for b, (i, j) in enumerate(zip(starts.tolist(), ends.tolist())):
        tau = None
        if b + 1 < len(starts):
            tau = (int(ts[starts[b + 1]]) - int(ts[j - 1])) / 3600.0
        batches.append(Batch(
            ego=ego, batch_index=b + 1, start=int(ts[i]), end=int(ts[j - 1]),
            size=j - i, contains_recommended=bool(rec[i:j].any()) if rec is not None else False,
            tau_hours=tau))
    return batches


def _sessions_chunk(g: TimeGraph, ego_indices, timeout=DEFAULT_TIMEOUT):
    cols = {name: [] for name in ("ego", "batch_index", "start", "end", "size",
                                  "contains_recommended", "tau_hours")}
    for ego in ego_indices.tolist():
        lo, hi = g.out_indptr[ego], g.out_indptr[ego + 1]
        if hi == lo:
            continue
        ts = g.out_ts[lo:hi]
        rec = g.edge_origin[g.out_seq[lo:hi]] == RECOMMENDED
        starts = _batch_bounds(ts, timeout)
        ends = np.concatenate((starts[1:], [hi - lo]))
        n_b = len(starts)
        cols["ego"].extend([ego] * n_b)
        cols["batch_index"].extend(range(1, n_b + 1))
        cols["start"].extend(ts[starts].tolist())
        last = ts[ends - 1]
        cols["end"].extend(last.tolist())
        cols["size"].extend((ends - starts).tolist())
        cols["contains_recommended"].extend(
            np.logical_or.reduceat(rec, starts).tolist() if rec.any()
            else [False] * n_b)
        tau = np.full(n_b, np.nan)
        if n_b > 1:
            tau[:-1] = (ts[starts[1:]] - last[:-1]) / 3600.0
        cols["tau_hours"].extend(tau.tolist())
    dtypes = {"contains_recommended": bool, "tau_hours": np.float64}
    return {k: np.asarray(v, dtype=dtypes.get(k, np.int64)) for k, v in cols.items()}


def sessions_table(g: TimeGraph, timeout: int = DEFAULT_TIMEOUT, workers: int = 1):
    """Batch table over all egos as aligned arrays (tau_hours NaN on last)."""
    degrees = g.out_indptr[1:] - g.out_indptr[:-1]
    egos = np.flatnonzero(degrees >= 1)
    chunks = map_ego_chunks(g, _sessions_chunk, egos, workers=workers,
                            timeout=timeout)
    return {k: np.concatenate([c[k] for c in chunks]) for k in chunks[0]}


# -- power-law fitting --------------------------------------------------


def _discrete_ks(tail_sorted: np.ndarray, gamma: float, x_min: int) -> float:
    values, counts = np.unique(tail_sorted, return_counts=True)
    ecdf = np.cumsum(counts) / len(tail_sorted)
    norm = zeta(gamma, x_min)
    model = 1.0 - zeta(gamma, values + 1) / norm
    return float(np.abs(ecdf - model).max())


def _discrete_mle(tail: np.ndarray, x_min: float) -> float:
    """Exact discrete power-law MLE: d/dgamma ln zeta(gamma, x_min) = -mean ln x."""
    target = -float(np.log(tail).mean())
    h = 1e-6

    def balance(gamma: float) -> float:
        dz = (math.log(zeta(gamma + h, x_min)) - math.log(zeta(gamma - h, x_min))) / (2 * h)
        return dz - target

    # closed-form approximation seeds the bracket and serves as a fallback
    # in pathological corners (it is biased low for small x_min)
    approx = 1.0 + len(tail) / float(np.log(tail / (x_min - 0.5)).sum())
    lo = 1.0 + 1e-4
    try:
        if balance(lo) >= 0:
            return lo
        hi = max(2.0, approx + 1.0)
        for _ in range(60):
            b = balance(hi)
            if not math.isfinite(b):
                break
            if b >= 0:
                return float(brentq(balance, lo, hi, xtol=1e-9))
            hi = 1.0 + (hi - 1.0) * 2.0
    except (ValueError, OverflowError):
        pass
    return approx


def fit_power_law(samples, x_min="auto", method: str = "discrete") -> PowerLawFit:
    """Tail exponent of P(x) ~ x^-gamma by maximum likelihood.

    samples: positive values; integers for the discrete method. x_min is a
    fixed lower cutoff or 'auto' for KS-distance minimization over candidate
    cutoffs. The tail must keep at least 50 samples and more than one
    distinct value.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    if len(x) and x[0] <= 0:
        raise ValueError("samples must be positive")
    if method not in ("discrete", "continuous"):
        raise ValueError(f"unknown method {method!r}")

    def fit_at(cutoff: float):
        tail = x[x >= cutoff]
        n = len(tail)
        if n < MIN_TAIL:
            raise ValueError(f"tail at x_min={cutoff} keeps {n} < {MIN_TAIL} samples")
        if tail[0] == tail[-1]:
            raise ValueError("degenerate support: all tail samples equal")
        if method == "discrete":
            gamma = _discrete_mle(tail, cutoff)
            ks = _discrete_ks(tail.astype(np.int64), gamma, int(cutoff))
        else:
            gamma = 1.0 + n / np.log(tail / cutoff).sum()
            ecdf = np.arange(1, n + 1) / n
            model = 1.0 - (tail / cutoff) ** (1.0 - gamma)
            ks = float(np.abs(ecdf - model).max())
        return gamma, n, ks

    if x_min != "auto":
        cutoff = float(x_min)
        gamma, n, ks = fit_at(cutoff)
        return PowerLawFit(gamma=gamma, x_min=cutoff, n_tail=n, ks=ks,
                           method=method, x_max=float(x[-1]))

    candidates = np.unique(x)
    best = None
    for cutoff in candidates.tolist():
        if len(x) - np.searchsorted(x, cutoff) < MIN_TAIL:
            break
        try:
            gamma, n, ks = fit_at(cutoff)
        except ValueError:
            continue
        if best is None or ks < best[2]:
            best = (gamma, n, ks, cutoff)
    if best is None:
        raise ValueError(f"degenerate support: no cutoff keeps a usable tail "
                         f"(need {MIN_TAIL} samples and more than one distinct value)")
    gamma, n, ks, cutoff = best
    return PowerLawFit(gamma=gamma, x_min=float(cutoff), n_tail=n, ks=ks,
                       method=method, x_max=float(x[-1]))


# -- summaries ----------------------------------------------------------


@dataclass(frozen=True)
class BatchStats:
    n_batches: int
    mean_size: float
    size_ci: float
    median_tau_hours: float | None
    size_hist: list
    tau_hist: list


@dataclass(frozen=True)
class BatchSummary:
    overall: BatchStats
    recommended: BatchStats | None


def _stats(sizes, taus) -> BatchStats:
    mean, half = mean_ci(sizes)
    taus = taus[~np.isnan(taus)]
    return BatchStats(
        n_batches=int(len(sizes)), mean_size=mean, size_ci=half,
        median_tau_hours=float(np.median(taus)) if len(taus) else None,
        size_hist=log_bin_histogram(sizes), tau_hist=log_bin_histogram(taus))


def batch_summary(table, by_recommended: bool = True) -> BatchSummary:
    """Size/interarrival summary, with the recommended-batch restriction."""
    sizes = table["size"]
    taus = table["tau_hours"]
    if len(sizes) == 0:
        raise ValueError("no batches")
    rec = None
    if by_recommended:
        mask = table["contains_recommended"]
        if mask.any():
            # interarrival restricted to consecutive recommended batches:
            # keep the gap after batch b only if b+1 (same ego) is also flagged
            same_ego = np.zeros(len(sizes), dtype=bool)
            same_ego[:-1] = table["ego"][1:] == table["ego"][:-1]
            next_rec = np.zeros(len(sizes), dtype=bool)
            next_rec[:-1] = mask[1:]
            tau_keep = taus.copy()
            tau_keep[~(mask & same_ego & next_rec)] = np.nan
            rec = _stats(sizes[mask], tau_keep[mask])
    return BatchSummary(overall=_stats(sizes, taus), recommended=rec)


def batch_size_vs_time(table, axis: str = "batch_index", g: TimeGraph | None = None,
                       recommended_only: bool = False):
    """Mean batch size against batch ordinal or ego age in days.

    Returns rows (x, mean_size, ci_half, count) for non-empty x cells.
    """
    sizes = table["size"]
    if axis == "batch_index":
        xs = table["batch_index"]
    elif axis == "ego_age_days":
        if g is None:
            raise ValueError("ego_age_days axis needs the graph for registration times")
        reg = g.reg_time[table["ego"]]
        xs = (table["start"] - reg) // SECONDS_PER_DAY
    else:
        raise ValueError(f"unknown axis {axis!r}")
    if recommended_only:
        keep = table["contains_recommended"]
        xs, sizes = xs[keep], sizes[keep]
    rows = []
    for x in np.unique(xs).tolist():
        sel = sizes[xs == x]
        mean, half = mean_ci(sel)
        rows.append((int(x), mean, half, int(sel.size)))
    return rows


def early_life_fraction(g: TimeGraph, window_days: int = 100,
                        min_lifespan_days: int = 180):
    """Mean cumulative fraction of final size created by each early-life day.

    Only egos whose link activity spans at least min_lifespan_days qualify;
    day 0 starts at the ego's registration. Returns (days, mean_fraction,
    n_egos) where days runs 0..window_days inclusive.
    """
    degrees = g.out_indptr[1:] - g.out_indptr[:-1]
    window = int(window_days)
    acc = np.zeros(window + 1)
    n_egos = 0
    span_min = min_lifespan_days * SECONDS_PER_DAY
    for ego in np.flatnonzero(degrees >= 1).tolist():
        lo, hi = g.out_indptr[ego], g.out_indptr[ego + 1]
        ts = g.out_ts[lo:hi]
        if int(ts[-1] - ts[0]) < span_min:
            continue
        days = (ts - g.reg_time[ego]) // SECONDS_PER_DAY
        early = days[days <= window]
        cum = np.cumsum(np.bincount(early, minlength=window + 1))
        acc += cum / (hi - lo)
        n_egos += 1
    if n_egos == 0:
        raise ValueError(f"no egos with activity spanning {min_lifespan_days} days")
    return np.arange(window + 1), acc / n_egos, n_egos
