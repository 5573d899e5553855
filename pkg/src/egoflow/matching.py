"""Matched-cohort experiment: does a recommended next link diversify contacts?

Egos are grouped when their first k neighbors are identical and in the same
order and their registrations fall inside a 30-day span (greedy bucketing on
sorted registration times approximates the pairwise rule). Each group splits
into a treatment arm (the (k+1)-st link was recommended) and a control arm;
the diversity of the contacts chosen at the evaluation step is compared via
normalized Shannon entropy, averaged over groups.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .selection import indicators_at
from .timegraph import RECOMMENDED, SECONDS_PER_DAY, TimeGraph
from .util import mean_ci, rng_for

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_DAYS = 30
DEFAULT_MIN_ARM = 5


def entropy_bits(bag) -> float:
    """Unnormalized Shannon entropy of a bag of ids, in bits."""
    n = len(bag)
    counts: dict = {}
    for x in bag:
        counts[x] = counts.get(x, 0) + 1
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def normalized_entropy(bag) -> float:
    """Shannon entropy over log2(bag size), in [0, 1]; needs at least 2 items."""
    n = len(bag)
    if n < 2:
        raise ValueError("undefined normalization for bags smaller than 2")
    return entropy_bits(bag) / math.log2(n)


@dataclass(frozen=True)
class MatchingGroup:
    k: int
    prefix: tuple  # ordered first-k neighbor ids
    bucket: int  # registration bucket ordinal within the prefix group
    treatment: tuple  # ego ids whose (k+1)-st link was recommended
    control: tuple


@dataclass(frozen=True)
class EntropyReport:
    k: int
    n_groups: int
    mean_entropy_treatment: float
    mean_entropy_control: float
    ci_treatment: float
    ci_control: float
    n_skipped_small_bags: int
    options: dict = field(default_factory=dict)


def build_groups(g: TimeGraph, k: int, window_days: int = DEFAULT_WINDOW_DAYS):
    """Matching groups for prefix length k.

    Only egos with more than k links participate. Within each identical
    ordered k-prefix, egos are sorted by registration time and cut into
    buckets whenever the span from the bucket's first ego reaches the
    window, so any two members registered less than `window_days` apart.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    degrees = g.out_indptr[1:] - g.out_indptr[:-1]
    by_prefix: dict = {}
    for ego_idx in np.flatnonzero(degrees >= k + 1).tolist():
        lo = g.out_indptr[ego_idx]
        prefix = tuple(g.node_ids[g.out_dst[lo:lo + k]].tolist())
        treated = bool(g.edge_origin[g.out_seq[lo + k]] == RECOMMENDED)
        reg = int(g.reg_time[ego_idx])
        by_prefix.setdefault(prefix, []).append((reg, g.id_of(ego_idx), treated))
    window = window_days * SECONDS_PER_DAY
    groups = []
    for prefix in sorted(by_prefix):
        members = sorted(by_prefix[prefix])
        bucket, start_reg, bucket_id = [], None, 0
        for entry in members + [None]:
            if entry is None or (start_reg is not None and entry[0] - start_reg >= window):
                if bucket:
                    treatment = tuple(e for _, e, t in bucket if t)
                    control = tuple(e for _, e, t in bucket if not t)
                    groups.append(MatchingGroup(k=k, prefix=prefix, bucket=bucket_id,
                                                treatment=treatment, control=control))
                    bucket_id += 1
                bucket, start_reg = [], None
                if entry is None:
                    break
            if start_reg is None:
                start_reg = entry[0]
            bucket.append(entry)
    return groups


def _eval_contact(g: TimeGraph, ego, step_index: int):
    """The id of the ego's step_index-th (0-based) added neighbor, or None."""
    idx = g.index_of(ego)
    lo, hi = g.out_indptr[idx], g.out_indptr[idx + 1]
    if hi - lo <= step_index:
        return None
    return g.node_ids[g.out_dst[lo + step_index]]


def _treatment_passes_filter(g: TimeGraph, ego, k: int, mode: str) -> bool:
    if mode == "any":
        return True
    idx = g.index_of(ego)
    lo = g.out_indptr[idx]
    alter = g.node_ids[g.out_dst[lo + k]]
    t = int(g.out_ts[lo + k])
    cn = indicators_at(g, ego, alter, t, strict=True).cn
    return cn >= 1 if mode == "has_cn" else cn == 0


def run_experiment(g: TimeGraph, k_range=(1, 5), m: int = DEFAULT_MIN_ARM,
                   window_days: int = DEFAULT_WINDOW_DAYS,
                   eval_step: str = "k+1", downsample: bool = False,
                   treatment_filter: str = "any", seed: int = 0,
                   groups_by_k: dict | None = None) -> dict:
    """Entropy comparison per k; returns {k: EntropyReport} for usable k.

    eval_step 'k+1' compares the contacts chosen at the split step itself,
    'k+2' the following one. With downsample the larger arm is randomly
    reduced to the smaller arm's size (seeded per group). treatment_filter
    'has_cn'/'no_cn' keeps only treated egos whose recommended contact had
    (or lacked) a common neighbor with them when the link was made.
    """
    if eval_step not in ("k+1", "k+2"):
        raise ValueError(f"unknown eval_step {eval_step!r}")
    if treatment_filter not in ("any", "has_cn", "no_cn"):
        raise ValueError(f"unknown treatment_filter {treatment_filter!r}")
    options = {"m": m, "window_days": window_days, "eval_step": eval_step,
               "downsample": downsample, "treatment_filter": treatment_filter,
               "seed": seed}
    reports = {}
    for k in range(k_range[0], k_range[1] + 1):
        groups = groups_by_k.get(k) if groups_by_k else build_groups(g, k, window_days)
        offset = k if eval_step == "k+1" else k + 1
        ent_t, ent_c = [], []
        n_skipped = 0
        for g_index, group in enumerate(groups or []):
            treatment = [e for e in group.treatment
                         if _treatment_passes_filter(g, e, k, treatment_filter)]
            control = list(group.control)
            if min(len(treatment), len(control)) < m:
                continue
            if downsample:
                rng = rng_for(seed, k, g_index)
                size = min(len(treatment), len(control))
                if len(treatment) > size:
                    treatment = [treatment[i] for i in
                                 sorted(rng.choice(len(treatment), size, replace=False))]
                if len(control) > size:
                    control = [control[i] for i in
                               sorted(rng.choice(len(control), size, replace=False))]
            bag_t = [c for c in (_eval_contact(g, e, offset) for e in treatment)
                     if c is not None]
            bag_c = [c for c in (_eval_contact(g, e, offset) for e in control)
                     if c is not None]
            if len(bag_t) < 2 or len(bag_c) < 2:
                n_skipped += 1
                continue
            ent_t.append(normalized_entropy(bag_t))
            ent_c.append(normalized_entropy(bag_c))
        if not ent_t:
            logger.warning("matching: no qualifying groups for k=%d", k)
            continue
        mean_t, ci_t = mean_ci(ent_t)
        mean_c, ci_c = mean_ci(ent_c)
        reports[k] = EntropyReport(
            k=k, n_groups=len(ent_t), mean_entropy_treatment=mean_t,
            mean_entropy_control=mean_c, ci_treatment=ci_t, ci_control=ci_c,
            n_skipped_small_bags=n_skipped, options=options)
    return reports
