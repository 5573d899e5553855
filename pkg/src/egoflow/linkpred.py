"""Link-prediction datasets and evaluation from a historical snapshot.

Candidate pairs (i, j) are unconnected at the snapshot time t but joined by
a directed path of length 2; features use only edges with created_at <= t,
so nothing leaks from the future. The standard task predicts whether i->j
appears before the horizon; the discrimination task separates future
spontaneous links from future recommended ones (setting A), optionally
diluted with never-connected pairs (setting B).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .selection import _pair_index, indicators_at
from .timegraph import RECOMMENDED, SECONDS_PER_DAY, TimeGraph
from .util import rng_for

FEATURES = ("k_out_i", "k_in_j", "pa", "cn", "jaccard", "age_i")
FEATURE_SETS = {
    "baseline": ("pa", "cn", "jaccard", "k_in_j"),
    "baseline+age": ("pa", "cn", "jaccard", "k_in_j", "age_i"),
    "baseline+k_out": ("pa", "cn", "jaccard", "k_in_j", "k_out_i"),
    "all": FEATURES,
}


@dataclass(frozen=True)
class FeatureRow:
    i: object
    j: object
    k_out_i: int
    k_in_j: int
    pa: int
    cn: int
    jaccard: float
    age_i: float
    label: int | None = None


@dataclass(frozen=True)
class EvalReport:
    auc: float
    f_score: float
    per_class_accuracy: dict
    feature_importances: dict
    fold_count: int
    features: tuple
    n_rows: int


def extract_features(g: TimeGraph, i, j, t: int, label: int | None = None) -> FeatureRow:
    """Six structural/temporal features of the pair at snapshot t (inclusive)."""
    ind = indicators_at(g, i, j, t, strict=False)
    reg = g.registered_at(i)
    if reg is None:
        raise ValueError(f"no registration time for {i!r}")
    if reg > t:
        raise ValueError(f"{i!r} registered after the snapshot")
    idx = g.index_of(i)
    k_out = g._prefix_len(g.out_indptr, g.out_ts, idx, t, strict=False)
    return FeatureRow(i=i, j=j, k_out_i=k_out, k_in_j=ind.alter_indegree,
                      pa=ind.pa, cn=ind.cn, jaccard=ind.jaccard,
                      age_i=(t - reg) / SECONDS_PER_DAY, label=label)


def _edge_time(g: TimeGraph, pair_keys, pair_ts, i_idx: int, j_idx: int):
    key = i_idx * g.n_nodes + j_idx
    pos = int(np.searchsorted(pair_keys, key))
    if pos < len(pair_keys) and pair_keys[pos] == key:
        return int(pair_ts[pos])
    return None


def iter_candidates(g: TimeGraph, t: int):
    """Yield (i_idx, j_idx) with a directed 2-path at t and no i->j edge at t.

    Deterministic order: sources ascending, targets ascending per source.
    """
    pair_keys, pair_ts, _ = _pair_index(g)
    for i_idx in range(g.n_nodes):
        lo = g.out_indptr[i_idx]
        k = g._prefix_len(g.out_indptr, g.out_ts, i_idx, t, strict=False)
        if k == 0:
            continue
        mids = g.out_dst[lo:lo + k].tolist()
        out_now = set(mids)
        fof = set()
        for mid in mids:
            mlo = g.out_indptr[mid]
            mk = g._prefix_len(g.out_indptr, g.out_ts, mid, t, strict=False)
            for x in g.out_dst[mlo:mlo + mk].tolist():
                if x != i_idx and x not in out_now:
                    fof.add(x)
        for j_idx in sorted(fof):
            created = _edge_time(g, pair_keys, pair_ts, i_idx, j_idx)
            if created is not None and created <= t:
                continue  # connected at t (possible only via dedup oddities)
            yield i_idx, j_idx, created


class _Reservoir:
    """Uniform without-replacement sample of a stream (Algorithm R)."""

    def __init__(self, capacity: int, rng):
        self.capacity = capacity
        self.rng = rng
        self.items: list = []
        self.seen = 0

    def offer(self, item) -> None:
        self.seen += 1
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            r = int(self.rng.integers(self.seen))
            if r < self.capacity:
                self.items[r] = item


def _rows_from_pairs(g: TimeGraph, pairs, t: int, label: int):
    ids = g.node_ids
    return [extract_features(g, ids[i], ids[j], t, label=label) for i, j in pairs]


def sample_pairs(g: TimeGraph, t: int, horizon: int | None = None,
                 n_pairs: int = 20_000, seed: int = 0) -> list[FeatureRow]:
    """Balanced future-link dataset: n_pairs/2 positives and negatives.

    Positives gain the edge i->j in (t, horizon]; negatives never gain it
    (judged against the full stream). Sampling is uniform without
    replacement inside each class.
    """
    if horizon is None:
        horizon = int(g.edge_ts[-1]) if g.n_edges else t
    per_class = n_pairs // 2
    pos = _Reservoir(per_class, rng_for(seed, "pos"))
    neg = _Reservoir(per_class, rng_for(seed, "neg"))
    for i_idx, j_idx, created in iter_candidates(g, t):
        if created is None:
            neg.offer((i_idx, j_idx))
        elif created <= horizon:
            pos.offer((i_idx, j_idx))
    if pos.seen < per_class or neg.seen < per_class:
        raise ValueError(
            f"insufficient candidates: {pos.seen} positives / {neg.seen} negatives "
            f"available, {per_class} per class requested")
    return (_rows_from_pairs(g, pos.items, t, 1) +
            _rows_from_pairs(g, neg.items, t, 0))


def sample_pairs_recommended(g: TimeGraph, t: int, n_per_class: int,
                             setting: str = "A", seed: int = 0) -> list[FeatureRow]:
    """Spontaneous-vs-recommended discrimination dataset.

    Positives: candidate pairs later connected by a spontaneous link.
    Negatives: pairs later connected by a recommended link; setting B adds
    n_per_class never-connected pairs to the negatives.
    """
    if setting not in ("A", "B"):
        raise ValueError(f"unknown setting {setting!r}")
    pair_keys, pair_ts, pair_order = _pair_index(g)
    spont = _Reservoir(n_per_class, rng_for(seed, "spont"))
    rec = _Reservoir(n_per_class, rng_for(seed, "rec"))
    never = _Reservoir(n_per_class, rng_for(seed, "never"))
    origin_sorted = g.edge_origin[pair_order]
    for i_idx, j_idx, created in iter_candidates(g, t):
        if created is None:
            if setting == "B":
                never.offer((i_idx, j_idx))
            continue
        key = i_idx * g.n_nodes + j_idx
        pos = int(np.searchsorted(pair_keys, key))
        if origin_sorted[pos] == RECOMMENDED:
            rec.offer((i_idx, j_idx))
        else:
            spont.offer((i_idx, j_idx))
    missing = []
    if spont.seen < n_per_class:
        missing.append(f"{spont.seen} future spontaneous")
    if rec.seen < n_per_class:
        missing.append(f"{rec.seen} future recommended")
    if setting == "B" and never.seen < n_per_class:
        missing.append(f"{never.seen} never-connected")
    if missing:
        raise ValueError("insufficient candidates: " + ", ".join(missing)
                         + f" available, {n_per_class} per class requested")
    rows = (_rows_from_pairs(g, spont.items, t, 1) +
            _rows_from_pairs(g, rec.items, t, 0))
    if setting == "B":
        rows += _rows_from_pairs(g, never.items, t, 0)
    return rows


def train_eval(rows, folds: int = 10, feature_subset=None, seed: int = 0,
               n_trees: int = 100) -> EvalReport:
    """Stratified cross-validated random forest over the feature rows.

    Reports fold-mean AUC, positive-class F1 at the 0.5 threshold,
    per-class accuracy, and normalized impurity importances. Fixed seed
    means identical folds, trees, and report.
    """
    from sklearn.ensemble import RandomForestClassifier
    from sklearn.metrics import f1_score, roc_auc_score
    from sklearn.model_selection import StratifiedKFold

    features = tuple(feature_subset) if feature_subset else FEATURES
    unknown = set(features) - set(FEATURES)
    if unknown:
        raise ValueError(f"unknown features {sorted(unknown)}")
    y = np.array([r.label for r in rows], dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("need both classes present")
    x = np.array([[getattr(r, f) for f in features] for r in rows], dtype=np.float64)
    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    aucs, f1s, importances = [], [], []
    acc = {0: [], 1: []}
    for fold_seed, (train, test) in enumerate(skf.split(x, y)):
        clf = RandomForestClassifier(
            n_estimators=n_trees, max_features="sqrt",
            random_state=seed + fold_seed, n_jobs=1)
        clf.fit(x[train], y[train])
        proba = clf.predict_proba(x[test])[:, list(clf.classes_).index(1)]
        aucs.append(roc_auc_score(y[test], proba))
        pred = (proba >= 0.5).astype(np.int64)
        f1s.append(f1_score(y[test], pred, pos_label=1))
        for cls in (0, 1):
            mask = y[test] == cls
            if mask.any():
                acc[cls].append(float((pred[mask] == cls).mean()))
        importances.append(clf.feature_importances_)
    mean_imp = np.mean(importances, axis=0)
    mean_imp = mean_imp / mean_imp.sum()
    return EvalReport(
        auc=float(np.mean(aucs)), f_score=float(np.mean(f1s)),
        per_class_accuracy={cls: float(np.mean(vals)) for cls, vals in acc.items()},
        feature_importances={f: float(v) for f, v in zip(features, mean_imp)},
        fold_count=folds, features=features, n_rows=len(rows))
