"""Shared small helpers: union-find, confidence intervals, log binning, seeding."""

from __future__ import annotations

import hashlib
import math

import numpy as np

Z95 = 1.959963984540054  # two-sided 95% normal quantile


class UnionFind:
    """Array-backed union-find over elements 0..capacity-1 with component sizes.

    Elements must be activated with ``add`` before they count as components.
    Tracks the number of active components and the largest component size.
    """

    def __init__(self, capacity: int):
        self.parent = list(range(capacity))
        self.size = [0] * capacity
        self.n_components = 0
        self.max_size = 0

    def add(self, x: int) -> None:
        if self.size[x] == 0:
            self.size[x] = 1
            self.n_components += 1
            if self.max_size == 0:
                self.max_size = 1

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        """Join the components of a and b; returns True if a merge happened."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        if self.size[ra] > self.max_size:
            self.max_size = self.size[ra]
        self.n_components -= 1
        return True


def mean_ci(values) -> tuple[float, float]:
    """Mean and 95% normal-approximation half-width (0.0 for n < 2)."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n == 0:
        raise ValueError("mean_ci of empty sample")
    mean = float(arr.mean())
    if n < 2:
        return mean, 0.0
    half = Z95 * float(arr.std(ddof=1)) / math.sqrt(n)
    return mean, half


def log_bin_histogram(values, bins_per_decade: int = 10) -> list[tuple[float, float, int]]:
    """Histogram of positive values in logarithmic bins.

    Bin k covers [10^(k/b), 10^((k+1)/b)). Returns (lo, hi, count) for
    non-empty bins in ascending order; non-positive values are ignored.
    """
    arr = np.asarray(values, dtype=float)
    arr = arr[arr > 0]
    if arr.size == 0:
        return []
    k = np.floor(bins_per_decade * np.log10(arr)).astype(np.int64)
    out = []
    for kk, count in zip(*np.unique(k, return_counts=True)):
        lo = 10.0 ** (kk / bins_per_decade)
        hi = 10.0 ** ((kk + 1) / bins_per_decade)
        out.append((float(lo), float(hi), int(count)))
    return out


def derive_seed(root_seed: int, *keys) -> np.random.SeedSequence:
    """Deterministic per-task seed stream from a root seed and mixed keys.

    String keys are hashed with a stable digest so results do not depend on
    interpreter hash randomization.
    """
    spawn = []
    for key in keys:
        if isinstance(key, str):
            spawn.append(int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "big"))
        else:
            spawn.append(int(key) & 0xFFFFFFFF)
    return np.random.SeedSequence(entropy=root_seed, spawn_key=tuple(spawn))


def rng_for(root_seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root_seed, *keys))
