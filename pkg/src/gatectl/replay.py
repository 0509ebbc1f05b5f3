"""Prioritized experience replay over a sum-tree.

Priorities are p = |td error| + eps_priority; the tree stores p**alpha
so that item i is sampled with probability p_i**alpha / sum_j p_j**alpha
(each draw is independent).  Importance weights are
(P(i) * size)**-beta, normalized by the batch maximum; ``beta`` is a
plain attribute the trainer anneals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Experience:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    terminal: bool


class SumTree:
    """Fixed-capacity binary sum-tree with FIFO slot reuse.

    Leaves live at tree indices [capacity-1, 2*capacity-1); internal
    nodes hold the sum of their children.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.nodes = np.zeros(2 * capacity - 1)
        self.data = np.empty(capacity, dtype=object)
        self.write = 0
        self.n_entries = 0

    @property
    def total(self) -> float:
        return float(self.nodes[0])

    def add(self, priority: float, item) -> int:
        """Insert at the write cursor (evicting the oldest); returns the leaf index."""
        leaf = self.write + self.capacity - 1
        self.data[self.write] = item
        self.update(leaf, priority)
        self.write = (self.write + 1) % self.capacity
        self.n_entries = min(self.n_entries + 1, self.capacity)
        return leaf

    def update(self, leaf: int, priority: float) -> None:
        if not self.capacity - 1 <= leaf < 2 * self.capacity - 1:
            raise IndexError(f"tree index {leaf} is not a leaf")
        change = priority - self.nodes[leaf]
        self.nodes[leaf] = priority
        while leaf != 0:
            leaf = (leaf - 1) // 2
            self.nodes[leaf] += change

    def query(self, value: float) -> tuple[int, float, object]:
        """Find the leaf whose cumulative-priority interval contains value."""
        idx = 0
        while True:
            left = 2 * idx + 1
            if left >= len(self.nodes):
                break
            if value <= self.nodes[left]:
                idx = left
            else:
                value -= self.nodes[left]
                idx = left + 1
        return idx, float(self.nodes[idx]), self.data[idx - self.capacity + 1]


class PrioritizedReplay:
    """Priority-weighted experience buffer with FIFO eviction."""

    def __init__(self, capacity: int = 100_000, alpha: float = 0.6,
                 beta: float = 0.4, eps_priority: float = 1e-6,
                 seed: int | None = None):
        self.tree = SumTree(capacity)
        self.capacity = capacity
        self.alpha = alpha
        self.beta = beta
        self.eps_priority = eps_priority
        self.max_priority = 1.0
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return self.tree.n_entries

    def store(self, experience: Experience) -> int:
        """Insert with the running maximum priority so new items get sampled soon."""
        return self.tree.add(self.max_priority ** self.alpha, experience)

    def sample(self, k: int):
        """Draw k experiences by priority; returns (items, leaf indices, is_weights)."""
        n = len(self)
        if n < k:
            raise ValueError(f"cannot sample {k} items from a buffer of size {n}")
        total = self.tree.total
        items, leaves, priorities = [], np.empty(k, dtype=np.int64), np.empty(k)
        for j, u in enumerate(self.rng.uniform(0.0, total, size=k)):
            leaf, priority, item = self.tree.query(u)
            items.append(item)
            leaves[j] = leaf
            priorities[j] = priority
        probs = priorities / total
        weights = (probs * n) ** -self.beta
        weights /= weights.max()
        return items, leaves, weights

    def update_priorities(self, leaves, td_errors) -> None:
        """p_i <- |td_i| + eps_priority (the floor keeps every item reachable)."""
        leaves = np.asarray(leaves, dtype=np.int64)
        td_errors = np.asarray(td_errors, dtype=np.float64)
        for leaf, delta in zip(leaves, td_errors):
            slot = int(leaf) - (self.capacity - 1)
            if not 0 <= slot < self.tree.n_entries:
                raise IndexError(f"tree index {leaf} does not refer to a stored experience")
            p = abs(float(delta)) + self.eps_priority
            self.tree.update(int(leaf), p ** self.alpha)
            self.max_priority = max(self.max_priority, p)
