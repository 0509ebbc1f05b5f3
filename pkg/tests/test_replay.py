import numpy as np
import pytest
import scipy.stats

from gatectl.replay import Experience, PrioritizedReplay, SumTree


def exp(tag: int) -> Experience:
    return Experience(s=np.array([float(tag)]), a=0, r=0.0,
                      s_next=np.array([float(tag)]), terminal=False)


class TestSumTree:
    def test_add_and_total(self):
        tree = SumTree(4)
        tree.add(1.0, "a")
        tree.add(2.0, "b")
        assert tree.total == pytest.approx(3.0)
        assert tree.n_entries == 2

    def test_query_partitions_by_priority(self):
        tree = SumTree(4)
        tree.add(1.0, "a")
        tree.add(3.0, "b")
        leaf, priority, item = tree.query(0.5)
        assert item == "a" and priority == 1.0
        leaf, priority, item = tree.query(2.5)
        assert item == "b" and priority == 3.0

    def test_fifo_eviction(self):
        tree = SumTree(3)
        for i in range(4):
            tree.add(1.0, i)
        assert tree.n_entries == 3
        stored = set(tree.data)
        assert stored == {1, 2, 3}

    def test_update_rejects_non_leaf(self):
        tree = SumTree(4)
        with pytest.raises(IndexError, match="leaf"):
            tree.update(0, 1.0)

    def test_root_equals_leaf_sum_after_updates(self):
        rng = np.random.default_rng(0)
        tree = SumTree(64)
        leaves = [tree.add(float(p), i) for i, p in enumerate(rng.uniform(0, 5, 64))]
        for leaf in rng.choice(leaves, size=200):
            tree.update(int(leaf), float(rng.uniform(0, 5)))
        assert abs(tree.total - tree.nodes[63:].sum()) < 1e-9

    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            SumTree(0)


class TestStore:
    def test_store_into_empty(self):
        buf = PrioritizedReplay(capacity=8)
        buf.store(exp(0))
        assert len(buf) == 1

    def test_capacity_three_fifo(self):
        buf = PrioritizedReplay(capacity=3, seed=0)
        for i in range(4):
            buf.store(exp(i))
        assert len(buf) == 3
        tags = {int(e.s[0]) for e in buf.tree.data}
        assert tags == {1, 2, 3}

    def test_new_item_gets_max_priority(self):
        buf = PrioritizedReplay(capacity=8, alpha=1.0, eps_priority=0.0, seed=0)
        leaf0 = buf.store(exp(0))
        buf.update_priorities([leaf0], [5.0])
        leaf1 = buf.store(exp(1))
        assert buf.tree.nodes[leaf1] == buf.tree.nodes[leaf0] == 5.0


class TestSample:
    def test_underfilled_rejected(self):
        buf = PrioritizedReplay(capacity=8)
        buf.store(exp(0))
        with pytest.raises(ValueError, match="cannot sample"):
            buf.sample(2)

    def test_priorities_one_three_ratio(self):
        # With priorities {1, 3} and alpha=1 the second item is drawn with
        # probability 3/4; check the count within 3 sigma over 1e4 draws.
        buf = PrioritizedReplay(capacity=4, alpha=1.0, eps_priority=0.0, seed=123)
        l0 = buf.store(exp(0))
        l1 = buf.store(exp(1))
        buf.update_priorities([l0, l1], [1.0, 3.0])
        n = 10_000
        count_hi = 0
        for _ in range(n // 2):
            items, _, _ = buf.sample(2)
            count_hi += sum(1 for e in items if int(e.s[0]) == 1)
        sigma = np.sqrt(n * 0.75 * 0.25)
        assert abs(count_hi - 0.75 * n) <= 3 * sigma

    def test_equal_priorities_uniform_weights(self):
        buf = PrioritizedReplay(capacity=8, seed=1)
        for i in range(6):
            buf.store(exp(i))
        _, _, weights = buf.sample(6)
        assert np.array_equal(weights, np.ones(6))

    def test_beta_zero_weights_all_one(self):
        buf = PrioritizedReplay(capacity=8, alpha=1.0, beta=0.0,
                                eps_priority=0.0, seed=2)
        leaves = [buf.store(exp(i)) for i in range(4)]
        buf.update_priorities(leaves, [1.0, 2.0, 4.0, 8.0])
        _, _, weights = buf.sample(4)
        assert np.array_equal(weights, np.ones(4))

    def test_weights_bounded_by_one(self):
        buf = PrioritizedReplay(capacity=16, alpha=0.6, beta=0.7, seed=3)
        leaves = [buf.store(exp(i)) for i in range(10)]
        buf.update_priorities(leaves, np.linspace(0.1, 4.0, 10))
        _, _, weights = buf.sample(8)
        assert weights.max() == 1.0
        assert np.all(weights > 0)

    def test_distribution_matches_alpha_weighted_priorities(self):
        # Goodness of fit of sampling frequencies against p_i^alpha / sum,
        # chi-squared at the 1% level over 1e5 draws.
        alpha = 0.6
        priorities = np.array([0.5, 1.0, 2.0, 4.0, 8.0])
        buf = PrioritizedReplay(capacity=8, alpha=alpha, eps_priority=0.0, seed=7)
        leaves = [buf.store(exp(i)) for i in range(len(priorities))]
        buf.update_priorities(leaves, priorities)
        n = 100_000
        tags = []
        for _ in range(n // 5):
            items, _, _ = buf.sample(5)
            tags.extend(int(e.s[0]) for e in items)
        counts = np.bincount(tags, minlength=len(priorities))
        expected = n * priorities ** alpha / np.sum(priorities ** alpha)
        chi2 = np.sum((counts - expected) ** 2 / expected)
        assert chi2 < scipy.stats.chi2.ppf(0.99, df=len(priorities) - 1)


class TestUpdatePriorities:
    def test_zero_td_gets_floor(self):
        buf = PrioritizedReplay(capacity=4, alpha=1.0, eps_priority=1e-6, seed=0)
        leaf = buf.store(exp(0))
        buf.update_priorities([leaf], [0.0])
        assert buf.tree.nodes[leaf] == 1e-6

    def test_monotone_in_td_magnitude(self):
        buf = PrioritizedReplay(capacity=4, alpha=0.6, seed=0)
        l0 = buf.store(exp(0))
        l1 = buf.store(exp(1))
        buf.update_priorities([l0, l1], [0.5, -2.0])
        assert buf.tree.nodes[l1] > buf.tree.nodes[l0]

    def test_invalid_index_rejected(self):
        buf = PrioritizedReplay(capacity=4, seed=0)
        buf.store(exp(0))
        empty_slot_leaf = buf.capacity - 1 + 2
        with pytest.raises(IndexError, match="stored"):
            buf.update_priorities([empty_slot_leaf], [1.0])

    def test_tree_consistent_after_updates(self):
        buf = PrioritizedReplay(capacity=32, seed=4)
        rng = np.random.default_rng(4)
        leaves = [buf.store(exp(i)) for i in range(32)]
        for _ in range(50):
            pick = rng.choice(leaves, size=8)
            buf.update_priorities(pick, rng.uniform(0, 3, size=8))
        leaf_sum = buf.tree.nodes[buf.capacity - 1:].sum()
        assert abs(buf.tree.total - leaf_sum) < 1e-9
