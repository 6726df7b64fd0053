from netsep.negative_sampling import (NegativeSampler, KINDS, TASK_IDS,
                                      sample_negatives)
import unittest
import numpy as np

N = 10
edges = np.array([[0, 1], [1, 2], [2, 3], [3, 4], [4, 0]])
train_keys = np.array([0 * N + 1, 5 * N + 6, 6 * N + 7, 7 * N + 8, 2 * N + 9])
test_keys = np.array([0 * N + 1, 1 * N + 2, 8 * N + 9, 9 * N + 8, 5 * N + 6])


def keys_of(pairs):
    return pairs[:, 0] * N + pairs[:, 1]


class TestNegativeSampler(unittest.TestCase):
    def test_kinds(self):
        self.assertEqual(KINDS, ('random', 'historical', 'inductive'))
        self.assertEqual(TASK_IDS, {'random': 1, 'historical': 2,
                                    'inductive': 3})
        with self.assertRaises(ValueError):
            NegativeSampler('uniform', N, train_keys)
        with self.assertRaises(ValueError):
            NegativeSampler('inductive', N, train_keys)

    def test_random(self):
        sampler = NegativeSampler('random', N, train_keys, seed=4)
        window_keys = set(keys_of(edges).tolist())
        for t in range(20):
            pairs = sampler.sample(edges, t)
            self.assertEqual(pairs.shape, (5, 2))
            self.assertTrue(np.all(pairs[:, 0] != pairs[:, 1]))
            self.assertTrue(np.all((pairs >= 0) & (pairs < N)))
            self.assertFalse(window_keys & set(keys_of(pairs).tolist()))

    def test_keep_source(self):
        sampler = NegativeSampler('random', N, train_keys, seed=4,
                                  keep_source=True)
        pairs = sampler.sample(edges, 0)
        np.testing.assert_equal(pairs[:, 0], edges[:, 0])
        self.assertTrue(np.all(pairs[:, 1] != pairs[:, 0]))
        self.assertFalse(set(keys_of(edges).tolist()) &
                         set(keys_of(pairs).tolist()))

    def test_seeded(self):
        first = NegativeSampler('random', N, train_keys, seed=2).sample(edges, 0)
        second = NegativeSampler('random', N, train_keys, seed=2).sample(edges, 0)
        other = NegativeSampler('random', N, train_keys, seed=3).sample(edges, 0)
        np.testing.assert_equal(first, second)
        np.testing.assert_equal(sample_negatives(
            NegativeSampler('random', N, train_keys, seed=2), edges, 0), first)
        self.assertFalse(np.array_equal(first, other))

    def test_historical(self):
        sampler = NegativeSampler('historical', N, train_keys, seed=1)
        pairs = sampler.sample(edges, 0)
        self.assertEqual(pairs.shape, (5, 2))
        # (0, 1) is in the window, so four pairs remain in the pool
        self.assertTrue(set(keys_of(pairs).tolist()) <=
                        {56, 67, 78, 29})

    def test_inductive(self):
        sampler = NegativeSampler('inductive', N, train_keys, test_keys, seed=1)
        np.testing.assert_equal(sampler.pool, [12, 89, 98])
        pairs = sampler.sample(edges, 0)
        self.assertTrue(set(keys_of(pairs).tolist()) <= {89, 98})

    def test_empty_pool(self):
        sampler = NegativeSampler('historical', N, [1], seed=1)
        with self.assertLogs('netsep.negative_sampling', level='WARNING'):
            self.assertIsNone(sampler.sample(edges, 3))
        self.assertIsNone(sampler.sample(np.zeros((0, 2)), 3))

    def test_full_window(self):
        full = np.array([(i, j) for i in range(3) for j in range(3) if i != j])
        sampler = NegativeSampler('random', 3, [], seed=0)
        with self.assertLogs('netsep.negative_sampling', level='WARNING'):
            self.assertIsNone(sampler.sample(full, 0))
