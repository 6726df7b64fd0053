from netsep.rank_metrics import auc, dcg, ndcg_from_relevance, ndcg_at
from netsep.scoring import ScoredEdge
from netsep.temporal_graph import LabeledEdgeSet
import unittest
import math
import numpy as np


def brute_auc(pos, neg):
    wins = 0.
    for p in pos:
        for n in neg:
            wins += 1. if p > n else 0.5 if p == n else 0.
    return wins / (len(pos) * len(neg))


def brute_ndcg(relevance, fraction):
    k = int(math.ceil(round(fraction * len(relevance), 9)))
    gain = sum(r / math.log2(i + 2) for i, r in enumerate(relevance[:k]))
    ideal = sum(1. / math.log2(i + 2)
                for i in range(min(k, int(sum(relevance)))))
    return gain / ideal if ideal else 0.


class TestAuc(unittest.TestCase):
    def test_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n_pos = int(rng.integers(1, 101))
            n_neg = int(rng.integers(1, 101))
            # integer scores so that ties are frequent
            pos = rng.integers(0, 20, n_pos).astype(float)
            neg = rng.integers(0, 20, n_neg).astype(float)
            self.assertEqual(auc(pos, neg), brute_auc(pos, neg))

    def test_values(self):
        self.assertEqual(auc([3., 4.], [1., 2.]), 1.)
        self.assertEqual(auc([1., 2.], [3., 4.]), 0.)
        self.assertEqual(auc([1., 1.], [1.]), 0.5)

    def test_empty(self):
        with self.assertRaises(ValueError):
            auc([], [1.])
        with self.assertRaises(ValueError):
            auc([1.], [])


class TestNdcg(unittest.TestCase):
    def test_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(1, 300))
            relevance = (rng.random(n) < 0.1).astype(int).tolist()
            fraction = float(rng.choice([0.01, 0.05, 0.1, 0.5, 1.]))
            self.assertAlmostEqual(ndcg_from_relevance(relevance, fraction),
                                   brute_ndcg(relevance, fraction), places=12)

    def test_values(self):
        self.assertEqual(ndcg_from_relevance([1, 0, 0], 1.), 1.)
        self.assertEqual(ndcg_from_relevance([0, 0, 0], 1.), 0.)
        self.assertEqual(ndcg_from_relevance([], 1.), 0.)
        self.assertAlmostEqual(ndcg_from_relevance([0, 1], 1.),
                               1. / math.log2(3), places=15)
        self.assertAlmostEqual(dcg([1., 1.]), 1. + 1. / math.log2(3),
                               places=15)

    def test_cutoff(self):
        relevance = [0] * 100 + [1]
        self.assertEqual(ndcg_from_relevance(relevance, 0.01), 0.)
        relevance = [1] + [0] * 150
        self.assertEqual(ndcg_from_relevance(relevance, 0.01), 1.)

    def test_labels(self):
        ranked = [ScoredEdge(0, 1, 2, 0.1, True), ScoredEdge(0, 2, 1, 0.2, False),
                  ScoredEdge(1, 0, 1, 0.3, True)]
        expected = (1. + 0.5) / (1. + 1. / math.log2(3))
        self.assertAlmostEqual(ndcg_at(ranked, cutoff_fraction=1.), expected,
                               places=15)
        labels = LabeledEdgeSet([(0, 1, 2), (1, 0, 1)])
        self.assertAlmostEqual(ndcg_at(ranked, labels, 1.), expected, places=15)
        self.assertAlmostEqual(ndcg_at(ranked, [True, False, True], 1.),
                               expected, places=15)
        with self.assertRaises(ValueError):
            ndcg_at(ranked, [True], 1.)
