from netsep.edgebank import EdgeBank, edgebank_score
import unittest
import numpy as np


def brute_scores(stream, N, window):
    """
    Scores every pair in every window before that window is recorded
    """
    last = {}
    out = []
    for t, edges in enumerate(stream):
        scores = np.zeros((N, N))
        for (i, j), seen in last.items():
            if window is None or t - seen <= window:
                scores[i, j] = 1.
        out.append(scores)
        for i, j in edges:
            last[(i, j)] = t
    return out


class TestEdgeBank(unittest.TestCase):
    def test_name(self):
        self.assertEqual(EdgeBank(5).name, 'edgebank-inf')
        self.assertEqual(EdgeBank(5, 168).name, 'edgebank-168')
        with self.assertRaises(ValueError):
            EdgeBank(5, 0)

    def test_memory(self):
        bank = EdgeBank(4, window=2)
        bank.update(0, [(0, 1)])
        bank.update(1, [(2, 3), (0, 1)])
        self.assertEqual(len(bank), 2)
        self.assertEqual(bank.score(3, 0, 1), 1)
        self.assertEqual(bank.score(4, 0, 1), 0)
        self.assertEqual(edgebank_score(bank, 3, 2, 3), 1)
        self.assertEqual(bank.score(3, 3, 2), 0)
        forever = EdgeBank(4).fit([[(0, 1)], [], [(1, 0)]])
        self.assertEqual(forever.score(100, 0, 1), 1)
        self.assertEqual(forever.score(100, 1, 0), 1)
        self.assertEqual(forever.score(100, 1, 2), 0)

    def test_empty(self):
        bank = EdgeBank(3)
        np.testing.assert_equal(bank.scores(0, [0, 1], [1, 2]), [0., 0.])

    def test_oracle(self):
        rng = np.random.default_rng(9)
        N = 5
        src, dst = np.divmod(np.arange(N * N), N)
        for _ in range(1000):
            T = int(rng.integers(1, 9))
            stream = []
            for _ in range(T):
                m = int(rng.integers(0, 6))
                stream.append([tuple(p) for p in rng.integers(0, N, (m, 2))
                               if p[0] != p[1]])
            window = [None, 1, 2, 3][int(rng.integers(0, 4))]
            bank = EdgeBank(N, window=window)
            expected = brute_scores(stream, N, window)
            for t, edges in enumerate(stream):
                np.testing.assert_equal(bank.scores(t, src, dst),
                                        expected[t].reshape(-1))
                bank.update(t, edges)
