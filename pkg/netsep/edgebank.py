"""
EdgeBank memorization baselines: an edge scores 1 if it was observed
before (infinite memory) or within the last `window` windows, else 0.
"""
import logging
import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 168


class EdgeBank(object):
    def __init__(self, N, window=None):
        """
        - N:	Node count
        - window:	Memory length in windows, None for infinite memory
        """
        if window is not None and int(window) < 1:
            raise ValueError('EdgeBank window must be >= 1')
        self.N = int(N)
        self.window = None if window is None else int(window)
        self._keys = np.zeros(0, dtype=np.int64)
        self._last = np.zeros(0, dtype=np.int64)

    @property
    def name(self):
        return 'edgebank-inf' if self.window is None else \
            'edgebank-{}'.format(self.window)

    def __len__(self):
        return len(self._keys)

    def update(self, t, edges):
        """
        Records the edges of window t
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if not len(edges):
            return
        keys = np.unique(edges[:, 0] * self.N + edges[:, 1])
        pos = np.searchsorted(self._keys, keys)
        found = pos < len(self._keys)
        found[found] = self._keys[pos[found]] == keys[found]
        self._last[pos[found]] = int(t)
        fresh = keys[~found]
        if len(fresh):
            all_keys = np.concatenate([self._keys, fresh])
            all_last = np.concatenate([self._last,
                                       np.full(len(fresh), int(t), np.int64)])
            order = np.argsort(all_keys, kind='stable')
            self._keys = all_keys[order]
            self._last = all_last[order]

    def fit(self, windows, start=0):
        """
        Records consecutive windows starting at index start
        """
        for k, edges in enumerate(windows):
            self.update(start + k, edges)
        return self

    def scores(self, t, src, dst):
        """
        0/1 scores of (src, dst) pairs queried in window t
        """
        keys = np.asarray(src, dtype=np.int64) * self.N + \
            np.asarray(dst, dtype=np.int64)
        if not len(self._keys):
            return np.zeros(len(keys))
        pos = np.searchsorted(self._keys, keys)
        hit = pos < len(self._keys)
        hit[hit] = self._keys[pos[hit]] == keys[hit]
        if self.window is not None:
            recent = np.zeros(len(keys), dtype=bool)
            recent[hit] = int(t) - self._last[pos[hit]] <= self.window
            hit &= recent
        return hit.astype(float)

    def score(self, t, i, j):
        return int(self.scores(t, [i], [j])[0])


def edgebank_score(bank, t, i, j):
    return bank.score(t, i, j)
