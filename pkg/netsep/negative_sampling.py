"""
Negative edges for the link prediction tasks.

Pairs are handled as int64 keys src * N + dst. The three kinds are
- random:	uniformly rewired pairs absent from the window
- historical:	pairs seen in training but absent from the window
- inductive:	pairs first seen in the test range, absent from the window
"""
import logging
import numpy as np

logger = logging.getLogger(__name__)

KINDS = ('random', 'historical', 'inductive')
TASK_IDS = {'random': 1, 'historical': 2, 'inductive': 3}
MAX_REDRAWS = 10000


class NegativeSampler(object):
    def __init__(self, kind, N, train_keys, test_keys=None, seed=0,
                 keep_source=False):
        """
        - kind:	One of KINDS
        - N:	Node count
        - train_keys:	Distinct pair keys of the training windows
        - test_keys:	Distinct pair keys of the test windows (inductive only)
        - seed:	Run seed; the generator is seeded with (seed, task id)
        - keep_source:	Random kind only, if True only the destination of
                        each positive is rewired
        """
        if kind not in KINDS:
            raise ValueError('negative sampler kind {} is not recognized'.format(kind))
        self.kind = kind
        self.N = int(N)
        self.keep_source = keep_source
        self.train_keys = np.unique(np.asarray(train_keys, dtype=np.int64))
        if kind == 'inductive':
            if test_keys is None:
                raise ValueError('inductive sampling needs the test pairs')
            self.pool = np.setdiff1d(np.asarray(test_keys, dtype=np.int64),
                                     self.train_keys)
        elif kind == 'historical':
            self.pool = self.train_keys
        else:
            self.pool = None
        self.rng = np.random.default_rng([int(seed), TASK_IDS[kind]])

    def _random_pairs(self, edges, window_keys):
        N = self.N
        m = len(edges)
        if len(window_keys) >= N * (N - 1):
            return None
        src = edges[:, 0].copy() if self.keep_source else np.zeros(m, np.int64)
        dst = np.zeros(m, dtype=np.int64)
        todo = np.arange(m)
        for _ in range(MAX_REDRAWS):
            if not self.keep_source:
                src[todo] = self.rng.integers(0, N, size=len(todo))
            j = self.rng.integers(0, N - 1, size=len(todo))
            dst[todo] = j + (j >= src[todo])
            clash = np.isin(src[todo] * N + dst[todo], window_keys,
                            assume_unique=False)
            todo = todo[clash]
            if not len(todo):
                return np.column_stack([src, dst])
        return None

    def sample(self, edges, t):
        """
        Returns an (m, 2) array of negatives for the m positives of window t,
        or None (with a warning) when no negative can be drawn
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if not len(edges):
            return None
        window_keys = np.unique(edges[:, 0] * self.N + edges[:, 1])
        if self.kind == 'random':
            pairs = self._random_pairs(edges, window_keys)
            if pairs is None:
                logger.warning('random negatives unavailable for window=%d', t)
            return pairs
        pool = np.setdiff1d(self.pool, window_keys, assume_unique=True)
        if not len(pool):
            logger.warning('empty %s negative pool, skipping window=%d',
                           self.kind, t)
            return None
        keys = self.rng.choice(pool, size=len(edges),
                               replace=len(pool) < len(edges))
        return np.column_stack([keys // self.N, keys % self.N])


def sample_negatives(sampler, edges, t):
    return sampler.sample(edges, t)
