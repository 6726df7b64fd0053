"""
Seasonal forecasting of mixing coefficients.

The history starts with the trained rows of W and grows by one refitted
row per observed window. The coefficients of window t are predicted as the
mean of the stored rows at the same phase t mod tau.
"""
import logging
import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TAU = 168


class MixingHistory(object):
    def __init__(self, tau=DEFAULT_TAU, L=None):
        """
        Ordered record of (window index, mixing vector) pairs.
        - tau:	Seasonal period in windows
        - L:	Vector length, taken from the first appended row if omitted
        """
        if int(tau) < 1:
            raise ValueError('tau must be a positive number of windows')
        self.tau = int(tau)
        self.L = None if L is None else int(L)
        self._indices = []
        self._rows = []
        self.n_trained = 0

    @classmethod
    def from_model(cls, model, tau=DEFAULT_TAU):
        """
        History holding the trained rows of W at indices 0 .. T-1
        """
        hist = cls(tau, L=model.L)
        for t, row in enumerate(np.asarray(model.W)):
            hist.append(t, row)
        hist.n_trained = model.T
        return hist

    def __len__(self):
        return len(self._indices)

    @property
    def last_index(self):
        return self._indices[-1] if self._indices else None

    def copy(self):
        hist = MixingHistory(self.tau, L=self.L)
        hist._indices = list(self._indices)
        hist._rows = [r.copy() for r in self._rows]
        hist.n_trained = self.n_trained
        return hist

    def append(self, t, w):
        """
        Stores the mixing vector of window t; t must exceed every stored index
        """
        t = int(t)
        w = np.array(w, dtype=float).reshape(-1)
        if self.L is None:
            self.L = len(w)
        if len(w) != self.L:
            raise ValueError('mixing vector has length {}, expected {}'.format(
                len(w), self.L))
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError('mixing vector for window {} has negative or '
                             'non-finite entries'.format(t))
        if self._indices and t <= self._indices[-1]:
            raise ValueError('window {} appended after window {}'.format(
                t, self._indices[-1]))
        w.setflags(write=False)
        self._indices.append(t)
        self._rows.append(w)

    def rows_array(self):
        """
        Returns (indices, rows) as a length n int64 array and an (n, L) array
        """
        if not self._rows:
            return np.zeros(0, dtype=np.int64), np.zeros((0, self.L or 0))
        return np.array(self._indices, dtype=np.int64), np.stack(self._rows)

    def appended(self):
        """
        Rows added after the trained ones, as (indices, rows)
        """
        idx, rows = self.rows_array()
        return idx[self.n_trained:], rows[self.n_trained:]

    @staticmethod
    def _mean(rows):
        # rounding can push a mean one ulp outside its inputs
        return np.clip(rows.mean(axis=0), rows.min(axis=0), rows.max(axis=0))

    def global_mean(self):
        if not self._rows:
            raise ValueError('mixing history is empty')
        return self._mean(self.rows_array()[1])

    def phase_rows(self, t):
        """
        Stored rows with index t' < t and t' = t mod tau
        """
        idx, rows = self.rows_array()
        mask = (idx < t) & (idx % self.tau == t % self.tau)
        return rows[mask]

    def predict_weights(self, t):
        """
        Seasonal mean for window t, or the mean of every stored row when no
        stored index shares the phase of t
        """
        if not self._rows:
            raise ValueError('mixing history is empty')
        t = int(t)
        if t <= self._indices[-1]:
            raise ValueError('cannot predict window {}: history already '
                             'reaches window {}'.format(t, self._indices[-1]))
        same_phase = self.phase_rows(t)
        if len(same_phase) == 0:
            logger.debug('no stored window at phase %d, using global mean',
                         t % self.tau)
            return self.global_mean()
        return self._mean(same_phase)


def predict_weights(hist, t):
    return hist.predict_weights(t)


def append(hist, t, w):
    hist.append(t, w)
