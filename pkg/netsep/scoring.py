"""
Link prediction scores and anomaly rankings of observed edges.

The score of edge (i, j) in window t is h = sum_l w_tl (u_il . v_jl).
Higher means more normal; anomalies are ranked from the lowest score.
"""
from collections import namedtuple, OrderedDict
import logging
import math
import numpy as np
import pandas as pd

from netsep.snmf import refit_window_weights

logger = logging.getLogger(__name__)

ScoredEdge = namedtuple('ScoredEdge', ['t', 'src', 'dst', 'score', 'label'])
ScoredEdge.__new__.__defaults__ = (None,)

DEFAULT_REFIT_ITERS = 500


def top_count(fraction, n):
    """
    ceil(fraction * n), ignoring float noise such as 0.01 * 1000 = 10.000000000000002
    """
    if not 0 < fraction <= 1:
        raise ValueError('fraction must be in (0, 1], got {}'.format(fraction))
    return int(math.ceil(round(fraction * n, 9)))


def score_edges(model, w, src, dst):
    """
    Vector of scores for arrays of (src, dst) pairs under mixing vector w
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (model.L,):
        raise ValueError('mixing vector must have length {}'.format(model.L))
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if len(src) == 0:
        return np.zeros(0)
    return model.pair_products(src, dst) @ w


def score_edge(model, w, i, j):
    if i == j:
        raise ValueError('self-loop ({}, {}) cannot be scored'.format(i, j))
    if not (0 <= i < model.N and 0 <= j < model.N):
        raise ValueError('node id outside [0, {})'.format(model.N))
    return float(score_edges(model, w, [i], [j])[0])


def refit_init(hist):
    """
    Starting vector for refitting a window: the historical mean with zero
    entries lifted so that no source is locked at zero
    """
    w0 = np.array(hist.global_mean(), dtype=float)
    positive = w0[w0 > 0]
    w0[w0 <= 0] = positive.mean() if len(positive) else 1.
    return w0


def score_window(model, hist, edges, t, labels=None,
                 refit_iters=DEFAULT_REFIT_ITERS):
    """
    Scores every edge of window t with the seasonal forecast of its mixing
    vector, then refits the vector on the window and appends it to hist.
    - edges:	(m, 2) edge array of window t
    - labels:	Optional LabeledEdgeSet used to fill ScoredEdge.label
    Returns (list of ScoredEdge, refitted vector).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    w_hat = hist.predict_weights(t)
    scores = score_edges(model, w_hat, edges[:, 0], edges[:, 1])
    if labels is not None:
        flags = labels.mask(t, edges[:, 0], edges[:, 1])
    else:
        flags = [None] * len(edges)
    scored = [ScoredEdge(int(t), int(i), int(j), float(s),
                         None if f is None else bool(f))
              for (i, j), s, f in zip(edges.tolist(), scores, flags)]
    w_t = refit_window_weights(model, edges, refit_init(hist),
                               iters=refit_iters)
    hist.append(t, w_t)
    return scored, w_t


def _rank_key(edge):
    return (edge.score, edge.t, edge.src, edge.dst)


def rank_anomalies(scored, top_fraction=1.):
    """
    Edges sorted by ascending score with ties broken by (t, src, dst),
    truncated to the first ceil(top_fraction * n)
    """
    scored = list(scored)
    if not scored:
        return []
    ranked = sorted(scored, key=_rank_key)
    return ranked[:top_count(top_fraction, len(ranked))]


def _edges_frame(rows, node_index=None):
    src = [e.src for e in rows]
    dst = [e.dst for e in rows]
    if node_index is not None and rows:
        src, dst = node_index.names_of(src), node_index.names_of(dst)
    labels = ['NA' if e.label is None else str(int(e.label)) for e in rows]
    return pd.DataFrame(OrderedDict([('t', [e.t for e in rows]),
                                     ('src', src), ('dst', dst),
                                     ('score', [e.score for e in rows]),
                                     ('label', labels)]))


def scores_frame(scored, node_index=None):
    """
    DataFrame with columns t, src, dst, score, label in window then ranking
    order; node ids are replaced by names when node_index is given
    """
    return _edges_frame(sorted(scored, key=lambda e: (e.t,) + _rank_key(e)),
                        node_index)


def write_scores(path, scored, node_index=None):
    scores_frame(scored, node_index).to_csv(path, index=False,
                                            lineterminator='\n')
    logger.info('wrote scores file=%s edges=%d', path, len(scored))
    return path


def write_ranking(path, ranked, node_index=None):
    """
    Writes an anomaly ranking in its own order with a 1-based rank column
    """
    df = _edges_frame(list(ranked), node_index)
    df.insert(0, 'rank', np.arange(1, len(df) + 1))
    df.to_csv(path, index=False, lineterminator='\n')
    return path
