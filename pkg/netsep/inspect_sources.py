"""
Inspection of fitted sources: thresholded per-source graphs, clustering of
the source embeddings and mixing coefficient timelines, all as plot-ready
tables.
"""
from collections import namedtuple, OrderedDict
import logging
import numpy as np
import pandas as pd
from sklearn.cluster import KMeans
from sklearn.metrics import silhouette_score

logger = logging.getLogger(__name__)

ClusterResult = namedtuple('ClusterResult',
                           ['assignment', 'k', 'silhouette', 'scores'])

DEFAULT_QUANTILES = (0.5, 0.9, 0.99, 0.999, 1.)
KMEANS_RESTARTS = 10
KMEANS_MAX_ITER = 300
BLOCK_ROWS = 1024
MAX_QUANTILE_PAIRS = 2000000


def _check_source(model, l):
    if not 0 <= l < model.L:
        raise ValueError('source index {} outside [0, {})'.format(l, model.L))


def _coefficient_blocks(model, l, block_rows=BLOCK_ROWS):
    """
    Yields (row offset, block of u_il . v_jl) with the diagonal set to -inf
    """
    U, V = model.U[l], model.V[l]
    for start in range(0, model.N, block_rows):
        stop = min(start + block_rows, model.N)
        block = U[start:stop] @ V.T
        rows = np.arange(stop - start)
        block[rows, rows + start] = -np.inf
        yield start, block


def export_source_graph(model, l, theta, block_rows=BLOCK_ROWS):
    """
    Every pair i != j with u_il . v_jl > theta, as a DataFrame with columns
    src, dst, weight ordered by (src, dst)
    """
    _check_source(model, l)
    if not theta > 0:
        raise ValueError('theta must be positive')
    parts = []
    for start, block in _coefficient_blocks(model, l, block_rows):
        i, j = np.nonzero(block > theta)
        parts.append((i + start, j, block[i, j]))
    src = np.concatenate([p[0] for p in parts]).astype(np.int64)
    dst = np.concatenate([p[1] for p in parts]).astype(np.int64)
    weight = np.concatenate([p[2] for p in parts])
    logger.info('source=%d theta=%g edges=%d', l, theta, len(src))
    return pd.DataFrame(OrderedDict([('src', src), ('dst', dst),
                                     ('weight', weight)]))


def coefficient_quantiles(model, l, quantiles=DEFAULT_QUANTILES,
                          max_pairs=MAX_QUANTILE_PAIRS, seed=0):
    """
    Quantiles of the off-diagonal coefficients u_il . v_jl of one source,
    used to pick a threshold. Above max_pairs pairs a seeded uniform
    sample of pairs is used.
    """
    _check_source(model, l)
    N = model.N
    if N * (N - 1) <= max_pairs:
        values = np.concatenate([b[np.isfinite(b)] for _, b in
                                 _coefficient_blocks(model, l)])
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, N, size=max_pairs)
        j = rng.integers(0, N - 1, size=max_pairs)
        j += j >= i
        values = np.einsum('pk,pk->p', model.U[l][i], model.V[l][j])
    return OrderedDict((float(q), float(v)) for q, v in
                       zip(quantiles, np.quantile(values, quantiles)))


def source_features(model, l):
    """
    N x 2K matrix of concatenated origin and destination embeddings
    """
    return np.hstack([model.U[l], model.V[l]])


def cluster_source_embeddings(model, l, k_range=range(2, 9), seed=0):
    """
    k-means on the concatenated embeddings of one source, with k chosen by
    the largest mean silhouette
    """
    _check_source(model, l)
    return cluster_rows(source_features(model, l), k_range, seed=seed)


def cluster_rows(X, k_range=range(2, 9), seed=0):
    X = np.asarray(X, dtype=float)
    N = len(X)
    if N < 3:
        raise ValueError('clustering needs at least 3 nodes, got {}'.format(N))
    if np.all(X == X[0]):
        raise ValueError('degenerate embeddings: every row is identical')
    scores = OrderedDict()
    best = None
    for k in k_range:
        if not 2 <= k <= N - 1:
            logger.warning('skipping k=%d outside [2, %d]', k, N - 1)
            continue
        km = KMeans(n_clusters=k, n_init=KMEANS_RESTARTS,
                    max_iter=KMEANS_MAX_ITER, random_state=seed).fit(X)
        assignment = km.labels_
        if len(np.unique(assignment)) < 2:
            continue
        scores[k] = float(silhouette_score(X, assignment))
        logger.debug('k=%d silhouette=%.4f', k, scores[k])
        if best is None or scores[k] > scores[best[0]]:
            best = (k, assignment)
    if best is None:
        raise ValueError('degenerate embeddings: no k in the range gives '
                         'two clusters')
    k, assignment = best
    logger.info('chose k=%d silhouette=%.4f', k, scores[k])
    return ClusterResult(np.asarray(assignment, dtype=np.int64), k,
                         scores[k], scores)


def cluster_edge_counts(edges, assignment, k=None):
    """
    k x k DataFrame with the number of edges from cluster a to cluster b
    - edges:	(m, 2) array or DataFrame with src and dst columns
    - assignment:	Cluster of every node
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    if isinstance(edges, pd.DataFrame):
        edges = edges[['src', 'dst']].to_numpy()
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    k = int(assignment.max()) + 1 if k is None else int(k)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (assignment[edges[:, 0]], assignment[edges[:, 1]]), 1)
    return pd.DataFrame(counts, index=pd.Index(range(k), name='from'),
                        columns=pd.Index(range(k), name='to'))


def mixing_timeline(hist):
    """
    DataFrame with columns t, w_1 .. w_L in window order
    """
    idx, rows = hist.rows_array()
    data = OrderedDict([('t', idx)])
    for l in range(rows.shape[1] if rows.ndim == 2 else 0):
        data['w_{}'.format(l + 1)] = rows[:, l]
    return pd.DataFrame(data)


def export_mixing_timeline(hist, path):
    mixing_timeline(hist).to_csv(path, index=False, float_format='%.17g',
                                 lineterminator='\n')
    return path


def write_table(df, path, index=False):
    df.to_csv(path, index=index, float_format='%.17g', lineterminator='\n')
    return path
