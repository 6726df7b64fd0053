"""
Ranking metrics: AUC in its Mann-Whitney form and NDCG over the top of an
anomaly ranking.
"""
import numpy as np
from scipy.stats import rankdata

from netsep.scoring import top_count


def auc(pos_scores, neg_scores):
    """
    Probability that a positive outscores a negative, ties counting half
    - pos_scores:	Scores of the class expected to score higher
    - neg_scores:	Scores of the other class
    """
    pos = np.asarray(pos_scores, dtype=float).reshape(-1)
    neg = np.asarray(neg_scores, dtype=float).reshape(-1)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError('auc needs at least one positive and one negative '
                         'score ({} and {} given)'.format(len(pos), len(neg)))
    ranks = rankdata(np.concatenate([pos, neg]), method='average')
    n_pos = len(pos)
    u_stat = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.
    return float(u_stat / (n_pos * len(neg)))


def dcg(relevance):
    relevance = np.asarray(relevance, dtype=float)
    discounts = np.log2(np.arange(2, len(relevance) + 2))
    return float(np.sum(relevance / discounts))


def ndcg_from_relevance(relevance, cutoff_fraction=0.01):
    """
    NDCG of the first ceil(cutoff_fraction * n) items of a ranked binary
    relevance list; 0 when nothing is relevant
    """
    relevance = np.asarray(relevance, dtype=float).reshape(-1)
    n_pos = int(np.count_nonzero(relevance))
    if len(relevance) == 0 or n_pos == 0:
        return 0.
    k = top_count(cutoff_fraction, len(relevance))
    ideal = dcg(np.ones(min(k, n_pos)))
    return dcg(relevance[:k]) / ideal


def ndcg_at(ranked, labels=None, cutoff_fraction=0.01):
    """
    NDCG of an anomaly ranking (most anomalous first).
    - ranked:	Ordered list of ScoredEdge
    - labels:	Optional LabeledEdgeSet or sequence of booleans parallel to
                ranked; by default the label field of each edge is used
    - cutoff_fraction:	Fraction of the ranking that is scored
    """
    ranked = list(ranked)
    if labels is None:
        relevance = [bool(e.label) for e in ranked]
    elif hasattr(labels, 'mask'):
        relevance = [(e.t, e.src, e.dst) in labels for e in ranked]
    else:
        relevance = [bool(x) for x in labels]
        if len(relevance) != len(ranked):
            raise ValueError('labels and ranking differ in length')
    return ndcg_from_relevance(relevance, cutoff_fraction)
