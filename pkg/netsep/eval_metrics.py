"""
Evaluation of link prediction and anomaly detection over the test range.

A predictor is anything exposing
    warm_up(t, edges)	absorb a validation window without scoring it
    scores(t, src, dst)	scores of pairs queried in window t
    observe(t, edges)	absorb window t after it has been scored
Test windows are visited in order; every window is scored before the
predictor observes it.
"""
from concurrent.futures import ThreadPoolExecutor
from collections import OrderedDict
import logging
import numpy as np
import pandas as pd

from netsep import json_utils as ju
from netsep import version
from netsep.edgebank import EdgeBank
from netsep.forecast import MixingHistory, DEFAULT_TAU
from netsep.negative_sampling import NegativeSampler, KINDS
from netsep.rank_metrics import auc, ndcg_at
from netsep.scoring import (ScoredEdge, score_edges, rank_anomalies,
                            refit_init, DEFAULT_REFIT_ITERS)
from netsep.snmf import fit, refit_window_weights
from netsep.temporal_graph import WindowRange

logger = logging.getLogger(__name__)

TASKS = ('anomaly',) + KINDS
DEFAULT_RUNS = 10
DEFAULT_NDCG_FRAC = 0.01
SELECTION_TASKS = KINDS
PER_WINDOW_COLUMNS = ['model', 'run', 'task', 't', 'n_pos', 'n_neg', 'auc']


class SnmfPredictor(object):
    name = 'snmf'

    def __init__(self, model, history=None, tau=DEFAULT_TAU,
                 refit_iters=DEFAULT_REFIT_ITERS):
        """
        - model:	Fitted SnmfModel, shared read-only
        - history:	MixingHistory to continue from; copied
        """
        self.model = model
        self.history = history.copy() if history is not None else \
            MixingHistory.from_model(model, tau)
        self.refit_iters = refit_iters
        self._cached = (None, None)

    def _weights(self, t):
        if self._cached[0] != t:
            self._cached = (t, self.history.predict_weights(t))
        return self._cached[1]

    def scores(self, t, src, dst):
        return score_edges(self.model, self._weights(t), src, dst)

    def observe(self, t, edges):
        w_t = refit_window_weights(self.model, edges, refit_init(self.history),
                                   iters=self.refit_iters)
        self.history.append(t, w_t)
        self._cached = (None, None)

    warm_up = observe


class EdgeBankPredictor(object):
    def __init__(self, seq, train, window=None):
        """
        EdgeBank with its memory filled from the training range
        """
        self.bank = EdgeBank(seq.N, window=window)
        for t in train.indices:
            self.bank.update(t, seq.edges(t))

    @property
    def name(self):
        return self.bank.name

    def scores(self, t, src, dst):
        return self.bank.scores(t, src, dst)

    def observe(self, t, edges):
        self.bank.update(t, edges)

    warm_up = observe


def _mean_std(values):
    values = np.asarray(values, dtype=float)
    return float(np.mean(values)), float(np.std(values))


class EvalReport(object):
    def __init__(self, name, runs, seed, tasks, ndcg_frac):
        self.name = name
        self.runs = runs
        self.seed = seed
        self.tasks = list(tasks)
        self.ndcg_frac = ndcg_frac
        self.per_window = []
        self._initialize_metrics_dict()

    def _initialize_metrics_dict(self):
        self.metrics = OrderedDict()
        self.metrics['MODEL'] = self.name
        self.metrics['RUNS'] = self.runs
        self.metrics['SEED'] = self.seed
        self.metrics['NDCG_FRAC'] = self.ndcg_frac
        self.metrics['HISTORY'] = version.history_string()
        self.metrics['TASKS'] = OrderedDict()

    def add_task(self, task, aucs, ndcgs=None, windows=None):
        entry = OrderedDict()
        entry['AUC'] = [float(a) for a in aucs]
        entry['AUC_MEAN'], entry['AUC_STD'] = _mean_std(aucs)
        if ndcgs is not None:
            entry['NDCG'] = [float(n) for n in ndcgs]
            entry['NDCG_MEAN'], entry['NDCG_STD'] = _mean_std(ndcgs)
        if windows is not None:
            entry['WINDOWS'] = [int(w) for w in windows]
        self.metrics['TASKS'][task.upper()] = entry

    def task(self, task):
        return self.metrics['TASKS'][task.upper()]

    def auc_mean(self, task):
        return self.task(task)['AUC_MEAN']

    def write_to(self, outfile):
        return ju.write_report(self.metrics, outfile)

    def write_per_window(self, path):
        return write_per_window(path, [self])


def write_per_window(path, reports):
    """
    One CSV row per scored window, task and run of every report
    - reports:	EvalReports, rows keep the report order
    """
    rows = [(report.name,) + tuple(row) for report in reports
            for row in report.per_window]
    df = pd.DataFrame(rows, columns=PER_WINDOW_COLUMNS)
    df.to_csv(path, index=False, lineterminator='\n')
    return path


def _run_once(predictor_factory, seq, ranges, labels, tasks, run_seed,
              keep_source, ndcg_frac):
    train, valid, test = ranges
    predictor = predictor_factory()
    label = getattr(predictor, 'name', type(predictor).__name__)
    for t in valid.indices:
        predictor.warm_up(t, seq.edges(t))
    link_tasks = [k for k in tasks if k in KINDS]
    train_keys = train.pair_keys()
    test_keys = test.pair_keys()
    samplers = {k: NegativeSampler(k, seq.N, train_keys, test_keys,
                                   seed=run_seed, keep_source=keep_source)
                for k in link_tasks}
    pooled = {k: ([], []) for k in link_tasks}
    windows = {k: 0 for k in link_tasks}
    normal, malicious, scored = [], [], []
    per_window = []
    for t in test.indices:
        edges = seq.edges(t)
        if len(edges):
            pos = predictor.scores(t, edges[:, 0], edges[:, 1])
            for k in link_tasks:
                neg_edges = samplers[k].sample(edges, t)
                if neg_edges is None:
                    continue
                neg = predictor.scores(t, neg_edges[:, 0], neg_edges[:, 1])
                pooled[k][0].append(pos)
                pooled[k][1].append(neg)
                windows[k] += 1
                per_window.append((k, t, len(pos), len(neg), auc(pos, neg)))
            if 'anomaly' in tasks:
                flags = labels.mask(t, edges[:, 0], edges[:, 1])
                normal.append(pos[~flags])
                malicious.append(pos[flags])
                scored.extend(ScoredEdge(int(t), int(i), int(j), float(s),
                                         bool(f)) for (i, j), s, f in
                              zip(edges.tolist(), pos, flags))
                if flags.any() and not flags.all():
                    per_window.append(('anomaly', t, int((~flags).sum()),
                                       int(flags.sum()),
                                       auc(pos[~flags], pos[flags])))
        predictor.observe(t, edges)
    result = OrderedDict()
    for k in link_tasks:
        if windows[k]:
            result[k] = (auc(np.concatenate(pooled[k][0]),
                             np.concatenate(pooled[k][1])), None, windows[k])
    if 'anomaly' in tasks:
        normal = np.concatenate(normal) if normal else np.zeros(0)
        malicious = np.concatenate(malicious) if malicious else np.zeros(0)
        if len(normal) and len(malicious):
            ranked = rank_anomalies(scored, 1.)
            result['anomaly'] = (auc(normal, malicious),
                                 ndcg_at(ranked, cutoff_fraction=ndcg_frac),
                                 len(test))
    return result, per_window, label


def run_eval(predictor_factory, seq, ranges, labels=None, tasks=TASKS,
             runs=DEFAULT_RUNS, seed=0, ndcg_frac=DEFAULT_NDCG_FRAC,
             keep_source=False, threads=1, name=None):
    """
    Scores the test range once per run and aggregates the metrics.
    - predictor_factory:	Callable returning a fresh predictor for a run
    - seq:	WindowedGraphSequence
    - ranges:	(train, valid, test) WindowRange triple from split()
    - labels:	LabeledEdgeSet of malicious edges, needed for 'anomaly'
    - tasks:	Subset of TASKS
    - runs:	Number of runs; run r uses seed + r
    - threads:	Runs executed concurrently
    Returns an EvalReport.
    """
    unknown = set(tasks) - set(TASKS)
    if unknown:
        raise ValueError('unknown tasks: {}'.format(', '.join(sorted(unknown))))
    tasks = [k for k in TASKS if k in tasks]
    if runs < 1:
        raise ValueError('runs must be >= 1')
    if 'anomaly' in tasks and labels is None:
        logger.warning('no labels given, skipping the anomaly task')
        tasks.remove('anomaly')

    def one(r):
        result, rows, label = _run_once(predictor_factory, seq, ranges,
                                        labels, tasks, seed + r,
                                        keep_source, ndcg_frac)
        logger.info('eval model=%s run=%d %s', label, r, ' '.join(
            '{}={:.4f}'.format(k, v[0]) for k, v in result.items()))
        return result, rows, label

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(one, range(runs)))
    else:
        outputs = [one(r) for r in range(runs)]

    if name is None:
        name = outputs[0][2]
    report = EvalReport(name, runs, seed, tasks, ndcg_frac)
    for k in tasks:
        per_run = [out[0].get(k) for out in outputs]
        if any(v is None for v in per_run):
            logger.warning('task %s had no scorable window in some run, '
                           'left out of the report', k)
            continue
        report.add_task(k, [v[0] for v in per_run],
                        ndcgs=[v[1] for v in per_run] if k == 'anomaly' else None,
                        windows=[v[2] for v in per_run])
    for r, out in enumerate(outputs):
        report.per_window.extend((r,) + row for row in out[1])
    return report


def select_hyperparams(seq, train, valid, grid, seed=0, runs=1,
                       tasks=SELECTION_TASKS, threads=1, tau=DEFAULT_TAU,
                       refit_iters=DEFAULT_REFIT_ITERS, kkt_tol=None):
    """
    Fits every candidate on the training windows and keeps the one with the
    best mean link prediction AUC on the validation windows.
    - train, valid:	Consecutive WindowRanges, as returned by split()
    - grid:	Candidate Hyperparams, e.g. from snmf.hyper_grid
    - tasks:	Link prediction tasks averaged into the selection score
    Ties go to the earlier candidate.
    Returns (best model, report mapping with every candidate's AUCs).
    """
    grid = list(grid)
    if not grid:
        raise ValueError('no hyperparameter candidate to select from')
    if not len(valid):
        raise ValueError('model selection needs at least one validation window')
    if valid.start != train.stop:
        raise ValueError('validation windows must directly follow the '
                         'training windows')
    unknown = set(tasks) - set(KINDS)
    if unknown:
        raise ValueError('selection tasks must be link prediction tasks, got '
                         '{}'.format(', '.join(sorted(unknown))))
    ranges = (train, WindowRange(seq, valid.start, valid.start), valid)
    candidates = []
    best, best_score = None, -np.inf
    for k, hyper in enumerate(grid):
        model, trace = fit(train, hyper, threads=threads, kkt_tol=kkt_tol)
        report = run_eval(lambda: SnmfPredictor(model, tau=tau,
                                                refit_iters=refit_iters),
                          seq, ranges, tasks=tasks, runs=runs, seed=seed,
                          threads=threads, name='snmf')
        aucs = OrderedDict((t.upper(), report.auc_mean(t)) for t in tasks
                           if t.upper() in report.metrics['TASKS'])
        score = float(np.mean(list(aucs.values()))) if aucs else np.nan
        entry = OrderedDict(hyper.as_dict())
        entry['ITERATIONS'] = len(trace)
        entry['AUC'] = aucs
        entry['AUC_MEAN'] = score
        candidates.append(entry)
        logger.info('candidate %d K=%d L=%d validation auc=%.4f', k, hyper.K,
                    hyper.L, score)
        if np.isfinite(score) and score > best_score:
            best, best_score = (k, model), score
    if best is None:
        raise ValueError('no candidate could be scored on the validation '
                         'windows')
    selection = OrderedDict()
    selection['TRAIN_WINDOWS'] = [train.start, train.stop]
    selection['VALID_WINDOWS'] = [valid.start, valid.stop]
    selection['TASKS'] = [t.upper() for t in tasks]
    selection['SEED'] = seed
    selection['HISTORY'] = version.history_string()
    selection['SELECTED'] = best[0]
    selection['CANDIDATES'] = candidates
    logger.info('selected candidate %d K=%d L=%d auc=%.4f', best[0],
                grid[best[0]].K, grid[best[0]].L, best_score)
    return best[1], selection
