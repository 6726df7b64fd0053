from netsep.eval_metrics import (run_eval, select_hyperparams, SnmfPredictor,
                                 EdgeBankPredictor, EvalReport, TASKS)
from netsep.snmf import Hyperparams, hyper_grid, fit
from netsep.synth import generate_scenario
from netsep.temporal_graph import (NodeIndex, WindowedGraphSequence,
                                   LabeledEdgeSet, split)
from netsep.json_utils import load_json, write_report
import unittest
import tempfile
import numpy as np
import os


def small_sequence(seed=0, N=8, T=12):
    rng = np.random.default_rng(seed)
    windows = []
    for _ in range(T):
        A = rng.random((N, N)) < 0.3
        np.fill_diagonal(A, False)
        A[0, 1] = True
        windows.append(np.argwhere(A))
    index = NodeIndex(['n{}'.format(i) for i in range(N)])
    return WindowedGraphSequence(index, 3600, 0, windows)


def small_labels(seq, start):
    triples = [(t, int(seq.edges(t)[0, 0]), int(seq.edges(t)[0, 1]))
               for t in range(start, seq.T)]
    return LabeledEdgeSet(triples, seq=seq)


class Recorder(object):
    name = 'recorder'

    def __init__(self):
        self.calls = []

    def warm_up(self, t, edges):
        self.calls.append(('warm_up', t))

    def scores(self, t, src, dst):
        self.calls.append(('scores', t))
        return np.zeros(len(src))

    def observe(self, t, edges):
        self.calls.append(('observe', t))


class TestRunEval(unittest.TestCase):
    def test_protocol(self):
        seq = small_sequence()
        ranges = split(seq, 4, 2)
        recorders = []

        def factory():
            recorders.append(Recorder())
            return recorders[-1]
        report = run_eval(factory, seq, ranges, tasks=['random'], runs=1)
        expected = [('warm_up', 4), ('warm_up', 5)]
        for t in range(6, 12):
            expected += [('scores', t), ('scores', t), ('observe', t)]
        self.assertEqual(recorders[0].calls, expected)
        self.assertEqual(report.name, 'recorder')
        self.assertEqual(report.auc_mean('random'), 0.5)
        self.assertEqual(report.task('random')['WINDOWS'], [6])

    def test_report(self):
        seq = small_sequence()
        ranges = split(seq, 6, 2)
        labels = small_labels(seq, 8)
        report = run_eval(lambda: EdgeBankPredictor(seq, ranges[0]), seq,
                          ranges, labels=labels, runs=3, seed=5)
        self.assertEqual(report.name, 'edgebank-inf')
        metrics = report.metrics
        self.assertEqual(list(metrics.keys()), ['MODEL', 'RUNS', 'SEED',
                                                'NDCG_FRAC', 'HISTORY',
                                                'TASKS'])
        self.assertEqual(list(metrics['TASKS'].keys()),
                         ['ANOMALY', 'RANDOM', 'HISTORICAL', 'INDUCTIVE'])
        for task in TASKS:
            entry = report.task(task)
            self.assertEqual(len(entry['AUC']), 3)
            self.assertAlmostEqual(entry['AUC_MEAN'], np.mean(entry['AUC']))
            self.assertAlmostEqual(entry['AUC_STD'], np.std(entry['AUC']))
            self.assertTrue(all(0. <= a <= 1. for a in entry['AUC']))
        anomaly = report.task('anomaly')
        self.assertEqual(len(anomaly['NDCG']), 3)
        self.assertTrue(all(0. <= a <= 1. for a in anomaly['NDCG']))
        # anomaly scores do not depend on the run seed
        self.assertEqual(anomaly['AUC_STD'], 0.)
        self.assertEqual(set(row[0] for row in report.per_window), {0, 1, 2})
        with tempfile.TemporaryDirectory() as tmp:
            path = report.write_to(os.path.join(tmp, 'report'))
            self.assertTrue(path.endswith('.json'))
            self.assertEqual(load_json(path)['TASKS']['RANDOM']['AUC'],
                             report.task('random')['AUC'])
            csv = report.write_per_window(os.path.join(tmp, 'windows.csv'))
            with open(csv) as fl:
                self.assertEqual(fl.readline(),
                                 'model,run,task,t,n_pos,n_neg,auc\n')

    def test_threads(self):
        seq = small_sequence(1)
        ranges = split(seq, 6, 2)
        factory = lambda: EdgeBankPredictor(seq, ranges[0], window=2)
        one = run_eval(factory, seq, ranges, tasks=['random', 'historical'],
                       runs=4, threads=1)
        many = run_eval(factory, seq, ranges, tasks=['random', 'historical'],
                        runs=4, threads=4)
        self.assertEqual(one.metrics, many.metrics)
        self.assertEqual(one.per_window, many.per_window)
        self.assertEqual(one.name, 'edgebank-2')

    def test_missing_labels(self):
        seq = small_sequence()
        ranges = split(seq, 6, 2)
        with self.assertLogs('netsep.eval_metrics', level='WARNING'):
            report = run_eval(lambda: EdgeBankPredictor(seq, ranges[0]), seq,
                              ranges, runs=1)
        self.assertNotIn('ANOMALY', report.metrics['TASKS'])

    def test_invalid(self):
        seq = small_sequence()
        ranges = split(seq, 6, 2)
        factory = lambda: EdgeBankPredictor(seq, ranges[0])
        with self.assertRaises(ValueError):
            run_eval(factory, seq, ranges, tasks=['random', 'nope'])
        with self.assertRaises(ValueError):
            run_eval(factory, seq, ranges, runs=0)

    def test_eval_report(self):
        report = EvalReport('snmf', 2, 0, ['random'], 0.01)
        report.add_task('random', [0.5, 0.7], windows=[3, 3])
        entry = report.task('random')
        self.assertAlmostEqual(entry['AUC_MEAN'], 0.6)
        self.assertAlmostEqual(entry['AUC_STD'], 0.1)
        self.assertNotIn('NDCG', entry)
        report.add_task('anomaly', [0.9], ndcgs=[0.25])
        self.assertEqual(report.task('anomaly')['NDCG_STD'], 0.)


class TestSelection(unittest.TestCase):
    def test_select_hyperparams(self):
        seq = small_sequence(3, T=14)
        train, valid, _ = split(seq, 8, 3)
        grid = hyper_grid(4, (1, 2), max_iters=40)
        model, selection = select_hyperparams(seq, train, valid, grid, seed=2)
        candidates = selection['CANDIDATES']
        self.assertEqual([(c['K'], c['L']) for c in candidates],
                         [(4, 1), (2, 2)])
        for entry in candidates:
            self.assertTrue(set(entry['AUC']) <= {'RANDOM', 'HISTORICAL',
                                                  'INDUCTIVE'})
            self.assertIn('RANDOM', entry['AUC'])
            self.assertAlmostEqual(entry['AUC_MEAN'],
                                   np.mean(list(entry['AUC'].values())))
        means = [c['AUC_MEAN'] for c in candidates]
        chosen = selection['SELECTED']
        self.assertEqual(chosen, int(np.argmax(means)))
        self.assertEqual((model.K, model.L), (grid[chosen].K, grid[chosen].L))
        self.assertEqual(model.T, 8)
        refit, _ = fit(train, grid[chosen])
        self.assertEqual(model, refit)
        self.assertEqual(selection['VALID_WINDOWS'], [8, 11])
        with tempfile.TemporaryDirectory() as tmp:
            path = write_report(selection, os.path.join(tmp, 'selection'))
            self.assertEqual(load_json(path)['SELECTED'], chosen)

    def test_invalid(self):
        seq = small_sequence()
        train, valid, _ = split(seq, 6, 2)
        grid = hyper_grid(4, (2,), max_iters=5)
        with self.assertRaises(ValueError):
            select_hyperparams(seq, train, valid, [])
        with self.assertRaises(ValueError):
            select_hyperparams(seq, train, seq.window_range(6, 6), grid)
        with self.assertRaises(ValueError):
            select_hyperparams(seq, train, seq.window_range(7, 9), grid)
        with self.assertRaises(ValueError):
            select_hyperparams(seq, train, valid, grid, tasks=['anomaly'])


class TestSnmfPredictor(unittest.TestCase):
    def test_history_is_copied(self):
        seq = small_sequence()
        ranges = split(seq, 6, 2)
        model, _ = fit(ranges[0], Hyperparams(K=2, L=2, max_iters=20))
        first = SnmfPredictor(model, tau=3)
        first.warm_up(6, seq.edges(6))
        second = SnmfPredictor(model, history=first.history, tau=3)
        second.observe(7, seq.edges(7))
        self.assertEqual(first.history.last_index, 6)
        self.assertEqual(second.history.last_index, 7)
        scores = first.scores(7, [0, 1], [1, 2])
        self.assertEqual(scores.shape, (2,))
        self.assertTrue(np.all(scores >= 0))


class TestOfficeScenario(unittest.TestCase):
    """
    Two seasonal sources on 200 hosts over two weeks of hourly windows
    """
    @classmethod
    def setUpClass(cls):
        result = generate_scenario('office+background', seed=0)
        cls.seq = result.seq
        cls.labels = result.labels
        cls.ranges = split(cls.seq, 168, 24)
        cls.model, _ = fit(cls.ranges[0], Hyperparams(K=4, L=2, max_iters=300,
                                                      seed=0))

    def test_snmf(self):
        model = self.model
        report = run_eval(lambda: SnmfPredictor(model), self.seq, self.ranges,
                          labels=self.labels, runs=1)
        self.assertGreaterEqual(report.auc_mean('random'), 0.95)
        self.assertGreaterEqual(report.auc_mean('historical'), 0.85)
        self.assertGreaterEqual(report.auc_mean('anomaly'), 0.95)

    def test_against_edgebank(self):
        model = self.model
        seq, ranges = self.seq, self.ranges
        tasks = ['historical']
        snmf = run_eval(lambda: SnmfPredictor(model), seq, ranges,
                        tasks=tasks, runs=1)
        bank = run_eval(lambda: EdgeBankPredictor(seq, ranges[0]), seq,
                        ranges, tasks=tasks, runs=1)
        self.assertGreaterEqual(snmf.auc_mean('historical') -
                                bank.auc_mean('historical'), 0.10)
