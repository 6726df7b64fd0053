"""
Command line entry point: netsep {ingest,train,score,eval,synth,inspect}

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
Logs go to stderr; stdout only carries requested data.
"""
from argparse import ArgumentParser
from collections import OrderedDict
import logging
import os
import sys
import numpy as np
import pandas as pd

from netsep import json_utils as ju
from netsep import version
from netsep.config import load_config, config_values
from netsep.edgebank import DEFAULT_WINDOW
from netsep.eval_metrics import (run_eval, select_hyperparams, write_per_window,
                                 SnmfPredictor, EdgeBankPredictor, TASKS,
                                 DEFAULT_RUNS, DEFAULT_NDCG_FRAC)
from netsep.forecast import MixingHistory, DEFAULT_TAU
from netsep.inspect_sources import (export_source_graph, coefficient_quantiles,
                                    cluster_source_embeddings,
                                    cluster_edge_counts, export_mixing_timeline,
                                    write_table)
from netsep.log_utils import setup_logging
from netsep.model_file import read_model_file, write_model, check_node_digest
from netsep.read_events import PRESETS, read_events, read_labels
from netsep.scoring import (score_window, rank_anomalies, write_scores,
                            write_ranking, refit_init, DEFAULT_REFIT_ITERS)
from netsep.snmf import Hyperparams, hyper_grid, fit, refit_window_weights
from netsep.synth import (BUILDERS, SCENARIO_DEFAULTS, generate_scenario,
                          generate_from_file, write_synthetic)
from netsep.temporal_graph import read_sequence, read_label_file, split

logger = logging.getLogger('netsep.cli')

COMMANDS = ('ingest', 'train', 'score', 'eval', 'synth', 'inspect')

REQUIRED = {
    'ingest': ['input', 'out'],
    'train': ['input', 'out'],
    'score': ['input', 'model', 'out'],
    'eval': ['input', 'out'],
    'synth': ['out'],
    'inspect': ['model', 'out'],
}


class UsageError(Exception):
    pass


class NetsepParser(ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, '{}: error: {}\n'.format(self.prog, message))


def _common_parser():
    common = NetsepParser(add_help=False)
    common.add_argument('--config', default=None,
                        help='YAML file with default values for the flags')
    common.add_argument('--seed', type=int, default=0,
                        help='Seed of every random choice. Default is 0')
    common.add_argument('--threads', type=int, default=1,
                        help='Worker threads. Default is 1')
    common.add_argument('--log-level', default='INFO',
                        help='Logging level. Default is INFO')
    common.add_argument('-q', '--quiet', action='store_true', default=False,
                        help='Only log warnings and errors')
    return common


def _hyper_arguments(p):
    p.add_argument('--K', type=int, default=5,
                   help='Embedding dimension per source. Default is 5')
    p.add_argument('--L', type=int, default=4,
                   help='Number of sources. Default is 4')
    p.add_argument('--l1', type=float, default=1e-3,
                   help='L1 penalty on the mixing coefficients. Default is 1e-3')
    p.add_argument('--l2', type=float, default=1e-5,
                   help='L2 penalty on the embeddings. Default is 1e-5')
    p.add_argument('--max-iters', type=int, default=500,
                   help='Maximum number of update sweeps. Default is 500')
    p.add_argument('--tol', type=float, default=1e-5,
                   help='Relative loss change that stops the fit. Default is 1e-5')
    p.add_argument('--kkt-tol', type=float, default=None,
                   help='Also require the KKT residual below this value '
                        'before stopping. Default is no such check')
    p.add_argument('--tau', type=int, default=DEFAULT_TAU,
                   help='Seasonal period in windows. Default is 168')
    p.add_argument('--refit-iters', type=int, default=DEFAULT_REFIT_ITERS,
                   help='Updates used to refit the mixing vector of a window')


def build_parser():
    common = _common_parser()
    parser = NetsepParser(
        prog='netsep',
        description='Superposed nonnegative matrix factorization of '
                    'windowed communication graphs')
    parser.add_argument('--version', action='version',
                        version=version.version_string())
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True
    parsers = OrderedDict()

    p = sub.add_parser('ingest', parents=[common],
                       help='Turn an event log into a windowed graph file')
    p.add_argument('--input', help='Delimited event file, optionally gzipped')
    p.add_argument('--out', help='Output graph file (.nsg)')
    p.add_argument('--window-secs', type=int, default=3600,
                   help='Window length in seconds. Default is 3600')
    p.add_argument('--preset', choices=sorted(PRESETS), default=None,
                   help='Column layout of a known capture')
    p.add_argument('--time-col', type=int, default=None)
    p.add_argument('--src-col', type=int, default=None)
    p.add_argument('--dst-col', type=int, default=None)
    p.add_argument('--delimiter', default=None)
    p.add_argument('--header', action='store_true', default=None,
                   help='Skip the first line')
    p.add_argument('--filter-col', type=int, action='append', default=None,
                   help='Keep only records whose column equals --filter-val; '
                        'may be repeated')
    p.add_argument('--filter-val', action='append', default=None)
    p.add_argument('--time-format', choices=['epoch', 'iso'], default=None)
    p.add_argument('--t0', type=int, default=None,
                   help='Epoch seconds of the start of window 0')
    p.add_argument('--time-limit', type=int, default=None,
                   help='Keep events less than this many seconds after t0')
    p.add_argument('--node-pattern', default=None,
                   help='Regex that both endpoint names must match')
    p.add_argument('--skip-malformed', action='store_true', default=False)
    p.add_argument('--labels', default=None,
                   help='Malicious events file, e.g. LANL redteam.txt')
    p.add_argument('--labels-preset', choices=sorted(PRESETS),
                   default='lanl-redteam')
    p.add_argument('--labels-out', default=None,
                   help='Label CSV. Default is <out>.labels.csv')
    p.set_defaults(func=cmd_ingest)
    parsers['ingest'] = p

    p = sub.add_parser('train', parents=[common], help='Fit a model')
    p.add_argument('--input', help='Graph file (.nsg)')
    p.add_argument('--out', help='Output model file')
    p.add_argument('--train-windows', type=int, default=None,
                   help='Number of leading windows used. Default is all')
    _hyper_arguments(p)
    p.add_argument('--K-total', type=int, default=None,
                   help='Fit one model per L in --L-grid with K = K_total // L')
    p.add_argument('--L-grid', default='2,3,4,5')
    p.add_argument('--select-on-valid', action='store_true', default=False,
                   help='Fit every --K-grid x --L-grid candidate and keep the '
                        'best one on the validation windows')
    p.add_argument('--K-grid', default='10,20,30,40,50',
                   help='Total embedding budgets tried by --select-on-valid')
    p.add_argument('--valid-windows', type=int, default=None,
                   help='Windows after the training ones used for selection')
    p.add_argument('--select-report', default=None,
                   help='Selection JSON. Default is <out>.selection.json')
    p.add_argument('--trace', default=None, help='CSV file for the loss trace')
    p.set_defaults(func=cmd_train)
    parsers['train'] = p

    p = sub.add_parser('score', parents=[common],
                       help='Score the windows that follow the model history')
    p.add_argument('--input', help='Graph file (.nsg)')
    p.add_argument('--model', help='Model file')
    p.add_argument('--out', help='Score CSV')
    p.add_argument('--start', type=int, default=None,
                   help='First scored window; earlier windows only update '
                        'the history. Default is right after the history')
    p.add_argument('--labels', default=None, help='Label CSV')
    p.add_argument('--rank-out', default=None, help='Anomaly ranking CSV')
    p.add_argument('--top-frac', type=float, default=1.,
                   help='Fraction of the ranking written to --rank-out')
    p.add_argument('--model-out', default=None,
                   help='Model file updated with the refitted history')
    p.add_argument('--refit-iters', type=int, default=DEFAULT_REFIT_ITERS)
    p.set_defaults(func=cmd_score)
    parsers['score'] = p

    p = sub.add_parser('eval', parents=[common],
                       help='Link prediction and anomaly detection metrics')
    p.add_argument('--input', help='Graph file (.nsg)')
    p.add_argument('--model', default=None,
                   help='Model file. Default is to train one')
    p.add_argument('--labels', default=None, help='Label CSV')
    p.add_argument('--out', help='Report JSON')
    p.add_argument('--tasks', default=','.join(TASKS))
    p.add_argument('--runs', type=int, default=DEFAULT_RUNS)
    p.add_argument('--ndcg-frac', type=float, default=DEFAULT_NDCG_FRAC)
    p.add_argument('--train-windows', type=int, default=168)
    p.add_argument('--valid-windows', type=int, default=24)
    p.add_argument('--baselines', default='',
                   help='Comma separated subset of edgebank-inf,edgebank-w')
    p.add_argument('--edgebank-window', type=int, default=DEFAULT_WINDOW)
    p.add_argument('--keep-source', action='store_true', default=False,
                   help='Random negatives keep the source of the positive')
    p.add_argument('--per-window-csv', default=None)
    _hyper_arguments(p)
    p.set_defaults(func=cmd_eval)
    parsers['eval'] = p

    p = sub.add_parser('synth', parents=[common],
                       help='Generate a synthetic graph with known sources')
    p.add_argument('--scenario', default='office+background',
                   help='Builders joined with +, from {}'.format(
                       ', '.join(BUILDERS)))
    p.add_argument('--scenario-file', default=None, help='YAML scenario')
    p.add_argument('--out', help='Output prefix')
    p.add_argument('--N', type=int, default=None)
    p.add_argument('--T', type=int, default=None)
    p.add_argument('--anomalies', type=int, default=None)
    p.add_argument('--anomaly-start', type=int, default=None)
    p.add_argument('--tau', type=int, default=None,
                   help='Seasonal period every source period must divide '
                   '(default: {})'.format(DEFAULT_TAU))
    p.set_defaults(func=cmd_synth)
    parsers['synth'] = p

    p = sub.add_parser('inspect', parents=[common],
                       help='Export per-source graphs, clusters and timelines')
    p.add_argument('--model', help='Model file')
    p.add_argument('--input', default=None,
                   help='Graph file, used to name nodes in the outputs')
    p.add_argument('--out', help='Output prefix')
    p.add_argument('--source', type=int, default=1,
                   help='Source number, 1-based')
    p.add_argument('--theta', type=float, default=None,
                   help='Coefficient threshold of the source graph')
    p.add_argument('--cluster', default=None,
                   help='Range of k for k-means, e.g. 2..8')
    p.set_defaults(func=cmd_inspect)
    parsers['inspect'] = p
    return parser, parsers


def _parse_list(value):
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value]
    return [v.strip() for v in str(value).split(',') if v.strip()]


def _parse_k_range(value):
    text = str(value).replace('-', '..')
    lo, _, hi = text.partition('..')
    return range(int(lo), int(hi or lo) + 1)


def _hyper(args, **overrides):
    values = dict(K=args.K, L=args.L, lambda1=args.l1, lambda2=args.l2,
                  max_iters=args.max_iters, tol=args.tol, seed=args.seed)
    values.update(overrides)
    return Hyperparams(**values)


def cmd_ingest(args):
    reader_kwargs = dict(time_col=args.time_col, src_col=args.src_col,
                         dst_col=args.dst_col, delimiter=args.delimiter,
                         header=args.header, time_format=args.time_format,
                         skip_malformed=args.skip_malformed)
    if args.filter_col or args.filter_val:
        if len(args.filter_col or []) != len(args.filter_val or []):
            raise UsageError('--filter-col and --filter-val must be given '
                             'the same number of times')
        reader_kwargs['filters'] = list(zip(args.filter_col, args.filter_val))
    seq = read_events(args.input, args.window_secs, preset=args.preset,
                      node_pattern=args.node_pattern, t0=args.t0,
                      time_limit=args.time_limit, **reader_kwargs)
    seq.write_to(args.out)
    stats = seq.summary()
    logger.info('wrote graph file=%s %s', args.out,
                ' '.join('{}={}'.format(k, v) for k, v in stats.items()))
    if args.labels:
        labels = read_labels(args.labels, seq, preset=args.labels_preset)
        out = args.labels_out or args.out + '.labels.csv'
        labels.write_to(out)
        logger.info('wrote labels file=%s labelled=%d', out, len(labels))


def _model_path(out, L, grid):
    if not grid:
        return out
    root, ext = os.path.splitext(out)
    return '{}.L{}{}'.format(root, L, ext)


def _select_on_valid(args, seq, train):
    if args.valid_windows is None or args.valid_windows < 1:
        raise UsageError('--select-on-valid needs --valid-windows >= 1')
    stop = train.stop + args.valid_windows
    if stop > seq.T:
        raise ValueError('{} training and {} validation windows exceed the '
                         '{} windows of the input'.format(
                             len(train), args.valid_windows, seq.T))
    valid = seq.window_range(train.stop, stop)
    L_values = [int(v) for v in _parse_list(args.L_grid)]
    grid = [hyper for K_total in _parse_list(args.K_grid)
            for hyper in hyper_grid(int(K_total), L_values, lambda1=args.l1,
                                    lambda2=args.l2, max_iters=args.max_iters,
                                    tol=args.tol, seed=args.seed)]
    model, selection = select_hyperparams(
        seq, train, valid, grid, seed=args.seed, threads=args.threads,
        tau=args.tau, refit_iters=args.refit_iters, kkt_tol=args.kkt_tol)
    write_model(args.out, model, MixingHistory.from_model(model, args.tau))
    report = args.select_report or os.path.splitext(args.out)[0] + \
        '.selection.json'
    logger.info('wrote selection file=%s', ju.write_report(selection, report))


def cmd_train(args):
    seq = read_sequence(args.input)
    n_train = seq.T if args.train_windows is None else args.train_windows
    if not 1 <= n_train <= seq.T:
        raise ValueError('--train-windows must be in [1, {}]'.format(seq.T))
    train = seq.window_range(0, n_train)
    if args.select_on_valid:
        return _select_on_valid(args, seq, train)
    if args.K_total:
        L_values = [int(v) for v in _parse_list(args.L_grid)]
        hypers = hyper_grid(args.K_total, L_values, lambda1=args.l1,
                            lambda2=args.l2, max_iters=args.max_iters,
                            tol=args.tol, seed=args.seed)
    else:
        hypers = [_hyper(args)]
    for hyper in hypers:
        model, trace = fit(train, hyper, threads=args.threads,
                           kkt_tol=args.kkt_tol)
        out = _model_path(args.out, hyper.L, bool(args.K_total))
        write_model(out, model, MixingHistory.from_model(model, args.tau))
        if args.trace:
            trace_path = _model_path(args.trace, hyper.L, bool(args.K_total))
            pd.DataFrame(OrderedDict([
                ('iteration', np.arange(1, len(trace) + 1)),
                ('loss', trace)])).to_csv(trace_path, index=False,
                                          float_format='%.17g',
                                          lineterminator='\n')


def cmd_score(args):
    seq = read_sequence(args.input)
    model, history = read_model_file(args.model)
    check_node_digest(model, seq)
    labels = read_label_file(args.labels, seq) if args.labels else None
    first = history.last_index + 1
    start = first if args.start is None else args.start
    if start < first:
        raise ValueError('--start {} is inside the model history, which ends '
                         'at window {}'.format(start, first - 1))
    scored = []
    for t in range(first, seq.T):
        edges = seq.edges(t)
        if t < start:
            history.append(t, refit_window_weights(
                model, edges, refit_init(history), iters=args.refit_iters))
            continue
        window_scores, _ = score_window(model, history, edges, t,
                                        labels=labels,
                                        refit_iters=args.refit_iters)
        scored.extend(window_scores)
    write_scores(args.out, scored, seq.node_index)
    if args.rank_out:
        write_ranking(args.rank_out, rank_anomalies(scored, args.top_frac),
                      seq.node_index)
    if args.model_out:
        write_model(args.model_out, model, history)


def cmd_eval(args):
    seq = read_sequence(args.input)
    ranges = split(seq, args.train_windows, args.valid_windows)
    if args.model:
        model, _ = read_model_file(args.model)
        check_node_digest(model, seq)
        if model.T != args.train_windows:
            raise ValueError('model was trained on {} windows, --train-windows '
                             'is {}'.format(model.T, args.train_windows))
    else:
        model, _ = fit(ranges[0], _hyper(args), threads=args.threads,
                       kkt_tol=args.kkt_tol)
    labels = read_label_file(args.labels, seq) if args.labels else None
    tasks = _parse_list(args.tasks)
    factories = OrderedDict()
    factories['snmf'] = lambda: SnmfPredictor(model, tau=args.tau,
                                              refit_iters=args.refit_iters)
    for name in _parse_list(args.baselines):
        if name == 'edgebank-inf':
            factories[name] = lambda: EdgeBankPredictor(seq, ranges[0])
        elif name == 'edgebank-w':
            factories['edgebank-{}'.format(args.edgebank_window)] = \
                lambda: EdgeBankPredictor(seq, ranges[0],
                                          window=args.edgebank_window)
        else:
            raise UsageError('unknown baseline {}'.format(name))
    reports = OrderedDict()
    for name, factory in factories.items():
        report = run_eval(factory, seq, ranges, labels=labels, tasks=tasks,
                          runs=args.runs, seed=args.seed,
                          ndcg_frac=args.ndcg_frac,
                          keep_source=args.keep_source, threads=args.threads,
                          name=name)
        reports[name] = report
    out = ju.write_report(OrderedDict((name, report.metrics)
                                      for name, report in reports.items()),
                          args.out)
    logger.info('wrote report file=%s', out)
    if args.per_window_csv:
        write_per_window(args.per_window_csv, list(reports.values()))
        logger.info('wrote per-window file=%s', args.per_window_csv)


def cmd_synth(args):
    if args.scenario_file:
        result = generate_from_file(args.scenario_file, seed=args.seed,
                                    tau=args.tau)
    else:
        overrides = OrderedDict()
        for key, value in (('N', args.N), ('T', args.T),
                           ('anomaly_count', args.anomalies),
                           ('anomaly_start', args.anomaly_start),
                           ('tau', args.tau)):
            if value is not None:
                overrides[key] = value
        result = generate_scenario(args.scenario, seed=args.seed, **overrides)
    paths = write_synthetic(args.out, result)
    settings = OrderedDict((k, result.settings.get(k, v))
                           for k, v in SCENARIO_DEFAULTS.items())
    settings['scenario'] = args.scenario_file or args.scenario
    paths['settings'] = ju.write_report(settings, args.out + '.settings.json')
    for kind, path in paths.items():
        logger.info('wrote %s file=%s', kind, path)


def cmd_inspect(args):
    model, history = read_model_file(args.model)
    if not 1 <= args.source <= model.L:
        raise ValueError('--source must be in [1, {}]'.format(model.L))
    l = args.source - 1
    names = None
    if args.input:
        seq = read_sequence(args.input)
        check_node_digest(model, seq)
        names = seq.node_index.names
    prefix = '{}.source{}'.format(args.out, args.source)
    edges = None
    if args.theta is None:
        for q, value in coefficient_quantiles(model, l, seed=args.seed).items():
            sys.stdout.write('{:g}\t{:.17g}\n'.format(q, value))
    else:
        edges = export_source_graph(model, l, args.theta)
        table = edges.copy()
        if names is not None:
            table.insert(2, 'dst_name', np.asarray(names)[edges['dst']])
            table.insert(2, 'src_name', np.asarray(names)[edges['src']])
        write_table(table, prefix + '.edges.csv')
    if args.cluster:
        result = cluster_source_embeddings(model, l,
                                           _parse_k_range(args.cluster),
                                           seed=args.seed)
        clusters = pd.DataFrame(OrderedDict([
            ('node', np.arange(model.N)), ('cluster', result.assignment)]))
        if names is not None:
            clusters.insert(1, 'name', names)
        write_table(clusters, prefix + '.clusters.csv')
        write_table(pd.DataFrame(OrderedDict([
            ('k', list(result.scores)),
            ('silhouette', list(result.scores.values()))])),
            prefix + '.silhouette.csv')
        if edges is not None:
            write_table(cluster_edge_counts(edges, result.assignment,
                                            result.k),
                        prefix + '.cluster_edges.csv', index=True)
    export_mixing_timeline(history, args.out + '.mixing.csv')


def _apply_config(argv, parsers):
    """
    Installs config file values as defaults of the chosen subcommand
    """
    pre = ArgumentParser(add_help=False)
    pre.add_argument('--config', default=None)
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if known.config is None or command is None:
        return
    config = load_config(known.config)
    all_known = set()
    for p in parsers.values():
        all_known.update(a.dest for a in p._actions)
    p = parsers[command]
    actions = {a.dest: a for a in p._actions}
    values = config_values(config, command, COMMANDS, set(actions), all_known)
    for dest, value in values.items():
        action = actions[dest]
        if isinstance(value, (list, tuple)) and action.nargs is None \
                and action.type is None:
            value = ','.join(str(v) for v in value)
        elif isinstance(value, str) and action.type is not None:
            value = action.type(value)
        p.set_defaults(**{dest: value})


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, parsers = build_parser()
    try:
        _apply_config(argv, parsers)
    except (ValueError, OSError) as err:
        setup_logging('INFO')
        logger.error('configuration: %s', err)
        return 2
    args = parser.parse_args(argv)
    sub = parsers[args.command]
    try:
        setup_logging('WARNING' if args.quiet else args.log_level)
    except ValueError as err:
        sub.error(str(err))
    missing = [d for d in REQUIRED[args.command] if getattr(args, d) is None]
    if missing:
        sub.error('the following arguments are required: {}'.format(
            ', '.join('--' + d.replace('_', '-') for d in missing)))
    if args.threads < 1:
        sub.error('--threads must be >= 1')
    try:
        args.func(args)
    except UsageError as err:
        sub.error(str(err))
    except (ValueError, OSError, FloatingPointError) as err:
        logger.error('%s', err)
        return 2
    return 0


def console_main():
    sys.exit(main())


if __name__ == '__main__':
    console_main()
