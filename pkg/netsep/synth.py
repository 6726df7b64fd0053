"""
Synthetic temporal graphs made of superposed activity sources.

Every source l has nonnegative factors U_l, V_l (N x K_l) and a mixing
profile w_l over windows. Edge (i, j) of window t is drawn independently
with probability min(1, sum_l w_tl (u_il . v_jl)); the diagonal is never
drawn. Anomalies are extra edges on pairs that no active source can ever
produce, placed in windows at or after anomaly_start.

Shipped builders (joined with '+', e.g. 'office+background') lay out
N hosts as two departments of workstations, one server pool per
department and two infrastructure hosts:
    office	working-hours square wave, workstations to their
                department servers
    background	constant traffic from every host to the infrastructure hosts
    admin-burst	rare spikes from a few admin workstations to every server

Scenario files are YAML mappings:

    N: 200
    T: 336
    seed: 0                    # optional
    window_seconds: 3600       # optional
    train: 168                 # optional split hints used by the CLI
    valid: 24
    tau: 168                   # optional, every source period must divide it
    anomalies: {count: 40, start: 192}   # start defaults to train + valid
    sources:
      - builder: office        # a shipped builder, or explicit blocks:
      - name: backup
        blocks:
          - origins: [0, 1, 2]         # node ids, or "a-b" id ranges
            destinations: "190-199"
            rate: 0.3                  # or rates: {dst: rate, ...}
        profile: {kind: square, period: 24, active: 2, phase: 2, level: 1.0}

Profile kinds: constant (level), square (period, active, phase, level),
bursts (probability, level, seed), values (explicit list of length T).
"""
from collections import namedtuple, OrderedDict
import logging
import numpy as np
import yaml

from netsep.forecast import DEFAULT_TAU
from netsep.temporal_graph import (NodeIndex, WindowedGraphSequence,
                                   LabeledEdgeSet)

logger = logging.getLogger(__name__)

SynthResult = namedtuple('SynthResult', ['seq', 'labels', 'truth', 'settings'])

SCENARIO_DEFAULTS = OrderedDict([
    ('N', 200), ('T', 336), ('seed', 0), ('window_seconds', 3600),
    ('train', 168), ('valid', 24), ('anomaly_count', 40),
    ('anomaly_start', 192), ('tau', DEFAULT_TAU)])

OFFICE_PERIOD = 24
OFFICE_ACTIVE = 9
OFFICE_PHASE = 9
CORE_SERVER_RATE = 0.6
SERVER_RATE = 0.015
INFRA_RATE = 0.4
ADMIN_RATE = 0.5
BURST_PROBABILITY = 0.05


def square_wave(T, period=OFFICE_PERIOD, active=OFFICE_ACTIVE,
                phase=OFFICE_PHASE, level=1.):
    """
    level during `active` consecutive windows of every period, starting at
    window `phase` of the period, 0 otherwise
    """
    t = np.arange(T)
    return np.where((t - phase) % period < active, float(level), 0.)


def constant(T, level=1.):
    return np.full(T, float(level))


def bursts(T, probability=BURST_PROBABILITY, level=1., seed=0):
    """
    level in randomly chosen windows, each picked with the given probability
    """
    rng = np.random.default_rng(seed)
    return np.where(rng.random(T) < probability, float(level), 0.)


class SourceSpec(object):
    def __init__(self, name, U, V, profile, period=None):
        """
        One activity source.
        - U, V:	(N, K) nonnegative origin and destination factors
        - profile:	Length T nonnegative mixing profile
        - period:	Optional seasonal period of the profile
        """
        self.name = name
        self.U = np.asarray(U, dtype=float)
        self.V = np.asarray(V, dtype=float)
        self.profile = np.asarray(profile, dtype=float)
        self.period = period
        if self.U.shape != self.V.shape or self.U.ndim != 2:
            raise ValueError('source {}: U and V must be (N, K) arrays of the '
                             'same shape'.format(name))
        if np.any(self.U < 0) or np.any(self.V < 0) or np.any(self.profile < 0):
            raise ValueError('source {}: factors and profile must be '
                             'nonnegative'.format(name))
        if np.max(self.U @ self.V.T, initial=0.) > 1:
            raise ValueError('source {}: rates must lie in [0, 1]'.format(name))

    @classmethod
    def from_blocks(cls, name, N, blocks, profile, period=None):
        """
        Builds factors with one column per block.
        - blocks:	List of (origin ids, {destination id: rate}) pairs
        """
        U = np.zeros((N, len(blocks)))
        V = np.zeros((N, len(blocks)))
        for k, (origins, rates) in enumerate(blocks):
            U[np.asarray(list(origins), dtype=np.int64), k] = 1.
            for j, rate in rates.items():
                V[int(j), k] = rate
        return cls(name, U, V, profile, period=period)

    @property
    def N(self):
        return self.U.shape[0]

    @property
    def K(self):
        return self.U.shape[1]

    def check_period(self, tau):
        if self.period is not None and tau % self.period:
            raise ValueError('source {}: period {} does not divide tau={}'.format(
                self.name, self.period, tau))

    def probabilities(self):
        """
        Unmixed N x N rates with the diagonal zeroed
        """
        P = self.U @ self.V.T
        np.fill_diagonal(P, 0.)
        return P


class GroundTruth(object):
    def __init__(self, specs):
        self.specs = list(specs)
        self.U = [s.U for s in self.specs]
        self.V = [s.V for s in self.specs]
        self.W = np.stack([s.profile for s in self.specs], axis=1)
        self._rates = [s.probabilities() for s in self.specs]

    @property
    def L(self):
        return len(self.specs)

    def probabilities(self, t):
        P = sum(w * R for w, R in zip(self.W[t], self._rates))
        return np.clip(P, 0., 1.)

    def support(self):
        """
        Boolean N x N mask of pairs some active source can produce
        """
        N = self.specs[0].N
        mask = np.zeros((N, N), dtype=bool)
        for l, R in enumerate(self._rates):
            if self.W[:, l].max(initial=0.) > 0:
                mask |= R > 0
        return mask

    def write_to(self, path):
        arrays = {'W': self.W}
        for l in range(self.L):
            arrays['U_{}'.format(l)] = self.U[l]
            arrays['V_{}'.format(l)] = self.V[l]
        np.savez(path, **arrays)
        return path


def _draw_window(P, seed):
    rng = np.random.default_rng(seed)
    hits = rng.random(P.shape) < P
    np.fill_diagonal(hits, False)
    return np.argwhere(hits).astype(np.int64)


def generate(specs, N, T, seed=0, anomaly_count=0, anomaly_start=None,
             window_seconds=3600, t0=0, node_prefix='h', tau=None):
    """
    Draws a WindowedGraphSequence from superposed sources.
    - anomaly_start:	First window open to anomalies, required with
            anomaly_count; keep it past the training and validation windows
    - tau:	Optional seasonal period every source period must divide
    Returns a SynthResult (seq, labels, truth, settings).
    """
    specs = list(specs)
    if not specs:
        raise ValueError('at least one source is needed')
    for s in specs:
        if s.N != N or len(s.profile) != T:
            raise ValueError('source {} has N={} and {} windows, expected N={} '
                             'T={}'.format(s.name, s.N, len(s.profile), N, T))
        if tau is not None:
            s.check_period(tau)
    if anomaly_count and anomaly_start is None:
        raise ValueError('anomaly_start is required to inject anomalies')
    truth = GroundTruth(specs)
    window_seeds, anomaly_seed = np.random.SeedSequence(seed).spawn(2)
    children = window_seeds.spawn(T)
    windows = [_draw_window(truth.probabilities(t), children[t])
               for t in range(T)]
    triples = np.zeros((0, 3), dtype=np.int64)
    if anomaly_count:
        triples = inject_anomalies(truth, T, anomaly_count, anomaly_start,
                                   anomaly_seed)
        for t, i, j in triples:
            windows[t] = np.vstack([windows[t], [[i, j]]])
    width = len(str(N - 1))
    names = ['{}{:0{}d}'.format(node_prefix, i, width) for i in range(N)]
    seq = WindowedGraphSequence(NodeIndex(names), window_seconds, t0, windows)
    labels = LabeledEdgeSet(triples, seq=seq)
    logger.info('generated sources=%s N=%d T=%d edges=%d anomalies=%d',
                '+'.join(s.name for s in specs), N, T, seq.n_edges(),
                len(labels))
    settings = OrderedDict([('N', N), ('T', T), ('seed', seed),
                            ('window_seconds', window_seconds),
                            ('anomaly_count', anomaly_count),
                            ('anomaly_start', anomaly_start)])
    return SynthResult(seq, labels, truth, settings)


def inject_anomalies(truth, T, count, start, seed):
    """
    Distinct (t, i, j) triples on pairs outside the support of every active
    source, with t drawn from [start, T)
    """
    zero = ~truth.support()
    np.fill_diagonal(zero, False)
    candidates = np.argwhere(zero)
    n_windows = T - int(start)
    if not len(candidates) or n_windows <= 0:
        raise ValueError('infeasible anomaly injection: {} zero-probability '
                         'pairs, {} eligible windows'.format(
                             len(candidates), max(n_windows, 0)))
    total = len(candidates) * n_windows
    if count > total:
        raise ValueError('infeasible anomaly injection: {} anomalies '
                         'requested, {} slots available'.format(count, total))
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=int(count), replace=False)
    t = int(start) + picks // len(candidates)
    pairs = candidates[picks % len(candidates)]
    triples = np.column_stack([t, pairs]).astype(np.int64)
    order = np.lexsort((triples[:, 2], triples[:, 1], triples[:, 0]))
    return triples[order]


class OfficeLayout(object):
    def __init__(self, N):
        """
        Host roles for the shipped builders, laid out by id:
        workstations of department A, of department B, servers of A,
        servers of B, then two infrastructure hosts
        """
        if N < 12:
            raise ValueError('the office layout needs at least 12 hosts')
        self.N = N
        self.infra = np.arange(N - 2, N)
        n_servers = max(4, int(round(0.19 * N)))
        n_servers -= n_servers % 2
        n_ws = N - 2 - n_servers
        half_ws = n_ws // 2
        self.dept_a = np.arange(0, half_ws)
        self.dept_b = np.arange(half_ws, n_ws)
        half_srv = n_servers // 2
        self.servers_a = np.arange(n_ws, n_ws + half_srv)
        self.servers_b = np.arange(n_ws + half_srv, n_ws + n_servers)
        self.admins = np.concatenate([self.dept_a[:2], self.dept_b[:2]])

    @staticmethod
    def server_rates(servers, n_core=3):
        return OrderedDict((int(s), CORE_SERVER_RATE if k < n_core else SERVER_RATE)
                           for k, s in enumerate(servers))


def office_source(layout, T, seed=0):
    blocks = [(layout.dept_a, layout.server_rates(layout.servers_a)),
              (layout.dept_b, layout.server_rates(layout.servers_b))]
    return SourceSpec.from_blocks('office', layout.N, blocks, square_wave(T),
                                  period=OFFICE_PERIOD)


def background_source(layout, T, seed=0):
    rates = OrderedDict((int(i), INFRA_RATE) for i in layout.infra)
    blocks = [(np.arange(layout.N), rates)]
    return SourceSpec.from_blocks('background', layout.N, blocks, constant(T))


def admin_burst_source(layout, T, seed=0):
    servers = np.concatenate([layout.servers_a, layout.servers_b])
    rates = OrderedDict((int(s), ADMIN_RATE) for s in servers)
    blocks = [(layout.admins, rates)]
    return SourceSpec.from_blocks('admin-burst', layout.N, blocks,
                                  bursts(T, seed=seed))


BUILDERS = OrderedDict([('office', office_source),
                        ('background', background_source),
                        ('admin-burst', admin_burst_source)])


def build_sources(scenario, N, T, seed=0):
    """
    Sources for a '+'-joined list of builder names
    """
    layout = OfficeLayout(N)
    specs = []
    for k, name in enumerate(scenario.split('+')):
        name = name.strip()
        if name not in BUILDERS:
            raise ValueError('scenario {} is not recognized, choose from '
                             '{}'.format(name, ', '.join(BUILDERS)))
        specs.append(BUILDERS[name](layout, T, seed=seed + k))
    return specs


def generate_scenario(scenario, seed=0, **overrides):
    """
    Generates a shipped scenario; keyword arguments override
    SCENARIO_DEFAULTS. Anomalies start after the train and validation
    windows unless anomaly_start is given.
    """
    settings = OrderedDict(SCENARIO_DEFAULTS)
    settings['seed'] = seed
    settings.update(overrides)
    if overrides.get('anomaly_start') is None:
        settings['anomaly_start'] = settings['train'] + settings['valid']
    specs = build_sources(scenario, settings['N'], settings['T'],
                          seed=settings['seed'])
    result = generate(specs, settings['N'], settings['T'],
                      seed=settings['seed'],
                      anomaly_count=settings['anomaly_count'],
                      anomaly_start=settings['anomaly_start'],
                      window_seconds=settings['window_seconds'],
                      tau=settings['tau'])
    result.settings.update(settings)
    return result


def _node_ids(value):
    if isinstance(value, str):
        ids = []
        for part in value.split(','):
            lo, _, hi = part.strip().partition('-')
            ids.extend(range(int(lo), int(hi or lo) + 1))
        return np.array(ids, dtype=np.int64)
    if isinstance(value, int):
        return np.array([value], dtype=np.int64)
    return np.array(list(value), dtype=np.int64)


def _profile(entry, T):
    kind = entry.get('kind', 'constant')
    if kind == 'constant':
        return constant(T, entry.get('level', 1.))
    if kind == 'square':
        return square_wave(T, entry.get('period', OFFICE_PERIOD),
                           entry.get('active', OFFICE_ACTIVE),
                           entry.get('phase', OFFICE_PHASE),
                           entry.get('level', 1.))
    if kind == 'bursts':
        return bursts(T, entry.get('probability', BURST_PROBABILITY),
                      entry.get('level', 1.), entry.get('seed', 0))
    if kind == 'values':
        values = np.asarray(entry['values'], dtype=float)
        if len(values) != T:
            raise ValueError('profile has {} values, expected {}'.format(
                len(values), T))
        return values
    raise ValueError('profile kind {} is not recognized'.format(kind))


def sources_from_config(config):
    """
    SourceSpecs and settings from a parsed scenario mapping
    """
    settings = OrderedDict(SCENARIO_DEFAULTS)
    for key in ('N', 'T', 'seed', 'window_seconds', 'train', 'valid',
                'tau'):
        if key in config:
            settings[key] = int(config[key])
    anomalies = config.get('anomalies') or {}
    settings['anomaly_count'] = int(anomalies.get('count', 0))
    settings['anomaly_start'] = int(anomalies.get(
        'start', settings['train'] + settings['valid']))
    N, T = settings['N'], settings['T']
    layout = None
    specs = []
    for k, entry in enumerate(config.get('sources') or []):
        if 'builder' in entry:
            if entry['builder'] not in BUILDERS:
                raise ValueError('builder {} is not recognized'.format(
                    entry['builder']))
            layout = layout or OfficeLayout(N)
            specs.append(BUILDERS[entry['builder']](
                layout, T, seed=settings['seed'] + k))
            continue
        blocks = []
        for block in entry.get('blocks', []):
            if 'rates' in block:
                rates = OrderedDict((int(j), float(r))
                                    for j, r in block['rates'].items())
            else:
                rates = OrderedDict((int(j), float(block['rate']))
                                    for j in _node_ids(block['destinations']))
            blocks.append((_node_ids(block['origins']), rates))
        profile_entry = entry.get('profile') or {}
        specs.append(SourceSpec.from_blocks(
            entry.get('name', 'source{}'.format(k)), N, blocks,
            _profile(profile_entry, T), period=profile_entry.get('period')))
    if not specs:
        raise ValueError('scenario defines no sources')
    return specs, settings


def load_scenario(path):
    with open(path, 'r') as fl:
        config = yaml.safe_load(fl)
    if not isinstance(config, dict):
        raise ValueError('{}: scenario file must be a YAML mapping'.format(path))
    return sources_from_config(config)


def generate_from_file(path, seed=None, tau=None):
    specs, settings = load_scenario(path)
    if seed is not None:
        settings['seed'] = seed
    if tau is not None:
        settings['tau'] = tau
    result = generate(specs, settings['N'], settings['T'],
                      seed=settings['seed'],
                      anomaly_count=settings['anomaly_count'],
                      anomaly_start=settings['anomaly_start'],
                      window_seconds=settings['window_seconds'],
                      tau=settings['tau'])
    result.settings.update(settings)
    return result


def write_synthetic(prefix, result):
    """
    Writes prefix.nsg (+ .nodes sidecar), prefix.labels.csv and
    prefix.truth.npz; returns the written paths
    """
    paths = OrderedDict()
    paths['graph'] = prefix + '.nsg'
    result.seq.write_to(paths['graph'])
    paths['labels'] = prefix + '.labels.csv'
    result.labels.write_to(paths['labels'])
    paths['truth'] = prefix + '.truth.npz'
    result.truth.write_to(paths['truth'])
    return paths
