"""
Windowed temporal graphs of host-to-host communications.

A capture is turned into a sequence of binary directed graphs, one per
fixed-length time window, all sharing the same node set. Self-loops are
never stored.
"""
from collections import OrderedDict
import hashlib
import logging
import re
import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

GRAPH_MAGIC = '#netsep-graph'
GRAPH_VERSION = 'v1'
_HEADER_RE = re.compile(
    r'^#netsep-graph (?P<version>v\d+) N=(?P<N>\d+) W=(?P<W>\d+) '
    r'T0=(?P<T0>-?\d+) T=(?P<T>\d+)$')


class NodeIndex(object):
    def __init__(self, names):
        """
        Bijective map between node names and dense integer ids.
        - names:	Node names in id order, name of id i at position i.
        """
        self.names = [str(n) for n in names]
        self._ids = {name: i for i, name in enumerate(self.names)}
        if len(self._ids) != len(self.names):
            raise ValueError('node names must be unique')

    @classmethod
    def from_names(cls, names):
        """
        Builds the index from an unordered collection of names. Ids are
        assigned in sorted name order so that the result does not depend on
        the order in which names were seen.
        """
        return cls(np.unique(np.asarray(list(names), dtype=str)).tolist())

    @property
    def N(self):
        return len(self.names)

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        return isinstance(other, NodeIndex) and self.names == other.names

    def __ne__(self, other):
        return not self.__eq__(other)

    def id_of(self, name):
        return self._ids[name]

    def name_of(self, node_id):
        return self.names[node_id]

    def ids_of(self, names):
        """
        Returns ids for an array of names, -1 for names not in the index
        """
        return np.array([self._ids.get(n, -1) for n in names], dtype=np.int64)

    def names_of(self, ids):
        names = np.asarray(self.names, dtype=object)
        return names[np.asarray(ids, dtype=np.int64)]

    def digest(self):
        """
        sha256 of the node map; stored in model files to catch scoring a
        model against a differently indexed graph
        """
        h = hashlib.sha256()
        for name in self.names:
            h.update(name.encode('utf8'))
            h.update(b'\n')
        return h.digest()

    def write_to(self, path):
        df = pd.DataFrame(OrderedDict([('id', np.arange(self.N)),
                                       ('name', self.names)]))
        df.to_csv(path, index=False, lineterminator='\n')

    @classmethod
    def read_from(cls, path):
        df = pd.read_csv(path, dtype={'id': np.int64, 'name': str},
                         keep_default_na=False, na_filter=False)
        ids = df['id'].to_numpy()
        if not np.array_equal(ids, np.arange(len(ids))):
            raise ValueError('{}: node ids are not dense'.format(path))
        return cls(df['name'].tolist())


def _canonical_edges(edges, N):
    """
    Returns a read-only (m, 2) int64 array of distinct edges sorted by
    (src, dst), with self-loops rejected.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges):
        if edges.min() < 0 or edges.max() >= N:
            raise ValueError('edge references a node id outside [0, {})'.format(N))
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError('self-loops are not allowed in a window')
    keys = np.unique(edges[:, 0] * N + edges[:, 1])
    out = np.stack([keys // max(N, 1), keys % max(N, 1)], axis=1) \
        if len(keys) else np.zeros((0, 2), dtype=np.int64)
    out = out.astype(np.int64)
    out.setflags(write=False)
    return out


class WindowedGraphSequence(object):
    def __init__(self, node_index, window_seconds, t0, windows):
        """
        Immutable sequence of per-window directed edge sets.
        - node_index:	NodeIndex shared by every window
        - window_seconds:	Window length in seconds, positive integer
        - t0:	Epoch seconds at which window 0 starts
        - windows:	List of edge collections, one per window, each an
                    iterable of (src_id, dst_id) pairs. Duplicates collapse.
        """
        if int(window_seconds) <= 0:
            raise ValueError('window_seconds must be positive')
        self.node_index = node_index
        self.window_seconds = int(window_seconds)
        self.t0 = int(t0)
        self._windows = [_canonical_edges(w, node_index.N) for w in windows]

    @property
    def N(self):
        return self.node_index.N

    @property
    def T(self):
        return len(self._windows)

    def __len__(self):
        return len(self._windows)

    def __eq__(self, other):
        if not isinstance(other, WindowedGraphSequence):
            return False
        return (self.node_index == other.node_index
                and self.window_seconds == other.window_seconds
                and self.t0 == other.t0 and self.T == other.T
                and all(np.array_equal(a, b) for a, b in
                        zip(self._windows, other._windows)))

    def __ne__(self, other):
        return not self.__eq__(other)

    def edges(self, t):
        """
        Returns the (m, 2) array of edges in window t
        """
        return self._windows[t]

    def edge_keys(self, t):
        """
        Returns sorted int64 keys src * N + dst for window t
        """
        e = self._windows[t]
        return e[:, 0] * self.N + e[:, 1]

    def edge_set(self, t):
        return set(map(tuple, self._windows[t].tolist()))

    def edge_counts(self):
        return np.array([len(w) for w in self._windows], dtype=np.int64)

    def n_edges(self):
        return int(self.edge_counts().sum())

    def window_of(self, epoch_seconds):
        return int((int(epoch_seconds) - self.t0) // self.window_seconds)

    def node_digest(self):
        return self.node_index.digest()

    def triples(self):
        """
        Returns every temporal edge as a (n, 3) array of (t, src, dst)
        in window order
        """
        return _stack_windows(self._windows, 0)

    def full_range(self):
        return WindowRange(self, 0, self.T)

    def window_range(self, start, stop):
        return WindowRange(self, start, stop)

    def summary(self):
        """
        Node count, window count and min/median/max edges per window
        """
        counts = self.edge_counts()
        stats = OrderedDict()
        stats['NODES'] = self.N
        stats['WINDOWS'] = self.T
        stats['EDGES'] = int(counts.sum())
        stats['MIN_EDGES'] = int(counts.min()) if len(counts) else 0
        stats['MED_EDGES'] = float(np.median(counts)) if len(counts) else 0.
        stats['MAX_EDGES'] = int(counts.max()) if len(counts) else 0
        return stats

    def write_to(self, path, node_path=None):
        """
        Writes the canonical sequence file and its node-map sidecar.
        - path:	Output sequence file (one `t,src_id,dst_id` line per edge)
        - node_path:	Node map sidecar, defaults to path + '.nodes'
        """
        if node_path is None:
            node_path = path + '.nodes'
        header = '{} {} N={} W={} T0={} T={}'.format(
            GRAPH_MAGIC, GRAPH_VERSION, self.N, self.window_seconds,
            self.t0, self.T)
        triples = self.triples()
        with open(path, 'w', newline='') as fl:
            fl.write(header + '\n')
            pd.DataFrame(triples).to_csv(fl, header=False, index=False,
                                         lineterminator='\n')
        self.node_index.write_to(node_path)


def _stack_windows(windows, offset):
    parts = [np.column_stack([np.full(len(w), t + offset, dtype=np.int64), w])
             for t, w in enumerate(windows) if len(w)]
    if not parts:
        return np.zeros((0, 3), dtype=np.int64)
    return np.concatenate(parts).astype(np.int64)


def read_sequence(path, node_path=None):
    """
    Reads a canonical sequence file written by WindowedGraphSequence.write_to
    - path:	Sequence file
    - node_path:	Node map sidecar, defaults to path + '.nodes'
    """
    if node_path is None:
        node_path = path + '.nodes'
    with open(path, 'r') as fl:
        header = fl.readline().rstrip('\n')
    match = _HEADER_RE.match(header)
    if match is None:
        raise ValueError('{}: not a netsep graph file'.format(path))
    if match.group('version') != GRAPH_VERSION:
        raise ValueError('{}: unsupported graph file version {}'.format(
            path, match.group('version')))
    N, T = int(match.group('N')), int(match.group('T'))
    node_index = NodeIndex.read_from(node_path)
    if node_index.N != N:
        raise ValueError('{}: header says N={} but node map has {} nodes'.format(
            path, N, node_index.N))
    try:
        triples = pd.read_csv(path, skiprows=1, header=None,
                              dtype=np.int64).to_numpy()
    except pd.errors.EmptyDataError:
        triples = np.zeros((0, 3), dtype=np.int64)
    if len(triples) and (triples[:, 0].min() < 0 or triples[:, 0].max() >= T):
        raise ValueError('{}: window index outside [0, {})'.format(path, T))
    return WindowedGraphSequence(node_index, int(match.group('W')),
                                 int(match.group('T0')),
                                 group_by_window(triples, T))


def group_by_window(triples, T):
    """
    Splits (t, src, dst) triples into a list of T (m, 2) edge arrays
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    order = np.argsort(triples[:, 0], kind='stable')
    triples = triples[order]
    bounds = np.searchsorted(triples[:, 0], np.arange(T + 1))
    return [triples[bounds[t]:bounds[t + 1], 1:] for t in range(T)]


class WindowRange(object):
    def __init__(self, seq, start, stop):
        """
        Contiguous view [start, stop) over the windows of a sequence.
        Window indices passed to edges() are global sequence indices.
        """
        if not 0 <= start <= stop <= seq.T:
            raise ValueError('window range [{}, {}) exceeds sequence of {} '
                             'windows'.format(start, stop, seq.T))
        self.seq = seq
        self.start = int(start)
        self.stop = int(stop)

    @property
    def N(self):
        return self.seq.N

    def __len__(self):
        return self.stop - self.start

    def __repr__(self):
        return 'WindowRange({}, {})'.format(self.start, self.stop)

    @property
    def indices(self):
        return range(self.start, self.stop)

    def edges(self, t):
        if not self.start <= t < self.stop:
            raise IndexError('window {} outside {!r}'.format(t, self))
        return self.seq.edges(t)

    def windows(self):
        return [self.seq.edges(t) for t in self.indices]

    def pair_keys(self):
        """
        Returns the sorted distinct src * N + dst keys seen anywhere in
        the range
        """
        keys = [self.seq.edge_keys(t) for t in self.indices]
        if not keys:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(keys))


def split(seq, train_windows, valid_windows):
    """
    Splits a sequence into contiguous train, validation and test ranges
    - seq:	WindowedGraphSequence
    - train_windows:	Number of leading windows used for training
    - valid_windows:	Number of following windows held out for validation
    The test range covers every remaining window and must not be empty.
    """
    train_windows, valid_windows = int(train_windows), int(valid_windows)
    if train_windows < 1 or valid_windows < 0:
        raise ValueError('train_windows must be >= 1 and valid_windows >= 0')
    if train_windows + valid_windows >= seq.T:
        raise ValueError('train ({}) + valid ({}) windows leave no test range '
                         'in a sequence of {} windows'.format(
                             train_windows, valid_windows, seq.T))
    cut = train_windows + valid_windows
    return (WindowRange(seq, 0, train_windows),
            WindowRange(seq, train_windows, cut),
            WindowRange(seq, cut, seq.T))


class LabeledEdgeSet(object):
    def __init__(self, triples, seq=None):
        """
        Set of (window, src_id, dst_id) triples labelled malicious.
        - triples:	Iterable of (t, src, dst)
        - seq:	Optional sequence; when given every triple must exist in it
        """
        arr = np.asarray(list(triples) if not isinstance(triples, np.ndarray)
                         else triples, dtype=np.int64).reshape(-1, 3)
        arr = np.unique(arr, axis=0) if len(arr) else arr
        self.triples = arr
        self._set = set(map(tuple, arr.tolist()))
        if seq is not None:
            self.check_against(seq)

    def __len__(self):
        return len(self.triples)

    def __contains__(self, triple):
        return tuple(int(x) for x in triple) in self._set

    def __iter__(self):
        return iter(map(tuple, self.triples.tolist()))

    def check_against(self, seq):
        edge_sets = {}
        for t, i, j in self:
            if not 0 <= t < seq.T:
                raise ValueError('labelled window {} does not exist'.format(t))
            if t not in edge_sets:
                edge_sets[t] = seq.edge_set(t)
            if (i, j) not in edge_sets[t]:
                raise ValueError('labelled edge ({}, {}, {}) is not in the '
                                 'sequence'.format(t, i, j))

    def mask(self, t, src, dst):
        """
        Boolean array telling which of the (src, dst) edges of window t
        are labelled
        """
        return np.array([(int(t), int(i), int(j)) in self._set
                         for i, j in zip(src, dst)], dtype=bool)

    def windows(self):
        return np.unique(self.triples[:, 0]) if len(self.triples) else \
            np.zeros(0, dtype=np.int64)

    def write_to(self, path):
        df = pd.DataFrame(self.triples, columns=['t', 'src_id', 'dst_id'])
        df.to_csv(path, index=False, lineterminator='\n')


def read_label_file(path, seq=None):
    """
    Reads a `t,src_id,dst_id` label file written by LabeledEdgeSet.write_to
    """
    df = pd.read_csv(path, dtype=np.int64)
    return LabeledEdgeSet(df[['t', 'src_id', 'dst_id']].to_numpy(), seq=seq)
