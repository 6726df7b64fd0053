"""
Event log readers and ingestion into windowed graph sequences.

Input is delimited text (optionally gzip-compressed) with one event per
line. Only the time, source and destination columns are used, plus any
number of equality filters on other columns (e.g. the LANL authentication
orientation column). Fields are split on the delimiter without quoting,
which matches the LANL and VAST exports.
"""
from itertools import islice
from dateutil import parser as date_parser
from dateutil import tz
import gzip
import logging
import re
import numpy as np
import pandas as pd

from netsep.temporal_graph import (NodeIndex, WindowedGraphSequence,
                                   LabeledEdgeSet, group_by_window)

logger = logging.getLogger(__name__)

# column layouts of well-known captures
PRESETS = {
    # auth.txt: time,src user@domain,dst user@domain,src computer,
    # dst computer,auth type,logon type,auth orientation,success/failure
    'lanl': {'time_col': 0, 'src_col': 3, 'dst_col': 4, 'delimiter': ',',
             'header': False, 'filters': [(7, 'LogOn'), (8, 'Success')]},
    # redteam.txt: time,user@domain,src computer,dst computer
    'lanl-redteam': {'time_col': 0, 'src_col': 2, 'dst_col': 3,
                     'delimiter': ',', 'header': False, 'filters': []},
    # VAST 2013 MC3 NetFlow: TimeSeconds,...,firstSeenSrcIp,firstSeenDestIp,...
    'vast': {'time_col': 0, 'src_col': 5, 'dst_col': 6, 'delimiter': ',',
             'header': True, 'filters': []},
}

EVENT_COLUMNS = ['time', 'src', 'dst']


class ParseError(ValueError):
    def __init__(self, line, reason):
        """
        Malformed input record.
        - line:	1-based physical line number in the input file
        - reason:	What was wrong with the record
        """
        self.line = line
        self.reason = reason
        ValueError.__init__(self, 'line {}: {}'.format(line, reason))


def _open_text(path):
    if str(path).endswith('.gz'):
        return gzip.open(path, 'rt', encoding='utf8')
    with open(path, 'rb') as fl:
        magic = fl.read(2)
    if magic == b'\x1f\x8b':
        return gzip.open(path, 'rt', encoding='utf8')
    return open(path, 'r', encoding='utf8')


def _empty_events():
    return pd.DataFrame({'time': np.zeros(0, dtype=np.int64),
                         'src': np.zeros(0, dtype=str),
                         'dst': np.zeros(0, dtype=str)})


def parse_time_string(value):
    """
    Converts a date-time string to epoch seconds; naive times are UTC
    """
    stamp = date_parser.parse(value)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=tz.UTC)
    return stamp.timestamp()


class EventReader(object):
    def __init__(self, path, time_col=0, src_col=1, dst_col=2, delimiter=',',
                 header=False, filters=None, time_format='epoch',
                 skip_malformed=False, chunksize=500000):
        """
        Streams (time, src, dst) events from a delimited text file.
        - path:	Input file, gzip is detected from the extension or magic bytes
        - time_col, src_col, dst_col:	0-based column positions
        - delimiter:	Field separator. Default is ','
        - header:	Boolean, if True the first line is skipped
        - filters:	List of (column, value) pairs; a record is kept only
                    if every listed column equals its value
        - time_format:	'epoch' for numeric seconds, 'iso' for date-time
                    strings parsed with dateutil
        - skip_malformed:	If True malformed records are logged and dropped,
                    else the first one raises ParseError
        - chunksize:	Number of lines parsed per pandas batch
        """
        if time_format not in ('epoch', 'iso'):
            raise ValueError('time_format {} is not recognized'.format(time_format))
        self.path = str(path)
        self.time_col = int(time_col)
        self.src_col = int(src_col)
        self.dst_col = int(dst_col)
        self.delimiter = delimiter
        self.header = header
        self.filters = [(int(c), str(v)) for c, v in (filters or [])]
        self.time_format = time_format
        self.skip_malformed = skip_malformed
        self.chunksize = int(chunksize)
        self.n_malformed = 0
        self.n_filtered = 0

    @classmethod
    def from_preset(cls, path, preset, **kwargs):
        if preset not in PRESETS:
            raise ValueError('preset {} is not recognized'.format(preset))
        options = dict(PRESETS[preset])
        options.update({k: v for k, v in kwargs.items() if v is not None})
        return cls(path, **options)

    def _parse_times(self, values):
        if self.time_format == 'epoch':
            return pd.to_numeric(values, errors='coerce').to_numpy(dtype=float)
        out = np.empty(len(values))
        for k, v in enumerate(values):
            try:
                out[k] = parse_time_string(v)
            except (ValueError, OverflowError, TypeError):
                out[k] = np.nan
        return out

    def _parse_chunk(self, lines, line_numbers):
        fields = pd.Series(lines, dtype=object).str.rstrip('\r\n') \
            .str.split(self.delimiter, expand=True, regex=False)
        needed = [self.time_col, self.src_col, self.dst_col] + \
            [c for c, _ in self.filters]
        for c in needed:
            if c not in fields.columns:
                fields[c] = None
        bad = fields[needed].isna().any(axis=1).to_numpy()
        reasons = np.full(len(fields), '', dtype=object)
        reasons[bad] = 'expected at least {} fields'.format(max(needed) + 1)
        times = self._parse_times(fields[self.time_col].fillna(''))
        bad_time = ~np.isfinite(times) & ~bad
        bad |= bad_time
        reasons[bad_time] = 'time field is not a valid timestamp'
        src = fields[self.src_col].fillna('').str.strip().to_numpy(dtype=object)
        dst = fields[self.dst_col].fillna('').str.strip().to_numpy(dtype=object)
        empty = ((src == '') | (dst == '')) & ~bad
        bad |= empty
        reasons[empty] = 'empty node name'
        if bad.any():
            if not self.skip_malformed:
                k = int(np.flatnonzero(bad)[0])
                raise ParseError(int(line_numbers[k]), reasons[k])
            for k in np.flatnonzero(bad):
                logger.warning('skipping malformed record file=%s line=%d reason="%s"',
                               self.path, line_numbers[k], reasons[k])
            self.n_malformed += int(bad.sum())
        keep = ~bad
        for c, value in self.filters:
            match = (fields[c].fillna('').str.strip() == value).to_numpy()
            self.n_filtered += int((keep & ~match).sum())
            keep &= match
        return pd.DataFrame({'time': np.floor(times[keep]).astype(np.int64),
                             'src': src[keep].astype(str),
                             'dst': dst[keep].astype(str)})

    def iter_chunks(self):
        """
        Yields DataFrames with columns time (int64 epoch seconds), src, dst
        """
        with _open_text(self.path) as fl:
            line_no = 1
            if self.header:
                fl.readline()
                line_no += 1
            while True:
                lines = list(islice(fl, self.chunksize))
                if not lines:
                    break
                # blank lines carry no record
                rows = [k for k, ln in enumerate(lines) if ln.strip()]
                if rows:
                    yield self._parse_chunk([lines[k] for k in rows],
                                            line_no + np.asarray(rows))
                line_no += len(lines)

    def read(self):
        """
        Returns all events as one DataFrame
        """
        chunks = [c for c in self.iter_chunks() if len(c)]
        if not chunks:
            return _empty_events()
        return pd.concat(chunks, ignore_index=True)


def events_frame(events):
    """
    Normalises any event source to a DataFrame with columns time, src, dst.
    - events:	EventReader, DataFrame with those columns, or an iterable
                of (epoch_seconds, src_name, dst_name) tuples
    """
    if isinstance(events, EventReader):
        return events.read()
    if isinstance(events, pd.DataFrame):
        df = events[EVENT_COLUMNS].copy()
    else:
        rows = list(events)
        if not rows:
            return _empty_events()
        df = pd.DataFrame(rows, columns=EVENT_COLUMNS)
    df['time'] = np.floor(df['time'].to_numpy(dtype=float)).astype(np.int64)
    df['src'] = df['src'].astype(str)
    df['dst'] = df['dst'].astype(str)
    return df


def node_pattern_filter(pattern):
    """
    Returns a node predicate accepting names that fully match the regex
    """
    regex = re.compile(pattern)
    return lambda name: regex.fullmatch(name) is not None


def ingest(events, window_seconds, node_filter=None, t0=None, time_limit=None):
    """
    Builds a WindowedGraphSequence from an unordered event stream.
    - events:	See events_frame
    - window_seconds:	Window length in seconds
    - node_filter:	Optional predicate on node names; events with an endpoint
                    rejected by it are dropped
    - t0:	Start of window 0 in epoch seconds. Default is the earliest
            event time rounded down to a whole window. Earlier events are
            dropped.
    - time_limit:	Optional number of seconds after t0; later events are
                    dropped
    Node ids are assigned in sorted name order over every retained event,
    self-loops included, so permuting the input gives the same sequence.
    """
    window_seconds = int(window_seconds)
    if window_seconds <= 0:
        raise ValueError('window_seconds must be positive')
    df = events_frame(events)
    if node_filter is not None and len(df):
        names = pd.unique(np.concatenate([df['src'].to_numpy(),
                                          df['dst'].to_numpy()]))
        accepted = {n for n in names if node_filter(n)}
        keep = df['src'].isin(accepted) & df['dst'].isin(accepted)
        logger.info('node filter dropped %d of %d events',
                    int((~keep).sum()), len(df))
        df = df[keep]
    if not len(df):
        raise ValueError('empty input')
    times = df['time'].to_numpy(dtype=np.int64)
    if t0 is None:
        t0 = (int(times.min()) // window_seconds) * window_seconds
    t0 = int(t0)
    keep = times >= t0
    if time_limit is not None:
        keep &= times - t0 < int(time_limit)
    if not keep.all():
        logger.info('dropped %d events outside the time range', int((~keep).sum()))
        df = df[keep]
        times = times[keep]
    if not len(df):
        raise ValueError('empty input')
    names, ids = np.unique(np.concatenate([df['src'].to_numpy(dtype=str),
                                           df['dst'].to_numpy(dtype=str)]),
                           return_inverse=True)
    ids = ids.reshape(-1).astype(np.int64)
    src, dst = ids[:len(df)], ids[len(df):]
    windows = (times - t0) // window_seconds
    loops = src == dst
    if loops.any():
        logger.debug('dropped %d self-loop events', int(loops.sum()))
    triples = np.column_stack([windows, src, dst])[~loops]
    T = int(windows.max()) + 1
    seq = WindowedGraphSequence(NodeIndex(names.tolist()), window_seconds, t0,
                                group_by_window(triples, T))
    logger.info('ingested %d events into %d windows over %d nodes '
                '(%d distinct edges)', len(df), seq.T, seq.N, seq.n_edges())
    return seq


def read_events(path, window_seconds, preset=None, node_filter=None,
                node_pattern=None, t0=None, time_limit=None, **reader_kwargs):
    """
    Reads a delimited event file and ingests it.
    - preset:	Optional name in PRESETS; explicit reader options override it
    - node_pattern:	Optional regex, shorthand for a node_filter
    Other keyword arguments are passed to EventReader.
    """
    if node_pattern is not None:
        if node_filter is not None:
            raise ValueError('give either node_filter or node_pattern')
        node_filter = node_pattern_filter(node_pattern)
    if preset is not None:
        reader = EventReader.from_preset(path, preset, **reader_kwargs)
    else:
        reader = EventReader(path, **{k: v for k, v in reader_kwargs.items()
                                      if v is not None})
    seq = ingest(reader, window_seconds, node_filter=node_filter, t0=t0,
                 time_limit=time_limit)
    if reader.n_malformed or reader.n_filtered:
        logger.info('%s: %d malformed records skipped, %d filtered out',
                    path, reader.n_malformed, reader.n_filtered)
    return seq


def read_labels(path, seq, preset=None, **reader_kwargs):
    """
    Reads malicious events (e.g. LANL redteam.txt) and maps them onto the
    windows of an ingested sequence.
    Events whose nodes are unknown, whose window is out of range or whose
    edge is absent from the sequence are dropped with a log line, so the
    returned LabeledEdgeSet always satisfies its invariants.
    """
    if preset is not None:
        reader = EventReader.from_preset(path, preset, **reader_kwargs)
    else:
        reader = EventReader(path, **{k: v for k, v in reader_kwargs.items()
                                      if v is not None})
    df = reader.read()
    src = seq.node_index.ids_of(df['src'])
    dst = seq.node_index.ids_of(df['dst'])
    windows = (df['time'].to_numpy(dtype=np.int64) - seq.t0) // seq.window_seconds
    valid = (src >= 0) & (dst >= 0) & (src != dst) & (windows >= 0) & \
        (windows < seq.T)
    present = np.zeros(len(df), dtype=bool)
    edge_sets = {}
    for k in np.flatnonzero(valid):
        t = int(windows[k])
        if t not in edge_sets:
            edge_sets[t] = seq.edge_set(t)
        present[k] = (int(src[k]), int(dst[k])) in edge_sets[t]
    if (~present).any():
        logger.warning('%s: %d of %d labelled events do not match an edge of '
                       'the sequence', path, int((~present).sum()), len(df))
    triples = np.column_stack([windows, src, dst])[present]
    return LabeledEdgeSet(triples)
