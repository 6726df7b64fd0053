from netsep.read_events import (EventReader, ParseError, ingest, read_events,
                                read_labels, events_frame, parse_time_string)
from netsep.data import DATA_PATH
import unittest
import tempfile
import shutil
import gzip
import numpy as np
import os

lanl_file = os.path.join(DATA_PATH, 'lanl_auth.txt')
redteam_file = os.path.join(DATA_PATH, 'lanl_redteam.txt')
malformed_file = os.path.join(DATA_PATH, 'events_malformed.csv')
iso_file = os.path.join(DATA_PATH, 'events_iso.csv')

events = [(0, 'a', 'b'), (10, 'a', 'b'), (3600, 'b', 'a')]


class TestIngest(unittest.TestCase):
    def test_windows(self):
        seq = ingest(events, 3600)
        self.assertEqual(seq.T, 2)
        self.assertEqual(seq.node_index.names, ['a', 'b'])
        self.assertEqual(seq.edge_set(0), {(0, 1)})
        self.assertEqual(seq.edge_set(1), {(1, 0)})
        self.assertEqual(seq.t0, 0)

    def test_unsorted(self):
        rng = np.random.default_rng(7)
        stream = [(int(t), 'n{}'.format(i), 'n{}'.format(j)) for t, i, j in
                  zip(rng.integers(0, 20000, 200), rng.integers(0, 12, 200),
                      rng.integers(0, 12, 200))]
        shuffled = [stream[k] for k in rng.permutation(len(stream))]
        self.assertEqual(ingest(stream, 3600), ingest(shuffled, 3600))

    def test_self_loops(self):
        seq = ingest([(0, 'a', 'b'), (5, 'c', 'c')], 3600)
        self.assertEqual(seq.N, 3)
        self.assertEqual(seq.n_edges(), 1)

    def test_empty_window(self):
        seq = ingest([(0, 'a', 'b'), (7200, 'b', 'a')], 3600)
        self.assertEqual(seq.T, 3)
        np.testing.assert_equal(seq.edge_counts(), [1, 0, 1])

    def test_t0_floor(self):
        seq = ingest([(5000, 'a', 'b'), (7300, 'b', 'a')], 3600)
        self.assertEqual(seq.t0, 3600)
        np.testing.assert_equal(seq.edge_counts(), [1, 1])

    def test_t0_time_limit(self):
        stream = [(100, 'a', 'b'), (3700, 'b', 'c'), (7300, 'c', 'd'),
                  (11000, 'd', 'a')]
        seq = ingest(stream, 3600, t0=3600, time_limit=7200)
        self.assertEqual(seq.node_index.names, ['b', 'c', 'd'])
        self.assertEqual(seq.T, 2)
        self.assertEqual(seq.t0, 3600)

    def test_node_filter(self):
        stream = [(0, '10.0.0.1', '10.0.0.2'), (1, '10.0.0.1', 'bad')]
        seq = ingest(stream, 60, node_filter=lambda n: n.startswith('10.'))
        self.assertEqual(seq.N, 2)
        self.assertEqual(seq.n_edges(), 1)

    def test_empty(self):
        with self.assertRaisesRegex(ValueError, 'empty input'):
            ingest([], 3600)
        with self.assertRaisesRegex(ValueError, 'empty input'):
            ingest(events, 3600, t0=10 ** 6)

    def test_window_seconds(self):
        with self.assertRaises(ValueError):
            ingest(events, 0)

    def test_events_frame(self):
        df = events_frame([(1.7, 'a', 'b')])
        self.assertEqual(list(df.columns), ['time', 'src', 'dst'])
        self.assertEqual(df['time'][0], 1)


class TestEventReader(unittest.TestCase):
    def test_lanl_preset(self):
        seq = read_events(lanl_file, 3600, preset='lanl')
        self.assertEqual(seq.node_index.names, ['C1', 'C2', 'C3', 'C4'])
        self.assertEqual(seq.T, 3)
        self.assertEqual(seq.edge_set(0), {(0, 1), (1, 2)})
        self.assertEqual(seq.edge_set(1), {(0, 1), (3, 1)})
        self.assertEqual(seq.edge_set(2), {(1, 0)})

    def test_filters_counted(self):
        reader = EventReader.from_preset(lanl_file, 'lanl')
        df = reader.read()
        self.assertEqual(len(df), 7)
        self.assertEqual(reader.n_filtered, 2)
        self.assertEqual(reader.n_malformed, 0)

    def test_preset_override(self):
        reader = EventReader.from_preset(lanl_file, 'lanl', filters=[],
                                         time_col=None)
        self.assertEqual(len(reader.read()), 9)
        with self.assertRaises(ValueError):
            EventReader.from_preset(lanl_file, 'nope')

    def test_malformed(self):
        reader = EventReader(malformed_file)
        with self.assertRaises(ParseError) as ctx:
            reader.read()
        self.assertEqual(ctx.exception.line, 4)
        self.assertEqual(ctx.exception.reason,
                         'time field is not a valid timestamp')

    def test_skip_malformed(self):
        reader = EventReader(malformed_file, skip_malformed=True)
        with self.assertLogs('netsep.read_events', level='WARNING') as logs:
            df = reader.read()
        self.assertEqual(len(logs.output), 2)
        self.assertIn('line=6', logs.output[1])
        self.assertEqual(reader.n_malformed, 2)
        self.assertEqual(len(df), 3)
        seq = ingest(df, 3600)
        self.assertEqual(seq.edge_set(1), {(1, 0)})

    def test_line_numbers_across_chunks(self):
        reader = EventReader(malformed_file, chunksize=2)
        with self.assertRaises(ParseError) as ctx:
            reader.read()
        self.assertEqual(ctx.exception.line, 4)

    def test_iso_times(self):
        seq = read_events(iso_file, 3600, header=True, time_format='iso')
        self.assertEqual(seq.t0, 1364774400)
        self.assertEqual(seq.node_index.names,
                         ['10.0.0.1', '10.0.0.2', '10.0.0.3'])
        self.assertEqual(seq.edge_set(0), {(0, 1), (1, 2)})
        self.assertEqual(seq.edge_set(1), {(0, 1)})

    def test_parse_time_string(self):
        self.assertEqual(parse_time_string('1970-01-01 01:00:00'), 3600.)
        self.assertEqual(parse_time_string('1970-01-01T02:00:00+01:00'), 3600.)

    def test_gzip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'auth.gz')
            with open(lanl_file, 'rb') as src, gzip.open(path, 'wb') as dst:
                shutil.copyfileobj(src, dst)
            plain = os.path.join(tmp, 'auth.bin')
            with open(path, 'rb') as src, open(plain, 'wb') as dst:
                shutil.copyfileobj(src, dst)
            expected = read_events(lanl_file, 3600, preset='lanl')
            self.assertEqual(read_events(path, 3600, preset='lanl'), expected)
            # compressed content without the .gz extension
            self.assertEqual(read_events(plain, 3600, preset='lanl'), expected)

    def test_node_pattern(self):
        seq = read_events(lanl_file, 3600, preset='lanl',
                          node_pattern='C[12]')
        self.assertEqual(seq.node_index.names, ['C1', 'C2'])


class TestReadLabels(unittest.TestCase):
    def test_redteam(self):
        seq = read_events(lanl_file, 3600, preset='lanl')
        with self.assertLogs('netsep.read_events', level='WARNING'):
            labels = read_labels(redteam_file, seq, preset='lanl-redteam')
        self.assertEqual(len(labels), 2)
        self.assertTrue((0, 1, 2) in labels)
        self.assertTrue((1, 3, 1) in labels)
        labels.check_against(seq)
