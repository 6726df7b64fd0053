"""
Versioned binary container for fitted models and their mixing history.

Layout (all little-endian, see docs/model_format.md):
    header	HEADER_DTYPE record
    W	T*L float64, row-major
    U	L*N*K float64, U_1 then U_2 ...
    V	L*N*K float64
    log	n_appended records of (int64 window index, L float64)
    trailer	sha256 of every preceding byte
"""
import hashlib
import logging
import numpy as np

from netsep.snmf import Hyperparams, SnmfModel
from netsep.forecast import MixingHistory, DEFAULT_TAU
from netsep.version import model_format_version

logger = logging.getLogger(__name__)

MAGIC = b'NSMF'
CHECKSUM_BYTES = 32

HEADER_DTYPE = np.dtype([
    ('magic', 'S4'),
    ('version', '<u4'),
    ('N', '<u8'),
    ('K', '<u4'),
    ('L', '<u4'),
    ('T', '<u8'),
    ('lambda1', '<f8'),
    ('lambda2', '<f8'),
    ('max_iters', '<u8'),
    ('tol', '<f8'),
    ('eps_floor', '<f8'),
    ('seed', '<i8'),
    ('tau', '<u8'),
    ('n_appended', '<u8'),
    ('has_digest', '<u4'),
    ('node_digest', 'u1', (32,)),
])


class ModelFormatError(ValueError):
    """Corrupt, truncated or foreign model file"""


class ModelVersionError(ModelFormatError):
    """Model file written with an unsupported format version"""


def _log_dtype(L):
    return np.dtype([('t', '<i8'), ('w', '<f8', (L,))])


def model_bytes(model, history=None):
    """
    Serializes a model and optionally the rows appended to its history
    """
    tau = DEFAULT_TAU
    log = np.zeros(0, dtype=_log_dtype(model.L))
    if history is not None:
        tau = history.tau
        idx, rows = history.appended()
        log = np.zeros(len(idx), dtype=_log_dtype(model.L))
        log['t'] = idx
        log['w'] = rows
    header = np.zeros(1, dtype=HEADER_DTYPE)
    h = model.hyper
    header['magic'] = MAGIC
    header['version'] = model_format_version
    header['N'] = model.N
    header['K'] = h.K
    header['L'] = h.L
    header['T'] = model.T
    header['lambda1'] = h.lambda1
    header['lambda2'] = h.lambda2
    header['max_iters'] = h.max_iters
    header['tol'] = h.tol
    header['eps_floor'] = h.eps_floor
    header['seed'] = h.seed
    header['tau'] = tau
    header['n_appended'] = len(log)
    if model.node_digest is not None:
        header['has_digest'] = 1
        header['node_digest'] = np.frombuffer(model.node_digest, dtype='u1')
    body = b''.join([header.tobytes(),
                     np.ascontiguousarray(model.W, dtype='<f8').tobytes(),
                     np.ascontiguousarray(model.U, dtype='<f8').tobytes(),
                     np.ascontiguousarray(model.V, dtype='<f8').tobytes(),
                     log.tobytes()])
    return body + hashlib.sha256(body).digest()


def write_model(path, model, history=None):
    with open(path, 'wb') as fl:
        fl.write(model_bytes(model, history))
    logger.info('wrote model file=%s N=%d T=%d L=%d K=%d', path, model.N,
                model.T, model.L, model.K)
    return path


def parse_model_bytes(data, name='<bytes>'):
    """
    Returns (model, history) from serialized bytes
    """
    if len(data) < 8 or data[:4] != MAGIC:
        raise ModelFormatError('{}: not a netsep model file'.format(name))
    version = int(np.frombuffer(data[4:8], dtype='<u4')[0])
    if version != model_format_version:
        raise ModelVersionError('{}: model format version {} is not supported '
                                '(expected {})'.format(name, version,
                                                       model_format_version))
    if len(data) < HEADER_DTYPE.itemsize + CHECKSUM_BYTES:
        raise ModelFormatError('{}: file is truncated'.format(name))
    header = np.frombuffer(data[:HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    N, K, L, T = (int(header[k]) for k in ('N', 'K', 'L', 'T'))
    n_appended = int(header['n_appended'])
    log_dtype = _log_dtype(L)
    sizes = [T * L * 8, L * N * K * 8, L * N * K * 8,
             n_appended * log_dtype.itemsize]
    expected = HEADER_DTYPE.itemsize + sum(sizes) + CHECKSUM_BYTES
    if len(data) != expected:
        raise ModelFormatError('{}: file is truncated or has trailing bytes '
                               '({} bytes, expected {})'.format(
                                   name, len(data), expected))
    body = data[:-CHECKSUM_BYTES]
    if hashlib.sha256(body).digest() != data[-CHECKSUM_BYTES:]:
        raise ModelFormatError('{}: checksum mismatch'.format(name))
    offset = HEADER_DTYPE.itemsize
    blocks = []
    for size in sizes:
        blocks.append(data[offset:offset + size])
        offset += size
    W = np.frombuffer(blocks[0], dtype='<f8').reshape(T, L).astype(float)
    U = np.frombuffer(blocks[1], dtype='<f8').reshape(L, N, K).astype(float)
    V = np.frombuffer(blocks[2], dtype='<f8').reshape(L, N, K).astype(float)
    log = np.frombuffer(blocks[3], dtype=log_dtype)
    hyper = Hyperparams(K=K, L=L, lambda1=float(header['lambda1']),
                        lambda2=float(header['lambda2']),
                        max_iters=int(header['max_iters']),
                        tol=float(header['tol']),
                        eps_floor=float(header['eps_floor']),
                        seed=int(header['seed']))
    digest = bytes(header['node_digest'].tobytes()) \
        if int(header['has_digest']) else None
    model = SnmfModel(hyper, U, V, W, node_digest=digest).freeze()
    history = MixingHistory.from_model(model, tau=int(header['tau']))
    for t, w in zip(log['t'], log['w']):
        history.append(int(t), w)
    return model, history


def read_model_file(path):
    """
    Returns (model, history) stored in a model file
    """
    with open(path, 'rb') as fl:
        data = fl.read()
    return parse_model_bytes(data, name=path)


def read_model(path):
    return read_model_file(path)[0]


def read_history(path):
    return read_model_file(path)[1]


def save(model, path, history=None):
    return write_model(path, model, history)


def load(path):
    return read_model(path)


def check_node_digest(model, seq):
    """
    Raises ValueError when the model was trained on a different node map
    """
    if model.node_digest is None:
        logger.warning('model carries no node digest, node map not checked')
        return
    if model.node_digest != seq.node_digest():
        raise ValueError('model was trained on a different node map than the '
                         'given sequence')
    if model.N != seq.N:
        raise ValueError('model has {} nodes, sequence has {}'.format(
            model.N, seq.N))
