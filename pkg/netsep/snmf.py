"""
Superposed nonnegative matrix factorization of a sequence of graphs.

Each window adjacency matrix A_t is approximated by a weighted sum of L
low-rank sources, A_t ~ sum_l w_tl U_l V_l^T, with the diagonal masked out.
No N x N matrix is ever formed: every masked inner product goes through
the K x K Gram matrices of the embeddings and the per-node diagonal terms
u_il . v_il.

Arrays
- U, V:	(L, N, K) origin and destination embeddings, U[l] is U_l
- W:	(T, L) mixing coefficients, one row per training window
"""
from concurrent.futures import ThreadPoolExecutor
from collections import OrderedDict
import logging
import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

INIT_LOW = 0.01
INIT_HIGH = 1.01


class Hyperparams(object):
    def __init__(self, K=5, L=4, lambda1=1e-3, lambda2=1e-5, max_iters=500,
                 tol=1e-5, eps_floor=1e-12, seed=0):
        """
        Hyperparameters of the factorization.
        - K:	Embedding dimension of every source
        - L:	Number of sources
        - lambda1:	L1 penalty on the mixing coefficients
        - lambda2:	L2 penalty on the embeddings
        - max_iters:	Maximum number of update sweeps
        - tol:	Relative loss change at which the fit stops
        - eps_floor:	Added to every update denominator
        - seed:	Seed of the random initialization
        """
        self.K = int(K)
        self.L = int(L)
        self.lambda1 = float(lambda1)
        self.lambda2 = float(lambda2)
        self.max_iters = int(max_iters)
        self.tol = float(tol)
        self.eps_floor = float(eps_floor)
        self.seed = int(seed)
        if self.K < 1 or self.L < 1:
            raise ValueError('K and L must be >= 1, got K={} L={}'.format(
                self.K, self.L))
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError('lambda1 and lambda2 must be nonnegative')
        if not self.eps_floor > 0:
            raise ValueError('eps_floor must be positive')
        if self.max_iters < 1 or self.tol < 0:
            raise ValueError('max_iters must be >= 1 and tol >= 0')

    def as_dict(self):
        return OrderedDict([('K', self.K), ('L', self.L),
                            ('lambda1', self.lambda1),
                            ('lambda2', self.lambda2),
                            ('max_iters', self.max_iters), ('tol', self.tol),
                            ('eps_floor', self.eps_floor), ('seed', self.seed)])

    def replace(self, **kwargs):
        values = self.as_dict()
        values.update(kwargs)
        return Hyperparams(**values)

    def __eq__(self, other):
        return isinstance(other, Hyperparams) and \
            self.as_dict() == other.as_dict()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return 'Hyperparams({})'.format(', '.join(
            '{}={!r}'.format(k, v) for k, v in self.as_dict().items()))


def hyper_grid(K_total, L_values=(2, 3, 4, 5), **kwargs):
    """
    Hyperparameters with a fixed total embedding budget: for every L the
    per-source dimension is floor(K_total / L)
    """
    grid = []
    for L in L_values:
        K = int(K_total) // int(L)
        if K < 1:
            logger.warning('skipping L=%d, K_total=%d leaves no dimension per '
                           'source', L, K_total)
            continue
        grid.append(Hyperparams(K=K, L=L, **kwargs))
    return grid


def diag_products(U, V):
    """
    d[l, i] = u_il . v_il, the self-loop entries of every U_l V_l^T
    """
    return np.einsum('lik,lik->li', U, V)


def gram_products(X):
    """
    XX[a, b] = X_a^T X_b, shape (L, L, K, K)
    """
    return np.einsum('aik,bij->abkj', X, X, optimize=True)


def gram_matrix(U, V):
    """
    G[l, m] = <1 - I, (U_l V_l^T) * (U_m V_m^T)>, the masked inner product
    of every pair of sources
    """
    d = diag_products(U, V)
    G = np.einsum('abkj,abkj->ab', gram_products(U), gram_products(V))
    return G - d @ d.T


def pair_products(U, V, src, dst):
    """
    E[p, l] = u_{src_p, l} . v_{dst_p, l} for arrays of node pairs
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    E = np.empty((len(src), U.shape[0]))
    for l in range(U.shape[0]):
        E[:, l] = np.einsum('pk,pk->p', U[l][src], V[l][dst])
    return E


class SnmfModel(object):
    def __init__(self, hyper, U, V, W, node_digest=None):
        """
        Parameters of a fitted (or initialised) factorization.
        - hyper:	Hyperparams
        - U, V:	(L, N, K) nonnegative embeddings
        - W:	(T, L) nonnegative mixing coefficients
        - node_digest:	Digest of the node map the model was trained on
        """
        self.hyper = hyper
        self.U = np.array(U, dtype=float)
        self.V = np.array(V, dtype=float)
        self.W = np.array(W, dtype=float)
        self.node_digest = node_digest
        self._gram = None
        L, N, K = self.U.shape
        if L != hyper.L or K != hyper.K:
            raise ValueError('embedding shape {} does not match L={} K={}'.format(
                self.U.shape, hyper.L, hyper.K))
        if self.V.shape != self.U.shape:
            raise ValueError('U and V shapes differ: {} vs {}'.format(
                self.U.shape, self.V.shape))
        if self.W.ndim != 2 or self.W.shape[1] != L:
            raise ValueError('W must have shape (T, {}), got {}'.format(
                L, self.W.shape))

    @property
    def N(self):
        return self.U.shape[1]

    @property
    def T(self):
        return self.W.shape[0]

    @property
    def L(self):
        return self.hyper.L

    @property
    def K(self):
        return self.hyper.K

    def __eq__(self, other):
        return (isinstance(other, SnmfModel) and self.hyper == other.hyper
                and self.node_digest == other.node_digest
                and self.U.shape == other.U.shape
                and self.W.shape == other.W.shape
                and np.array_equal(self.U, other.U)
                and np.array_equal(self.V, other.V)
                and np.array_equal(self.W, other.W))

    def __ne__(self, other):
        return not self.__eq__(other)

    def copy(self):
        return SnmfModel(self.hyper, self.U.copy(), self.V.copy(),
                         self.W.copy(), node_digest=self.node_digest)

    def freeze(self):
        """
        Marks the parameters read-only; the mixing kernel is cached from then on
        """
        for arr in (self.U, self.V, self.W):
            arr.setflags(write=False)
        self._gram = None
        return self

    @property
    def frozen(self):
        return not self.U.flags.writeable

    def gram(self):
        if not self.frozen:
            return gram_matrix(self.U, self.V)
        if self._gram is None:
            self._gram = gram_matrix(self.U, self.V)
        return self._gram

    def is_finite(self):
        return bool(np.isfinite(self.U).all() and np.isfinite(self.V).all()
                    and np.isfinite(self.W).all())

    def pair_products(self, src, dst):
        return pair_products(self.U, self.V, src, dst)

    def window_numerator(self, edges):
        """
        b[l] = <A, U_l V_l^T> for one window's (m, 2) edge array
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        return self.pair_products(edges[:, 0], edges[:, 1]).sum(axis=0)


class TrainingData(object):
    def __init__(self, windows, N):
        """
        Sparse summary of the training windows.
        - windows:	List of (m_t, 2) edge arrays
        - N:	Node count
        The distinct pairs seen in any window are indexed once; B is the
        T x P window/pair incidence matrix, so that sum_t w_tl A_t is the
        pair-indexed vector (B^T W)[:, l].
        """
        self.N = int(N)
        self.T = len(windows)
        keys = [np.asarray(e, dtype=np.int64).reshape(-1, 2) for e in windows]
        keys = [e[:, 0] * self.N + e[:, 1] for e in keys]
        counts = np.array([len(k) for k in keys], dtype=np.int64)
        flat = np.concatenate(keys) if keys else np.zeros(0, dtype=np.int64)
        pairs, inverse = np.unique(flat, return_inverse=True)
        inverse = inverse.reshape(-1)
        self.counts = counts
        self.nnz = int(counts.sum())
        self.src = pairs // max(self.N, 1)
        self.dst = pairs % max(self.N, 1)
        rows = np.repeat(np.arange(self.T), counts)
        self.B = sparse.csr_matrix(
            (np.ones(len(flat)), (rows, inverse)), shape=(self.T, len(pairs)))
        # pairs are sorted by src * N + dst, i.e. row-major
        self._indptr = np.searchsorted(self.src, np.arange(self.N + 1))

    @classmethod
    def from_range(cls, seq):
        """
        Accepts a WindowRange, a WindowedGraphSequence or a TrainingData
        """
        if isinstance(seq, TrainingData):
            return seq
        if hasattr(seq, 'windows') and callable(seq.windows):
            return cls(seq.windows(), seq.N)
        return cls([seq.edges(t) for t in range(seq.T)], seq.N)

    @property
    def P(self):
        return len(self.src)

    @property
    def density(self):
        return self.nnz / float(self.T * self.N * (self.N - 1))

    def source_matrix(self, weights):
        """
        N x N csr matrix with the given per-pair values
        """
        return sparse.csr_matrix((np.asarray(weights, dtype=float),
                                  self.dst, self._indptr),
                                 shape=(self.N, self.N))

    def numerators(self, U, V):
        """
        b[t, l] = <A_t, U_l V_l^T>
        """
        return np.asarray(self.B @ pair_products(U, V, self.src, self.dst))


def _check_dims(model, data):
    if model.N != data.N:
        raise ValueError('model has {} nodes but the windows have {}'.format(
            model.N, data.N))
    if model.T != data.T:
        raise ValueError('W has {} rows but there are {} windows'.format(
            model.T, data.T))


def _penalties(model):
    h = model.hyper
    return h.lambda1 * model.W.sum() + \
        0.5 * h.lambda2 * (np.sum(model.U ** 2) + np.sum(model.V ** 2))


def _residual(nnz, b, G, W):
    """
    1/2 sum_t ||(1 - I) * (A_t - sum_l w_tl U_l V_l^T)||^2 expanded as
    |A| - 2 <A, X> + <X, X> with every term in Gram form
    """
    value = 0.5 * (nnz - 2. * np.sum(W * b) + np.sum((W @ G) * W))
    return max(value, 0.)


def loss(model, seq):
    """
    Regularized masked squared loss of the model over the training windows
    """
    data = TrainingData.from_range(seq)
    _check_dims(model, data)
    b = data.numerators(model.U, model.V)
    return _residual(data.nnz, b, gram_matrix(model.U, model.V), model.W) + \
        _penalties(model)


def residual_loss(model, seq):
    """
    Masked squared error only, without the penalty terms
    """
    data = TrainingData.from_range(seq)
    _check_dims(model, data)
    b = data.numerators(model.U, model.V)
    return _residual(data.nnz, b, gram_matrix(model.U, model.V), model.W)


def window_loss(model, edges, w, penalized=True):
    """
    Contribution of one window with mixing vector w to the loss
    - edges:	(m, 2) edge array of the window
    - w:	Length L mixing vector
    - penalized:	Boolean, if True the lambda1 term of w is included
    """
    w = np.asarray(w, dtype=float)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    b = model.window_numerator(edges)
    value = max(0.5 * (len(edges) - 2. * w @ b + w @ model.gram() @ w), 0.)
    if penalized:
        value += model.hyper.lambda1 * w.sum()
    return value


def _embedding_gradient_parts(X, Y, C, S_mult, XX_Y, d):
    """
    Numerator and denominator of the multiplicative update of every X_l,
    where X is the updated side and Y the fixed one.
    - S_mult:	Callable, l -> S_l @ Y_l (or S_l^T @ Y_l)
    - XX_Y:	YY[a, l] = Y_a^T Y_l
    - d:	(L, N) diagonal products
    """
    Cd = C @ d

    def parts(l):
        num = S_mult(l)
        den = np.einsum('a,aik,akj->ij', C[l], X, XX_Y[:, l], optimize=True) \
            - Cd[l][:, None] * Y[l]
        return num, den
    return parts


def grad(model, seq):
    """
    Partial derivatives of the loss.
    Returns (dW, dU, dV) with the shapes of W, U and V.
    """
    data = TrainingData.from_range(seq)
    _check_dims(model, data)
    h = model.hyper
    U, V, W = model.U, model.V, model.W
    b = data.numerators(U, V)
    G = gram_matrix(U, V)
    dW = W @ G - b + h.lambda1
    C = W.T @ W
    d = diag_products(U, V)
    SW = np.asarray(data.B.T @ W)
    mats = [data.source_matrix(SW[:, l]) for l in range(h.L)]
    u_parts = _embedding_gradient_parts(U, V, C, lambda l: mats[l] @ V[l],
                                        gram_products(V), d)
    v_parts = _embedding_gradient_parts(V, U, C, lambda l: mats[l].T @ U[l],
                                        gram_products(U), d)
    dU = np.empty_like(U)
    dV = np.empty_like(V)
    for l in range(h.L):
        num, den = u_parts(l)
        dU[l] = den - num + h.lambda2 * U[l]
        num, den = v_parts(l)
        dV[l] = den - num + h.lambda2 * V[l]
    return dW, dU, dV


def kkt_residual(model, seq):
    """
    max over every parameter of |min(param, |dJ/dparam|)|; zero exactly at
    a KKT point of the nonnegativity-constrained problem
    """
    grads = grad(model, seq)
    worst = 0.
    for param, g in zip((model.W, model.U, model.V), grads):
        if param.size:
            worst = max(worst, float(np.max(np.abs(
                np.minimum(param, np.abs(g))))))
    return worst


def initial_model(data, hyper):
    """
    Uniform (0.01, 1.01) parameters scaled so that the mean predicted masked
    entry equals the training edge density
    """
    if data.N < 2:
        raise ValueError('at least two nodes are needed, got {}'.format(data.N))
    rng = np.random.default_rng(hyper.seed)
    W = rng.uniform(INIT_LOW, INIT_HIGH, size=(data.T, hyper.L))
    U = rng.uniform(INIT_LOW, INIT_HIGH, size=(hyper.L, data.N, hyper.K))
    V = rng.uniform(INIT_LOW, INIT_HIGH, size=(hyper.L, data.N, hyper.K))
    # sum over i != j of (U_l V_l^T)_ij = (1^T U_l)(V_l^T 1) - sum_i d_il
    totals = np.einsum('lk,lk->l', U.sum(axis=1), V.sum(axis=1)) - \
        diag_products(U, V).sum(axis=1)
    pred_mean = np.mean(W @ totals) / (data.N * (data.N - 1))
    scale = (data.density / pred_mean) ** (1. / 3.)
    return SnmfModel(hyper, U * scale, V * scale, W * scale)


class _Sweeper(object):
    def __init__(self, data, hyper, threads=1):
        self.data = data
        self.hyper = hyper
        self.threads = max(int(threads), 1)
        self._pool = ThreadPoolExecutor(max_workers=self.threads) \
            if self.threads > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def _map(self, fn, items):
        if self._pool is None:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    def update_mixing(self, model):
        h = self.hyper
        b = self.data.numerators(model.U, model.V)
        G = gram_matrix(model.U, model.V)
        den = np.maximum(model.W @ G, 0.) + h.lambda1 + h.eps_floor
        model.W = model.W * b / den

    def _update_side(self, X, Y, W, transpose):
        h = self.hyper
        C = W.T @ W
        d = diag_products(X, Y)
        SW = np.asarray(self.data.B.T @ W)
        if transpose:
            mult = lambda l: self.data.source_matrix(SW[:, l]).T @ Y[l]
        else:
            mult = lambda l: self.data.source_matrix(SW[:, l]) @ Y[l]
        parts = _embedding_gradient_parts(X, Y, C, mult, gram_products(Y), d)

        def block(l):
            num, den = parts(l)
            den = np.maximum(den, 0.) + h.lambda2 * X[l] + h.eps_floor
            return X[l] * num / den
        return np.stack(self._map(block, range(h.L)))

    def sweep(self, model):
        """
        One pass of the updates in the order W, then every U_l, then every
        V_l. Sources of one block are updated from the same snapshot.
        """
        self.update_mixing(model)
        model.U = self._update_side(model.U, model.V, model.W, False)
        model.V = self._update_side(model.V, model.U, model.W, True)


def fit(seq, hyper, init=None, threads=1, callback=None, log_every=10,
        kkt_tol=None):
    """
    Fits the factorization with multiplicative updates.
    - seq:	Training windows (WindowRange, sequence or TrainingData)
    - hyper:	Hyperparams
    - init:	Optional SnmfModel to start from instead of a random draw
    - threads:	Worker threads for the per-source updates
    - callback:	Optional callable (iteration, loss, model) after each sweep
    - log_every:	Log progress every so many sweeps
    - kkt_tol:	Optional stationarity bound; once the loss change is below
            hyper.tol, stop only when kkt_residual is also below kkt_tol
            (checked every log_every sweeps)
    Returns the fitted (frozen) model and the loss after every sweep.
    """
    data = TrainingData.from_range(seq)
    if data.nnz == 0:
        raise ValueError('degenerate input: every training window is empty')
    if init is not None:
        model = SnmfModel(hyper, init.U, init.V, init.W,
                          node_digest=init.node_digest)
        _check_dims(model, data)
    else:
        model = initial_model(data, hyper)
    source = getattr(seq, 'seq', seq)
    if hasattr(source, 'node_digest'):
        model.node_digest = source.node_digest()
    sweeper = _Sweeper(data, hyper, threads=threads)
    trace = []
    previous = loss(model, data)
    logger.info('fit start N=%d T=%d P=%d nnz=%d K=%d L=%d loss=%.6g',
                data.N, data.T, data.P, data.nnz, hyper.K, hyper.L, previous)
    check_every, next_check = max(int(log_every or 1), 1), 0
    residual = None
    converged = False
    try:
        with np.errstate(invalid='ignore'):
            for it in range(1, hyper.max_iters + 1):
                sweeper.sweep(model)
                current = loss(model, data)
                if not (model.is_finite() and np.isfinite(current)):
                    raise FloatingPointError(
                        'NaN detected in the parameters at iteration {}'.format(it))
                trace.append(current)
                if callback is not None:
                    callback(it, current, model)
                if log_every and it % log_every == 0:
                    logger.info('fit iteration=%d loss=%.6g', it, current)
                change = abs(previous - current) / max(previous, hyper.eps_floor)
                previous = current
                if change < hyper.tol:
                    if kkt_tol is None:
                        converged = True
                        break
                    if it >= next_check:
                        next_check = it + check_every
                        residual = kkt_residual(model, data)
                        if residual < kkt_tol:
                            converged = True
                            break
    finally:
        sweeper.close()
    logger.info('fit %s after %d iterations loss=%.6g',
                'converged' if converged else 'stopped', len(trace), previous)
    if residual is not None:
        logger.info('fit kkt residual=%.3g', residual)
    return model.freeze(), np.array(trace)


def update_mixing_row(model, edges, w_row, b=None, G=None):
    """
    One multiplicative update of a mixing vector with the embeddings fixed.
    - edges:	(m, 2) edge array of the window
    - w_row:	Current length L mixing vector
    - b:	Optional precomputed numerator (model.window_numerator(edges))
    - G:	Optional precomputed mixing kernel (model.gram())
    """
    h = model.hyper
    w_row = np.asarray(w_row, dtype=float)
    if w_row.shape != (h.L,):
        raise ValueError('mixing row must have length {}'.format(h.L))
    if b is None:
        b = model.window_numerator(edges)
    if G is None:
        G = model.gram()
    den = np.maximum(G @ w_row, 0.) + h.lambda1 + h.eps_floor
    return w_row * b / den


def refit_window_weights(model, edges, init, iters=500, tol=1e-10):
    """
    Fits the mixing vector of a new window with the embeddings frozen.
    - edges:	(m, 2) edge array of the window
    - init:	Nonnegative length L starting vector, zeros stay zero
    - iters:	Maximum number of updates
    - tol:	Stop once no coefficient moves by more than tol relative to
            the largest one
    """
    h = model.hyper
    w = np.array(init, dtype=float)
    if w.shape != (h.L,):
        raise ValueError('init must have length {}'.format(h.L))
    if np.any(w < 0):
        raise ValueError('init must be nonnegative')
    b = model.window_numerator(edges)
    G = model.gram()
    for _ in range(int(iters)):
        new = update_mixing_row(model, edges, w, b=b, G=G)
        moved = np.max(np.abs(new - w)) if len(w) else 0.
        w = new
        if moved <= tol * max(np.max(w), h.eps_floor):
            break
    return w
