"""Graphops on finite quadrature discretizations of a probability space.

A :class:`GraphopOperator` stores its action as a matrix ``M`` acting on node
vectors, ``(A f)_i = sum_j M_ij f_j``.  For a graphon on weights ``mu`` this is
``M_ij = W(xi_i, xi_j) mu_j``; self-adjointness in L^2(mu) means
``diag(mu) M`` is symmetric.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import aslinearoperator

from .errors import (ConvergenceWarning, DimensionError, InvalidParameterError,
                     SelfAdjointnessError)

DENSE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class NetworkSpace:
    """Nodes xi_k with positive probability weights mu_k."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "finite-graph"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        nodes = np.asarray(self.nodes)
        if nodes.shape[0] != w.size:
            raise DimensionError(f"{nodes.shape[0]} nodes but {w.size} weights")
        if np.any(w <= 0):
            raise InvalidParameterError("all node weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "nodes", nodes)

    @property
    def size(self):
        return self.weights.size

    def inner(self, f, g):
        """L^2(mu) inner product of node vectors."""
        return float(np.sum(self.weights * np.asarray(f) * np.asarray(g)))

    def norm(self, f):
        return np.sqrt(self.inner(f, f))

    @classmethod
    def uniform(cls, m, kind="finite-graph", nodes=None):
        if m < 1:
            raise InvalidParameterError("need at least one node")
        nodes = np.arange(m) if nodes is None else nodes
        return cls(nodes=nodes, weights=np.full(m, 1.0 / m), kind=kind)

    @classmethod
    def point(cls):
        """One-node space; graphops on it are scalars."""
        return cls(nodes=np.zeros(1), weights=np.ones(1), kind="point")


@dataclass(frozen=True, eq=False)
class GraphonKernel:
    """Kernel values W(xi_j, xi_k) on node pairs."""

    values: np.ndarray
    name: str = "graphon"

    def __post_init__(self):
        W = np.asarray(self.values, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DimensionError(f"kernel must be square, got {W.shape}")
        if not np.allclose(W, W.T, rtol=1e-12, atol=1e-14):
            raise InvalidParameterError("graphon kernel must be symmetric")
        object.__setattr__(self, "values", W)

    @property
    def symmetric(self):
        return True


@dataclass(frozen=True)
class PowerLawParams:
    """Power-law exponent alpha and (for finite sampling) edge exponent beta_edge."""

    alpha: float
    beta_edge: float = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.beta_edge is not None and not 2 * self.alpha - 1 < self.beta_edge < 2 * self.alpha:
            raise InvalidParameterError(
                f"beta_edge must lie in ({2 * self.alpha - 1}, {2 * self.alpha}), got {self.beta_edge}")


@dataclass(eq=False)
class GraphopOperator:
    space: NetworkSpace
    matrix: object  # dense ndarray or scipy sparse matrix
    name: str = "graphop"
    c_regular: float = None
    norm_bounds: dict = field(default_factory=dict)
    kernel: GraphonKernel = None

    def __post_init__(self):
        m = self.space.size
        if self.matrix.shape != (m, m):
            raise DimensionError(f"operator matrix {self.matrix.shape} does not match {m} nodes")

    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)

    def apply(self, f):
        """Apply along the leading axis; trailing axes are carried along."""
        f = np.asarray(f, dtype=float)
        m = self.space.size
        if f.shape[:1] != (m,):
            raise DimensionError(f"leading axis {f.shape[:1]} does not match {m} nodes")
        out = self.matrix @ f.reshape(m, -1)
        return np.asarray(out).reshape(f.shape)

    def apply_along(self, f, axis):
        f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
        return np.moveaxis(self.apply(f), 0, axis)

    __call__ = apply

    def dense(self):
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def symmetrized(self):
        """Matrix S = M_mu^{1/2} (action) M_mu^{-1/2}, similar to the operator in L^2(mu)."""
        s = np.sqrt(self.space.weights)
        if self.is_sparse:
            return (sp.diags(s) @ self.matrix @ sp.diags(1.0 / s)).tocsr()
        return s[:, None] * np.asarray(self.matrix) / s[None, :]


def identity_graphop(space):
    return GraphopOperator(space, sp.identity(space.size, format="csr"), name="identity",
                           c_regular=1.0, norm_bounds={"2->2": 1.0})


def graphon_operator(W, space, name=None):
    """(A f)(xi_j) = sum_k W(xi_j, xi_k) f_k mu_k."""
    if not isinstance(W, GraphonKernel):
        W = GraphonKernel(W)
    if W.values.shape[0] != space.size:
        raise DimensionError(f"kernel of size {W.values.shape[0]} on a space of {space.size} nodes")
    M = W.values * space.weights[None, :]
    return GraphopOperator(space, M, name=name or W.name, kernel=W)


def constant_graphon(p, space):
    """Erdos-Renyi limit W = p."""
    if not 0 <= p <= 1:
        raise InvalidParameterError(f"edge probability must lie in [0, 1], got {p}")
    W = GraphonKernel(np.full((space.size, space.size), float(p)), name=f"constant({p})")
    op = graphon_operator(W, space)
    op.c_regular = float(p)
    op.norm_bounds["2->2"] = float(p)
    return op


def power_law_graphon(params, m, quadrature="cell"):
    """Power-law graphon W = (1-alpha)^2 (xi xi')^(-alpha) on midpoint nodes of (0, 1].

    Nodes are xi_k = (k - 1/2)/m with weights 1/m.  With ``quadrature="cell"``
    (default) the kernel value on a node pair is the exact average of W over
    the corresponding pair of cells, i.e. the step-function graphon of the
    partition.  Because W is rank one this stays finite at xi -> 0 and, being
    an L^2 projection, never overestimates ||W||_2.  ``quadrature="midpoint"``
    samples W at the nodes instead; it badly under-resolves the singular
    mass near 0 when alpha > 1/2.
    """
    if not isinstance(params, PowerLawParams):
        params = PowerLawParams(float(params))
    if m < 2:
        raise InvalidParameterError("need at least two nodes")
    a = params.alpha
    k = np.arange(1, m + 1)
    xi = (k - 0.5) / m
    if quadrature == "cell":
        u = m**a * (k ** (1 - a) - (k - 1) ** (1 - a)) / (1 - a)
    elif quadrature == "midpoint":
        u = xi ** (-a)
    else:
        raise InvalidParameterError(f"unknown quadrature {quadrature!r}")
    space = NetworkSpace(nodes=xi, weights=np.full(m, 1.0 / m), kind="interval")
    W = GraphonKernel((1 - a) ** 2 * np.outer(u, u), name=f"power-law({a})")
    return space, W


def power_law_graphop(params, m, quadrature="cell"):
    space, W = power_law_graphon(params, m, quadrature)
    op = graphon_operator(W, space)
    alpha = params.alpha if isinstance(params, PowerLawParams) else float(params)
    if alpha < 0.5:
        op.norm_bounds["W_2"] = (1 - alpha) ** 2 / (1 - 2 * alpha)
    return op


def empirical_graphop(adjacency, r_N=1.0):
    """Finite graph: (A f)_i = (1/(N r_N)) sum_j A_ij f_j on uniform weights 1/N."""
    if not 0 < r_N <= 1:
        raise InvalidParameterError(f"rescaling r_N must lie in (0, 1], got {r_N}")
    A = adjacency
    N = A.shape[0]
    if A.shape != (N, N):
        raise DimensionError(f"adjacency must be square, got {A.shape}")
    if sp.issparse(A):
        A = A.tocsr().astype(float)
        if (A - A.T).count_nonzero():
            raise InvalidParameterError("adjacency must be symmetric")
        if np.any(A.diagonal() != 0):
            raise InvalidParameterError("adjacency must have zero diagonal")
        M = A / (N * r_N)
    else:
        A = np.asarray(A, dtype=float)
        if not np.array_equal(A, A.T):
            raise InvalidParameterError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise InvalidParameterError("adjacency must have zero diagonal")
        M = A / (N * r_N)
    space = NetworkSpace.uniform(N, kind="finite-graph")
    return GraphopOperator(space, M, name=f"empirical(N={N})")


def _equator_frame(xi):
    """Deterministic orthonormal (v1, v2) spanning the plane orthogonal to each row of xi."""
    ez = np.array([0.0, 0.0, 1.0])
    ex = np.array([1.0, 0.0, 0.0])
    v1 = np.cross(ez, xi)
    nrm = np.linalg.norm(v1, axis=1)
    bad = nrm < 1e-8
    if np.any(bad):
        v1[bad] = np.cross(ex, xi[bad])
        nrm[bad] = np.linalg.norm(v1[bad], axis=1)
    v1 /= nrm[:, None]
    v2 = np.cross(xi, v1)
    return v1, v2


def spherical_graphop(n_sphere=32, m_equator=64, balance=True):
    """Great-circle averaging operator on S^2.

    Nodes form a (phi, theta) product grid with n_phi = 2 n_sphere azimuthal
    nodes and n_sphere polar midpoints, weights proportional to sin(theta).
    (A f)(xi) averages f at ``m_equator`` equispaced points of the equator
    orthogonal to xi; off-grid values come from bilinear interpolation in
    (phi, theta), using the reflection (phi + pi, -theta) across the poles.

    The raw quadrature is Markov but only approximately self-adjoint (its
    weak-form defect is O(1e-3) at n_sphere=32), which lets ||A||_2 exceed 1
    slightly.  ``balance=True`` (default) applies :func:`_balance_markov` to
    restore exact self-adjointness and A1 = 1.
    """
    if n_sphere < 8:
        raise InvalidParameterError("n_sphere must be >= 8")
    if m_equator < 16:
        raise InvalidParameterError("m_equator must be >= 16")
    n_th, n_ph = n_sphere, 2 * n_sphere
    dth, dph = np.pi / n_th, 2 * np.pi / n_ph
    theta = (np.arange(n_th) + 0.5) * dth
    phi = np.arange(n_ph) * dph
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    th, ph = TH.ravel(), PH.ravel()
    m = th.size
    xyz = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1)
    w = np.sin(th)
    space = NetworkSpace(nodes=xyz, weights=w / w.sum(), kind="sphere")

    v1, v2 = _equator_frame(xyz)
    tau = 2 * np.pi * np.arange(m_equator) / m_equator
    pts = (np.cos(tau)[None, :, None] * v1[:, None, :]
           + np.sin(tau)[None, :, None] * v2[:, None, :])  # (m, m_eq, 3)
    p_th = np.arccos(np.clip(pts[..., 2], -1.0, 1.0))
    p_ph = np.mod(np.arctan2(pts[..., 1], pts[..., 0]), 2 * np.pi)

    s = p_ph / dph
    i0 = np.floor(s).astype(int)
    fs = s - i0
    t = p_th / dth - 0.5
    j0 = np.floor(t).astype(int)
    ft = t - j0

    def node_index(j, i):
        # rows -1 and n_th are the first/last rows seen across the pole
        i = np.mod(i, n_ph)
        flip = (j < 0) | (j >= n_th)
        jj = np.where(j < 0, -1 - j, np.where(j >= n_th, 2 * n_th - 1 - j, j))
        ii = np.where(flip, np.mod(i + n_ph // 2, n_ph), i)
        return jj * n_ph + ii

    rows = np.broadcast_to(np.arange(m)[:, None], p_th.shape)
    cols, vals = [], []
    for dj, di, wt in ((0, 0, (1 - ft) * (1 - fs)), (0, 1, (1 - ft) * fs),
                       (1, 0, ft * (1 - fs)), (1, 1, ft * fs)):
        cols.append(node_index(j0 + dj, i0 + di))
        vals.append(wt / m_equator)
    M = sp.coo_matrix((np.concatenate([v.ravel() for v in vals]),
                       (np.tile(rows.ravel(), 4), np.concatenate([c.ravel() for c in cols]))),
                      shape=(m, m)).tocsr()
    M.sum_duplicates()
    if balance:
        M = _balance_markov(M, space.weights)
    return GraphopOperator(space, M, name="spherical", c_regular=1.0, norm_bounds={"2->2": 1.0})


def _balance_markov(P, mu, tol=1e-14, max_iter=10000):
    """Closest-in-spirit self-adjoint Markov operator to the row-stochastic P.

    Symmetrizes the edge measure G = diag(mu) P and rescales it as
    diag(d) G diag(d) so every row sums to mu_i (symmetric Sinkhorn with
    geometric damping).  The result is self-adjoint in L^2(mu) and maps 1 to 1
    exactly, hence has L^2 norm exactly 1.
    """
    G = sp.diags(mu) @ P
    G = ((G + G.T) / 2).tocsr()
    d = np.ones(mu.size)
    for _ in range(max_iter):
        r = d * (G @ d)
        if np.max(np.abs(r / mu - 1)) < tol:
            break
        d = d * np.sqrt(mu / r)
    else:
        warnings.warn("Markov balancing did not reach tolerance", ConvergenceWarning, stacklevel=3)
    B = (sp.diags(d) @ G @ sp.diags(d)).tocsr()
    B = (B + B.T) / 2
    return (sp.diags(1.0 / mu) @ B).tocsr()


def product_graphop(A1, A2):
    """Combined graphop A1 (x) A2 on the product space with weights mu1 x mu2."""
    w = np.kron(A1.space.weights, A2.space.weights)
    w = w / w.sum()
    nodes = np.arange(w.size)
    space = NetworkSpace(nodes=nodes, weights=w, kind="product")
    M = sp.kron(sp.csr_matrix(A1.matrix), sp.csr_matrix(A2.matrix), format="csr")
    return GraphopOperator(space, M, name=f"{A1.name}x{A2.name}")


def combined_apply(A1, A2, f):
    """Apply A2 along the second index and A1 along the first of f[i1, i2, ...]."""
    f = np.asarray(f, dtype=float)
    if f.shape[:2] != (A1.space.size, A2.space.size):
        raise DimensionError(
            f"field leading shape {f.shape[:2]} does not match ({A1.space.size}, {A2.space.size})")
    return A1.apply(A2.apply_along(f, 1))


# -- probes -----------------------------------------------------------------

def probe_linearity(A, n_probes=5, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        f, g = rng.standard_normal((2, A.space.size))
        a, b = rng.standard_normal(2)
        lhs = A.apply(a * f + b * g)
        rhs = a * A.apply(f) + b * A.apply(g)
        worst = max(worst, np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))))
    return worst


def probe_positivity(A, n_probes=5, seed=0):
    """Most negative entry of A f over random nonnegative f (0 if none)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        f = rng.random(A.space.size)
        worst = min(worst, float(np.min(A.apply(f))))
    return worst


def probe_self_adjoint(A, n_probes=5, seed=0):
    """Max of |<Af, g> - <f, Ag>| / (||f|| ||g||) over random probes."""
    rng = np.random.default_rng(seed)
    sp_ = A.space
    worst = 0.0
    for _ in range(n_probes):
        f, g = rng.standard_normal((2, sp_.size))
        gap = abs(sp_.inner(A.apply(f), g) - sp_.inner(f, A.apply(g)))
        worst = max(worst, gap / (sp_.norm(f) * sp_.norm(g)))
    return worst


def self_adjointness_defect(A):
    """Relative asymmetry ||S - S^T||_max / ||S||_max of the symmetrized matrix."""
    S = A.symmetrized()
    if sp.issparse(S):
        diff = abs(S - S.T).max()
        scale = abs(S).max()
    else:
        diff = np.max(np.abs(S - S.T))
        scale = np.max(np.abs(S))
    return float(diff / scale) if scale > 0 else 0.0


def is_positivity_preserving(A, tol=0.0):
    """Entrywise nonnegative action matrix, which is equivalent on a finite space."""
    M = A.matrix
    mn = M.min() if sp.issparse(M) else np.min(M)
    return bool(mn >= -tol)


# -- spectral estimators ----------------------------------------------------

def power_iteration(S, tol=1e-12, max_iter=10000, x0=None, shift=0.0, psd=False):
    """Largest eigenvalue of the symmetric matrix S (optionally shifted).

    Returns (eigenvalue, vector, converged).  Convergence: successive Rayleigh
    quotients differ by less than ``tol`` (relative to max(1, |value|)) and the
    eigen-residual is below sqrt(tol) relative, which rules out the stalled
    two-sided oscillation of bipartite-like spectra.  With ``psd=True`` the
    quotients increase monotonically, so the residual test is skipped.
    """
    n = S.shape[0]
    x = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    x /= np.linalg.norm(x)
    q_old = np.inf
    for it in range(1, max_iter + 1):
        y = S @ x + shift * x
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0 - shift, x, True
        q = float(x @ y)
        x_new = y / ny
        if abs(q - q_old) < tol * max(1.0, abs(q)):
            if psd:
                return q - shift, x_new, True
            res = np.linalg.norm(S @ x_new + shift * x_new - q * x_new)
            if res <= np.sqrt(tol) * max(1.0, abs(q)):
                return q - shift, x_new, True
        q_old = q
        x = x_new
    return q_old - shift, x, False


def numerical_radius(A, tol=1e-12, max_iter=10000, sa_tol=1e-10):
    """n(A) = sup <Af, f>_mu over unit f, by power iteration.

    Only the symmetric part of S = M^{1/2} K M^{1/2} enters <Af, f>, so the
    iteration runs on (S + S^T)/2.  A must pass the random-probe
    self-adjointness test at ``sa_tol``, otherwise :class:`SelfAdjointnessError` is raised.  For
    positivity-preserving operators the largest eigenvalue is the spectral
    radius.  Emits :class:`ConvergenceWarning` if ``max_iter`` is reached.
    """
    defect = probe_self_adjoint(A)
    if defect > sa_tol:
        raise SelfAdjointnessError(f"operator {A.name!r} not self-adjoint: defect {defect:.3e} > {sa_tol:.1e}")
    S = A.symmetrized()
    S = aslinearoperator((S + S.T) / 2)
    x0 = np.sqrt(A.space.weights)
    # iterate on S^2: eigenvalues +-lambda (bipartite spectra) merge instead of oscillating
    lam2, _, ok = power_iteration(S * S, tol=tol, max_iter=max_iter, x0=x0, psd=True)
    if not ok:
        warnings.warn(f"numerical radius of {A.name!r} did not converge in {max_iter} iterations",
                      ConvergenceWarning, stacklevel=2)
    return float(np.sqrt(max(lam2, 0.0)))


def operator_norm(A, tol=1e-12, max_iter=10000):
    """||A||_{2->2} in L^2(mu) as sqrt of the top eigenvalue of S^T S (no symmetrization)."""
    S = aslinearoperator(A.symmetrized())
    x0 = np.sqrt(A.space.weights)
    lam, _, ok = power_iteration(S.H * S, tol=tol, max_iter=max_iter, x0=x0, psd=True)
    if not ok:
        warnings.warn(f"operator norm of {A.name!r} did not converge", ConvergenceWarning, stacklevel=2)
    return float(np.sqrt(max(lam, 0.0)))


def graphon_norm(W, space, p=2):
    """Quadrature of (sum_jk mu_j mu_k W_jk^p)^(1/p), or max |W| for p = inf."""
    Wv = W.values if isinstance(W, GraphonKernel) else np.asarray(W, dtype=float)
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(Wv)))
    p = float(p)
    if p < 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    mu = space.weights
    return float((mu @ np.abs(Wv) ** p @ mu) ** (1.0 / p))


def check_c_regular(A, tol=1e-8):
    """Return c if A1 = c 1 within ``tol`` in sup norm, else None."""
    a1 = A.apply(np.ones(A.space.size))
    c = float(np.sum(A.space.weights * a1))
    if np.max(np.abs(a1 - c)) <= tol:
        return c
    return None


def norm_infty_to_1(A):
    """||A||_{inf->1} = ||A 1||_{L^1(mu)}, valid for positivity-preserving A."""
    if not is_positivity_preserving(A):
        raise InvalidParameterError(f"operator {A.name!r} is not positivity preserving; shortcut invalid")
    return float(np.sum(A.space.weights * np.abs(A.apply(np.ones(A.space.size)))))


# -- file formats -----------------------------------------------------------

def read_edge_list(path, n_nodes=None):
    """Undirected 0-based edge list ("i j" per line) to a symmetric adjacency.

    Returns a dense array up to DENSE_LIMIT nodes, CSR above.  Blank lines and
    lines starting with '#' are skipped.
    """
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j', got {line!r}")
            i, j = int(parts[0]), int(parts[1])
            if i < 0 or j < 0:
                raise ValueError(f"{path}:{lineno}: negative node index")
            if i == j:
                raise ValueError(f"{path}:{lineno}: self loop {i}")
            edges.append((i, j))
    e = np.array(edges, dtype=int).reshape(-1, 2)
    N = int(e.max()) + 1 if e.size else 0
    if n_nodes is not None:
        if n_nodes < N:
            raise ValueError(f"{path}: node index {N - 1} exceeds n_nodes={n_nodes}")
        N = n_nodes
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    A = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(N, N)).tocsr()
    A.data[:] = 1.0  # collapse duplicate edges
    return A.toarray() if N <= DENSE_LIMIT else A


def write_edge_list(path, adjacency):
    A = sp.triu(sp.csr_matrix(adjacency), k=1).tocoo()
    order = np.lexsort((A.col, A.row))
    with open(path, "w") as fh:
        for i, j in zip(A.row[order], A.col[order]):
            fh.write(f"{i} {j}\n")


def write_kernel_csv(path, W):
    Wv = W.values if isinstance(W, GraphonKernel) else np.asarray(W)
    np.savetxt(path, Wv, delimiter=",", fmt="%.17g")


def read_kernel_csv(path):
    return GraphonKernel(np.loadtxt(path, delimiter=",", ndmin=2))
