"""Finite-N interacting diffusions on a graph, for mean-field cross-checks.

    dX^i = -(kappa / (N r_N)) sum_j A_ij grad D(X^i - X^j) dt + sqrt(2) dB^i

integrated by Euler-Maruyama on the torus [-L/2, L/2)^d.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, InvalidParameterError
from .graphops import DENSE_LIMIT, PowerLawParams


def wrap(x, L):
    """Map coordinates into [-L/2, L/2)."""
    return (np.asarray(x) + L / 2) % L - L / 2


def _symmetric_from_upper(rows, cols, N):
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    A = sp.coo_matrix((np.ones(r.size), (r, c)), shape=(N, N)).tocsr()
    return A.toarray() if N <= DENSE_LIMIT else A


def generate_erdos_renyi(N, p, seed):
    """G(N, p): every pair joined independently with probability p."""
    if not 0 < p <= 1:
        raise InvalidParameterError(f"edge probability must lie in (0, 1], got {p}")
    if N < 1:
        raise InvalidParameterError("need at least one vertex")
    rng = np.random.default_rng(seed)
    if N <= DENSE_LIMIT:
        iu = np.triu_indices(N, k=1)
        hit = rng.random(iu[0].size) < p
        return _symmetric_from_upper(iu[0][hit], iu[1][hit], N)
    rows, cols = [], []
    for i in range(N - 1):
        j = np.nonzero(rng.random(N - 1 - i) < p)[0] + i + 1
        rows.append(np.full(j.size, i))
        cols.append(j)
    return _symmetric_from_upper(np.concatenate(rows), np.concatenate(cols), N)


def power_law_probabilities(N, params, i):
    """p(i, j) = min(1, N^beta (i j)^-alpha) for 1-based vertex i and all j."""
    j = np.arange(1, N + 1, dtype=float)
    return np.minimum(1.0, float(N) ** params.beta_edge * (float(i) * j) ** (-params.alpha))


def expected_power_law_density(N, params):
    """sum_{i<j} p(i, j) / (N choose 2), by direct summation."""
    total = 0.0
    for i in range(1, N):
        total += power_law_probabilities(N, params, i)[i:].sum()
    return total / (N * (N - 1) / 2)


def generate_power_law_graph(N, params, seed):
    """Inhomogeneous random graph with p(i, j) = min(1, N^beta (ij)^-alpha).

    Returns (adjacency, r_N) with r_N = N^(beta - 2 alpha), the expected edge
    density scale used to normalize the coupling.
    """
    if not isinstance(params, PowerLawParams) or params.beta_edge is None:
        raise InvalidParameterError("power-law graph needs PowerLawParams with beta_edge")
    if N < 2:
        raise InvalidParameterError("need at least two vertices")
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    for i in range(1, N):
        p = power_law_probabilities(N, params, i)[i:]
        j = np.nonzero(rng.random(p.size) < p)[0] + i  # 0-based index of vertex j+1
        rows.append(np.full(j.size, i - 1))
        cols.append(j)
    A = _symmetric_from_upper(np.concatenate(rows), np.concatenate(cols), N)
    return A, float(N) ** (params.beta_edge - 2 * params.alpha)


@dataclass(eq=False)
class ParticleEnsemble:
    positions: np.ndarray  # (N, d)
    adjacency: object  # dense or sparse (N, N)
    L: float
    kappa: float
    r_N: float = 1.0
    seed: int = 0
    t: float = 0.0
    displacement: np.ndarray = None  # unwrapped displacement since t = 0
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.positions, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        N = X.shape[0]
        if self.adjacency.shape != (N, N):
            raise DimensionError(f"adjacency {self.adjacency.shape} for {N} particles")
        A = self.adjacency
        if sp.issparse(A):
            A = A.tocsr()
            if (A - A.T).count_nonzero() or np.any(A.diagonal() != 0):
                raise InvalidParameterError("adjacency must be symmetric with zero diagonal")
        elif not np.array_equal(A, A.T) or np.any(np.diag(A) != 0):
            raise InvalidParameterError("adjacency must be symmetric with zero diagonal")
        if not 0 < self.r_N <= 1:
            raise InvalidParameterError(f"r_N must lie in (0, 1], got {self.r_N}")
        if self.kappa < 0:
            raise InvalidParameterError("kappa must be >= 0")
        self.adjacency = A
        nnz = A.nnz if sp.issparse(A) else int(np.count_nonzero(A))
        self.complete = nnz == N * (N - 1) and (sp.issparse(A) or bool(np.all((A == 0) | (A == 1))))
        self.positions = wrap(X, self.L)
        if self.displacement is None:
            self.displacement = np.zeros_like(self.positions)
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)

    @property
    def N(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]


def complete_graph(N):
    A = np.ones((N, N))
    np.fill_diagonal(A, 0.0)
    return A


def interaction_drift(X, adjacency, D, kappa, r_N, complete=False):
    """-(kappa/(N r_N)) sum_j A_ij grad D(X_i - X_j), shape (N, d).

    For D = sum_m c_m exp(i k_m . x) the pair sum factorizes as
    sum_m i k_m c_m exp(i k_m . X_i) (A exp(-i k_m . X))_i.
    """
    N = X.shape[0]
    phase = np.exp(1j * (X @ D.wavevectors.T))  # (N, M)
    conj = np.conj(phase)
    if complete:
        coupled = conj.sum(axis=0)[None, :] - conj
    else:
        M = phase.shape[1]
        both = adjacency @ np.hstack([conj.real, conj.imag])
        both = np.asarray(both)
        coupled = both[:, :M] + 1j * both[:, M:]
    terms = phase * np.asarray(coupled) * D.coeffs[None, :]
    grad = np.real(1j * terms @ D.wavevectors)  # (N, d)
    return -(kappa / (N * r_N)) * grad


@dataclass
class ParticleTrajectory:
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)


def euler_maruyama_run(ensemble, D, dt, T, record_every=None):
    """Advance ``ensemble`` in place to time T; returns recorded positions.

    Noise comes from the ensemble's own generator, one (N, d) standard normal
    draw per step, so a fixed seed gives a bit-identical trajectory.
    """
    if not dt > 0 or T < 0:
        raise InvalidParameterError("need dt > 0 and T >= 0")
    if D.d != ensemble.d:
        raise DimensionError("potential dimension does not match particle coordinates")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise InvalidParameterError("T must be an integer multiple of dt")
    traj = ParticleTrajectory()
    traj.times.append(ensemble.t)
    traj.positions.append(ensemble.positions.copy())
    s = np.sqrt(2 * dt)
    for k in range(1, n_steps + 1):
        X = ensemble.positions
        step = dt * interaction_drift(X, ensemble.adjacency, D, ensemble.kappa, ensemble.r_N,
                                      ensemble.complete)
        step += s * ensemble.rng.standard_normal(X.shape)
        ensemble.displacement += step
        ensemble.positions = wrap(X + step, ensemble.L)
        ensemble.t += dt
        if (record_every and k % record_every == 0) or k == n_steps:
            traj.times.append(ensemble.t)
            traj.positions.append(ensemble.positions.copy())
    return traj


def sample_positions(N, L, d, density, rng, bound=None):
    """Rejection sampling of N points from a density function on [-L/2, L/2)^d."""
    if bound is None:
        probe = rng.uniform(-L / 2, L / 2, size=(4096, d))
        bound = 1.25 * float(np.max(density(probe)))
    out = np.empty((0, d))
    while out.shape[0] < N:
        x = rng.uniform(-L / 2, L / 2, size=(2 * N, d))
        keep = rng.random(2 * N) * bound < density(x)
        out = np.vstack([out, x[keep]])
    return out[:N]


def _wrapped_gaussian_1d(nodes, centers, L, h):
    """Wrapped normal kernel values, shape (len(centers), len(nodes))."""
    images = int(np.ceil(8 * h / L)) + 1
    diff = wrap(nodes[None, :] - centers[:, None], L)
    out = np.zeros_like(diff)
    for s in range(-images, images + 1):
        out += np.exp(-0.5 * ((diff + s * L) / h) ** 2)
    return out / (np.sqrt(2 * np.pi) * h)


def empirical_density(positions, grid, bandwidth):
    """Wrapped-Gaussian kernel density estimate on the grid, normalized to unit mass."""
    X = np.asarray(positions, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != grid.d:
        raise DimensionError("positions and grid dimension differ")
    if not bandwidth > grid.dx:
        raise InvalidParameterError(f"bandwidth {bandwidth} must exceed the grid spacing {grid.dx}")
    K = [_wrapped_gaussian_1d(grid.nodes, X[:, c], grid.L, bandwidth) for c in range(grid.d)]
    if grid.d == 1:
        rho = K[0].mean(axis=0)
    else:
        rho = K[0].T @ K[1] / X.shape[0]
    return rho / grid.integrate(rho)


def order_parameter(positions, L):
    """Circular resultant length |mean exp(2 pi i x / L)| per coordinate."""
    X = np.asarray(positions, dtype=float).reshape(len(positions), -1)
    return np.abs(np.mean(np.exp(2j * np.pi * X / L), axis=0))


def write_particle_csv(path, positions):
    X = np.asarray(positions, dtype=float).reshape(len(positions), -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x{c + 1}" for c in range(X.shape[1])])
        for i, row in enumerate(X):
            w.writerow([i] + [repr(float(v)) for v in row])


def read_particle_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1:]
