"""Sakaguchi-Kuramoto mean-field model on a graphop, d = 1:

    d/dt rho = d/dx(-omega rho + kappa rho V[A, g](rho)) + beta^-1 d^2/dx^2 rho,

with rho = rho(t, x, xi, omega).  The frequency distribution g is carried by
quadrature atoms; averaging over omega is the all-to-all graphop A_g on
the atoms, so the coupling is A (x) A_g and the solver machinery applies
unchanged with a modified linear propagator.
"""

from dataclasses import dataclass

import numpy as np

from .entropy import EPS_POS, theoretical_rate
from .errors import DimensionError, InvalidParameterError
from .graphops import NetworkSpace, combined_apply, constant_graphon
from .solver import DensityField, Stepper, integrate, vlasov_field


@dataclass(frozen=True, eq=False)
class FrequencyDistribution:
    nodes: np.ndarray
    weights: np.ndarray
    tag: str = "custom"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        om = np.asarray(self.nodes, dtype=float).ravel()
        if om.size != w.size or om.size == 0:
            raise DimensionError("need matching, nonempty frequency nodes and weights")
        if np.any(w < 0):
            raise InvalidParameterError("frequency weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError(f"frequency weights sum to {w.sum()!r}, expected 1")
        keep = w > 0
        object.__setattr__(self, "nodes", om[keep])
        object.__setattr__(self, "weights", w[keep])

    @property
    def size(self):
        return self.weights.size

    @classmethod
    def dirac(cls, omega=0.0):
        return cls([omega], [1.0], "dirac")

    @classmethod
    def gaussian(cls, sigma=1.0, mean=0.0, n_nodes=16):
        """Gauss-Hermite atoms for N(mean, sigma^2)."""
        if not sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
        w = w / w.sum()
        return cls(mean + sigma * x, w, "gaussian")

    @classmethod
    def uniform(cls, low=-1.0, high=1.0, n_nodes=16):
        """Gauss-Legendre atoms for the uniform law on [low, high]."""
        if not high > low:
            raise InvalidParameterError("need high > low")
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        return cls(low + (high - low) * (x + 1) / 2, w / w.sum(), "uniform")

    @classmethod
    def custom(cls, pairs):
        """From (omega, weight) pairs; weights are normalized."""
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        if np.any(arr[:, 1] < 0) or arr[:, 1].sum() <= 0:
            raise InvalidParameterError("custom frequency weights must be nonnegative with positive sum")
        return cls(arr[:, 0], arr[:, 1] / arr[:, 1].sum(), "custom")

    def space(self):
        return NetworkSpace(nodes=self.nodes, weights=self.weights, kind="frequency")

    def averaging_graphop(self):
        """A_g f = sum_m g_m f_m: rank one, numerical radius 1."""
        return constant_graphon(1.0, self.space())


@dataclass
class SakaguchiConfig:
    beta_temp: float
    kappa: float
    dt: float
    T: float
    eps_pos: float = EPS_POS
    cadence: float = None
    snapshot_cadence: float = None
    cfl: float = 0.5
    dealias: bool = True

    def __post_init__(self):
        # beta_temp = inf switches diffusion off (pure transport test mode)
        if not self.beta_temp > 0:
            raise InvalidParameterError("inverse temperature must be positive")
        if self.kappa < 0:
            raise InvalidParameterError("kappa must be >= 0")
        if not self.dt > 0 or self.T < 0:
            raise InvalidParameterError("need dt > 0 and T >= 0")

    @property
    def diffusion(self):
        return 0.0 if np.isinf(self.beta_temp) else 1.0 / self.beta_temp


def _interaction(A, g):
    Ag = g.averaging_graphop()
    return lambda v: combined_apply(A, Ag, v)


def _check_field(rho, A, g):
    if rho.grid.d != 1:
        raise DimensionError("the frequency model is one-dimensional")
    if rho.values.shape[:2] != (A.space.size, g.size):
        raise DimensionError(f"density leading shape {rho.values.shape[:2]} != ({A.space.size}, {g.size})")


def freq_vlasov(rho, A, D, g):
    """V[A, g](rho) = sum_m g_m grad D * (A rho)(., ., omega_m), broadcast over omega."""
    _check_field(rho, A, g)
    return vlasov_field(rho, A, D, interaction=_interaction(A, g))


def linear_symbol(grid, g, diffusion):
    """Fourier multiplier of -omega d/dx + diffusion d^2/dx^2, shape (n_omega, n_k)."""
    k = grid._derivative_wavenumbers[0]
    return -diffusion * grid.ksq[None, :] - 1j * g.nodes[:, None] * k[None, :]


def sakaguchi_stepper(grid, A, D, g, config):
    return Stepper(grid, D, config.kappa, _interaction(A, g),
                   linear_symbol(grid, g, config.diffusion), dealias=config.dealias, cfl=config.cfl)


def sakaguchi_initial(kind, params, grid, A, g):
    from .solver import make_initial_condition
    return make_initial_condition(kind, params, grid, A.space, freq_weights=g.weights)


def sakaguchi_run(rho0, config, A, D, g):
    """Integrate to config.T; diagnostics average over the product weights mu x g."""
    _check_field(rho0, A, g)
    if rho0.freq_weights is None or not np.allclose(rho0.freq_weights, g.weights, rtol=0, atol=1e-15):
        rho0 = DensityField(rho0.values, rho0.grid, rho0.space, rho0.t, g.weights)
    return integrate(rho0, config, sakaguchi_stepper(rho0.grid, A, D, g, config))


def kappa_zero(beta_temp, L, D):
    """2 pi^2 / (L^2 beta ||D''||_inf): coupling below which the splay state is entropy-stable."""
    sup = D.sup_laplacian if hasattr(D, "sup_laplacian") else float(D)
    if not (beta_temp > 0 and L > 0 and sup > 0):
        raise InvalidParameterError("inputs must be positive")
    return 2 * np.pi**2 / (L**2 * beta_temp * sup)


def critical_coupling(beta_temp, g):
    """2 / sum_m g_m beta^-1 / (beta^-2 + omega_m^2): linear onset of synchronization."""
    if not beta_temp > 0:
        raise InvalidParameterError("inverse temperature must be positive")
    b = 1.0 / beta_temp
    integral = float(np.sum(g.weights * b / (b**2 + g.nodes**2)))
    if not integral > 0:
        raise InvalidParameterError("frequency integral vanishes")
    return 2.0 / integral


def sakaguchi_rate(kappa, beta_temp, L, D, nA=1.0):
    """alpha = 4 pi^2 / (L^2 beta) - 2 kappa ||D''||_inf n(A) n(A_g), with n(A_g) = 1."""
    return theoretical_rate(kappa, nA * 1.0, L, D, diffusion=1.0 / beta_temp)
