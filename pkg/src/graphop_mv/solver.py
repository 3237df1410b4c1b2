"""Time integration of the graphop McKean-Vlasov equation

    d/dt rho = kappa div(rho V[A](rho)) + Lap rho,
    V[A](rho)(x, xi) = (grad D * (A rho)(., xi))(x),

on a torus grid times a discretized network space.

Strang splitting: half-step of the exact linear propagator (diffusion, and
for the Sakaguchi model frequency transport), one SSP-RK2 step of the
conservative advection term evaluated spectrally with 2/3-rule dealiasing of
the flux, then the second linear half-step.  The flux divergence has no mean
mode, so per-node mass is conserved to round-off.
"""

import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .entropy import EPS_POS, entropy_report
from .errors import (CFLViolationError, DimensionError, InvalidParameterError,
                     PositivityError)
from .graphops import NetworkSpace
from .torus import TorusGrid

POSITIVITY_FLOOR = -1e-8


@dataclass
class DensityField:
    """rho[k, ..., x] on grid x network nodes.

    Axis 0 indexes the network space; an optional axis 1 indexes a second
    network variable (frequency atoms) with weights ``freq_weights``.
    """

    values: np.ndarray
    grid: TorusGrid
    space: NetworkSpace
    t: float = 0.0
    freq_weights: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expect = (self.space.size,)
        if self.freq_weights is not None:
            self.freq_weights = np.asarray(self.freq_weights, dtype=float)
            expect += (self.freq_weights.size,)
        if self.values.shape != expect + self.grid.shape:
            raise DimensionError(f"density shape {self.values.shape} != {expect + self.grid.shape}")

    @property
    def weights(self):
        """Joint node weights with shape ``net_shape``."""
        if self.freq_weights is None:
            return self.space.weights
        return np.outer(self.space.weights, self.freq_weights)

    @property
    def net_shape(self):
        return self.values.shape[: self.values.ndim - self.grid.d]

    def masses(self):
        return self.grid.integrate(self.values)

    def joint_mass(self):
        return float(np.sum(self.weights * self.masses()))

    def min(self):
        return float(self.values.min())

    def copy(self, values=None, t=None):
        return replace(self, values=self.values.copy() if values is None else values,
                       t=self.t if t is None else t)


@dataclass
class SolverConfig:
    kappa: float
    dt: float
    T: float
    scheme: str = "strang-ssprk2"
    eps_pos: float = EPS_POS
    cadence: float = None  # time between diagnostic records; default: every step
    snapshot_cadence: float = None
    cfl: float = 0.5
    dealias: bool = True
    check_commute: bool = False

    def __post_init__(self):
        if self.kappa < 0:
            raise InvalidParameterError("kappa must be >= 0")
        if not self.dt > 0:
            raise InvalidParameterError("dt must be positive")
        if self.T < 0:
            raise InvalidParameterError("T must be >= 0")
        if self.scheme != "strang-ssprk2":
            raise InvalidParameterError(f"unknown scheme {self.scheme!r}")


def steady_state(grid, space, freq_weights=None):
    """Splay state rho_inf = 1/L^d at every node."""
    shape = (space.size,) + (() if freq_weights is None else (len(freq_weights),)) + grid.shape
    return DensityField(np.full(shape, 1.0 / grid.volume), grid, space, 0.0, freq_weights)


class _Kernels:
    """Spectra of grad D, shifted so that index 0 is the origin."""

    def __init__(self, grid, D):
        if D.d != grid.d or not math.isclose(D.L, grid.L):
            raise DimensionError("potential and grid disagree on (L, d)")
        g = D.sample_gradient(grid)
        g0 = np.fft.ifftshift(g, axes=tuple(range(1, grid.d + 1)))
        self.grad_hat = np.fft.rfftn(g0, axes=tuple(range(1, grid.d + 1))) * grid.cell_volume


def vlasov_field(rho, A, D, interaction=None, verify=False, _kernels=None):
    """V[A](rho) = grad D * (A rho), shape (d, *rho.values.shape).

    ``interaction`` overrides the network coupling (defaults to A.apply on
    axis 0).  With ``verify`` the order swap A(grad D * rho) is computed too
    and required to agree to 1e-10 relative.
    """
    grid = rho.grid
    K = _kernels or _Kernels(grid, D)
    apply = interaction or A.apply
    a_hat = grid.fft(apply(rho.values))
    V = np.stack([grid.ifft(gh * a_hat) for gh in K.grad_hat])
    if verify:
        r_hat = grid.fft(rho.values)
        alt = np.stack([apply(grid.ifft(gh * r_hat)) for gh in K.grad_hat])
        scale = max(1.0, float(np.max(np.abs(V))))
        if np.max(np.abs(alt - V)) > 1e-10 * scale:
            raise AssertionError("network operator does not commute with the x-convolution")
    return V


class Stepper:
    """One Strang step of rho_t = L rho + kappa div(rho V), L diagonal in Fourier space.

    ``linear_symbol`` is the Fourier multiplier of L broadcastable against
    the rfftn spectrum of the values (default: -|k|^2, plain diffusion).
    """

    def __init__(self, grid, D, kappa, interaction, linear_symbol=None, dealias=True, cfl=0.5):
        self.grid = grid
        self.D = D
        self.kappa = float(kappa)
        self.interaction = interaction
        self.kernels = _Kernels(grid, D)
        self.symbol = -grid.ksq if linear_symbol is None else linear_symbol
        self.mask = grid.dealias_mask if dealias else None
        self.cfl = cfl
        self._prop = {}
        self.last_max_dt = np.inf

    def half_propagator(self, dt):
        key = float(dt)
        if key not in self._prop:
            self._prop = {key: np.exp(self.symbol * (dt / 2))}
        return self._prop[key]

    def linear_half(self, values, dt):
        g = self.grid
        return g.ifft(self.half_propagator(dt) * g.fft(values))

    def velocity(self, values):
        g = self.grid
        a_hat = g.fft(self.interaction(values))
        return np.stack([g.ifft(gh * a_hat) for gh in self.kernels.grad_hat])

    def advection_rhs(self, values):
        """kappa div(rho V) and max sum_c |V_c|."""
        g = self.grid
        V = self.velocity(values)
        vmax = float(np.max(np.sum(np.abs(V), axis=0)))
        total = 0.0
        for k, Vc in zip(g._derivative_wavenumbers, V):
            F = g.fft(values * Vc)
            if self.mask is not None:
                F = F * self.mask
            total = total + 1j * k * F
        return self.kappa * g.ifft(total), vmax

    def max_dt(self, vmax):
        if self.kappa == 0 or vmax == 0:
            return np.inf
        return self.cfl * self.grid.dx / (self.kappa * vmax)

    def step(self, values, dt):
        u = self.linear_half(values, dt)
        if self.kappa != 0:
            r0, vmax = self.advection_rhs(u)
            self.last_max_dt = self.max_dt(vmax)
            if dt > self.last_max_dt:
                raise CFLViolationError(
                    f"dt={dt:.3e} exceeds advection CFL bound {self.last_max_dt:.3e}", self.last_max_dt)
            u1 = u + dt * r0
            r1, _ = self.advection_rhs(u1)
            u = 0.5 * u + 0.5 * (u1 + dt * r1)
        return self.linear_half(u, dt)


def _default_interaction(A):
    return A.apply


def make_stepper(grid, A, D, config, linear_symbol=None, interaction=None):
    return Stepper(grid, D, config.kappa, interaction or _default_interaction(A), linear_symbol,
                   dealias=config.dealias, cfl=config.cfl)


def step(rho, config, A, D, _stepper=None, dt=None):
    """Advance ``rho`` by one step of size ``dt`` (default ``config.dt``)."""
    st = _stepper or make_stepper(rho.grid, A, D, config)
    dt = config.dt if dt is None else dt
    new = st.step(rho.values, dt)
    mn = float(new.min())
    if mn < POSITIVITY_FLOOR:
        raise PositivityError(f"min rho = {mn:.3e} at t = {rho.t + dt:.4g}; retry with dt <= {dt / 2:.3e}",
                              suggested_dt=dt / 2)
    if config.check_commute:
        vlasov_field(rho, A, D, interaction=st.interaction, verify=True, _kernels=st.kernels)
    return rho.copy(values=new, t=rho.t + dt)


@dataclass
class Trajectory:
    records: list = field(default_factory=list)  # diagnostics rows (dict)
    reports: list = field(default_factory=list)  # EntropyReport
    snapshots: list = field(default_factory=list)  # DensityField
    final: DensityField = None
    steps: int = 0
    max_dt_seen: float = np.inf

    @property
    def t(self):
        return np.array([r["t"] for r in self.records])

    @property
    def H_hat(self):
        return np.array([r["H_hat"] for r in self.records])

    def column(self, name):
        return np.array([r[name] for r in self.records])


def _every(cadence, dt):
    if cadence is None:
        return 1
    return max(1, int(round(cadence / dt)))


def integrate(rho0, config, stepper, custom_weights=None, check_commute=None):
    """Drive ``stepper`` from rho0 to config.T, recording diagnostics at the configured cadence."""
    _validate_initial(rho0)
    n_full = int(math.floor(config.T / config.dt + 1e-9))
    rem = config.T - n_full * config.dt
    dts = [config.dt] * n_full + ([rem] if rem > 1e-12 * max(1.0, config.T) else [])
    rec_every = _every(config.cadence, config.dt)
    snap_every = _every(config.snapshot_cadence, config.dt) if config.snapshot_cadence else None

    traj = Trajectory()
    initial_mass = rho0.masses()

    def record(rho):
        rep = entropy_report(rho, custom_weights, config.eps_pos)
        rep.mass_drift = float(np.max(np.abs(rho.masses() - initial_mass)))
        traj.reports.append(rep)
        traj.records.append(rep.row())

    rho = rho0.copy()
    record(rho)
    if snap_every:
        traj.snapshots.append(rho.copy())
    for i, dt in enumerate(dts, 1):
        new = stepper.step(rho.values, dt)
        mn = float(new.min())
        if mn < POSITIVITY_FLOOR:
            raise PositivityError(
                f"min rho = {mn:.3e} at t = {rho.t + dt:.4g}; retry with dt <= {dt / 2:.3e}", suggested_dt=dt / 2)
        rho = rho.copy(values=new, t=rho0.t + (i * config.dt if i <= n_full else config.T))
        traj.max_dt_seen = min(traj.max_dt_seen, stepper.last_max_dt)
        last = i == len(dts)
        if i % rec_every == 0 or last:
            record(rho)
        if snap_every and (i % snap_every == 0 or last):
            traj.snapshots.append(rho.copy())
    traj.final = rho
    traj.steps = len(dts)
    return traj


def run(rho0, config, A, D, custom_weights=None):
    """Integrate to config.T; returns a :class:`Trajectory` of diagnostics."""
    stepper = make_stepper(rho0.grid, A, D, config)
    if config.check_commute:
        vlasov_field(rho0, A, D, verify=True, _kernels=stepper.kernels)
    return integrate(rho0, config, stepper, custom_weights)


def _validate_initial(rho):
    if rho.min() < 0:
        raise InvalidParameterError("initial density must be nonnegative")
    drift = np.max(np.abs(rho.masses() - 1.0))
    if drift > 1e-9:
        raise InvalidParameterError(f"initial density slices must have unit mass (off by {drift:.2e})")


def stationary_residual(rho, A, D, kappa):
    """kappa div(rho V[A](rho)) + Lap rho on the grid."""
    st = Stepper(rho.grid, D, kappa, A.apply, dealias=False)
    adv, _ = st.advection_rhs(rho.values)
    g = rho.grid
    return adv + g.ifft(-g.ksq * g.fft(rho.values))


def make_initial_condition(kind, params, grid, space, freq_weights=None):
    """Admissible initial data.

    kind = "perturbed-uniform": params eps, mode (default 1), phase (default 0)
        and optional modulation (array over nodes, or callable of the node
        coordinates) giving rho = (1 + eps m_k cos(2 pi mode x_1/L + phase))/L^d.
    kind = "von-mises-mixture": params centers, concentrations, mix weights
        (default uniform) and optional modulation scaling the concentrations
        per node; each slice is normalized numerically.

    With ``freq_weights`` the density is replicated along a frequency axis.
    """
    params = dict(params or {})
    m = space.size
    mod = params.get("modulation")
    if mod is None:
        modv = np.ones(m)
    elif callable(mod):
        modv = np.asarray(mod(space.nodes), dtype=float).reshape(m)
    else:
        modv = np.asarray(mod, dtype=float).reshape(m)
    x1 = grid.coords[0]
    expand = (slice(None),) + (None,) * grid.d
    if kind == "perturbed-uniform":
        eps = float(params.get("eps", 0.0))
        mode = int(params.get("mode", 1))
        phase = float(params.get("phase", 0.0))
        if np.any(np.abs(eps * modv) >= 1):
            raise InvalidParameterError("perturbation amplitude must stay below 1 for a positive density")
        wave = np.cos(2 * np.pi * mode * x1 / grid.L + phase)
        vals = (1.0 + eps * modv[expand] * wave[None]) / grid.volume
    elif kind == "von-mises-mixture":
        centers = np.atleast_1d(np.asarray(params.get("centers", [0.0]), dtype=float))
        conc = np.atleast_1d(np.asarray(params.get("concentrations", [1.0]), dtype=float))
        conc = np.broadcast_to(conc, centers.shape)
        mix = np.asarray(params.get("weights", np.full(centers.size, 1.0 / centers.size)), dtype=float)
        if np.any(mix < 0) or mix.sum() <= 0 or np.any(conc < 0):
            raise InvalidParameterError("mixture weights and concentrations must be nonnegative")
        vals = np.zeros((m,) + grid.shape)
        for c, k, w in zip(centers, conc, mix):
            vals += w * np.exp(k * modv[expand] * (np.cos(2 * np.pi * (x1 - c) / grid.L)[None] - 1.0))
        vals /= grid.integrate(vals)[expand]
    else:
        raise InvalidParameterError(f"unknown initial condition kind {kind!r}")
    if np.any(vals <= 0):
        raise InvalidParameterError("initial density is not strictly positive")
    if freq_weights is not None:
        vals = np.repeat(vals[:, None], len(freq_weights), axis=1)
    return DensityField(vals, grid, space, 0.0, freq_weights)


# -- snapshot format ----------------------------------------------------------
# little-endian float64: d, n, node_count, t, then node_count * n^d values (C order)

def snapshot_bytes(rho):
    count = int(np.prod(rho.net_shape))
    header = struct.pack("<4d", rho.grid.d, rho.grid.n, count, rho.t)
    return header + np.ascontiguousarray(rho.values, dtype="<f8").tobytes()


def write_snapshot(path, rho):
    with open(path, "wb") as fh:
        fh.write(snapshot_bytes(rho))


def read_snapshot(path):
    """Returns (d, n, node_count, t, values) with values shaped (node_count, n, ..., n)."""
    with open(path, "rb") as fh:
        d, n, count, t = struct.unpack("<4d", fh.read(32))
        data = np.frombuffer(fh.read(), dtype="<f8")
    d, n, count = int(d), int(n), int(count)
    if data.size != count * n**d:
        raise DimensionError(f"snapshot holds {data.size} values, header implies {count * n ** d}")
    return d, n, count, t, data.reshape((count,) + (n,) * d).copy()
