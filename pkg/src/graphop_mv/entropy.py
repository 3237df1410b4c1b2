"""Relative entropy diagnostics, functional inequalities, thresholds and rates."""

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .torus import spectral_gradient

EPS_POS = 1e-14

CSV_FIELDS = ("t", "H_min", "H_max", "H_hat", "L1_joint", "ckp_margin_min",
              "logsob_margin_min", "mass_drift_max", "rho_min")


def _phi(u):
    """u log u - u + 1 >= 0, evaluated without cancellation near u = 1."""
    u = np.asarray(u, dtype=float)
    d = u - 1.0
    small = np.abs(d) < 1e-3
    out = np.empty_like(u)
    ds = d[small]
    # sum_{k>=2} (-1)^k d^k / (k (k-1))
    out[small] = ds**2 * (0.5 - ds * (1 / 6 - ds * (1 / 12 - ds * (1 / 20 - ds / 30))))
    ub = u[~small]
    out[~small] = ub * np.log(ub) - ub + 1.0
    return out


def slice_entropies(values, grid, eps_pos=EPS_POS, mass_tol=1e-6):
    """H(rho_k | rho_inf) for every leading index k of ``values``.

    Uses the integrand rho_inf * phi(rho/rho_inf); since every slice has unit
    mass this equals int rho log(rho/rho_inf) dx, but it is a sum of
    nonnegative terms and stays accurate when H is tiny.
    """
    values = grid.check(values)
    mass = grid.integrate(values)
    if np.any(np.abs(mass - 1.0) > mass_tol):
        bad = float(np.max(np.abs(mass - 1.0)))
        raise InvalidParameterError(f"density slice mass off by {bad:.3e} (> {mass_tol:.0e})")
    rho_inf = 1.0 / grid.volume
    u = np.maximum(values, eps_pos) / rho_inf
    return grid.integrate(rho_inf * _phi(u))


def relative_entropy(rho_slice, grid, eps_pos=EPS_POS):
    """H(rho | rho_inf) of a single density on the grid."""
    rho_slice = grid.check(rho_slice)
    if rho_slice.shape != grid.shape:
        raise DimensionError("expected a single density slice")
    return float(slice_entropies(rho_slice, grid, eps_pos))


def averaged_entropy(rho, weights=None, eps_pos=EPS_POS):
    """Weighted average of slice entropies; default weights are those of the density's network space."""
    H = slice_entropies(rho.values, rho.grid, eps_pos)
    w = rho.weights if weights is None else np.asarray(weights, dtype=float)
    if w.shape != H.shape:
        raise DimensionError(f"weights of shape {w.shape} for {H.shape} network nodes")
    if abs(w.sum() - 1.0) > 1e-12:
        raise InvalidParameterError("entropy weights must sum to 1")
    return float(np.sum(w * H))


def l1_distances(values, grid):
    """||rho_k - rho_inf||_{L^1(U)} per leading index."""
    return grid.integrate(np.abs(grid.check(values) - 1.0 / grid.volume))


def check_ckp(rho, eps_pos=EPS_POS):
    """CKP margins sqrt(2 H) - ||rho - rho_inf||_1: per node and for the joint measure dx x dmu."""
    H = slice_entropies(rho.values, rho.grid, eps_pos)
    l1 = l1_distances(rho.values, rho.grid)
    per_node = np.sqrt(2 * H) - l1
    w = rho.weights
    joint = math.sqrt(2 * float(np.sum(w * H))) - float(np.sum(w * l1))
    return per_node, joint


def fisher_information(values, grid, eps_pos=EPS_POS):
    """int |grad log rho|^2 rho dx = int |grad rho|^2 / rho dx, per leading index."""
    values = grid.check(values)
    g = spectral_gradient(grid, values)
    return grid.integrate(np.sum(g**2, axis=0) / np.maximum(values, eps_pos))


def log_sobolev_margins(values, grid, eps_pos=EPS_POS):
    """(L^2 / 4 pi^2) * Fisher - H for every leading index."""
    values = grid.check(values)
    if np.any(values <= 0):
        raise InvalidParameterError("log-Sobolev check needs a strictly positive density")
    H = slice_entropies(values, grid, eps_pos)
    return grid.L**2 / (4 * np.pi**2) * fisher_information(values, grid, eps_pos) - H


def check_log_sobolev(rho_slice, grid, eps_pos=EPS_POS):
    rho_slice = grid.check(rho_slice)
    if rho_slice.shape != grid.shape:
        raise DimensionError("expected a single density slice")
    return float(log_sobolev_margins(rho_slice, grid, eps_pos))


def kappa_threshold(nA, L, D):
    """Largest coupling for which the entropy decay estimate applies: 2 pi^2 / (L^2 ||Lap D||_inf n(A))."""
    sup = D.sup_laplacian if hasattr(D, "sup_laplacian") else float(D)
    if not nA > 0 or not sup > 0:
        raise InvalidParameterError("numerical radius and ||Lap D||_inf must be positive")
    return 2 * np.pi**2 / (L**2 * sup * nA)


def theoretical_rate(kappa, nA, L, D, diffusion=1.0):
    """alpha_hat = 4 pi^2 diffusion / L^2 - 2 kappa ||Lap D||_inf n(A); nonpositive means no guarantee.

    ``diffusion`` is the coefficient in front of the Laplacian (1/beta for the
    Sakaguchi model).
    """
    sup = D.sup_laplacian if hasattr(D, "sup_laplacian") else float(D)
    return 4 * np.pi**2 * diffusion / L**2 - 2 * kappa * sup * nA


def boundedness_constant(kappa, D, A_inf1, L):
    """(2b/a)^2 with a = 4 pi^2/L^2, b = sqrt(8) kappa ||Lap D||_inf ||A||_{inf->1}.

    Every trajectory satisfies H_hat(t) <= max(H_hat(0), this value), for any graphop.
    """
    sup = D.sup_laplacian if hasattr(D, "sup_laplacian") else float(D)
    a = 4 * np.pi**2 / L**2
    b = math.sqrt(8) * kappa * sup * A_inf1
    return (2 * b / a) ** 2


def fit_decay_rate(t, H, window=None, floor=1e-280, min_samples=10):
    """Least-squares slope of -log H against t on ``window`` (default: second half).

    Samples with H <= ``floor`` are dropped from the end of the window with
    a warning.  Raises if fewer than ``min_samples`` remain.
    """
    t = np.asarray(t, dtype=float)
    H = np.asarray(H, dtype=float)
    if window is None:
        window = (t[0] + 0.5 * (t[-1] - t[0]), t[-1])
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    ts, Hs = t[sel], H[sel]
    good = Hs > floor
    if not np.all(good):
        last = np.argmin(good)  # first underflowed sample
        warnings.warn(f"entropy underflow at t={ts[last]:.4g}; fit window shrunk", RuntimeWarning, stacklevel=2)
        ts, Hs = ts[:last], Hs[:last]
    if ts.size < min_samples:
        raise InvalidParameterError(f"only {ts.size} usable samples in fit window (need {min_samples})")
    slope, _ = np.polyfit(ts, -np.log(Hs), 1)
    return float(slope)


@dataclass
class EntropyReport:
    t: float
    H: np.ndarray
    H_hat: float
    L1: np.ndarray
    L1_joint: float
    ckp_margin: np.ndarray
    ckp_margin_joint: float
    logsob_margin: np.ndarray
    H_custom: float = None
    mass_drift: float = 0.0
    rho_min: float = 0.0
    extra: dict = field(default_factory=dict)

    def row(self):
        """One record in the diagnostics CSV schema."""
        return {
            "t": self.t,
            "H_min": float(self.H.min()),
            "H_max": float(self.H.max()),
            "H_hat": self.H_hat,
            "L1_joint": self.L1_joint,
            "ckp_margin_min": float(min(self.ckp_margin.min(), self.ckp_margin_joint)),
            "logsob_margin_min": float(self.logsob_margin.min()),
            "mass_drift_max": self.mass_drift,
            "rho_min": self.rho_min,
        }


def entropy_report(rho, custom_weights=None, eps_pos=EPS_POS):
    grid = rho.grid
    v = rho.values
    w = rho.weights
    H = slice_entropies(v, grid, eps_pos)
    l1 = l1_distances(v, grid)
    H_hat = float(np.sum(w * H))
    l1_joint = float(np.sum(w * l1))
    ckp = np.sqrt(2 * H) - l1
    if np.all(v > 0):
        ls = log_sobolev_margins(v, grid, eps_pos)
    else:
        ls = np.full(H.shape, -np.inf)
    H_custom = None
    if custom_weights is not None:
        H_custom = float(np.sum(np.asarray(custom_weights) * H))
    mass = grid.integrate(v)
    return EntropyReport(
        t=float(rho.t), H=H, H_hat=H_hat, L1=l1, L1_joint=l1_joint, ckp_margin=ckp,
        ckp_margin_joint=math.sqrt(2 * H_hat) - l1_joint, logsob_margin=ls, H_custom=H_custom,
        mass_drift=float(np.max(np.abs(mass - 1.0))), rho_min=float(v.min()))


def write_diagnostics_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: repr(float(r[k])) for k in CSV_FIELDS})


def read_diagnostics_csv(path):
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]
