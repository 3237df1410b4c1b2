"""Flat torus U = [-L/2, L/2]^d with DFT-based calculus.

Fields are real arrays whose trailing ``d`` axes are the spatial grid; any
leading axes (network nodes, frequencies, vector components) are carried
along untouched by every operation here.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionError, InvalidParameterError


@dataclass(frozen=True)
class TorusGrid:
    """Uniform collocation grid x_k = -L/2 + k L/n in each of d dimensions."""

    L: float
    d: int = 1
    n: int = 64

    def __post_init__(self):
        if not self.L > 0:
            raise InvalidParameterError(f"side length must be positive, got {self.L}")
        if self.d not in (1, 2):
            raise InvalidParameterError(f"dimension must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise InvalidParameterError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def axes(self):
        return tuple(range(-self.d, 0))

    @property
    def dx(self):
        return self.L / self.n

    @property
    def cell_volume(self):
        return self.dx**self.d

    @property
    def volume(self):
        return self.L**self.d

    @cached_property
    def nodes(self):
        return -self.L / 2 + self.dx * np.arange(self.n)

    @cached_property
    def coords(self):
        """Tuple of d coordinate arrays, each of shape ``self.shape``."""
        return tuple(np.meshgrid(*([self.nodes] * self.d), indexing="ij"))

    @cached_property
    def wavenumbers(self):
        """Angular wavenumbers 2*pi*k/L broadcastable against an rfftn spectrum."""
        q = 2 * np.pi / self.L
        ks = []
        for i in range(self.d):
            if i == self.d - 1:
                k = np.fft.rfftfreq(self.n, d=1.0 / self.n)
            else:
                k = np.fft.fftfreq(self.n, d=1.0 / self.n)
            shape = [1] * self.d
            shape[i] = k.size
            ks.append(q * k.reshape(shape))
        return tuple(ks)

    @cached_property
    def ksq(self):
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def _derivative_wavenumbers(self):
        # Nyquist mode has no odd-derivative partner; zero it.
        out = []
        for i, k in enumerate(self.wavenumbers):
            k = k.copy()
            k[tuple(slice(None) if j != i else self.n // 2 for j in range(self.d))] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask on the rfftn spectrum."""
        cutoff = self.n // 3
        q = 2 * np.pi / self.L
        mask = np.ones(self.ksq.shape, dtype=bool)
        for k in self.wavenumbers:
            mask &= np.abs(k / q) <= cutoff
        return mask

    def fft(self, f):
        return np.fft.rfftn(f, axes=self.axes)

    def ifft(self, f_hat):
        return np.fft.irfftn(f_hat, s=self.shape, axes=self.axes)

    def check(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape[f.ndim - self.d:] != self.shape or f.ndim < self.d:
            raise DimensionError(f"field shape {f.shape} does not end with grid shape {self.shape}")
        return f

    def integrate(self, f):
        """Riemann sum over the trailing grid axes (spectrally exact for periodic f)."""
        return self.check(f).sum(axis=self.axes) * self.cell_volume


def circular_convolve(grid, kernel_samples, density_samples):
    """Periodic convolution (f * g)(x_j) = dx^d sum_k f(x_j - x_k) g(x_k).

    ``kernel_samples`` holds f at the grid nodes x_k (which start at -L/2),
    so it is shifted to origin-based indexing before the cyclic product.
    Leading axes of either argument broadcast.
    """
    f = grid.check(kernel_samples)
    g = grid.check(density_samples)
    f0 = np.fft.ifftshift(f, axes=grid.axes)
    return grid.ifft(grid.fft(f0) * grid.fft(g)) * grid.cell_volume


def spectral_gradient(grid, field):
    """Gradient via the multiplier i*2*pi*k/L; returns shape (d, *field.shape)."""
    f_hat = grid.fft(grid.check(field))
    return np.stack([grid.ifft(1j * k * f_hat) for k in grid._derivative_wavenumbers])


def spectral_divergence(grid, vector_field):
    """Divergence of a field of shape (d, ...)."""
    v = np.asarray(vector_field, dtype=float)
    if v.shape[0] != grid.d:
        raise DimensionError(f"expected {grid.d} vector components, got {v.shape[0]}")
    total = 0.0
    for k, comp in zip(grid._derivative_wavenumbers, v):
        total = total + 1j * k * grid.fft(grid.check(comp))
    return grid.ifft(total)


def spectral_laplacian(grid, field):
    return grid.ifft(-grid.ksq * grid.fft(grid.check(field)))


@dataclass(frozen=True, eq=False)
class InteractionPotential:
    """Periodic potential D(x) = sum_m c_m exp(i k_m . x), k_m = 2*pi*modes_m/L.

    Coefficients come in conjugate pairs so D is real.  ``sup_laplacian`` is
    the sup norm of Laplacian D over U; when not given it defaults to
    sum |k_m|^2 |c_m|, which is exact whenever all cosines peak together
    (true for the cosine potentials built here).
    """

    L: float
    d: int
    modes: np.ndarray
    coeffs: np.ndarray
    sup_laplacian: float = None
    name: str = "fourier"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        modes = np.atleast_2d(np.asarray(self.modes, dtype=int))
        coeffs = np.asarray(self.coeffs, dtype=complex).ravel()
        if modes.shape != (coeffs.size, self.d):
            raise DimensionError(f"modes shape {modes.shape} incompatible with {coeffs.size} coefficients in d={self.d}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", coeffs)
        if self.sup_laplacian is None:
            object.__setattr__(self, "sup_laplacian", float(np.sum(self.wavevectors_sq * np.abs(coeffs))))

    @property
    def wavevectors(self):
        return 2 * np.pi / self.L * self.modes

    @property
    def wavevectors_sq(self):
        return np.sum(self.wavevectors**2, axis=1)

    def _phases(self, x):
        # x: shape (d, ...) -> (M, ...)
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[0] != 1):
            x = x[None]
        return np.exp(1j * np.tensordot(self.wavevectors, x, axes=(1, 0))), x.shape[1:]

    def value(self, x):
        """D at points x of shape (d, ...) (or plain array when d = 1)."""
        ph, _ = self._phases(x)
        return np.real(np.tensordot(self.coeffs, ph, axes=(0, 0)))

    def gradient(self, x):
        """Gradient of D, shape (d, ...)."""
        ph, _ = self._phases(x)
        c = 1j * self.coeffs[:, None] * self.wavevectors
        return np.real(np.tensordot(c, ph, axes=(0, 0)))

    def laplacian(self, x):
        ph, _ = self._phases(x)
        return np.real(np.tensordot(-self.wavevectors_sq * self.coeffs, ph, axes=(0, 0)))

    def sample(self, grid):
        return self.value(np.stack(grid.coords))

    def sample_gradient(self, grid):
        """Cached gradient samples on ``grid``."""
        key = ("grad", grid)
        if key not in self._cache:
            self._cache[key] = self.gradient(np.stack(grid.coords))
        return self._cache[key]

    def sample_laplacian(self, grid):
        key = ("lap", grid)
        if key not in self._cache:
            self._cache[key] = self.laplacian(np.stack(grid.coords))
        return self._cache[key]

    def grid_coefficients(self, grid):
        """rfftn coefficients of the sampled potential."""
        return grid.fft(self.sample(grid))


def make_cosine_potential(L, d=1):
    """D(x) = -sum_i cos(2*pi*x_i/L); sup of Laplacian is d*(2*pi/L)^2."""
    if not L > 0:
        raise InvalidParameterError(f"L must be positive, got {L}")
    modes = []
    for i in range(d):
        for s in (1, -1):
            m = [0] * d
            m[i] = s
            modes.append(m)
    coeffs = np.full(len(modes), -0.5)
    return InteractionPotential(L=L, d=d, modes=np.array(modes), coeffs=coeffs,
                                sup_laplacian=d * (2 * np.pi / L) ** 2, name="cosine")


def make_kuramoto_potential(L):
    """Noisy-Kuramoto interaction D(x) = -cos(2*pi*x/L) on the 1-d torus."""
    pot = make_cosine_potential(L, d=1)
    return InteractionPotential(L=pot.L, d=1, modes=pot.modes, coeffs=pot.coeffs,
                                sup_laplacian=pot.sup_laplacian, name="kuramoto")


def potential_from_samples(grid, samples, tol=1e-13, refine=8):
    """Spectral fallback for potentials only known on the grid.

    Keeps every DFT mode above ``tol`` (relative) and measures the Laplacian
    sup norm on a grid ``refine`` times finer.  Requires a grid-resolved,
    smooth potential; kinks are not represented faithfully.
    """
    samples = grid.check(samples)
    if samples.shape != grid.shape:
        raise DimensionError("potential samples must have exactly the grid shape")
    # coefficients relative to origin-based indexing
    c = np.fft.fftn(np.fft.ifftshift(samples)) / grid.n**grid.d
    idx = np.argwhere(np.abs(c) > tol * max(np.abs(c).max(), 1e-300))
    freqs = np.fft.fftfreq(grid.n, d=1.0 / grid.n).astype(int)
    modes = freqs[idx]
    coeffs = c[tuple(idx.T)]
    keep = np.all(np.abs(modes) < grid.n // 2, axis=1)
    pot = InteractionPotential(L=grid.L, d=grid.d, modes=modes[keep], coeffs=coeffs[keep],
                               sup_laplacian=1.0, name="sampled")
    fine = TorusGrid(grid.L, grid.d, grid.n * refine)
    sup = float(np.max(np.abs(pot.laplacian(np.stack(fine.coords)))))
    return InteractionPotential(L=grid.L, d=grid.d, modes=pot.modes, coeffs=pot.coeffs,
                                sup_laplacian=sup, name="sampled")
