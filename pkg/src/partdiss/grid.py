"""Periodic grids and vector-valued spectral fields.

The computational domain is the torus [0, 2*pi*L)^d.  A field is stored by
its Fourier coefficients c_k (numpy FFT layout, unshifted) in the convention

    u(x) = sum_k c_k exp(i k.x / L),

so the physical frequency of mode k is xi = k / L.  With this convention the
frequency resolution is 1/L and a large period L acts as a fine sampling of
the low-frequency range.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with per-axis mode counts and period 2*pi*L."""

    shape: tuple[int, ...]
    period: float = 1.0  # the L in [0, 2*pi*L)^d

    def __post_init__(self):
        if isinstance(self.shape, int):
            object.__setattr__(self, "shape", (self.shape,))
        else:
            object.__setattr__(self, "shape", tuple(int(m) for m in self.shape))
        if any(m < 2 for m in self.shape):
            raise ValueError("each axis needs at least 2 modes")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def total_modes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod([2 * np.pi * self.period / m for m in self.shape]))

    @property
    def volume(self) -> float:
        return (2 * np.pi * self.period) ** self.d

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis in FFT order."""
        return tuple(np.fft.fftfreq(m, d=1.0 / m) for m in self.shape)

    @cached_property
    def xi(self) -> np.ndarray:
        """Physical frequency vectors, shape (d, *shape)."""
        axes = [k / self.period for k in self.wavenumbers]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=0)

    @cached_property
    def rho(self) -> np.ndarray:
        """Frequency magnitudes |xi|, shape (*shape)."""
        return np.sqrt(np.sum(self.xi**2, axis=0))

    @cached_property
    def xi_flat(self) -> np.ndarray:
        """Frequencies flattened to (M, d) with M = total_modes."""
        return self.xi.reshape(self.d, -1).T.copy()

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean 2/3-rule mask (True = keep), per-axis |k| < m/3."""
        keep = np.ones(self.shape, dtype=bool)
        for ax, k in enumerate(self.wavenumbers):
            sl = [None] * self.d
            sl[ax] = slice(None)
            keep &= np.abs(k)[tuple(sl)] < self.shape[ax] / 3.0
        return keep

    @property
    def xi_min(self) -> float:
        """Smallest nonzero frequency magnitude."""
        return 1.0 / self.period

    @property
    def xi_max(self) -> float:
        return float(self.rho.max())


class SpectralField:
    """Complex Fourier coefficients of an n-component field on a Grid."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: Grid, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[1:] != grid.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match grid {grid.shape}")
        self.grid = grid
        self.coeffs = coeffs

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    # -- construction -----------------------------------------------------

    @classmethod
    def zeros(cls, grid: Grid, n: int) -> "SpectralField":
        return cls(grid, np.zeros((n,) + grid.shape, dtype=complex))

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values)
        if values.ndim == grid.d:
            values = values[None]
        axes = tuple(range(1, grid.d + 1))
        coeffs = np.fft.fftn(values, axes=axes) / grid.total_modes
        return cls(grid, coeffs)

    def to_physical(self, real: bool = True) -> np.ndarray:
        axes = tuple(range(1, self.grid.d + 1))
        out = np.fft.ifftn(self.coeffs, axes=axes) * self.grid.total_modes
        return out.real if real else out

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    # -- algebra (value semantics) ----------------------------------------

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * a)

    __rmul__ = __mul__

    def components(self, idx) -> "SpectralField":
        """Sub-field made of the selected components (slice or index list)."""
        sub = self.coeffs[idx]
        if sub.ndim == self.grid.d:
            sub = sub[None]
        return SpectralField(self.grid, sub)

    # -- basic norms -------------------------------------------------------

    def l2(self) -> float:
        """L2(torus) norm via Parseval."""
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coeffs) ** 2)))

    def lp(self, p: float) -> float:
        """Lp norm of the pointwise Euclidean magnitude over components."""
        if p == 2:
            return self.l2()
        mag = np.sqrt(np.sum(np.abs(self.to_physical(real=False)) ** 2, axis=0))
        if np.isinf(p):
            return float(mag.max())
        return float((np.sum(mag**p) * self.grid.cell_volume) ** (1.0 / p))

    def linf(self) -> float:
        return self.lp(np.inf)

    def zero_mode(self) -> np.ndarray:
        return self.coeffs[(slice(None),) + (0,) * self.grid.d].copy()

    def drop_zero_mode(self) -> "SpectralField":
        out = self.coeffs.copy()
        out[(slice(None),) + (0,) * self.grid.d] = 0.0
        return SpectralField(self.grid, out)

    def is_real(self, tol: float = 1e-12) -> bool:
        """Check conjugate symmetry c(-k) = conj(c(k)) of the coefficients."""
        c = self.coeffs
        flipped = c
        for ax in range(1, self.grid.d + 1):
            flipped = np.flip(flipped, axis=ax)
            flipped = np.roll(flipped, 1, axis=ax)
        resid = np.abs(flipped.conj() - c).max()
        scale = max(np.abs(c).max(), 1e-300)
        return bool(resid <= tol * max(scale, 1.0))

    def derivative(self, axis: int) -> "SpectralField":
        """Spectral partial derivative along the given space axis."""
        return SpectralField(self.grid, 1j * self.grid.xi[axis] * self.coeffs)


def random_real_field(grid: Grid, n: int, rng: np.random.Generator,
                      spectrum=None, zero_mean: bool = True) -> SpectralField:
    """Random real field with optional radial spectral envelope.

    White noise is generated in physical space and shaped in Fourier space by
    ``spectrum(rho)``; conjugate symmetry (hence realness) is automatic.
    """
    noise = rng.standard_normal((n,) + grid.shape)
    f = SpectralField.from_physical(grid, noise)
    if spectrum is not None:
        rho = grid.rho
        env = np.zeros_like(rho)
        nz = rho > 0
        env[nz] = spectrum(rho[nz])
        if not zero_mean:
            env[~nz] = spectrum(np.asarray([grid.xi_min]))[0]
        f = SpectralField(grid, f.coeffs * env)
    if zero_mean:
        f = f.drop_zero_mode()
    return f
