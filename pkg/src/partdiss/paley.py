"""Dyadic frequency decomposition and Besov-type norms on the torus.

The radial cutoff chi equals 1 on |xi| <= 1 and 0 on |xi| >= 2 (polynomial
smoothstep by default).  Block j carries the mask

    phi_j(xi) = chi(|xi|/2^j) - chi(|xi|/2^(j-1)),

supported in the annulus 2^j * [1/2, 2]; the family telescopes to an exact
partition of unity on every nonzero grid frequency.  The zero mode is
excluded from all homogeneous quantities and tracked separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, SpectralField


def smoothstep_cutoff(rho: np.ndarray, order: int = 5) -> np.ndarray:
    """chi(rho): 1 for rho <= 1, 0 for rho >= 2, polynomial in between."""
    x = np.clip(np.asarray(rho, dtype=float) - 1.0, 0.0, 1.0)
    if order == 3:
        s = x * x * (3.0 - 2.0 * x)
    elif order == 5:
        s = x**3 * (10.0 + x * (-15.0 + 6.0 * x))
    elif order == 7:
        s = x**4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)))
    else:
        raise ValueError("supported smoothstep orders: 3, 5, 7")
    return 1.0 - s


def mollified_cutoff(rho: np.ndarray) -> np.ndarray:
    """C-infinity alternative cutoff with the same support."""
    rho = np.asarray(rho, dtype=float)
    x = np.clip(rho - 1.0, 0.0, 1.0)

    def f(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    num = f(1.0 - x)
    den = num + f(x)
    den[den == 0] = 1.0
    return num / den


@dataclass(frozen=True)
class HybridNormSpec:
    """Frequency-split norm: regularity s below the threshold, s_high above."""

    s: float
    s_high: float
    threshold: float = 1.0
    p: float = 2.0
    q: float = 1.0


class FilterBank:
    """Precomputed dyadic masks for one grid."""

    def __init__(self, grid: Grid, order: int = 5, smooth: bool = False):
        self.grid = grid
        self.order = order
        self.smooth = smooth
        chi = mollified_cutoff if smooth else (lambda r: smoothstep_cutoff(r, order))
        self._chi = chi
        j_lo = math.floor(math.log2(grid.xi_min)) - 1
        j_hi = math.ceil(math.log2(max(grid.xi_max, grid.xi_min))) + 1
        rho = grid.rho
        masks = {}
        for j in range(j_lo, j_hi + 1):
            m = chi(rho / 2.0**j) - chi(rho / 2.0 ** (j - 1))
            m[rho == 0] = 0.0
            if np.any(m != 0.0):
                masks[j] = m
        self.j_range = sorted(masks)
        self.masks = masks
        self._stack = np.stack([masks[j] for j in self.j_range], axis=0)
        self._js = np.array(self.j_range)

    def chi(self, rho):
        return self._chi(np.asarray(rho, dtype=float))

    def mask(self, j: int) -> np.ndarray:
        if j not in self.masks:
            return np.zeros(self.grid.shape)
        return self.masks[j]

    def partition_residual(self) -> float:
        """max over nonzero grid xi of |sum_j phi_j - 1|."""
        total = self._stack.sum(axis=0)
        nz = self.grid.rho > 0
        return float(np.abs(total[nz] - 1.0).max())

    def low_pass(self, threshold: float) -> np.ndarray:
        """Sum of the masks of blocks with 2^j < threshold (a smooth low cut)."""
        sel = 2.0**self._js < threshold
        return self._stack[sel].sum(axis=0)


def block(bank: FilterBank, u: SpectralField, j: int) -> SpectralField:
    """Frequency localization of u to the dyadic annulus of scale 2^j."""
    return SpectralField(u.grid, u.coeffs * bank.mask(j))


def block_l2_norms(bank: FilterBank, u: SpectralField) -> np.ndarray:
    """All ||Delta_j u||_L2 at once (Parseval), in bank.j_range order."""
    power = np.sum(np.abs(u.coeffs) ** 2, axis=0).reshape(-1)
    vals = (bank._stack.reshape(len(bank.j_range), -1) ** 2) @ power
    return np.sqrt(u.grid.volume * vals)


def block_lp_norm(bank: FilterBank, u: SpectralField, j: int, p: float) -> float:
    if p == 2:
        power = np.sum(np.abs(u.coeffs) ** 2, axis=0)
        return float(np.sqrt(u.grid.volume * np.sum(bank.mask(j) ** 2 * power)))
    return block(bank, u, j).lp(p)


def _block_norms(bank: FilterBank, u: SpectralField, p: float) -> np.ndarray:
    if p == 2:
        return block_l2_norms(bank, u)
    return np.array([block_lp_norm(bank, u, j, p) for j in bank.j_range])


def besov_norm(bank: FilterBank, u: SpectralField, s: float,
               p: float = 2.0, q: float = 1.0) -> float:
    """Homogeneous Besov norm: ell^q over j of 2^(js) ||Delta_j u||_Lp.

    q = 1 sums (compensated), q = inf takes the sup; p in {1, 2, inf}.
    """
    norms = _block_norms(bank, u, p)
    weighted = 2.0 ** (bank._js * s) * norms
    if q == 1:
        return float(math.fsum(weighted.tolist()))
    if np.isinf(q):
        return float(weighted.max(initial=0.0))
    raise ValueError("q must be 1 or inf")


def lf_norm(bank: FilterBank, u: SpectralField, s: float,
            threshold: float = 1.0, p: float = 2.0, q: float = 1.0) -> float:
    """Low-frequency part: blocks with 2^j < threshold."""
    norms = _block_norms(bank, u, p)
    sel = 2.0**bank._js < threshold
    weighted = 2.0 ** (bank._js[sel] * s) * norms[sel]
    if np.isinf(q):
        return float(weighted.max(initial=0.0))
    return float(math.fsum(weighted.tolist()))


def hf_norm(bank: FilterBank, u: SpectralField, s: float,
            threshold: float = 1.0, p: float = 2.0, q: float = 1.0) -> float:
    """High-frequency part: blocks with 2^j >= threshold."""
    norms = _block_norms(bank, u, p)
    sel = 2.0**bank._js >= threshold
    weighted = 2.0 ** (bank._js[sel] * s) * norms[sel]
    if np.isinf(q):
        return float(weighted.max(initial=0.0))
    return float(math.fsum(weighted.tolist()))


def hybrid_norm(bank: FilterBank, u: SpectralField, spec: HybridNormSpec) -> float:
    return (lf_norm(bank, u, spec.s, spec.threshold, spec.p, spec.q)
            + hf_norm(bank, u, spec.s_high, spec.threshold, spec.p, spec.q))


def sobolev_norm(u: SpectralField, s: float) -> float:
    """Homogeneous Sobolev norm computed directly from |xi|^s weights."""
    rho = u.grid.rho
    w = np.zeros_like(rho)
    nz = rho > 0
    w[nz] = rho[nz] ** (2 * s)
    power = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    return float(np.sqrt(u.grid.volume * np.sum(w * power)))


def multiplier_apply(u: SpectralField, symbol) -> SpectralField:
    """Apply a Fourier multiplier; the zero mode is mapped to zero.

    ``symbol(xi, rho)`` gets the stacked frequencies (d, *shape) and their
    magnitudes, and returns either a scalar array (*shape) applied to every
    component, or a matrix array (n, n, *shape) mixing components.
    """
    grid = u.grid
    rho = grid.rho
    nz = rho > 0
    sym = np.asarray(symbol(grid.xi[:, nz], rho[nz]))
    out = np.zeros_like(u.coeffs)
    if sym.shape == rho[nz].shape:
        out[:, nz] = u.coeffs[:, nz] * sym
    elif sym.shape[:2] == (u.n, u.n):
        out[:, nz] = np.einsum("ij...,j...->i...", sym, u.coeffs[:, nz])
    else:
        raise ValueError(f"symbol shape {sym.shape} not understood")
    return SpectralField(grid, out)


# -- Bernstein-inequality measurements ---------------------------------------

@dataclass
class BernsteinReport:
    scale: float
    direct_ratio: float    # ||grad^m u||_q / (lam^(m + d(1/p - 1/q)) ||u||_p)
    reverse_ratio: float | None  # ||grad u||_p / (lam ||u||_p), annulus only


def _gradient_magnitude_field(u: SpectralField, order: int) -> SpectralField:
    """Stack of all order-th spectral derivatives of all components."""
    grid = u.grid
    if order == 0:
        return u
    fields = [u.coeffs]
    for _ in range(order):
        prev = fields[-1]
        nxt = []
        for ax in range(grid.d):
            nxt.append(1j * grid.xi[ax] * prev)
        fields.append(np.concatenate(nxt, axis=0))
    return SpectralField(grid, fields[-1])


def spectral_support_range(u: SpectralField, rel_tol: float = 1e-13):
    """(rho_min, rho_max) over modes carrying more than rel_tol of the peak."""
    power = np.sum(np.abs(u.coeffs) ** 2, axis=0)
    peak = power.max()
    if peak == 0:
        return 0.0, 0.0
    act = power > (rel_tol**2) * peak
    rho = u.grid.rho[act]
    return float(rho.min()), float(rho.max())


def bernstein_check(u: SpectralField, scale: float, order: int = 1,
                    p: float = 2.0, q: float = 2.0,
                    annulus: tuple[float, float] | None = (0.5, 2.0)) -> BernsteinReport:
    """Measure the direct (and, on annuli, reverse) Bernstein ratios.

    The field must be spectrally supported in the ball of radius 2*scale for
    the direct inequality, and inside scale*[annulus] for the reverse one.
    Raises if the support precondition fails.
    """
    d = u.grid.d
    lo, hi = spectral_support_range(u)
    if hi > 2.0 * scale * (1 + 1e-9):
        raise ValueError("field is not supported at the stated scale")
    gm = _gradient_magnitude_field(u, order)
    base = u.lp(p)
    if base == 0:
        raise ValueError("zero field")
    gain = scale ** (order + d * (1.0 / p - 1.0 / q))
    direct = gm.lp(q) / (gain * base)
    reverse = None
    if annulus is not None:
        if lo >= annulus[0] * scale * (1 - 1e-9) and hi <= annulus[1] * scale * (1 + 1e-9):
            g1 = _gradient_magnitude_field(u, 1)
            reverse = g1.lp(p) / (scale * base)
    return BernsteinReport(scale, float(direct),
                           None if reverse is None else float(reverse))


def dilate_field(u: SpectralField, factor: float) -> SpectralField:
    """The field x -> u(factor * x), realized by reinterpreting the period.

    The coefficients are unchanged; mode k moves from frequency k/L to
    factor*k/L, i.e. the result lives on a grid with period L/factor.
    """
    if not factor > 0:
        raise ValueError("dilation factor must be positive")
    g = u.grid
    return SpectralField(Grid(g.shape, g.period / factor), u.coeffs.copy())
