"""Strong relaxation limit: rescalings, limit-equation extraction, sweeps.

Under the diffusive rescaling (Z1~, Z2~)(tau, x) = (Z1, Z2/eps)(tau/eps, x)
the undamped component converges, as eps -> 0, to the solution of a
quasilinear parabolic equation whose coefficients are closed-form in the
affine flux family; for isentropic gas dynamics this is the porous-medium
equation.  This module extracts that limit equation, solves it spectrally,
and measures convergence rates over an eps sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, SpectralField
from .paley import FilterBank, block_l2_norms, block_lp_norm
from .solver import SolverError, Stepper, _weighted
from .symbols import DirectionSample
from .system import SystemSpec


# -- rescalings ---------------------------------------------------------------

@dataclass
class Trajectory:
    """Plain time-stamped sequence of spectral snapshots."""

    grid: Grid
    times: np.ndarray
    coeffs: np.ndarray  # (R, n, *shape)

    def field(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[i])

    def __len__(self) -> int:
        return len(self.times)


def diffusive_rescale(traj: Trajectory, epsilon: float, n1: int,
                      inverse: bool = False) -> Trajectory:
    """(Z1, Z2)(t, x) -> (Z1, Z2/eps)(t*eps, x), or the exact inverse.

    Times are relabeled tau = eps * t and the damped block is amplified by
    1/eps; the grid is untouched.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    s = 1.0 / epsilon if not inverse else epsilon
    tscale = epsilon if not inverse else 1.0 / epsilon
    out = traj.coeffs.copy()
    out[:, n1:] *= s
    return Trajectory(traj.grid, traj.times * tscale, out)


def hyperbolic_rescale(traj: Trajectory, epsilon: float,
                       inverse: bool = False) -> Trajectory:
    """Z(t, x) -> Z(eps t, eps x): time relabel plus period reinterpretation."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    g = traj.grid
    if inverse:
        return Trajectory(Grid(g.shape, g.period * epsilon),
                          traj.times / epsilon, traj.coeffs.copy())
    return Trajectory(Grid(g.shape, g.period / epsilon),
                      traj.times * epsilon, traj.coeffs.copy())


# -- limit equation ------------------------------------------------------------

class ExtractionError(RuntimeError):
    pass


@dataclass
class LimitEquation:
    """Quasilinear parabolic limit of the rescaled system.

    dt N = -A(D) N + NL(N), with second-order symbol
    A(xi) = sum_{k,l} xi_k xi_l Abar12^k L2^{-1} Abar21^l (positive definite
    when the rank condition holds and the base A11 block vanishes) and NL
    the bilinear/trilinear terms produced by eliminating the damped block.
    Coefficients are exact for affine flux families.

    Deviation tensors:  A12~^k(N)_{ij} = sum_m N_m g12[k,i,m,j], same for
    g21; A11~^k(w)_{ij} = sum_m w_m g11[k,m,i,j] (argument in the damped
    block).
    """

    n1: int
    d: int
    L2inv: np.ndarray
    abar12: np.ndarray  # (d, n1, n2)
    abar21: np.ndarray  # (d, n2, n1)
    g12: np.ndarray     # (d, n1, n1, n2)
    g21: np.ndarray     # (d, n2, n1, n1)
    g11: np.ndarray     # (d, n2, n1, n1), layout (k, m, i, j)
    label: str = "limit"

    def a_symbol(self, xi: np.ndarray) -> np.ndarray:
        """Second-order symbol at stacked frequencies xi of shape (d, ...)."""
        xi = np.asarray(xi, dtype=float)
        core = np.einsum("kia,ab,lbj->klij", self.abar12, self.L2inv,
                         self.abar21)
        return np.einsum("k...,l...,klij->ij...", xi, xi, core)

    def ellipticity(self, sample: DirectionSample) -> float:
        vals = []
        for om in sample:
            M = self.a_symbol(np.asarray(om).reshape(self.d, 1))[..., 0]
            vals.append(np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min())
        return float(min(vals))

    def rhs(self, grid: Grid, C: np.ndarray, mask: np.ndarray,
            parts: str = "all") -> np.ndarray:
        """Fourier coefficients of the right-hand side of dt N = rhs(N).

        parts = "all" for the full right-hand side, "nl" for the nonlinear
        terms only (the linear diffusion is removed term by term, without
        cancellation).
        """
        axes = tuple(range(1, grid.d + 1))
        Cm = C * mask
        N = np.fft.ifftn(Cm, axes=axes) * grid.total_modes
        dN = np.stack([np.fft.ifftn(1j * grid.xi[k] * Cm, axes=axes)
                       * grid.total_modes for k in range(grid.d)], axis=0)
        # G = sum_l (Abar21^l + A21~^l(N)) d_l N and its deviation-only part
        Gbar = np.einsum("lij,lj...->i...", self.abar21, dN)
        Gtil = np.einsum("limj,m...,lj...->i...", self.g21, N, dN)
        LG = np.einsum("ij,j...->i...", self.L2inv, Gbar + Gtil)
        LGt = np.einsum("ij,j...->i...", self.L2inv, Gtil)
        LG_h = np.fft.fftn(LG, axes=axes) / grid.total_modes * mask
        LGt_h = np.fft.fftn(LGt, axes=axes) / grid.total_modes * mask
        out = np.zeros_like(C)
        for k in range(grid.d):
            dLG = np.fft.ifftn(1j * grid.xi[k] * LG_h, axes=axes) * grid.total_modes
            a12dev = np.einsum("imj,m...->ij...", self.g12[k], N)
            if parts == "all":
                term = np.einsum("ij,j...->i...", self.abar12[k], dLG)
            else:
                dLGt = np.fft.ifftn(1j * grid.xi[k] * LGt_h, axes=axes) \
                    * grid.total_modes
                term = np.einsum("ij,j...->i...", self.abar12[k], dLGt)
            term += np.einsum("ij...,j...->i...", a12dev, dLG)
            # A11 deviation driven by the eliminated damped block
            a11dev = np.einsum("mij,m...->ij...", self.g11[k], LG)
            term += np.einsum("ij...,j...->i...", a11dev, dN[k])
            out += np.fft.fftn(term, axes=axes) / grid.total_modes * mask
        return out

    def apply_operator(self, field: SpectralField,
                       dealias: bool = True) -> SpectralField:
        """dt N as a field: the full right-hand side evaluated at N."""
        mask = field.grid.dealias_mask if dealias \
            else np.ones(field.grid.shape, bool)
        return SpectralField(field.grid,
                             self.rhs(field.grid, field.coeffs, mask, "all"))

    def coefficient_tensors(self):
        """Dense coefficient tensors of the nonlinear terms.

        With the convention (block indices shown for general n1)

            rhs_nl_i = q1[k,l,i,m,j] N_m d_k d_l N_j
                     + q2[k,l,i,m,j] d_k N_m d_l N_j
                     + t1[k,l,i,m,p,j] N_m d_k N_p d_l N_j
                     + t2[k,l,i,m,p,j] N_m N_p d_k d_l N_j.
        """
        Li = self.L2inv
        q1 = (np.einsum("kia,ab,lbmj->klimj", self.abar12, Li, self.g21)
              + np.einsum("kima,ab,lbj->klimj", self.g12, Li, self.abar21))
        q2 = (np.einsum("kia,ab,lbmj->klimj", self.abar12, Li, self.g21)
              + np.einsum("kqim,qb,lbj->klimj", self.g11, Li, self.abar21))
        t1 = (np.einsum("kima,ab,lbpj->klimpj", self.g12, Li, self.g21)
              + np.einsum("kqip,qb,lbmj->klimpj", self.g11, Li, self.g21))
        t2 = np.einsum("kima,ab,lbpj->klimpj", self.g12, Li, self.g21)
        return q1, q2, t1, t2

    def evaluate_tensors(self, grid: Grid, C: np.ndarray) -> np.ndarray:
        """Pointwise nonlinear right-hand side via the coefficient tensors.

        Independent route used to cross-check rhs(..., parts="nl"); both are
        evaluated from the same spectral derivatives of N.
        """
        axes = tuple(range(1, grid.d + 1))
        N = np.fft.ifftn(C, axes=axes) * grid.total_modes
        dN = np.stack([np.fft.ifftn(1j * grid.xi[k] * C, axes=axes)
                       * grid.total_modes for k in range(grid.d)], axis=0)
        ddN = np.stack([np.stack([
            np.fft.ifftn(-grid.xi[k] * grid.xi[l] * C, axes=axes)
            * grid.total_modes for l in range(grid.d)], axis=0)
            for k in range(grid.d)], axis=0)
        q1, q2, t1, t2 = self.coefficient_tensors()
        out = np.einsum("klimj,m...,klj...->i...", q1, N, ddN)
        out += np.einsum("klimj,km...,lj...->i...", q2, dN, dN)
        out += np.einsum("klimpj,m...,kp...,lj...->i...", t1, N, dN, dN)
        out += np.einsum("klimpj,m...,p...,klj...->i...", t2, N, N, ddN)
        return out


def extract_limit_equation(spec: SystemSpec) -> LimitEquation:
    """Closed-form limit operator of the diffusively rescaled system.

    Requires the full linearity pattern (vanishing base A11, A11 deviation
    carried by the damped block, off-diagonal deviations carried by the
    undamped block) plus ellipticity of the extracted second-order symbol,
    which encodes the rank condition for this block structure.
    """
    flags = spec.flux.measured_flags(spec.dims.n1)
    if not flags.diffusive_limit_ready:
        raise ExtractionError(
            f"flux family lacks the required linearity pattern: {flags}")
    n1, n2, d = spec.dims.n1, spec.dims.n2, spec.dims.d
    i1, i2 = slice(0, n1), slice(n1, n1 + n2)
    eq = LimitEquation(
        n1=n1, d=d,
        L2inv=np.linalg.inv(spec.relax.L2),
        abar12=spec.flux.base[:, i1, i2].copy(),
        abar21=spec.flux.base[:, i2, i1].copy(),
        g12=np.ascontiguousarray(
            spec.flux.grad[:, :n1, i1, i2].transpose(0, 2, 1, 3)),
        g21=np.ascontiguousarray(
            spec.flux.grad[:, :n1, i2, i1].transpose(0, 2, 1, 3)),
        g11=spec.flux.grad[:, n1:, i1, i1].copy(),
        label=f"limit({spec.label})",
    )
    ell = eq.ellipticity(DirectionSample.build(d))
    if ell <= 0:
        raise ExtractionError(
            f"extracted symbol is not elliptic (min eigenvalue {ell:.3e}); "
            "the rank condition fails for this system")
    return eq


@dataclass
class LimitRunReport:
    times: np.ndarray
    coeffs: np.ndarray
    sup_norm: float
    integral_high: float     # int ||N||_{B^(d/2+2)}
    bound_ratio: float       # (sup + int) / ||N0||
    completed: bool = True


def solve_limit(eq: LimitEquation, N0: SpectralField, dt: float,
                horizon: float, record_stride: int = 10,
                dealias: bool = True, smallness: float = np.inf,
                bank: FilterBank | None = None) -> LimitRunReport:
    """Integrate the limit equation with an exact diffusion integrating factor.

    The linear part exp(-dt A(xi)) is applied exactly per mode; the
    nonlinear terms are advanced with the same IFRK4 tableau as the
    hyperbolic solver.  The run monitors the parabolic a-priori bound
    sup ||N||_(d/2) + int ||N||_(d/2+2) against the data norm.
    """
    grid = N0.grid
    if bank is None:
        bank = FilterBank(grid)
    d = grid.d
    mask = grid.dealias_mask if dealias else np.ones(grid.shape, bool)
    n1 = eq.n1
    M = grid.total_modes
    sym = eq.a_symbol(grid.xi.reshape(grid.d, -1))  # (n1, n1, M)

    if n1 == 1:
        lam = sym[0, 0]

        def propagator(t):
            return np.exp(-t * lam)

        def apply_prop(P, C):
            return (C.reshape(1, M) * P).reshape(C.shape)
    else:
        mats = sym.transpose(2, 0, 1)
        w, V = np.linalg.eig(mats)
        Vinv = np.linalg.inv(V)

        def propagator(t):
            ph = np.exp(-t * w)
            return np.einsum("mik,mk,mkj->mij", V, ph, Vinv)

        def apply_prop(P, C):
            return np.einsum("mij,jm->im", P, C.reshape(n1, M)).reshape(C.shape)

    P_full = propagator(dt)
    P_half = propagator(0.5 * dt)

    def nl(C):
        return eq.rhs(grid, C, mask, "nl")

    nsteps = int(round(horizon / dt))
    stride = max(1, record_stride)
    C = N0.coeffs.copy()
    times = [0.0]
    snaps = [C.copy()]
    bn = block_l2_norms(bank, SpectralField(grid, C))
    n0_norm = _weighted(bank, bn, d / 2)
    sup_norm = n0_norm
    int_high = 0.0
    prev_high = _weighted(bank, bn, d / 2 + 2)
    completed = True
    for k in range(1, nsteps + 1):
        k1 = nl(C)
        EC = apply_prop(P_half, C)
        k2 = nl(EC + (0.5 * dt) * apply_prop(P_half, k1))
        k3 = nl(EC + (0.5 * dt) * k2)
        E2C = apply_prop(P_half, EC)
        k4 = nl(E2C + dt * apply_prop(P_half, k3))
        C = (E2C + (dt / 6.0) * apply_prop(P_full, k1)
             + (dt / 3.0) * apply_prop(P_half, k2 + k3) + (dt / 6.0) * k4)
        if not np.all(np.isfinite(C)):
            completed = False
            break
        bn = block_l2_norms(bank, SpectralField(grid, C))
        crit = _weighted(bank, bn, d / 2)
        high = _weighted(bank, bn, d / 2 + 2)
        int_high += 0.5 * dt * (prev_high + high)
        prev_high = high
        sup_norm = max(sup_norm, crit)
        if crit > smallness:
            completed = False
            break
        if k % stride == 0 or k == nsteps:
            times.append(k * dt)
            snaps.append(C.copy())
    ratio = (sup_norm + int_high) / max(n0_norm, 1e-300)
    return LimitRunReport(np.asarray(times), np.stack(snaps), sup_norm,
                          int_high, float(ratio), completed)


# -- damped modes in rescaled variables ----------------------------------------

def damped_mode_tilde(spec: SystemSpec, state: SpectralField,
                      substitute: SpectralField | None = None,
                      dealias: bool = True) -> SpectralField:
    """Damped mode of the diffusively rescaled pair (Z1~, Z2~).

    W~ = Z2~ + L2^{-1} sum_k (Abar21^k + A21~^k(Z1~)) d_k Z1~.  Passing
    ``substitute`` evaluates the whole transport part on that field instead
    (the corrected mode uses the limit solution there), keeping the damped
    block of ``state``.
    """
    grid = state.grid
    n1 = spec.dims.n1
    axes = tuple(range(1, grid.d + 1))
    mask = grid.dealias_mask if dealias else np.ones(grid.shape, bool)
    source = state if substitute is None else substitute
    C1 = source.coeffs[:n1]
    conv = 1j * np.einsum("k...,kij,j...->i...", grid.xi,
                          spec.flux.base[:, n1:, :n1], C1)
    gdev = spec.flux.grad[:, :n1, n1:, :n1]  # (d, m, i, j)
    if np.any(gdev):
        C1m = C1 * mask
        N = np.fft.ifftn(C1m, axes=axes) * grid.total_modes
        dev = np.zeros((spec.dims.n2,) + grid.shape, dtype=complex)
        for k in range(grid.d):
            dNk = np.fft.ifftn(1j * grid.xi[k] * C1m, axes=axes) * grid.total_modes
            rows = np.einsum("m...,mij->ij...", N, gdev[k])
            dev += np.einsum("ij...,j...->i...", rows, dNk)
        conv += np.fft.fftn(dev, axes=axes) / grid.total_modes * mask
    Linv = np.linalg.inv(spec.relax.L2)
    W = state.coeffs[n1:] + np.einsum("ij,j...->i...", Linv, conv)
    return SpectralField(grid, W)


# -- epsilon sweep --------------------------------------------------------------

@dataclass
class EpsRunResult:
    epsilon: float
    err_sup_low: float        # sup_tau ||Z1~ - N~||_{B^(d/2-1)}
    err_int_high: float       # int ||Z1~ - N~||_{B^(d/2+1)} dtau
    wtilde_l1: float          # int ||W~||_{B^(d/2)} dtau
    z2_l2: float              # unrescaled ||Z2||_{L2_t B^(d/2)}
    source_l1: float          # int ||S||_{B^(d/2-1)} dtau
    wcheck_gap_l1: float      # int ||W~ - Wv||_{B^(d/2)} dtau


@dataclass
class EpsSweep:
    epsilons: np.ndarray
    runs: list[EpsRunResult]
    slopes: dict[str, float]

    def monotone(self, key: str = "err_sup_low") -> bool:
        vals = [getattr(r, key) for r in self.runs]
        return all(vals[i] > vals[i + 1] for i in range(len(vals) - 1))


def _fit_slope(eps: np.ndarray, vals: np.ndarray) -> float:
    sel = vals > 0
    if sel.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[sel]), np.log(vals[sel]), 1)[0])


def convergence_study(spec: SystemSpec, epsilons, N0: SpectralField,
                      z2_init: SpectralField | None = None,
                      tau_horizon: float = 2.0,
                      dt_tau_factor: float = 0.1,
                      record_stride_tau: float = 0.02,
                      bank: FilterBank | None = None,
                      progress=None) -> EpsSweep:
    """Relaxation sweep against the extracted limit equation.

    For each eps the unrescaled system (damping/eps) is integrated from
    Z1(0) = N0 and Z2(0) = z2_init (the same unrescaled damped-block data
    for every eps; the relaxation layer it triggers is what the O(eps)
    rates see) with step dt_t ~ dt_tau_factor * eps, so the rescaled step
    scales like eps^2 and the layer stays resolved.  The trajectory is
    compared in rescaled variables against the limit solution from the same
    N0.  The damped-mode, source and Z2 time integrals are accumulated at
    step resolution (they are dominated by the initial layer); the
    limit-comparison norms on the exactly aligned record grid.
    """
    epsilons = np.asarray(sorted(epsilons, reverse=True), dtype=float)
    if len(epsilons) < 3:
        raise ValueError("need at least 3 epsilon values for a rate fit")
    grid = N0.grid
    if bank is None:
        bank = FilterBank(grid)
    d = grid.d
    n1 = spec.dims.n1
    eq = extract_limit_equation(spec)
    nrec = int(round(tau_horizon / record_stride_tau))

    # limit solve recorded exactly at the shared tau grid
    dt_lim = record_stride_tau / max(1, math.ceil(
        record_stride_tau / (dt_tau_factor * epsilons[-1])))
    stride_lim = int(round(record_stride_tau / dt_lim))
    lim = solve_limit(eq, N0, dt_lim, nrec * record_stride_tau,
                      record_stride=stride_lim, bank=bank)
    if not lim.completed:
        raise SolverError("limit-equation solve did not complete")

    runs = []
    for eps in epsilons:
        spec_eps = spec.with_epsilon(eps)
        # exact alignment: records every rec_every steps hit the tau grid
        rec_every = max(1, math.ceil(
            record_stride_tau / (eps * dt_tau_factor * eps)))
        dt = record_stride_tau / (eps * rec_every)
        stepper = Stepper(spec_eps, grid, dt)
        C = np.zeros((spec.dims.n,) + grid.shape, dtype=complex)
        C[:n1] = N0.coeffs
        if z2_init is not None:
            C[n1:] = z2_init.coeffs
        nsteps = nrec * rec_every

        err_sup = 0.0
        int_high = 0.0
        w_l1 = 0.0
        z2_sq = 0.0
        s_l1 = 0.0
        gap_l1 = 0.0
        prev_rec = None
        prev_step = None

        def step_quantities(C):
            zt = C.copy()
            zt[n1:] /= eps
            ztf = SpectralField(grid, zt)
            wt = damped_mode_tilde(spec, ztf)
            w_norm = _weighted(bank, block_l2_norms(bank, wt), d / 2)
            z2n = _weighted(bank, block_l2_norms(
                bank, SpectralField(grid, C[n1:])), d / 2)
            s_norm = _source_norm(eq, bank, ztf, wt)
            return ztf, wt, w_norm, z2n, s_norm

        for k in range(nsteps + 1):
            ztf, wt, w_norm, z2n, s_norm = step_quantities(C)
            if prev_step is not None:
                h = eps * dt  # tau step
                w_l1 += 0.5 * h * (prev_step[0] + w_norm)
                z2_sq += 0.5 * dt * (prev_step[1] + z2n**2)
                s_l1 += 0.5 * h * (prev_step[2] + s_norm)
            prev_step = (w_norm, z2n**2, s_norm)
            if k % rec_every == 0:
                tau_idx = k // rec_every
                Nf = SpectralField(grid, lim.coeffs[tau_idx])
                diff = SpectralField(grid, ztf.coeffs[:n1] - Nf.coeffs)
                bn_d = block_l2_norms(bank, diff)
                err_sup = max(err_sup, _weighted(bank, bn_d, d / 2 - 1))
                high_err = _weighted(bank, bn_d, d / 2 + 1)
                wv = damped_mode_tilde(spec, ztf, substitute=Nf)
                gap = _weighted(bank, block_l2_norms(
                    bank, SpectralField(grid, wt.coeffs - wv.coeffs)), d / 2)
                if prev_rec is not None:
                    h = record_stride_tau
                    int_high += 0.5 * h * (prev_rec[0] + high_err)
                    gap_l1 += 0.5 * h * (prev_rec[1] + gap)
                prev_rec = (high_err, gap)
            if k < nsteps:
                C = stepper.step(C)
                if not np.all(np.isfinite(C)):
                    raise SolverError(f"sweep run eps={eps} diverged")
        runs.append(EpsRunResult(eps, err_sup, int_high, w_l1,
                                 math.sqrt(z2_sq), s_l1, gap_l1))
        if progress is not None:
            progress(runs[-1])

    slopes = {
        "err_sup_low": _fit_slope(epsilons,
                                  np.array([r.err_sup_low for r in runs])),
        "err_int_high": _fit_slope(epsilons,
                                   np.array([r.err_int_high for r in runs])),
        "wtilde_l1": _fit_slope(epsilons,
                                np.array([r.wtilde_l1 for r in runs])),
        "z2_l2": _fit_slope(epsilons, np.array([r.z2_l2 for r in runs])),
        "source_l1": _fit_slope(epsilons,
                                np.array([r.source_l1 for r in runs])),
    }
    return EpsSweep(epsilons, runs, slopes)


def _source_norm(eq: LimitEquation, bank: FilterBank,
                 zt: SpectralField, wt: SpectralField) -> float:
    """||S||_{B^(d/2-1)} with S the damped-mode forcing of the Z1~ equation.

    S = -sum_k (Abar12^k + A12~^k(Z1~)) d_k W~ - sum_k A11~^k(W~) d_k Z1~.
    """
    grid = zt.grid
    d = grid.d
    n1 = eq.n1
    axes = tuple(range(1, grid.d + 1))
    mask = grid.dealias_mask
    C1 = zt.coeffs[:n1] * mask
    Wh = wt.coeffs * mask
    N = np.fft.ifftn(C1, axes=axes) * grid.total_modes
    Wp = np.fft.ifftn(Wh, axes=axes) * grid.total_modes
    out = np.zeros((n1,) + grid.shape, dtype=complex)
    for k in range(grid.d):
        dWk = np.fft.ifftn(1j * grid.xi[k] * Wh, axes=axes) * grid.total_modes
        dNk = np.fft.ifftn(1j * grid.xi[k] * C1, axes=axes) * grid.total_modes
        term = np.einsum("ij,j...->i...", eq.abar12[k], dWk)
        term += np.einsum("imj,m...,j...->i...", eq.g12[k], N, dWk)
        term += np.einsum("mij,m...,j...->i...", eq.g11[k], Wp, dNk)
        out -= term
    S = SpectralField(grid, np.fft.fftn(out, axes=axes) / grid.total_modes * mask)
    return _weighted(bank, block_l2_norms(bank, S), d / 2 - 1)


# -- parabolic maximal regularity ----------------------------------------------

@dataclass
class MaxRegReport:
    constant: float
    lhs: float
    rhs_data: float


def maximal_regularity_check(symbol, gamma: float, grid: Grid,
                             z0: SpectralField | None,
                             forcing=None, t: float = 1.0,
                             s: float = 0.0, p: float = 2.0,
                             nsteps: int = 200,
                             bank: FilterBank | None = None) -> MaxRegReport:
    """Measured constant of the parabolic regularity inequality.

    Solves dt z + S(D) z = f exactly per mode (scalar symbol, exponential
    integrator with midpoint source), then returns
    C = (||z(t)||_{B^s_p1} + int ||z||_{B^(s+gamma)_p1}) /
    (||z0||_{B^s_p1} + int ||f||_{B^s_p1}).
    The symbol must be strictly elliptic of degree gamma.
    """
    if bank is None:
        bank = FilterBank(grid)
    rho = grid.rho
    nz = rho > 0
    sym = np.asarray(symbol(grid.xi, rho)).real
    if sym.shape != grid.shape:
        raise ValueError("maximal-regularity check expects a scalar symbol")
    floor = float(np.min(sym[nz] / rho[nz] ** gamma))
    if not floor > 0:
        raise ValueError("symbol is not strictly elliptic")

    def bnorm(c, ss):
        f = SpectralField(grid, c)
        return float(np.sum(2.0 ** (bank._js * ss)
                            * np.array([block_lp_norm(bank, f, j, p)
                                        for j in bank.j_range])))

    if z0 is None:
        z0 = SpectralField.zeros(grid, 1)
    dt = t / nsteps
    ph = np.exp(-dt * sym)
    phi = np.where(sym > 1e-300, (1.0 - ph) / np.maximum(sym, 1e-300), dt)
    C = z0.coeffs.copy()
    int_high = 0.0
    int_f = 0.0
    prev_high = bnorm(C, s + gamma)
    prev_f = bnorm(forcing(0.0).coeffs, s) if forcing is not None else 0.0
    for i in range(1, nsteps + 1):
        C = C * ph
        if forcing is not None:
            fmid = forcing((i - 0.5) * dt).coeffs
            C = C + fmid * phi
            fn = bnorm(forcing(i * dt).coeffs, s)
            int_f += 0.5 * dt * (prev_f + fn)
            prev_f = fn
        high = bnorm(C, s + gamma)
        int_high += 0.5 * dt * (prev_high + high)
        prev_high = high
    lhs = bnorm(C, s) + int_high
    rhs = bnorm(z0.coeffs, s) + int_f
    return MaxRegReport(float(lhs / max(rhs, 1e-300)), float(lhs), float(rhs))
