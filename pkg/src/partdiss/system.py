"""Partially dissipative first-order systems with affine flux matrices.

A system is

    dt V + sum_k A^k(V) dx_k V = -(1/eps) * (0, L2 (V2 - vbar2)),

with real symmetric A^k depending affinely on the state, and an invertible
n2 x n2 relaxation matrix L2 whose symmetric part is positive definite.
Solvers work in the perturbation Z = V - vbar around the constant state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BlockDims:
    """Component split: n1 undamped, n2 damped, in d space dimensions."""

    n1: int
    n2: int
    d: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("need n1 >= 1 and n2 >= 1")
        if self.d not in (1, 2, 3):
            raise ValueError("space dimension must be 1, 2 or 3")

    @property
    def n(self) -> int:
        return self.n1 + self.n2


@dataclass(frozen=True)
class StructureFlags:
    """Linearity pattern of the flux family, relative to the block split.

    a11_vanishes_at_base:      top-left block of every base matrix is zero
    a11_linear_in_damped:      A11 depends (linearly) on the damped components only
    offdiag_linear_in_undamped: the off-diagonal deviations depend on the
                               undamped components only
    a22_affine:                A22 is affine in the full state (automatic here)
    sk_expected:               builder-level promise that the rank condition holds
    """

    a11_vanishes_at_base: bool = False
    a11_linear_in_damped: bool = False
    offdiag_linear_in_undamped: bool = False
    a22_affine: bool = True
    sk_expected: bool = False

    @property
    def h3(self) -> bool:
        return self.a11_vanishes_at_base and self.a11_linear_in_damped

    @property
    def diffusive_limit_ready(self) -> bool:
        """All structural requirements of the relaxation-limit extraction."""
        return (self.a11_vanishes_at_base and self.a11_linear_in_damped
                and self.offdiag_linear_in_undamped and self.a22_affine)


@dataclass(frozen=True)
class AffineFluxFamily:
    """A^k(Z) = base[k] + sum_m Z_m grad[k, m], all matrices symmetric."""

    base: np.ndarray   # (d, n, n)
    grad: np.ndarray   # (d, n, n, n); grad[k, m] = dA^k / dZ_m
    flags: StructureFlags = field(default_factory=StructureFlags)

    def __post_init__(self):
        base = np.ascontiguousarray(np.asarray(self.base, dtype=float))
        grad = np.ascontiguousarray(np.asarray(self.grad, dtype=float))
        if base.ndim != 3 or base.shape[1] != base.shape[2]:
            raise ValueError("base must have shape (d, n, n)")
        if grad.shape != (base.shape[0],) + (base.shape[1],) * 3:
            raise ValueError("grad must have shape (d, n, n, n)")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "grad", grad)

    @property
    def d(self) -> int:
        return self.base.shape[0]

    @property
    def n(self) -> int:
        return self.base.shape[1]

    def symmetry_residual(self) -> float:
        r = np.abs(self.base - np.swapaxes(self.base, 1, 2)).max()
        r = max(r, np.abs(self.grad - np.swapaxes(self.grad, 2, 3)).max())
        return float(r)

    def gradient_scale(self) -> float:
        """max_k sum_m ||grad[k, m]||_2, a bound for ||A^k(Z) - base|| / |Z|_inf."""
        if not np.any(self.grad):
            return 0.0
        norms = np.linalg.norm(self.grad, ord=2, axis=(2, 3))  # (d, n)
        return float(norms.sum(axis=1).max())

    def measured_flags(self, n1: int, tol: float = 1e-12) -> StructureFlags:
        """Recompute the structure flags from the stored matrices."""
        i1, i2 = slice(0, n1), slice(n1, self.n)
        a11_zero = np.abs(self.base[:, i1, i1]).max() <= tol if n1 else True
        g = self.grad
        a11_lin = np.abs(g[:, :n1, i1, i1]).max() <= tol if n1 else True
        offdiag = (np.abs(g[:, n1:, i1, i2]).max() <= tol
                   and np.abs(g[:, n1:, i2, i1]).max() <= tol)
        return StructureFlags(
            a11_vanishes_at_base=bool(a11_zero),
            a11_linear_in_damped=bool(a11_lin),
            offdiag_linear_in_undamped=bool(offdiag),
            a22_affine=True,
            sk_expected=self.flags.sk_expected,
        )


@dataclass(frozen=True)
class RelaxationBlock:
    """Damping acting on the last n2 components: -(1/eps) L2 Z2."""

    L2: np.ndarray
    epsilon: float = 1.0

    def __post_init__(self):
        L2 = np.atleast_2d(np.asarray(self.L2, dtype=float))
        if L2.shape[0] != L2.shape[1]:
            raise ValueError("L2 must be square")
        if not self.epsilon > 0:
            raise ValueError("relaxation parameter must be positive")
        object.__setattr__(self, "L2", np.ascontiguousarray(L2))

    @property
    def n2(self) -> int:
        return self.L2.shape[0]

    @property
    def coercivity(self) -> float:
        """lambda_min of the symmetric part of L2 (computed, not asserted)."""
        return float(np.linalg.eigvalsh(0.5 * (self.L2 + self.L2.T)).min())

    @property
    def effective(self) -> np.ndarray:
        """L2 / eps, the matrix that actually damps Z2."""
        return self.L2 / self.epsilon


@dataclass(frozen=True)
class SystemSpec:
    """Complete system: dimensions, flux family, relaxation block, base state."""

    dims: BlockDims
    flux: AffineFluxFamily
    relax: RelaxationBlock
    vbar: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        vbar = np.asarray(self.vbar, dtype=float).reshape(-1)
        if vbar.size != self.dims.n:
            raise ValueError("vbar has wrong length")
        object.__setattr__(self, "vbar", vbar)
        if self.flux.n != self.dims.n or self.flux.d != self.dims.d:
            raise ValueError("flux family dimensions disagree with BlockDims")
        if self.relax.n2 != self.dims.n2:
            raise ValueError("L2 size disagrees with n2")

    # -- matrices ----------------------------------------------------------

    def flux_matrix(self, k: int, Z: np.ndarray) -> np.ndarray:
        """A^k evaluated at perturbation state Z (exactly symmetric)."""
        Z = np.asarray(Z, dtype=float).reshape(-1)
        A = self.flux.base[k] + np.einsum("m,mij->ij", Z, self.flux.grad[k])
        return 0.5 * (A + A.T)

    def bmatrix(self) -> np.ndarray:
        """block-diag(0, L2), without the relaxation scaling."""
        n, n1 = self.dims.n, self.dims.n1
        B = np.zeros((n, n))
        B[n1:, n1:] = self.relax.L2
        return B

    def b_effective(self) -> np.ndarray:
        """block-diag(0, L2/eps): the damping that enters the evolution."""
        return self.bmatrix() / self.relax.epsilon

    def kappa(self) -> float:
        """Largest kappa with Re(B z, z) >= kappa |B z|^2 for B = L2/eps.

        Equals lambda_min of the symmetric part of (L2/eps)^{-1}; for a
        symmetric L2 this is eps / ||L2||.
        """
        Minv = np.linalg.inv(self.relax.effective)
        return float(np.linalg.eigvalsh(0.5 * (Minv + Minv.T)).min())

    def with_epsilon(self, epsilon: float) -> "SystemSpec":
        return SystemSpec(self.dims, self.flux,
                          RelaxationBlock(self.relax.L2, epsilon),
                          self.vbar, self.label)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n1": self.dims.n1,
            "n2": self.dims.n2,
            "d": self.dims.d,
            "base": self.flux.base.tolist(),
            "grad": self.flux.grad.tolist(),
            "L2": self.relax.L2.tolist(),
            "epsilon": self.relax.epsilon,
            "vbar": self.vbar.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SystemSpec":
        dims = BlockDims(int(data["n1"]), int(data["n2"]), int(data["d"]))
        flux = AffineFluxFamily(np.asarray(data["base"], dtype=float),
                                np.asarray(data["grad"], dtype=float))
        flux = AffineFluxFamily(flux.base, flux.grad,
                                flux.measured_flags(dims.n1))
        relax = RelaxationBlock(np.asarray(data["L2"], dtype=float),
                                float(data.get("epsilon", 1.0)))
        return cls(dims, flux, relax, np.asarray(data["vbar"], dtype=float),
                   str(data.get("label", "custom")))


def evaluate_flux_matrix(spec: SystemSpec, k: int, Z: np.ndarray) -> np.ndarray:
    """Public wrapper: A^k(Z) for 0-based direction index k."""
    if not 0 <= k < spec.dims.d:
        raise ValueError(f"direction index {k} out of range for d={spec.dims.d}")
    Z = np.asarray(Z, dtype=float)
    if not np.all(np.isfinite(Z)):
        raise ValueError("state vector must be finite")
    return spec.flux_matrix(k, Z)


# -- builders ---------------------------------------------------------------

def build_linearized_euler(d: int, friction: float) -> SystemSpec:
    """Linearized damped acoustics: dt a + div u = 0, dt u + grad a + f u = 0."""
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    if not friction > 0:
        raise ValueError("friction must be positive")
    n = d + 1
    base = np.zeros((d, n, n))
    for k in range(d):
        base[k, 0, 1 + k] = 1.0
        base[k, 1 + k, 0] = 1.0
    grad = np.zeros((d, n, n, n))
    flags = StructureFlags(a11_vanishes_at_base=True, a11_linear_in_damped=True,
                           offdiag_linear_in_undamped=True, sk_expected=True)
    flux = AffineFluxFamily(base, grad, flags)
    relax = RelaxationBlock(friction * np.eye(d), epsilon=1.0)
    return SystemSpec(BlockDims(1, d, d), flux, relax, np.zeros(n),
                      label="linearized-euler")


def gamma_tilde(gamma: float) -> float:
    return 0.5 * (gamma - 1.0)


def sound_speed(gamma: float, a: float, rho: float) -> float:
    """Renormalized sound speed sqrt(gamma*a) * rho^((gamma-1)/2) / ((gamma-1)/2)."""
    gt = gamma_tilde(gamma)
    return np.sqrt(gamma * a) * rho**gt / gt


def build_isentropic_euler(d: int, gamma: float, a: float, rhobar: float,
                           epsilon: float = 1.0) -> SystemSpec:
    """Isentropic Euler with relaxation, in sound-speed variables (c - cbar, v).

    The equations are
        dt c + v.grad c + gt * c * div v = 0
        dt v + (v.grad) v + gt * c * grad c + v/eps = 0,
    with gt = (gamma-1)/2 and pressure law P(rho) = a rho^gamma.
    """
    if d not in (1, 2, 3):
        raise ValueError("d must be 1, 2 or 3")
    if not (gamma > 1 and a > 0 and rhobar > 0 and epsilon > 0):
        raise ValueError("need gamma > 1, a > 0, rhobar > 0, epsilon > 0")
    gt = gamma_tilde(gamma)
    cbar = sound_speed(gamma, a, rhobar)
    n = d + 1
    base = np.zeros((d, n, n))
    grad = np.zeros((d, n, n, n))
    for k in range(d):
        # coupling row/column through gt * (cbar + Z_0)
        base[k, 0, 1 + k] = gt * cbar
        base[k, 1 + k, 0] = gt * cbar
        grad[k, 0, 0, 1 + k] = gt
        grad[k, 0, 1 + k, 0] = gt
        # transport by v_k on every component
        grad[k, 1 + k] += np.eye(n)
    flags = StructureFlags(a11_vanishes_at_base=True, a11_linear_in_damped=True,
                           offdiag_linear_in_undamped=True, sk_expected=True)
    flux = AffineFluxFamily(base, grad, flags)
    relax = RelaxationBlock(np.eye(d), epsilon=epsilon)
    vbar = np.zeros(n)
    vbar[0] = cbar
    return SystemSpec(BlockDims(1, d, d), flux, relax, vbar,
                      label="isentropic-euler")


def build_sk_counterexample() -> SystemSpec:
    """Decoupled 2x2 system whose undamped component never decays.

    The convective symbol is diagonal, so e_1 is an eigenvector lying in the
    kernel of the damping: the rank condition fails in every direction.
    """
    base = np.array([[[1.0, 0.0], [0.0, -1.0]]])
    grad = np.zeros((1, 2, 2, 2))
    flux = AffineFluxFamily(base, grad, StructureFlags(sk_expected=False))
    return SystemSpec(BlockDims(1, 1, 1), flux, RelaxationBlock(np.eye(1)),
                      np.zeros(2), label="sk-counterexample")


# -- validation --------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate(spec: SystemSpec, tol: float = 1e-12) -> ValidationReport:
    """Structural validation; returns a report and never raises.

    Checks flux symmetry, coercivity of the symmetric part of L2,
    invertibility of L2, nonpositivity of the spectrum of the damping
    Jacobian at the base state, and consistency of the stored structure
    flags with the actual matrices.
    """
    checks: list[CheckResult] = []

    sym = spec.flux.symmetry_residual()
    checks.append(CheckResult("flux_symmetry", sym <= tol, sym,
                              "max asymmetry over base and gradient matrices"))

    coer = spec.relax.coercivity
    checks.append(CheckResult("relaxation_coercivity", coer > tol, coer,
                              "lambda_min of sym(L2)"))

    try:
        condL2 = float(np.linalg.cond(spec.relax.L2))
        invertible = condL2 < 1e14
    except np.linalg.LinAlgError:
        condL2, invertible = np.inf, False
    checks.append(CheckResult("relaxation_invertible", invertible, condL2,
                              "condition number of L2"))

    # Jacobian of the damping term at vbar: block-diag(0, -L2/eps)
    dh = np.zeros((spec.dims.n, spec.dims.n))
    dh[spec.dims.n1:, spec.dims.n1:] = -spec.relax.effective
    spec_max = float(np.linalg.eigvals(dh).real.max())
    checks.append(CheckResult("damping_spectrum_nonpositive",
                              spec_max <= tol, spec_max,
                              "max real part of the damping Jacobian spectrum"))

    measured = spec.flux.measured_flags(spec.dims.n1)
    stored = spec.flux.flags
    consistent = (
        measured.a11_vanishes_at_base >= stored.a11_vanishes_at_base
        and measured.a11_linear_in_damped >= stored.a11_linear_in_damped
        and measured.offdiag_linear_in_undamped >= stored.offdiag_linear_in_undamped
    )
    checks.append(CheckResult("structure_flags_consistent", consistent,
                              float(consistent),
                              f"measured {measured}, stored {stored}"))
    return ValidationReport(checks)
