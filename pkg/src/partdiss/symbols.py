"""Fourier-symbol computations for the linearized system.

For frequency xi the mode matrix is E(xi) = A(xi) + B with the skew-Hermitian
convective part A(xi) = i sum_k xi_k Abar^k and the constant damping
B = diag(0, L2/eps).  Strict dissipativity for xi != 0 is equivalent to the
Shizuta-Kawashima / Kalman rank condition, which is checked here on a finite
direction sample of the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import SystemSpec

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DirectionSample:
    """Deterministic unit directions, always containing +-e_k."""

    omegas: np.ndarray  # (m, d)

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        if om.ndim != 2:
            raise ValueError("omegas must be (m, d)")
        norms = np.linalg.norm(om, axis=1)
        if np.abs(norms - 1.0).max() > 1e-14:
            raise ValueError("directions must be unit vectors")
        object.__setattr__(self, "omegas", om)

    def __len__(self) -> int:
        return self.omegas.shape[0]

    def __iter__(self):
        return iter(self.omegas)

    @classmethod
    def build(cls, d: int, size: int | None = None) -> "DirectionSample":
        """Coordinate axes plus a golden-ratio low-discrepancy fill.

        Default size is 2d + 64(d-1) total directions.
        """
        if size is None:
            size = 2 * d + 64 * (d - 1)
        axes = np.concatenate([np.eye(d), -np.eye(d)], axis=0)
        extra = max(0, size - 2 * d)
        if d == 1 or extra == 0:
            return cls(axes)
        if d == 2:
            theta = 2 * np.pi * np.mod((1 + np.arange(extra)) * _GOLDEN, 1.0)
            pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        else:
            # Fibonacci sphere
            i = np.arange(extra) + 0.5
            z = 1.0 - 2.0 * i / extra
            r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
            theta = 2 * np.pi * np.mod(i * _GOLDEN, 1.0)
            pts = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        return cls(np.concatenate([axes, pts], axis=0))


@dataclass(frozen=True)
class FrequencySymbol:
    """A(xi), B and E = A + B at one frequency."""

    xi: np.ndarray
    A: np.ndarray
    B: np.ndarray

    @property
    def E(self) -> np.ndarray:
        return self.A + self.B


def convective_symbol(spec: SystemSpec, xi: np.ndarray) -> np.ndarray:
    """A(xi) = i sum_k xi_k Abar^k (exactly skew-Hermitian)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return 1j * np.einsum("k,kij->ij", xi, spec.flux.base)


def symbol_at(spec: SystemSpec, xi: np.ndarray) -> FrequencySymbol:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != spec.dims.d:
        raise ValueError("frequency has wrong dimension")
    return FrequencySymbol(xi, convective_symbol(spec, xi),
                           spec.b_effective().astype(complex))


def kalman_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Stacked (B; BA; ...; BA^(n-1)), shape (n*n, n)."""
    n = A.shape[0]
    rows = []
    BAl = np.array(B, dtype=complex)
    for _ in range(n):
        rows.append(BAl)
        BAl = BAl @ A
    return np.concatenate(rows, axis=0)


def kalman_rank(A: np.ndarray, B: np.ndarray) -> tuple[int, float]:
    """Numerical rank of the Kalman matrix with column equilibration.

    Columns are scaled to unit norm before the SVD; the threshold is
    n * machine-eps * sigma_max.  Returns (rank, smallest retained singular
    value of the scaled matrix, 0.0 if the rank is zero).
    """
    K = kalman_matrix(A, B)
    n = A.shape[0]
    scale = np.linalg.norm(K, axis=0)
    scale[scale == 0] = 1.0
    s = np.linalg.svd(K / scale, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, 0.0
    thresh = n * np.finfo(float).eps * s[0]
    rank = int(np.sum(s > thresh))
    smallest = float(s[rank - 1]) if rank > 0 else 0.0
    return rank, smallest


def _kernel_basis(B: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of ker B (columns); empty array if trivial."""
    u, s, vh = np.linalg.svd(B)
    tol = rtol * (s[0] if s.size and s[0] > 0 else 1.0)
    null_mask = np.concatenate([s <= tol, np.ones(B.shape[1] - s.size, bool)])
    return vh.conj().T[:, null_mask]


def _eigenspace_kernel_witness(A: np.ndarray, B: np.ndarray,
                               cluster_tol: float = 1e-8,
                               kernel_tol: float = 1e-10):
    """A unit vector in ker(B) that is an eigenvector of A, or None.

    Eigenvalues are clustered to handle degenerate eigenspaces; the
    intersection with ker B is detected through the rank of the stacked
    basis [V_lambda, K].
    """
    n = A.shape[0]
    ker = _kernel_basis(B, kernel_tol)
    if ker.shape[1] == 0:
        return None
    w, V = np.linalg.eig(A)
    scale = max(np.abs(w).max(), 1.0)
    used = np.zeros(n, dtype=bool)
    for i in range(n):
        if used[i]:
            continue
        group = np.abs(w - w[i]) <= cluster_tol * scale
        used |= group
        Vg = V[:, group]
        Vg, _ = np.linalg.qr(Vg)
        stacked = np.concatenate([Vg, ker], axis=1)
        s = np.linalg.svd(stacked, compute_uv=False)
        full = Vg.shape[1] + ker.shape[1]
        if full > n:
            deficient = True
        else:
            deficient = s[full - 1] <= 1e-8 * s[0]
        if deficient:
            # vector in the intersection: null vector of [Vg, -K]
            M = np.concatenate([Vg, -ker], axis=1)
            _, s2, vh2 = np.linalg.svd(M)
            coef = vh2.conj().T[:, -1]
            v = Vg @ coef[: Vg.shape[1]]
            nv = np.linalg.norm(v)
            if nv > 1e-12:
                return v / nv
    return None


@dataclass
class SKVerdict:
    holds: bool
    ranks: np.ndarray            # (m,)
    smallest_singulars: np.ndarray
    witness_omega: np.ndarray | None = None
    witness_vector: np.ndarray | None = None
    sampling_caveat: str = ("rank condition checked on a finite direction "
                            "sample of the unit sphere; a continuum verdict "
                            "is not implied")


def sk_condition(spec: SystemSpec, sample: DirectionSample | None = None) -> SKVerdict:
    """Kalman rank = n at every sampled direction omega.

    By degree-1 homogeneity of the convective symbol only unit directions
    need checking.  On failure the verdict carries a failing direction and,
    when one exists, an eigenvector of A_omega inside ker B.
    """
    if sample is None:
        sample = DirectionSample.build(spec.dims.d)
    if len(sample) == 0:
        raise ValueError("empty direction sample")
    n = spec.dims.n
    B = spec.b_effective()
    ranks = np.zeros(len(sample), dtype=int)
    smalls = np.zeros(len(sample))
    witness_om = witness_vec = None
    for i, om in enumerate(sample):
        A = convective_symbol(spec, om)
        ranks[i], smalls[i] = kalman_rank(A, B)
        if ranks[i] < n and witness_om is None:
            witness_om = om.copy()
            witness_vec = _eigenspace_kernel_witness(A, B)
    return SKVerdict(bool(np.all(ranks == n)), ranks, smalls,
                     witness_om, witness_vec)


@dataclass
class EquivalenceReport:
    """Four independently computed characterizations of strict dissipativity."""

    grammian_positive: bool
    kalman_full_rank: bool
    no_kernel_eigenvector: bool
    abscissa_positive: bool
    grammian_min: float
    kalman_rank: int
    abscissa: float
    margin_case: bool

    @property
    def verdicts(self) -> tuple[bool, bool, bool, bool]:
        return (self.grammian_positive, self.kalman_full_rank,
                self.no_kernel_eigenvector, self.abscissa_positive)

    @property
    def agree(self) -> bool:
        return len(set(self.verdicts)) == 1


def check_lemma_equivalences(A: np.ndarray, B: np.ndarray,
                             eig_tol: float = 1e-9,
                             kernel_tol: float = 1e-10,
                             margin_factor: float = 10.0) -> EquivalenceReport:
    """Evaluate the four equivalent dissipativity criteria for a pair (A, B).

    A must be skew-Hermitian and B nonnegative in the quadratic-form sense.
    The four routes are (1) positivity of sum_l |B A^l eta|^2 as a Hermitian
    form, (2) full Kalman rank, (3) absence of eigenvectors of A in ker B,
    (4) positive spectral abscissa of A + B.  Disagreement is reported, not
    resolved; near-margin instances (|abscissa| below margin_factor*eig_tol)
    are flagged.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n = A.shape[0]

    # (1) grammian positivity with all weights equal to one
    G = np.zeros((n, n), dtype=complex)
    BAl = B.copy()
    for _ in range(n):
        G += BAl.conj().T @ BAl
        BAl = BAl @ A
    gspec = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    gmin, gmax = float(gspec.min()), float(gspec.max())
    # aligned with the rank threshold: gmin is sigma_min^2 of the stacked matrix
    g_pos = gmin > (n * np.finfo(float).eps) ** 2 * max(gmax, 1.0)

    # (2) Kalman rank
    rank, _ = kalman_rank(A, B)
    k_full = rank == n

    # (3) kernel/eigenvector intersection
    witness = _eigenspace_kernel_witness(A, B, kernel_tol=kernel_tol)
    no_inter = witness is None

    # (4) spectral abscissa of A + B
    eigs = np.linalg.eigvals(A + B)
    absc = float(eigs.real.min())
    a_pos = absc > eig_tol

    return EquivalenceReport(bool(g_pos), bool(k_full), bool(no_inter),
                             bool(a_pos), gmin, rank, absc,
                             margin_case=abs(absc) < margin_factor * eig_tol)


def spectral_abscissa(spec: SystemSpec, xi: np.ndarray) -> tuple[float, np.ndarray]:
    """min Re of the eigenvalues of E(xi), together with the full list."""
    eigs = np.linalg.eigvals(symbol_at(spec, xi).E)
    return float(eigs.real.min()), eigs


def euler_dispersion(xi, epsilon: float):
    """Closed-form eigenvalue pair of the damped 2x2 acoustic mode matrix.

    lambda_pm = (1 +- sqrt(1 - (2 eps xi)^2)) / (2 eps), with the square root
    continued as i*sqrt(...) past |xi| = 1/(2 eps).  Returns (lambda_plus,
    lambda_minus), vectorized over xi.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    xi = np.asarray(xi, dtype=float)
    disc = 1.0 - (2.0 * epsilon * xi) ** 2
    root = np.sqrt(np.abs(disc)) * np.where(disc >= 0, 1.0, 1j)
    lam_p = (1.0 + root) / (2.0 * epsilon)
    lam_m = (1.0 - root) / (2.0 * epsilon)
    return lam_p, lam_m


def elliptic_block_check(spec: SystemSpec, sample: DirectionSample | None = None,
                         use_epsilon: bool = True):
    """min over sampled omega of lambda_min( A12(om) (L2/eps)^-1 A21(om) ).

    Requires a vanishing top-left base block.  Positivity of this reduced
    symbol is equivalent to the rank condition for such systems; the caller
    can cross-check against sk_condition.
    """
    n1 = spec.dims.n1
    if np.abs(spec.flux.base[:, :n1, :n1]).max() > 1e-13:
        raise ValueError("elliptic block check requires a zero top-left base block")
    if sample is None:
        sample = DirectionSample.build(spec.dims.d)
    L = spec.relax.effective if use_epsilon else spec.relax.L2
    Linv = np.linalg.inv(L)
    vals = np.zeros(len(sample))
    for i, om in enumerate(sample):
        Ar = np.einsum("k,kij->ij", om, spec.flux.base)  # Hermitian part of A/i
        A12 = Ar[:n1, n1:]
        A21 = Ar[n1:, :n1]
        M = A12 @ Linv @ A21
        vals[i] = np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min()
    return float(vals.min()), vals
