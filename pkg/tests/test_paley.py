import numpy as np
import pytest

from partdiss.grid import Grid, SpectralField, random_real_field
from partdiss.paley import (FilterBank, HybridNormSpec, bernstein_check,
                            besov_norm, block, block_l2_norms, dilate_field,
                            hf_norm, hybrid_norm, lf_norm, multiplier_apply,
                            smoothstep_cutoff, sobolev_norm)


@pytest.fixture(scope="module")
def grid():
    return Grid((256,), 4.0)


@pytest.fixture(scope="module")
def bank(grid):
    return FilterBank(grid)


def single_mode(grid, k, n=1, value=1.0):
    f = SpectralField.zeros(grid, n)
    idx = (0,) + tuple([k] if grid.d == 1 else k)
    f.coeffs[idx] = value
    f.coeffs[(0,) + tuple([-k] if grid.d == 1 else [-a for a in k])] = np.conj(value)
    return f


def test_cutoff_shape():
    assert smoothstep_cutoff(np.array([0.0, 1.0]), 5).tolist() == [1.0, 1.0]
    assert smoothstep_cutoff(np.array([2.0, 5.0]), 5).tolist() == [0.0, 0.0]
    mid = smoothstep_cutoff(np.array([1.5]), 5)[0]
    assert 0 < mid < 1


def test_partition_of_unity(bank):
    assert bank.partition_residual() <= 1e-12


def test_partition_of_unity_2d():
    g = Grid((32, 32), 2.0)
    assert FilterBank(g).partition_residual() <= 1e-12


def test_block_support_and_reconstruction(grid, bank, rng):
    u = random_real_field(grid, 2, rng, spectrum=lambda r: np.exp(-r))
    total = np.zeros_like(u.coeffs)
    for j in bank.j_range:
        total += block(bank, u, j).coeffs
    ref = u.drop_zero_mode().coeffs
    scale = np.abs(ref).max()
    assert np.abs(total - ref).max() <= 1e-12 * scale


def test_single_mode_two_block_recovery(grid, bank):
    # a mode with |xi| = 2^j is shared by blocks j and j+1 only
    j = 1
    k = int(round(2.0**j * grid.period))
    u = single_mode(grid, k)
    got = block(bank, u, j) + block(bank, u, j + 1)
    assert np.abs(got.coeffs - u.coeffs).max() <= 1e-14
    # no content in far blocks
    assert block(bank, u, j + 3).l2() == 0.0
    assert block(bank, u, j - 2).l2() == 0.0


def test_block_almost_orthogonality(grid, bank, rng):
    u = random_real_field(grid, 1, rng, spectrum=lambda r: np.exp(-r))
    for j in bank.j_range:
        for jp in bank.j_range:
            if abs(j - jp) >= 2:
                a = block(bank, u, j).coeffs
                b = block(bank, u, jp).coeffs
                assert np.abs(a * b).max() == 0.0


def test_besov_single_mode_value(grid, bank):
    # one annulus: norm = 2^(js)||u|| within the dyadic spread of rho^s
    for k, s in [(3, 1.0), (12, -0.5), (48, 2.0)]:
        u = single_mode(grid, k)
        rho = k / grid.period
        val = besov_norm(bank, u, s)
        l2 = u.l2()
        assert val <= 2.0 ** abs(s) * rho**s * l2 * (1 + 1e-12)
        assert val >= 2.0 ** (-abs(s)) * rho**s * l2 * (1 - 1e-12)


def test_besov_sup_below_sum(grid, bank, rng):
    u = random_real_field(grid, 1, rng, spectrum=lambda r: np.exp(-r))
    for s in [-0.5, 0.0, 1.5]:
        assert besov_norm(bank, u, s, q=np.inf) <= besov_norm(bank, u, s, q=1)


def test_lf_hf_partition(grid, bank, rng):
    u = random_real_field(grid, 2, rng, spectrum=lambda r: np.exp(-r))
    s = 0.75
    full = besov_norm(bank, u, s)
    assert lf_norm(bank, u, s) + hf_norm(bank, u, s) == pytest.approx(full)
    # threshold below every grid frequency: everything is high
    tiny = 0.5 * grid.xi_min
    assert lf_norm(bank, u, s, threshold=tiny) == 0.0
    assert hf_norm(bank, u, s, threshold=tiny) == pytest.approx(full)
    hspec = HybridNormSpec(s, s + 1.0)
    assert hybrid_norm(bank, u, hspec) == pytest.approx(
        lf_norm(bank, u, s) + hf_norm(bank, u, s + 1.0))


def test_dilation_scaling_law(rng):
    """||u(eps .)||_{B^s} ~ eps^(s - d/2) ||u||_{B^s} across a factor-8 regrid."""
    grid = Grid((512,), 8.0)
    bank = FilterBank(grid)
    u = random_real_field(grid, 1, rng,
                          spectrum=lambda r: np.exp(-((r - 1.0) / 0.5) ** 2))
    eps = 8.0
    v = dilate_field(u, eps)
    bank_v = FilterBank(v.grid)
    for s in [-0.5, 0.5, 1.5]:
        lhs = besov_norm(bank_v, v, s)
        rhs = eps ** (s - 0.5) * besov_norm(bank, u, s)
        assert 0.5 * rhs <= lhs <= 2.0 * rhs
    # threshold variant: low part against the eps^-1-threshold low part
    for s in [0.5]:
        lhs = lf_norm(bank_v, v, s, threshold=1.0)
        rhs = eps ** (s - 0.5) * lf_norm(bank, u, s, threshold=1.0 / eps)
        assert 0.5 * rhs <= lhs <= 2.0 * rhs


def test_cutoff_family_equivalence(grid, rng):
    """Different admissible cutoffs give norms within a fixed constant."""
    u = random_real_field(grid, 1, rng, spectrum=lambda r: np.exp(-r))
    b5 = FilterBank(grid, order=5)
    b3 = FilterBank(grid, order=3)
    bs = FilterBank(grid, smooth=True)
    for s in [-1.0, 0.0, 1.0]:
        vals = [besov_norm(b, u, s) for b in (b5, b3, bs)]
        assert max(vals) / min(vals) < 4.0


def test_besov_dominates_sobolev(grid, bank, rng):
    # ell^1 over blocks dominates ell^2; grid weights cost at most 2^|s|
    u = random_real_field(grid, 1, rng,
                          spectrum=lambda r: np.exp(-((r - 2.0)) ** 2))
    for s in [0.0, 1.0]:
        c = 1.0 / (np.sqrt(2.0) * 2.0 ** abs(s))
        assert besov_norm(bank, u, s) >= c * sobolev_norm(u, s)


def test_multiplier_apply_identity_and_inverse(grid, rng):
    u = random_real_field(grid, 2, rng, spectrum=lambda r: np.exp(-r))
    ident = multiplier_apply(u, lambda xi, rho: np.ones_like(rho))
    assert np.abs(ident.coeffs - u.drop_zero_mode().coeffs).max() <= 1e-15
    lap = multiplier_apply(u, lambda xi, rho: rho**2)
    back = multiplier_apply(lap, lambda xi, rho: rho**-2.0)
    assert np.abs(back.coeffs - u.drop_zero_mode().coeffs).max() <= 1e-12


def test_multiplier_block_bound(grid, bank, rng):
    """||M(D) Delta_j u|| <= max(annulus |M|) ||Delta_j u|| for p = 2."""
    u = random_real_field(grid, 1, rng, spectrum=lambda r: np.exp(-r / 4))
    gamma = 1.5
    for j in [-1, 0, 2]:
        uj = block(bank, u, j)
        if uj.l2() == 0:
            continue
        out = multiplier_apply(uj, lambda xi, rho: rho**gamma)
        bound = (2.0 ** (j + 1)) ** gamma * uj.l2()
        assert out.l2() <= bound * (1 + 1e-12)


def test_multiplier_matrix_symbol(grid, rng):
    u = random_real_field(grid, 2, rng, spectrum=lambda r: np.exp(-r))

    def swap(xi, rho):
        out = np.zeros((2, 2) + rho.shape)
        out[0, 1] = 1.0
        out[1, 0] = 1.0
        return out

    v = multiplier_apply(u, swap)
    w = u.drop_zero_mode()
    assert np.abs(v.coeffs[0] - w.coeffs[1]).max() <= 1e-15
    assert np.abs(v.coeffs[1] - w.coeffs[0]).max() <= 1e-15


def test_bernstein_pure_mode(grid):
    k = 16
    u = single_mode(grid, k)
    lam = k / grid.period
    rep = bernstein_check(u, scale=lam, order=1, p=2, q=2,
                          annulus=(0.5, 2.0))
    assert rep.direct_ratio == pytest.approx(1.0, rel=1e-12)
    assert rep.reverse_ratio == pytest.approx(1.0, rel=1e-12)


def test_bernstein_random_annulus_fields(grid, bank, rng):
    """Direct and reverse ratios stay within the annulus constants."""
    for _ in range(100):
        j = int(rng.integers(-1, 4))
        lam = 2.0**j
        u = random_real_field(
            grid, 1, rng,
            spectrum=lambda r: np.where((r >= 0.5 * lam) & (r <= 2 * lam),
                                        1.0, 0.0))
        if u.l2() == 0:
            continue
        rep = bernstein_check(u, scale=lam, order=1, p=2, q=2)
        # gradient magnitude per mode lies in lam * [1/2, 2]
        assert 0.5 - 1e-12 <= rep.direct_ratio <= 2.0 + 1e-12
        assert rep.reverse_ratio is not None
        assert 0.5 - 1e-12 <= rep.reverse_ratio <= 2.0 + 1e-12


def test_bernstein_lp_gain(rng):
    """p=2 -> q=inf gain lam^(d/2) within a moderate constant across j."""
    grid = Grid((1024,), 8.0)
    for j in range(-3, 4):
        lam = 2.0**j
        u = random_real_field(
            grid, 1, rng,
            spectrum=lambda r: np.where((r >= 0.5 * lam) & (r <= 2 * lam),
                                        1.0, 0.0))
        rep = bernstein_check(u, scale=lam, order=0, p=2, q=np.inf,
                              annulus=None)
        assert rep.direct_ratio <= 4.0


def test_bernstein_rejects_unsupported_field(grid, rng):
    u = random_real_field(grid, 1, rng, spectrum=lambda r: np.exp(-r / 8))
    with pytest.raises(ValueError):
        bernstein_check(u, scale=0.25)


def test_block_l2_norms_match_parseval(grid, bank, rng):
    u = random_real_field(grid, 3, rng, spectrum=lambda r: np.exp(-r))
    bn = block_l2_norms(bank, u)
    for i, j in enumerate(bank.j_range):
        assert bn[i] == pytest.approx(block(bank, u, j).l2(), abs=1e-13)


def test_zero_mode_excluded(grid, bank):
    u = SpectralField.zeros(grid, 1)
    u.coeffs[0, 0] = 5.0  # pure mean
    assert besov_norm(bank, u, 0.0) == 0.0
    assert u.zero_mode()[0] == 5.0
