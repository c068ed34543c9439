import numpy as np
import pytest

from partdiss.symbols import (DirectionSample, check_lemma_equivalences,
                              convective_symbol, elliptic_block_check,
                              euler_dispersion, kalman_rank, sk_condition,
                              spectral_abscissa, symbol_at)
from partdiss.system import (AffineFluxFamily, BlockDims, RelaxationBlock,
                             SystemSpec, build_isentropic_euler,
                             build_linearized_euler, build_sk_counterexample)


def diag_counterexample_pair():
    A = 1j * np.diag([1.0, -1.0])
    B = np.diag([0.0, 1.0]).astype(complex)
    return A, B


def test_symbol_euler_d1():
    spec = build_linearized_euler(1, 1.0)
    s = symbol_at(spec, np.array([1.0]))
    assert np.allclose(s.E, [[0.0, 1j], [1j, 1.0]])
    s0 = symbol_at(spec, np.array([0.0]))
    assert np.allclose(s0.E, spec.b_effective())


def test_symbol_conjugation_and_homogeneity():
    spec = build_linearized_euler(2, 1.0)
    xi = np.array([0.3, -1.7])
    A = symbol_at(spec, xi).A
    assert np.allclose(symbol_at(spec, -xi).A, np.conj(A))
    # exact degree-1 homogeneity
    for rho in [0.25, 3.0, 17.0]:
        assert np.array_equal(convective_symbol(spec, rho * xi),
                              rho * convective_symbol(spec, xi))


def test_symbol_skew_hermitian(rng):
    spec = build_isentropic_euler(3, 1.4, 1.0, 1.0)
    for om in DirectionSample.build(3):
        A = convective_symbol(spec, om)
        for _ in range(4):
            eta = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            eta /= np.linalg.norm(eta)
            assert abs(np.real(np.vdot(eta, A @ eta))) <= 1e-13


def test_kalman_rank_euler_d2():
    spec = build_linearized_euler(2, 1.0)
    B = spec.b_effective()
    for om in DirectionSample.build(2):
        A = convective_symbol(spec, om)
        rank, _ = kalman_rank(A, B)
        assert rank == 3


def test_kalman_rank_counterexample_and_full_B():
    A, B = diag_counterexample_pair()
    assert kalman_rank(A, B)[0] == 1
    rng = np.random.default_rng(1)
    for _ in range(10):
        Bf = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        Af = rng.standard_normal((3, 3))
        Af = 1j * (Af + Af.T)
        assert kalman_rank(Af, Bf)[0] == 3


def test_sk_condition_builtin_systems():
    assert sk_condition(build_linearized_euler(1, 1.0)).holds
    assert sk_condition(build_linearized_euler(2, 1.0)).holds
    assert sk_condition(build_isentropic_euler(2, 1.4, 1.0, 1.0)).holds
    assert sk_condition(build_isentropic_euler(3, 2.0, 1.0, 1.0)).holds


def test_sk_condition_counterexample_witness():
    verdict = sk_condition(build_sk_counterexample())
    assert not verdict.holds
    assert verdict.witness_omega is not None
    v = verdict.witness_vector
    assert v is not None
    # witness is in ker B and an eigenvector of the diagonal symbol: +- e1
    assert abs(abs(v[0]) - 1.0) < 1e-10 and abs(v[1]) < 1e-10


def test_sk_full_dissipation_always_holds():
    # n2 = n: B invertible, rank condition trivially satisfied
    flux = AffineFluxFamily(np.stack([np.diag([1.0, -1.0])]),
                            np.zeros((1, 2, 2, 2)))
    spec = SystemSpec(BlockDims(1, 1, 1), flux, RelaxationBlock(np.eye(1)),
                      np.zeros(2))
    # same convective symbol as the counterexample but full damping
    full = SystemSpec(BlockDims(1, 1, 1), flux,
                      RelaxationBlock(np.eye(1)), np.zeros(2))
    B = np.eye(2, dtype=complex)
    for om in [np.array([1.0]), np.array([-1.0])]:
        A = convective_symbol(full, om)
        assert kalman_rank(A, B)[0] == 2


def test_spectral_abscissa_euler_closed_form():
    spec = build_linearized_euler(1, 1.0)
    a1, eigs1 = spectral_abscissa(spec, np.array([1.0]))
    assert a1 == pytest.approx(0.5, abs=1e-12)
    assert sorted(np.round(eigs1.imag, 6)) == pytest.approx(
        [-np.sqrt(3) / 2, np.sqrt(3) / 2], abs=1e-6)
    # xi = 0.1: lambda-pm = (1 +- sqrt(1 - 0.04)) / 2
    root = np.sqrt(0.96)
    a2, eigs2 = spectral_abscissa(spec, np.array([0.1]))
    assert a2 == pytest.approx(0.5 * (1 - root), abs=1e-12)
    assert a2 == pytest.approx(0.010102051443364384, abs=1e-12)
    assert max(eigs2.real) == pytest.approx(0.9898979485566356, abs=1e-12)
    a0, _ = spectral_abscissa(spec, np.zeros(1))
    assert a0 == pytest.approx(0.0, abs=1e-14)


def test_euler_dispersion_branches():
    lp, lm = euler_dispersion(2.0, 1.0)
    assert lp == pytest.approx(0.5 + 0.5j * np.sqrt(15), abs=1e-14)
    assert lm == pytest.approx(0.5 - 0.5j * np.sqrt(15), abs=1e-14)
    # double root at the branch point
    lp, lm = euler_dispersion(0.5, 1.0)
    assert lp == lm == pytest.approx(0.5)
    # real parts equal 1/(2 eps) beyond the branch point
    for eps in [0.25, 1.0, 4.0]:
        lp, lm = euler_dispersion(np.array([10.0 / (2 * eps)]), eps)
        assert lp.real[0] == pytest.approx(1 / (2 * eps))
        assert lm.real[0] == pytest.approx(1 / (2 * eps))
    with pytest.raises(ValueError):
        euler_dispersion(1.0, 0.0)


def test_euler_dispersion_asymptotics():
    eps = 0.5
    xi = 1e-4
    lp, lm = euler_dispersion(xi, eps)
    assert lp == pytest.approx(1 / eps, rel=1e-6)
    assert lm == pytest.approx(eps * xi**2, rel=1e-6)


def test_dispersion_matches_eigensolver():
    # |closed form - dense eigensolver| small across both branches
    for eps in [0.25, 1.0, 4.0]:
        spec = build_linearized_euler(1, 1.0).with_epsilon(eps)
        branch = 1.0 / (2 * eps)
        xis = np.concatenate([
            np.linspace(0.01, branch * 0.999, 100),
            np.linspace(branch * 1.001, 6 * branch, 100)])
        lp, lm = euler_dispersion(xis, eps)
        for x, p, m in zip(xis, lp, lm):
            _, eigs = spectral_abscissa(spec, np.array([x]))
            err = min(abs(eigs[0] - p) + abs(eigs[1] - m),
                      abs(eigs[0] - m) + abs(eigs[1] - p))
            assert err < 1e-10


def _random_admissible_pair(rng, n):
    """Skew-Hermitian A and a PSD-in-the-quadratic-sense damping B."""
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = 0.5 * (X - X.conj().T)
    if rng.random() < 0.5:
        # Hermitian PSD with random rank
        rank = int(rng.integers(1, n + 1))
        V = rng.standard_normal((n, rank))
        B = V @ V.T + 0j
    else:
        # block form with positive-definite symmetric part
        n2 = int(rng.integers(1, n))
        L = rng.standard_normal((n2, n2))
        L = 0.5 * (L - L.T) + np.eye(n2) * (1.0 + np.abs(rng.standard_normal()))
        B = np.zeros((n, n), dtype=complex)
        B[n - n2:, n - n2:] = L
    return A, B


def test_equivalences_agree_on_random_pairs(rng):
    margin_skipped = 0
    agreements = 0
    total = 0
    for _ in range(200):
        n = int(rng.integers(2, 6))
        A, B = _random_admissible_pair(rng, n)
        rep = check_lemma_equivalences(A, B)
        if rep.margin_case:
            margin_skipped += 1
            continue
        total += 1
        agreements += rep.agree
    assert total > 100
    assert agreements == total


def test_equivalences_euler_and_counterexample():
    spec = build_linearized_euler(2, 1.0)
    om = np.array([0.6, 0.8])
    rep = check_lemma_equivalences(convective_symbol(spec, om),
                                   spec.b_effective().astype(complex))
    assert rep.verdicts == (True, True, True, True)
    A, B = diag_counterexample_pair()
    rep2 = check_lemma_equivalences(A, B)
    assert rep2.verdicts == (False, False, False, False)


def test_abscissa_positive_iff_rank_condition(rng):
    specs = [build_linearized_euler(2, 1.0), build_sk_counterexample(),
             build_isentropic_euler(1, 1.4, 1.0, 1.0)]
    for spec in specs:
        holds = sk_condition(spec).holds
        for _ in range(20):
            xi = rng.standard_normal(spec.dims.d)
            if np.linalg.norm(xi) < 1e-3:
                continue
            a, _ = spectral_abscissa(spec, xi)
            assert (a > 1e-12) == holds


def test_elliptic_block_euler():
    # scalar (gt*cbar)^2 / friction for the sound-speed system
    spec = build_isentropic_euler(1, 3.0, 1.0 / 3.0, 1.0)  # gt = cbar = 1
    lam, _ = elliptic_block_check(spec)
    assert lam == pytest.approx(1.0, abs=1e-12)
    spec_f = build_linearized_euler(2, 4.0)
    lam_f, _ = elliptic_block_check(spec_f)
    assert lam_f == pytest.approx(1.0 / 4.0, abs=1e-12)


def test_elliptic_block_counterexample_and_agreement(rng):
    # decoupled system: A21 = 0, the reduced symbol is 0 and the rank fails
    base = np.zeros((1, 2, 2))
    base[0, 1, 1] = 1.0
    decoupled = SystemSpec(BlockDims(1, 1, 1),
                           AffineFluxFamily(base, np.zeros((1, 2, 2, 2))),
                           RelaxationBlock(np.eye(1)), np.zeros(2))
    lam, _ = elliptic_block_check(decoupled)
    assert lam == pytest.approx(0.0, abs=1e-14)
    assert not sk_condition(decoupled).holds
    # agreement with the rank verdict on random structured systems
    for _ in range(100):
        n1 = int(rng.integers(1, 3))
        n2 = int(rng.integers(1, 3))
        d = int(rng.integers(1, 4))
        n = n1 + n2
        base = np.zeros((d, n, n))
        for k in range(d):
            blk = rng.standard_normal((n1, n2))
            if rng.random() < 0.25:
                blk[:] = 0.0  # force degenerate coupling
            base[k, :n1, n1:] = blk
            base[k, n1:, :n1] = blk.T
            b22 = rng.standard_normal((n2, n2))
            base[k, n1:, n1:] = 0.5 * (b22 + b22.T)
        spec = SystemSpec(BlockDims(n1, n2, d),
                          AffineFluxFamily(base, np.zeros((d, n, n, n))),
                          RelaxationBlock(np.eye(n2)), np.zeros(n))
        sample = DirectionSample.build(d)
        lam, vals = elliptic_block_check(spec, sample)
        verdict = sk_condition(spec, sample)
        if lam > 1e-9:
            assert verdict.holds
        elif lam < 1e-12:
            assert not verdict.holds or min(vals) < 1e-9


def test_elliptic_block_rejects_nonzero_a11():
    base = np.zeros((1, 2, 2))
    base[0] = np.eye(2)
    spec = SystemSpec(BlockDims(1, 1, 1),
                      AffineFluxFamily(base, np.zeros((1, 2, 2, 2))),
                      RelaxationBlock(np.eye(1)), np.zeros(2))
    with pytest.raises(ValueError):
        elliptic_block_check(spec)


def test_direction_sample_properties():
    for d in (1, 2, 3):
        s = DirectionSample.build(d)
        assert np.abs(np.linalg.norm(s.omegas, axis=1) - 1).max() <= 1e-14
        # coordinate directions included
        for k in range(d):
            e = np.zeros(d)
            e[k] = 1.0
            assert any(np.allclose(om, e) for om in s)
            assert any(np.allclose(om, -e) for om in s)
    assert len(DirectionSample.build(1)) == 2
    assert len(DirectionSample.build(2)) == 2 * 2 + 64
