import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from partdiss.system import (BlockDims, RelaxationBlock, build_isentropic_euler,
                             build_linearized_euler, build_sk_counterexample,
                             evaluate_flux_matrix, gamma_tilde, sound_speed,
                             validate, AffineFluxFamily, SystemSpec,
                             StructureFlags)


def test_linearized_euler_d1_matrices():
    spec = build_linearized_euler(1, 1.0)
    assert spec.dims.n == 2
    assert np.allclose(spec.flux.base[0], [[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(spec.relax.L2, [[1.0]])
    assert not np.any(spec.flux.grad)


def test_linearized_euler_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_linearized_euler(4, 1.0)
    with pytest.raises(ValueError):
        build_linearized_euler(1, 0.0)
    with pytest.raises(ValueError):
        build_linearized_euler(1, -2.0)


def test_isentropic_sound_speed_example():
    # gamma = 3, a = 1/3, rhobar = 1: gt = 1 and cbar = sqrt(1) * 1 / 1 = 1
    spec = build_isentropic_euler(1, 3.0, 1.0 / 3.0, 1.0)
    assert gamma_tilde(3.0) == pytest.approx(1.0)
    assert sound_speed(3.0, 1.0 / 3.0, 1.0) == pytest.approx(1.0)
    assert spec.vbar[0] == pytest.approx(1.0)


def test_isentropic_structure_flags():
    spec = build_isentropic_euler(2, 1.4, 1.0, 1.0)
    flags = spec.flux.measured_flags(1)
    assert flags.a11_vanishes_at_base
    assert flags.a11_linear_in_damped
    assert flags.offdiag_linear_in_undamped
    assert flags.diffusive_limit_ready
    # the c-equation has no c*dc term: top-left base entry vanishes
    assert np.abs(spec.flux.base[:, 0, 0]).max() == 0.0


def test_isentropic_rejects_out_of_range():
    for bad in [dict(gamma=1.0), dict(a=0.0), dict(rhobar=-1.0),
                dict(epsilon=0.0)]:
        kw = dict(d=1, gamma=2.0, a=1.0, rhobar=1.0, epsilon=1.0)
        kw.update(bad)
        with pytest.raises(ValueError):
            build_isentropic_euler(**kw)


def test_flux_matrix_at_zero_is_base():
    spec = build_isentropic_euler(2, 1.4, 1.0, 1.0)
    for k in range(2):
        assert np.allclose(evaluate_flux_matrix(spec, k, np.zeros(3)),
                           spec.flux.base[k])


def test_flux_matrix_euler_example():
    # gamma = 3, a = 1/3, rhobar = 1 gives gt = cbar = 1;
    # at Z = (0.1, 0.2): A = [[0.2, 1.1], [1.1, 0.2]]
    spec = build_isentropic_euler(1, 3.0, 1.0 / 3.0, 1.0)
    A = evaluate_flux_matrix(spec, 0, np.array([0.1, 0.2]))
    assert np.allclose(A, [[0.2, 1.1], [1.1, 0.2]], atol=1e-14)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.lists(st.floats(-3, 3), min_size=3, max_size=3))
@settings(max_examples=50, deadline=None)
def test_flux_matrix_affinity(z1, z2):
    spec = build_isentropic_euler(2, 1.4, 1.0, 1.0)
    z1, z2 = np.array(z1), np.array(z2)
    for k in range(2):
        lhs = (evaluate_flux_matrix(spec, k, z1 + z2)
               - evaluate_flux_matrix(spec, k, z1)
               - evaluate_flux_matrix(spec, k, z2)
               + evaluate_flux_matrix(spec, k, np.zeros(3)))
        assert np.abs(lhs).max() < 1e-12


def test_flux_matrix_rejects_bad_direction_and_state():
    spec = build_linearized_euler(1, 1.0)
    with pytest.raises(ValueError):
        evaluate_flux_matrix(spec, 1, np.zeros(2))
    with pytest.raises(ValueError):
        evaluate_flux_matrix(spec, 0, np.array([np.nan, 0.0]))


def test_validate_passes_builtin_systems():
    for spec in [build_linearized_euler(1, 1.0),
                 build_linearized_euler(3, 0.5),
                 build_isentropic_euler(2, 1.4, 1.0, 1.0),
                 build_sk_counterexample()]:
        rep = validate(spec)
        assert rep.ok, rep.failures()


@given(st.floats(1.01, 5.0), st.floats(0.01, 10.0), st.floats(0.01, 10.0))
@settings(max_examples=40, deadline=None)
def test_validate_passes_isentropic_family(gamma, a, rhobar):
    rep = validate(build_isentropic_euler(1, gamma, a, rhobar))
    assert rep.ok


def test_validate_reports_coercivity_failure():
    # skew matrix has zero symmetric part
    bad = SystemSpec(
        BlockDims(1, 2, 1),
        AffineFluxFamily(np.zeros((1, 3, 3)), np.zeros((1, 3, 3, 3))),
        RelaxationBlock(np.array([[0.0, 1.0], [-1.0, 0.0]])),
        np.zeros(3))
    rep = validate(bad)
    assert not rep["relaxation_coercivity"].passed
    assert not rep.ok


def test_validate_reports_asymmetric_flux():
    base = np.zeros((1, 2, 2))
    base[0, 0, 1] = 1.0  # not symmetric
    flux = AffineFluxFamily(base, np.zeros((1, 2, 2, 2)))
    spec = SystemSpec(BlockDims(1, 1, 1), flux, RelaxationBlock(np.eye(1)),
                      np.zeros(2))
    rep = validate(spec)
    assert not rep["flux_symmetry"].passed


def test_validate_flags_inconsistent_structure():
    base = np.zeros((1, 2, 2))
    base[0, 0, 0] = 1.0  # nonzero top-left block
    base[0, 0, 1] = base[0, 1, 0] = 1.0
    flux = AffineFluxFamily(base, np.zeros((1, 2, 2, 2)),
                            StructureFlags(a11_vanishes_at_base=True))
    spec = SystemSpec(BlockDims(1, 1, 1), flux, RelaxationBlock(np.eye(1)),
                      np.zeros(2))
    rep = validate(spec)
    assert not rep["structure_flags_consistent"].passed


def test_coercivity_is_computed_not_asserted():
    L2 = np.array([[2.0, 1.0], [-1.0, 3.0]])
    blk = RelaxationBlock(L2)
    expect = np.linalg.eigvalsh(0.5 * (L2 + L2.T)).min()
    assert blk.coercivity == pytest.approx(expect)


def test_kappa_admissible_for_nonsymmetric_relaxation():
    # Re(B z, z) >= kappa |B z|^2 must hold with the computed kappa
    rng = np.random.default_rng(0)
    for _ in range(20):
        L2 = rng.standard_normal((3, 3))
        L2 = L2 - L2.T + np.eye(3) * (np.abs(rng.standard_normal()) + 3.1)
        spec = SystemSpec(
            BlockDims(1, 3, 1),
            AffineFluxFamily(np.zeros((1, 4, 4)), np.zeros((1, 4, 4, 4))),
            RelaxationBlock(L2), np.zeros(4))
        kappa = spec.kappa()
        B = spec.b_effective()
        for _ in range(20):
            eta = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            lhs = np.real(np.vdot(eta, B @ eta))
            rhs = kappa * np.linalg.norm(B @ eta) ** 2
            assert lhs >= rhs - 1e-10


def test_roundtrip_serialization():
    spec = build_isentropic_euler(2, 1.4, 0.5, 2.0, epsilon=0.3)
    spec2 = SystemSpec.from_dict(spec.to_dict())
    assert np.allclose(spec2.flux.base, spec.flux.base)
    assert np.allclose(spec2.flux.grad, spec.flux.grad)
    assert spec2.relax.epsilon == spec.relax.epsilon
    assert spec2.flux.measured_flags(1).diffusive_limit_ready


def test_block_dims_invariants():
    with pytest.raises(ValueError):
        BlockDims(0, 1, 1)
    with pytest.raises(ValueError):
        BlockDims(1, 1, 4)
    assert BlockDims(2, 3, 2).n == 5
