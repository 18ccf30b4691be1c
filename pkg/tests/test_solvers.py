import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatdiss import (
    DegenerateSteadyState,
    JumpSet,
    LatticeSpec,
    SingularSystem,
    apply_liouvillian,
    assemble_liouvillian,
    build_dephasing_set,
    build_jump_set,
    build_tasaki,
    eigendecompose,
    evolve,
    spectral_gap,
    steady_state,
    steady_state_dense,
    steady_state_linear,
)
from flatdiss.solvers import (
    HermitianCoordinates,
    hermitian_basis,
    krylov_expmv,
    matrix_sqrt_psd,
    real_liouvillian,
    trace_distance,
)

import oracles

PLUS = np.full((2, 2), 0.5, dtype=complex)
MINUS = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)


def _toy(gamma=1.0):
    return np.zeros((2, 2)), build_jump_set(2, 1, 0.0, gamma)


def _tasaki(L, l, alpha, gamma=1.0):
    h = build_tasaki(LatticeSpec(L))
    return h, build_jump_set(2 * L + 1, l, alpha, gamma)


def test_hermitian_basis_orthonormal():
    u = hermitian_basis(4)
    np.testing.assert_allclose((u.conj().T @ u).toarray(), np.eye(16), atol=1e-14)


def test_real_liouvillian_is_real():
    sop = assemble_liouvillian(*_tasaki(2, 1, 0.8))
    coords = HermitianCoordinates(5)
    u = hermitian_basis(5)
    ref = (u.conj().T @ sop.sparse @ u).toarray()
    assert np.abs(ref.imag).max() < 1e-13
    np.testing.assert_allclose(real_liouvillian(sop)[0], ref.real, atol=1e-13)
    rho = oracles.random_density(np.random.default_rng(1), 5)
    np.testing.assert_allclose(coords.to_matrix(coords.from_matrix(rho)), rho, atol=1e-15)


@pytest.mark.parametrize("l", [1, 3])
@pytest.mark.parametrize("L", [2, 5])
def test_half_pi_gives_maximally_mixed(L, l):
    sop = assemble_liouvillian(*_tasaki(L, l, math.pi / 2))
    n = 2 * L + 1
    for rep in (steady_state_dense(sop), steady_state_linear(sop)):
        assert np.abs(rep.state - np.eye(n) / n).max() < 1e-8
        assert rep.zero_multiplicity == 1


def test_toy_dark_state():
    for method in ("dense", "linear"):
        rep = steady_state(assemble_liouvillian(*_toy()), method)
        assert np.abs(rep.state - PLUS).max() < 1e-10
        assert rep.residual < 1e-12


def test_toy_gap():
    sop = assemble_liouvillian(*_toy())
    assert steady_state_dense(sop).gap == pytest.approx(2.0, abs=1e-10)
    assert spectral_gap(sop) == pytest.approx(2.0, abs=1e-10)


def test_no_channels_is_degenerate():
    sop = assemble_liouvillian(np.zeros((3, 3)), JumpSet((), 3))
    with pytest.raises(DegenerateSteadyState) as info:
        steady_state_dense(sop)
    assert info.value.multiplicity > 1
    with pytest.raises(SingularSystem):
        steady_state_linear(sop)
    assert spectral_gap(sop, method="dense") == 0.0


def test_dense_cap():
    sop = assemble_liouvillian(*_tasaki(2, 1, 0.0))
    with pytest.raises(ValueError):
        steady_state_dense(sop, dense_cap=4)


def test_half_pi_gap_positive():
    assert spectral_gap(assemble_liouvillian(*_tasaki(2, 1, math.pi / 2))) > 0


@pytest.mark.parametrize("key", sorted(oracles.L5_GAP))
def test_l5_frozen_gap(key):
    l, alpha = key
    sop = assemble_liouvillian(*_tasaki(5, l, alpha))
    assert steady_state_dense(sop).gap == pytest.approx(oracles.L5_GAP[key], rel=1e-8)
    assert spectral_gap(sop, method="iterative") == pytest.approx(oracles.L5_GAP[key], rel=1e-6)


@pytest.mark.parametrize(
    "L, l, alpha, deph",
    [(1, 1, 0.0, None), (2, 1, math.pi, None), (3, 3, 0.4, None), (5, 1, 2.5, 0.3), (12, 3, math.pi, None), (12, 1, 0.0, 0.1)],
)
def test_dense_matches_linear(L, l, alpha, deph):
    h, jumps = _tasaki(L, l, alpha)
    if deph is not None:
        jumps = jumps + build_dephasing_set(2 * L + 1, deph)
    sop = assemble_liouvillian(h, jumps)
    a, b = steady_state_dense(sop), steady_state_linear(sop)
    assert np.abs(a.state - b.state).max() < 1e-8
    for rep in (a, b):
        assert np.abs(apply_liouvillian(h, jumps, rep.state)).max() < 1e-8
        assert abs(np.trace(rep.state) - 1) < 1e-12
        assert np.abs(rep.state - rep.state.conj().T).max() == 0.0


def test_dephasing_only_maximally_mixed():
    h = build_tasaki(LatticeSpec(5))
    sop = assemble_liouvillian(h, build_dephasing_set(11, 1.0))
    for method in ("dense", "linear"):
        assert np.abs(steady_state(sop, method).state - np.eye(11) / 11).max() < 1e-8


def test_matrix_sqrt_examples(rng):
    np.testing.assert_allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(matrix_sqrt_psd(np.diag([4.0, 0.0])), np.diag([2.0, 0.0]), atol=1e-15)
    rho = oracles.random_density(rng, 6, rank=3)
    root = matrix_sqrt_psd(rho)
    assert np.abs(root @ root - rho).max() < 1e-8
    with pytest.raises(ValueError):
        matrix_sqrt_psd(np.diag([1.0, -1e-3]))


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 7))
def test_matrix_sqrt_property(seed, n):
    rho = oracles.random_density(np.random.default_rng(seed), n)
    root = matrix_sqrt_psd(rho)
    assert np.abs(root - root.conj().T).max() < 1e-12
    assert np.abs(root @ root - rho).max() < 1e-8


def test_evolve_without_generator(rng):
    rho0 = oracles.random_density(rng, 3)
    times = np.linspace(0, 5, 6)
    for method in ("adaptive_rk", "krylov_expm", "dense_expm"):
        rec = evolve(np.zeros((3, 3)), JumpSet((), 3), rho0, times, method=method)
        for rho in rec.states:
            np.testing.assert_array_equal(rho, rho0)


@pytest.mark.parametrize("method", ["adaptive_rk", "krylov_expm", "dense_expm"])
def test_toy_population_decay(method):
    gamma = 0.7
    times = np.linspace(0, 3, 31)
    rec = evolve(*_toy(gamma), MINUS, times, method=method)
    pop = np.array([np.real(np.vdot([1, -1], r @ np.array([1, -1])) / 2) for r in rec.states])
    assert np.abs(pop - np.exp(-4 * gamma * times)).max() < 1e-7
    assert np.max(rec.observables["trace_err"]) < 1e-8


def test_methods_agree():
    times = np.linspace(0, 20, 11)
    for h, jumps, rho0 in [
        (*_toy(), MINUS),
        (*_tasaki(5, 1, math.pi), None),
    ]:
        if rho0 is None:
            psi = eigendecompose(h).states[:, 7]
            rho0 = np.outer(psi, psi).astype(complex)
        a = evolve(h, jumps, rho0, times, method="adaptive_rk").states
        b = evolve(h, jumps, rho0, times, method="krylov_expm").states
        c = evolve(h, jumps, rho0, times, method="dense_expm").states
        assert np.abs(a - b).max() < 1e-7
        assert np.abs(b - c).max() < 1e-9


def test_evolve_records_invariants_and_observables():
    h, jumps = _tasaki(4, 3, 0.0)
    psi = eigendecompose(h).states[:, 0]
    rho0 = np.outer(psi, psi).astype(complex)
    times = np.linspace(0, 10, 21)
    rec = evolve(h, jumps, rho0, times, retain_states=False, observables={"p1": lambda r: r[0, 0].real})
    assert rec.states is None
    assert set(rec.observables) == {"trace_err", "min_eig", "herm_err", "p1"}
    assert max(rec.observables["trace_err"]) < 1e-8
    assert min(rec.observables["min_eig"]) > -1e-8
    assert max(rec.observables["herm_err"]) < 1e-10


def test_evolve_rejects_bad_input():
    h, jumps = _toy()
    with pytest.raises(ValueError):
        evolve(h, jumps, PLUS, [1.0, 0.5])
    with pytest.raises(ValueError):
        evolve(h, jumps, PLUS, [-1.0, 0.5])
    with pytest.raises(ValueError):
        evolve(h, jumps, 2 * PLUS, [0.0, 1.0])
    with pytest.raises(ValueError):
        evolve(h, jumps, PLUS, [0.0, 1.0], method="euler")


def test_krylov_against_expm(rng):
    from scipy.linalg import expm

    a = rng.normal(size=(40, 40)) - 3 * np.eye(40)
    v = rng.normal(size=40)
    anorm = np.abs(a).sum(axis=1).max()
    for t in (0.01, 1.0, 7.5):
        w = krylov_expmv(a.dot, v, t, anorm, m=20, tol=1e-12)
        np.testing.assert_allclose(w, expm(t * a) @ v, atol=1e-9 * np.linalg.norm(v))


def test_trace_distance():
    assert trace_distance(PLUS, MINUS) == pytest.approx(1.0)
    assert trace_distance(PLUS, PLUS) == 0.0
