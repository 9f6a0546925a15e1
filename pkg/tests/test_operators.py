import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qdqkd.operators import (DensityState, DimensionError, HilbertLayout, build_annihilation,
                             build_sigma, commutator_super, dagger, dissipator_super,
                             is_hermitian, lindblad_dissipator, spost, spre, state_violations)


def test_annihilation_small():
    np.testing.assert_array_equal(build_annihilation(2), [[0, 1], [0, 0]])
    a = build_annihilation(3)
    np.testing.assert_allclose(np.diag(a, 1), [1, np.sqrt(2)])
    np.testing.assert_allclose(dagger(a) @ a, np.diag([0, 1, 2]), atol=1e-15)


def test_annihilation_rejects_tiny():
    with pytest.raises(DimensionError):
        build_annihilation(1)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_truncated_commutator(n):
    a = build_annihilation(n)
    top = np.zeros((n, n))
    top[-1, -1] = 1
    np.testing.assert_allclose(a @ dagger(a) - dagger(a) @ a, np.eye(n) - n * top, atol=1e-14)


def test_layout_dims_and_bijection():
    lay = HilbertLayout()
    assert lay.total_dim == 36
    seen = {lay.index(q, h, v) for q in range(1, 5) for h in range(3) for v in range(3)}
    assert seen == set(range(36))
    for k in range(36):
        assert lay.index(*lay.unpack(k)) == k
    with pytest.raises(IndexError):
        lay.index(5, 0, 0)
    with pytest.raises(IndexError):
        lay.index(1, 3, 0)
    with pytest.raises(DimensionError):
        HilbertLayout(fock_dim_h=1)
    with pytest.raises(DimensionError):
        HilbertLayout(qd_dim=3)


def test_sigma_trace_example():
    lay = HilbertLayout(2, 2)
    rho = np.outer(lay.basis_state(2), lay.basis_state(3).conj())
    assert np.trace(build_sigma(2, 3, lay) @ rho) == pytest.approx(0)
    # |2><3| has weight on sigma_32 = |3><2|;  Tr(sigma_23 rho) reads <3|rho|2>
    rho = np.outer(lay.basis_state(3), lay.basis_state(2).conj())
    assert np.trace(build_sigma(2, 3, lay) @ rho) == pytest.approx(1)


def test_sigma_algebra():
    lay = HilbertLayout(2, 2)
    s = {(i, j): build_sigma(i, j, lay) for i in range(1, 5) for j in range(1, 5)}
    np.testing.assert_allclose(s[1, 4] @ s[4, 2], s[1, 2])
    np.testing.assert_allclose(s[1, 4] @ s[3, 2], 0)
    np.testing.assert_allclose(sum(s[i, i] for i in range(1, 5)), np.eye(lay.total_dim))
    with pytest.raises(IndexError):
        build_sigma(0, 1, lay)


def test_sigma_commutes_with_modes():
    lay = HilbertLayout()
    s = build_sigma(2, 4, lay)
    for m in (lay.mode_h(), lay.mode_v()):
        np.testing.assert_allclose(s @ m - m @ s, 0, atol=1e-14)


def test_dissipator_hand_expansion():
    a = build_annihilation(2)
    rho = np.diag([0, 1]).astype(complex)
    np.testing.assert_allclose(lindblad_dissipator(a, rho), np.diag([2, -2]))


def test_dissipator_shape_mismatch():
    with pytest.raises(DimensionError):
        lindblad_dissipator(np.eye(2), np.eye(3))


def _random_rho(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ dagger(m)
    return rho / np.trace(rho)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(2, 6))
def test_dissipator_traceless_and_hermitian(seed, dim):
    rng = np.random.default_rng(seed)
    o = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = _random_rho(rng, dim)
    out = lindblad_dissipator(o, rho)
    assert abs(np.trace(out)) < 1e-10 * (1 + np.abs(o).max() ** 2)
    assert is_hermitian(out, atol=1e-10 * (1 + np.abs(o).max() ** 2))


@settings(max_examples=30, deadline=None)
@given(x=arrays(np.float64, (4, 4), elements=st.floats(-3, 3)),
       y=arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_vectorisation_convention(x, y):
    rho = x + 1j * y
    a = np.arange(16.0).reshape(4, 4) + 1j
    b = np.eye(4)[::-1] * 2
    np.testing.assert_allclose((spre(a) @ rho.ravel()).reshape(4, 4), a @ rho, atol=1e-9)
    np.testing.assert_allclose((spost(b) @ rho.ravel()).reshape(4, 4), rho @ b, atol=1e-9)


def test_superoperators_match_dense():
    rng = np.random.default_rng(3)
    o = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    h = o + dagger(o)
    rho = _random_rho(rng, 5)
    np.testing.assert_allclose((dissipator_super(o) @ rho.ravel()).reshape(5, 5),
                               lindblad_dissipator(o, rho), atol=1e-12)
    np.testing.assert_allclose((commutator_super(h) @ rho.ravel()).reshape(5, 5),
                               -1j * (h @ rho - rho @ h), atol=1e-12)


def test_density_state_checks():
    lay = HilbertLayout(2, 2)
    DensityState.pure(lay.basis_state(1)).check()
    bad = np.diag([1.2, -0.2] + [0] * 14).astype(complex)
    problems = state_violations(bad)
    assert any("eigenvalue" in p for p in problems)
    with pytest.raises(ValueError):
        DensityState(bad * 2).check()
    nonherm = np.zeros((16, 16), complex)
    nonherm[0, 0] = 1
    nonherm[0, 1] = 0.1
    with pytest.raises(ValueError):
        DensityState(nonherm).check()
