import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ymlab.errors import DegenerateAlgebraError, DimensionError, UnsupportedAlgebraError
from ymlab.lie import (
    adjoint_matrix,
    bracket,
    build_algebra,
    casimir_adjoint,
    coefficients_from_adjoint,
    from_structure_constants,
    jacobi_residual,
    matrix_element,
    nonzero_triples,
    to_json_dict,
)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_casimir_equals_N(N):
    spec = build_algebra("su", N)
    assert spec.dim == N * N - 1
    assert abs(casimir_adjoint(spec) - N) < 1e-12


@pytest.mark.parametrize("N", [2, 3, 4])
def test_jacobi(N):
    assert jacobi_residual(build_algebra("su", N)) < 1e-12


@pytest.mark.parametrize("N", [2, 3, 4])
def test_generators_normalized_and_antihermitian(N):
    t = build_algebra("su", N).generators
    gram = np.einsum("aij,bji->ab", t, t)
    assert np.allclose(gram, -0.5 * np.eye(N * N - 1), atol=1e-14)
    assert np.allclose(t, -np.conj(np.swapaxes(t, 1, 2)), atol=1e-15)
    assert np.allclose(np.trace(t, axis1=1, axis2=2), 0, atol=1e-15)


def test_su2_is_levi_civita():
    f = build_algebra("su", 2).f
    eps = np.zeros((3, 3, 3))
    for (a, b, c), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                         (1, 0, 2): -1, (0, 2, 1): -1, (2, 1, 0): -1}.items():
        eps[a, b, c] = s
    assert np.allclose(f, eps, atol=1e-15)


def test_su3_known_constants():
    # Gell-Mann values f123 = 1, f147 = 1/2, f458 = sqrt(3)/2
    f = build_algebra("su", 3).f
    assert abs(f[0, 1, 2] - 1) < 1e-14
    assert abs(f[0, 3, 6] - 0.5) < 1e-14
    assert abs(f[3, 4, 7] - np.sqrt(3) / 2) < 1e-14


@pytest.mark.parametrize("N", [2, 3])
def test_f_totally_antisymmetric(N):
    f = build_algebra("su", N).f
    assert np.allclose(f, -np.swapaxes(f, 0, 1))
    assert np.allclose(f, -np.swapaxes(f, 1, 2))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10**6))
def test_bracket_matches_matrix_commutator(N, seed):
    spec = build_algebra("su", N)
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(2, spec.dim))
    mx, my = matrix_element(spec, X), matrix_element(spec, Y)
    assert np.allclose(matrix_element(spec, bracket(spec, X, Y)), mx @ my - my @ mx, atol=1e-12)
    assert np.allclose(adjoint_matrix(spec, X) @ Y, bracket(spec, X, Y), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10**6))
def test_adjoint_is_representation_and_invertible(N, seed):
    spec = build_algebra("su", N)
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(2, spec.dim))
    aX, aY = adjoint_matrix(spec, X), adjoint_matrix(spec, Y)
    assert np.allclose(aX @ aY - aY @ aX, adjoint_matrix(spec, bracket(spec, X, Y)), atol=1e-11)
    assert np.allclose(aX, -aX.T)
    assert np.allclose(coefficients_from_adjoint(spec, aX), X, atol=1e-12)


def test_errors():
    with pytest.raises(UnsupportedAlgebraError):
        build_algebra("so", 3)
    with pytest.raises(DegenerateAlgebraError):
        build_algebra("su", 1)
    with pytest.raises(DimensionError):
        adjoint_matrix(build_algebra("su", 2), [1.0, 2.0])


def test_abelian_algebra_has_zero_casimir():
    spec = from_structure_constants(np.zeros((2, 2, 2)))
    assert casimir_adjoint(spec) == 0
    assert jacobi_residual(spec) == 0


def test_triples_are_one_based_and_sorted():
    trip = nonzero_triples(build_algebra("su", 2))
    assert trip[0] == (1, 2, 3, 1.0)
    assert trip == sorted(trip)
    d = to_json_dict(build_algebra("su", 3))
    assert d["index_base"] == 1 and d["casimir"] == pytest.approx(3)
