"""Compact Lie algebra data: basis, structure constants, adjoint action.

Generators are anti-Hermitian, normalized as ``tr(t^a t^b) = -kappa delta^{ab}``
with ``kappa = 1/2``.  Structure constants are read off the explicit matrices,

    [t^a, t^b] = f^{abc} t^c,

and the adjoint action on coefficient vectors is ``(ad_X v)^a = f^{abc} X^b v^c``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ymlab.errors import (
    DegenerateAlgebraError,
    DimensionError,
    InconsistentStructureConstantsError,
    UnsupportedAlgebraError,
)

KAPPA = 0.5
SUPPORTED_FAMILIES = ("su",)


@dataclass(frozen=True, eq=False)
class LieAlgebraSpec:
    family: str
    N: int
    dim: int
    f: np.ndarray = field(repr=False)
    kappa: float = KAPPA
    generators: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.f.setflags(write=False)
        if self.generators is not None:
            self.generators.setflags(write=False)

    @property
    def tag(self) -> str:
        return f"{self.family}({self.N})"

    @property
    def casimir(self) -> float:
        return casimir_adjoint(self)

    @property
    def ad_basis(self) -> np.ndarray:
        """``ad_basis[b]`` is the d x d matrix of ad acting with basis element b."""
        return np.ascontiguousarray(np.transpose(self.f, (1, 0, 2)))


def _su_generators(N: int) -> np.ndarray:
    """Generalized Gell-Mann basis times ``-i/2`` (su(2): Pauli, su(3): Gell-Mann order)."""
    gens = []
    for j in range(1, N):
        for i in range(j):
            sym = np.zeros((N, N), complex)
            sym[i, j] = sym[j, i] = 1.0
            anti = np.zeros((N, N), complex)
            anti[i, j] = -1j
            anti[j, i] = 1j
            gens += [sym, anti]
        diag = np.zeros((N, N), complex)
        diag[np.arange(j), np.arange(j)] = 1.0
        diag[j, j] = -j
        gens.append(np.sqrt(2.0 / (j * (j + 1))) * diag)
    return -0.5j * np.array(gens)


def structure_constants(generators: np.ndarray, kappa: float = KAPPA) -> np.ndarray:
    """Project commutators back onto the basis: ``f^{abc} = -tr([t^a,t^b] t^c)/kappa``."""
    t = generators
    comm = np.einsum("aij,bjk->abik", t, t) - np.einsum("bij,ajk->abik", t, t)
    f = -np.einsum("abij,cji->abc", comm, t) / kappa
    if np.max(np.abs(f.imag)) > 1e-12:
        raise InconsistentStructureConstantsError("structure constants are not real")
    f = f.real.copy()
    f[np.abs(f) < 1e-15] = 0.0
    return f


@lru_cache(maxsize=None)
def build_algebra(family: str = "su", N: int = 2) -> LieAlgebraSpec:
    """Build (and cache) the algebra ``family(N)``."""
    if family not in SUPPORTED_FAMILIES:
        raise UnsupportedAlgebraError(f"unsupported algebra family {family!r}")
    N = int(N)
    if N < 1:
        raise DegenerateAlgebraError(f"N must be positive, got {N}")
    if N == 1:
        raise DegenerateAlgebraError("su(1) has dimension 0")
    gens = _su_generators(N)
    f = structure_constants(gens)
    return LieAlgebraSpec(family=family, N=N, dim=N * N - 1, f=f, generators=gens)


def from_structure_constants(f, family: str = "custom", N: int = 0) -> LieAlgebraSpec:
    """Wrap a user-supplied f-tensor (e.g. an abelian algebra with f = 0)."""
    f = np.array(f, dtype=float)
    if f.ndim != 3 or len(set(f.shape)) != 1:
        raise DimensionError(f"f must be d x d x d, got shape {f.shape}")
    return LieAlgebraSpec(family=family, N=N, dim=f.shape[0], f=f)


def casimir_adjoint(spec: LieAlgebraSpec) -> float:
    """Scalar C with ``f^{acd} f^{bcd} = C delta^{ab}``."""
    g = np.einsum("acd,bcd->ab", spec.f, spec.f)
    C = np.trace(g) / spec.dim
    residual = np.max(np.abs(g - C * np.eye(spec.dim)))
    if residual > 1e-12:
        raise InconsistentStructureConstantsError(
            f"f^acd f^bcd is not proportional to the identity (residual {residual:.3e})"
        )
    return float(C)


def _coeffs(spec, X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.shape != (spec.dim,):
        raise DimensionError(f"{name} must have length {spec.dim}, got shape {X.shape}")
    return X


def adjoint_matrix(spec: LieAlgebraSpec, X) -> np.ndarray:
    """Matrix of ad_X on coefficient vectors: ``(ad_X)^{ac} = f^{abc} X^b``."""
    X = _coeffs(spec, X)
    return np.einsum("abc,b->ac", spec.f, X)


def bracket(spec: LieAlgebraSpec, X, Y) -> np.ndarray:
    """Coefficients of [X, Y]."""
    X = _coeffs(spec, X)
    Y = _coeffs(spec, Y, "Y")
    return np.einsum("abc,b,c->a", spec.f, X, Y)


def coefficients_from_adjoint(spec: LieAlgebraSpec, A: np.ndarray) -> np.ndarray:
    """Invert ``adjoint_matrix`` on (batches of) antisymmetric d x d matrices.

    Uses ``tr(ad_a^T ad_X) = C X^a``; needs C > 0.
    """
    C = casimir_adjoint(spec)
    if C == 0:
        raise InconsistentStructureConstantsError("abelian algebra: ad is not invertible")
    return np.einsum("abc,...ac->...b", spec.f, A) / C


def matrix_element(spec: LieAlgebraSpec, X) -> np.ndarray:
    """Fundamental-representation matrix ``X^a t^a``."""
    if spec.generators is None:
        raise UnsupportedAlgebraError("algebra was built without explicit generators")
    return np.einsum("a,aij->ij", _coeffs(spec, X), spec.generators)


def jacobi_residual(spec: LieAlgebraSpec) -> float:
    """Max over (a,b,c,d) of the Jacobi sum; zero for a genuine Lie algebra."""
    f = spec.f
    j = (
        np.einsum("abe,ecd->abcd", f, f)
        + np.einsum("cbe,aed->abcd", f, f)
        + np.einsum("dbe,ace->abcd", f, f)
    )
    return float(np.max(np.abs(j))) if j.size else 0.0


def nonzero_triples(spec: LieAlgebraSpec, tol: float = 0.0):
    """(a, b, c, value) with 1-based indices, lexicographic, for |f| > tol."""
    d = spec.dim
    out = []
    for a, b, c in itertools.product(range(d), repeat=3):
        v = spec.f[a, b, c]
        if abs(v) > tol:
            out.append((a + 1, b + 1, c + 1, float(v)))
    return out


def to_json_dict(spec: LieAlgebraSpec) -> dict:
    return {
        "family": spec.family,
        "N": spec.N,
        "dim": spec.dim,
        "kappa": spec.kappa,
        "casimir": casimir_adjoint(spec),
        "index_base": 1,
        "f": [list(t) for t in nonzero_triples(spec)],
    }
