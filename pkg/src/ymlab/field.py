"""Periodic 4-torus lattice, adjoint gauge backgrounds and the operators M0, M1.

Everything is in lattice units internally (a = 1); ``LatticeGeometry.spacing``
is carried along only for reporting.  Sites are stored site-major in C order,
so the flat index of ``(x0, x1, x2, x3)`` is ``((x0*L1 + x1)*L2 + x2)*L3 + x3``.

Backgrounds are stored as adjoint links ``U_mu(x) = exp(ad B_mu(x))``; the
operators are built from those links only, so gauge covariance is exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
import scipy.linalg

from ymlab.errors import (
    DiscretizationError,
    InvalidGaugeError,
    ParameterError,
    ShapeError,
)
from ymlab.lie import LieAlgebraSpec, build_algebra, casimir_adjoint, coefficients_from_adjoint

NDIM = 4
# factor in front of [F_mu_nu, .] in M1 = -nabla^2 delta_mu_nu - 2 [F_mu_nu, .]
FIELD_STRENGTH_COUPLING = 2.0
ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True)
class LatticeGeometry:
    extents: tuple
    spacing: float = 1.0

    def __post_init__(self):
        ext = tuple(int(L) for L in self.extents)
        if len(ext) != NDIM or min(ext) < 2:
            raise ShapeError(f"need four extents >= 2, got {self.extents}")
        object.__setattr__(self, "extents", ext)
        if not self.spacing > 0:
            raise ShapeError("lattice spacing must be positive")

    @property
    def nsites(self) -> int:
        return int(np.prod(self.extents))

    @property
    def volume(self) -> float:
        """Physical 4-volume a^4 * prod(L)."""
        return self.spacing**4 * self.nsites

    def site_index(self, coords) -> int:
        return int(np.ravel_multi_index(tuple(int(c) % L for c, L in zip(coords, self.extents)), self.extents))

    def site_coords(self, index: int) -> tuple:
        return tuple(int(c) for c in np.unravel_index(int(index), self.extents))

    def coordinate(self, mu: int) -> np.ndarray:
        """Integer coordinate x_mu broadcast to the lattice shape."""
        shape = [1] * NDIM
        shape[mu] = self.extents[mu]
        return np.broadcast_to(np.arange(self.extents[mu]).reshape(shape), self.extents)


def _orthogonality_defect(U):
    d = U.shape[-1]
    return float(np.max(np.abs(U @ np.swapaxes(U, -1, -2) - np.eye(d)))) if U.size else 0.0


class BackgroundField:
    """Adjoint links on a periodic lattice plus derived clover field strength.

    ``links`` has shape ``(L0, L1, L2, L3, 4, d, d)``.  ``B`` (potential
    coefficients, shape ``(L0..L3, 4, d)``) is kept when the background was
    generated from a potential, and dropped after gauge transformations.
    """

    def __init__(self, geometry, algebra, links, *, B=None, kind="custom", params=None, seed=None,
                 boundary=(1, 1, 1, 1)):
        self.geometry = geometry
        self.algebra = algebra
        d = algebra.dim
        links = np.asarray(links, dtype=float)
        if links.shape != (*geometry.extents, NDIM, d, d):
            raise ShapeError(f"links have shape {links.shape}, expected {(*geometry.extents, NDIM, d, d)}")
        self.links = links
        self.links.setflags(write=False)
        self.B = B
        self.kind = kind
        self.params = dict(params or {})
        self.seed = seed
        self.boundary = tuple(int(s) for s in boundary)

    def __repr__(self):
        return f"BackgroundField({self.algebra.tag}, extents={self.geometry.extents}, kind={self.kind!r})"

    @property
    def dim(self) -> int:
        return self.algebra.dim

    def link(self, mu: int) -> np.ndarray:
        """U_mu(x) with the boundary sign applied on the last slice."""
        U = self.links[..., mu, :, :]
        if self.boundary[mu] == 1:
            return U
        U = U.copy()
        idx = [slice(None)] * NDIM
        idx[mu] = -1
        U[tuple(idx)] *= self.boundary[mu]
        return U

    def with_boundary(self, signs) -> "BackgroundField":
        """Same links with periodic (+1) / antiperiodic (-1) wrap per direction."""
        signs = tuple(int(s) for s in signs)
        if len(signs) != NDIM or any(s not in (1, -1) for s in signs):
            raise ParameterError(f"boundary signs must be four entries of +-1, got {signs}")
        return BackgroundField(self.geometry, self.algebra, self.links, B=self.B, kind=self.kind,
                               params=self.params, seed=self.seed, boundary=signs)

    def is_trivial(self) -> bool:
        """True when every link is exactly the identity (B == 0)."""
        return bool(np.all(self.links == np.eye(self.dim))) and all(s == 1 for s in self.boundary)

    def orthogonality_defect(self) -> float:
        return _orthogonality_defect(self.links)

    def plaquette(self, mu: int, nu: int) -> np.ndarray:
        """P_mu_nu(x) = U_mu(x) U_nu(x+mu) U_mu(x+nu)^T U_nu(x)^T."""
        Umu, Unu = self.link(mu), self.link(nu)
        T = np.swapaxes
        return Umu @ np.roll(Unu, -1, axis=mu) @ T(np.roll(Umu, -1, axis=nu), -1, -2) @ T(Unu, -1, -2)

    @cached_property
    def field_strength(self) -> np.ndarray:
        """Clover F_mu_nu^a(x), shape ``(L0..L3, 4, 4, d)``, lattice units (a^2 F)."""
        d = self.dim
        F = np.zeros((*self.geometry.extents, NDIM, NDIM, d))
        for mu in range(NDIM):
            for nu in range(mu + 1, NDIM):
                F[..., mu, nu, :] = _clover(self, mu, nu)
                F[..., nu, mu, :] = -F[..., mu, nu, :]
        F.setflags(write=False)
        return F

    @cached_property
    def field_strength_adjoint(self) -> np.ndarray:
        """ad_{F_mu_nu}(x) as d x d matrices, shape ``(L0..L3, 4, 4, d, d)``."""
        return np.einsum("abc,...b->...ac", self.algebra.f, self.field_strength)

    def max_field_strength(self) -> float:
        """||F||_inf: max over sites and planes of |F_mu_nu| (lattice units)."""
        return float(np.max(np.linalg.norm(self.field_strength, axis=-1)))


def _shift(A, mu, step):
    """A(x + step * mu_hat)."""
    return np.roll(A, -step, axis=mu)


def _clover(bg, mu, nu):
    """Average antisymmetric part of the four leaves at x, mapped back through arcsinh.

    Leaves are closed loops starting at x with a common orientation.  For a
    single rotation P = exp(A) the antisymmetric part is sinh(A), so the
    arcsinh makes constant abelian fields exact; otherwise the error is O(a^2).
    """
    Um, Un = bg.link(mu), bg.link(nu)
    T = lambda A: np.swapaxes(A, -1, -2)  # noqa: E731
    Um_m, Un_n = _shift(Um, mu, -1), _shift(Un, nu, -1)
    leaves = (
        Um @ _shift(Un, mu, 1) @ T(_shift(Um, nu, 1)) @ T(Un)
        + Un @ T(_shift(Um_m, nu, 1)) @ T(_shift(Un, mu, -1)) @ Um_m
        + T(Um_m) @ T(_shift(Un_n, mu, -1)) @ _shift(Um_m, nu, -1) @ Un_n
        + T(Un_n) @ _shift(Um, nu, -1) @ _shift(Un_n, mu, 1) @ T(Um)
    )
    S = (leaves - T(leaves)) / 8.0
    w, Q = np.linalg.eigh(1j * S)
    w = np.clip(w, -1.0, 1.0)
    A = (-1j * (Q * np.arcsin(w)[..., None, :]) @ np.conj(T(Q))).real
    return coefficients_from_adjoint(bg.algebra, A)


def _links_from_potential(algebra, B):
    """U_mu(x) = expm(ad B_mu(x)), batched."""
    ad = np.einsum("abc,...b->...ac", algebra.f, B)
    return scipy.linalg.expm(ad) if ad.size else ad


def _unit_color(algebra, color):
    if color is None:
        # last basis element; a Cartan direction for su(N)
        return np.eye(algebra.dim)[-1]
    n = np.asarray(color, dtype=float)
    if n.shape != (algebra.dim,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ParameterError("color direction must be a unit d-vector")
    return n


def quantized_strength(geometry, plane=(1, 2), flux_quanta=1, period=2 * np.pi):
    """Smallest uniform strength compatible with periodicity: 2 pi k / (L_mu L_nu)."""
    mu, nu = plane
    return period * flux_quanta / (geometry.extents[mu] * geometry.extents[nu])


def make_background(geometry, algebra=None, kind="zero", *, strength=None, plane=(1, 2), color=None,
                    twist=False, seed=None, amplitude=None, modes=1):
    """Factory for test backgrounds.

    kind = "zero": B = 0.
    kind = "constant_abelian": B_nu(x) = strength * x_mu * n for plane (mu, nu).
        With ``twist=True`` a transition function on the x_mu seam makes the
        field exactly uniform; this needs a flux-quantized ``strength``.
    kind = "random_smooth": low Fourier modes with Gaussian coefficients drawn
        from ``seed``, scaled so that max |B| equals ``amplitude``.
    """
    algebra = algebra or build_algebra("su", 2)
    d = algebra.dim
    shape = geometry.extents
    B = np.zeros((*shape, NDIM, d))
    params = {}
    if kind == "zero":
        pass
    elif kind == "constant_abelian":
        mu, nu = (int(p) for p in plane)
        if mu == nu or not (0 <= mu < NDIM and 0 <= nu < NDIM):
            raise ParameterError(f"plane indices must be distinct directions, got {plane}")
        if strength is None:
            raise ParameterError("constant_abelian needs a strength")
        strength = float(strength)
        if abs(strength) * geometry.spacing**2 > 1.0:
            raise DiscretizationError(f"a^2 * strength = {abs(strength) * geometry.spacing**2:g} > 1")
        n = _unit_color(algebra, color)
        f_lat = strength * geometry.spacing**2
        B[..., nu, :] = f_lat * geometry.coordinate(mu)[..., None] * n
        params = {"strength": strength, "plane": [mu, nu], "color": n.tolist(), "twist": bool(twist)}
        links = _links_from_potential(algebra, B)
        if twist:
            Lmu, Lnu = shape[mu], shape[nu]
            wrap = scipy.linalg.expm(f_lat * Lmu * Lnu * np.einsum("abc,b->ac", algebra.f, n))
            if np.max(np.abs(wrap - np.eye(d))) > 1e-10:
                raise ParameterError(
                    "twisted constant field needs quantized flux; "
                    f"use strength = {quantized_strength(geometry, (mu, nu)) / geometry.spacing**2:.17g} * k"
                )
            idx = [slice(None)] * NDIM
            idx[mu] = Lmu - 1
            xnu = geometry.coordinate(nu)[tuple(idx)]
            ad_n = np.einsum("abc,b->ac", algebra.f, n)
            links[tuple(idx) + (mu,)] = scipy.linalg.expm(-f_lat * Lmu * xnu[..., None, None] * ad_n)
            B = None
        return BackgroundField(geometry, algebra, links, B=B, kind=kind, params=params, seed=seed)
    elif kind == "random_smooth":
        if seed is None:
            raise ParameterError("random_smooth needs a seed")
        amplitude = 0.1 if amplitude is None else float(amplitude)
        rng = np.random.default_rng(int(seed))
        ks = [k for k in np.ndindex(*(2 * modes + 1,) * NDIM)]
        x = np.stack([geometry.coordinate(m) for m in range(NDIM)], axis=-1).astype(float)
        for k in ks:
            k = np.array(k) - modes
            if not k.any():
                continue
            phase = 2 * np.pi * np.einsum("...m,m->...", x, k / np.array(shape))
            c, s = rng.standard_normal((2, NDIM, d))
            B += np.cos(phase)[..., None, None] * c + np.sin(phase)[..., None, None] * s
        peak = np.max(np.linalg.norm(B, axis=-1))
        B *= amplitude / peak
        params = {"amplitude": amplitude, "modes": int(modes)}
    else:
        raise ParameterError(f"unknown background kind {kind!r}")
    if kind == "zero":
        links = np.broadcast_to(np.eye(d), (*shape, NDIM, d, d)).copy()
    else:
        links = _links_from_potential(algebra, B)
    return BackgroundField(geometry, algebra, links, B=B, kind=kind, params=params, seed=seed)


def classical_action(bg: BackgroundField, g2: float) -> float:
    """(1/(4 g^2)) sum_x sum_{mu<nu} 2 F^a_mu_nu F^a_mu_nu a^4 (Euclidean)."""
    if not g2 > 0:
        raise ParameterError(f"g^2 must be positive, got {g2}")
    return action_integral(bg) / (4.0 * g2)


def action_integral(bg: BackgroundField) -> float:
    """sum over sites and all (mu, nu) of F^a_mu_nu F^a_mu_nu a^4."""
    F = bg.field_strength
    return float(np.sum(F * F))


def random_gauge(geometry, algebra, seed, amplitude=np.pi) -> np.ndarray:
    """Per-site orthogonal h(x) = expm(ad X(x)) with X uniform in [-amplitude, amplitude]^d."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-amplitude, amplitude, size=(*geometry.extents, algebra.dim))
    return scipy.linalg.expm(np.einsum("abc,...b->...ac", algebra.f, X))


def gauge_transform(bg: BackgroundField, h) -> BackgroundField:
    """U_mu(x) -> h(x)^T U_mu(x) h(x + mu)."""
    h = np.asarray(h, dtype=float)
    d = bg.dim
    if h.shape != (*bg.geometry.extents, d, d):
        raise InvalidGaugeError(f"gauge field has shape {h.shape}")
    if _orthogonality_defect(h) > ORTHOGONALITY_TOL:
        raise InvalidGaugeError("gauge transformation is not orthogonal at every site")
    hT = np.swapaxes(h, -1, -2)
    links = np.empty_like(bg.links)
    for mu in range(NDIM):
        links[..., mu, :, :] = hT @ bg.links[..., mu, :, :] @ np.roll(h, -1, axis=mu)
    return BackgroundField(bg.geometry, bg.algebra, links, B=None, kind=bg.kind, params=bg.params,
                           seed=bg.seed, boundary=bg.boundary)


# ---------------------------------------------------------------- fields

@dataclass
class AdjointField:
    geometry: LatticeGeometry
    algebra: LieAlgebraSpec
    rank: str
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        if self.rank not in ("scalar", "vector"):
            raise ShapeError(f"rank must be 'scalar' or 'vector', got {self.rank!r}")
        if self.values.shape != field_shape(self.geometry, self.algebra, self.rank):
            raise ShapeError(f"values have shape {self.values.shape}")

    def dot(self, other: "AdjointField") -> float:
        return float(np.vdot(self.values, other.values))

    def norm2(self) -> float:
        return self.dot(self)

    @classmethod
    def zeros(cls, geometry, algebra, rank):
        return cls(geometry, algebra, rank, np.zeros(field_shape(geometry, algebra, rank)))

    @classmethod
    def random(cls, geometry, algebra, rank, seed):
        rng = np.random.default_rng(seed)
        return cls(geometry, algebra, rank, rng.standard_normal(field_shape(geometry, algebra, rank)))


def field_shape(geometry, algebra, rank):
    return (*geometry.extents, algebra.dim) if rank == "scalar" else (*geometry.extents, NDIM, algebra.dim)


def operator_rank(which: str) -> str:
    if which == "M0":
        return "scalar"
    if which == "M1":
        return "vector"
    raise ShapeError(f"operator must be 'M0' or 'M1', got {which!r}")


def operator_dimension(bg: BackgroundField, which: str) -> int:
    return int(np.prod(field_shape(bg.geometry, bg.algebra, operator_rank(which))))


def plane_wave(geometry, algebra, k, color=0, rank="scalar", lorentz=0) -> AdjointField:
    """Real plane wave cos(2 pi k.x / L) in one color (and Lorentz) slot."""
    x = np.stack([geometry.coordinate(m) for m in range(NDIM)], axis=-1)
    phase = 2 * np.pi * np.einsum("...m,m->...", x, np.asarray(k) / np.array(geometry.extents))
    v = AdjointField.zeros(geometry, algebra, rank)
    if rank == "scalar":
        v.values[..., color] = np.cos(phase)
    else:
        v.values[..., lorentz, color] = np.cos(phase)
    return v


def free_eigenvalue(geometry, k) -> float:
    """sum_mu (2 - 2 cos(2 pi k_mu / L_mu)) / a^2."""
    k = np.asarray(k, dtype=float)
    return float(np.sum(2 - 2 * np.cos(2 * np.pi * k / np.array(geometry.extents)))) / geometry.spacing**2


class LatticeOperator:
    """Matrix-free M0 or M1 on a background; acts on flat blocks of shape (n, k).

    Works in lattice units; ``apply_operator`` rescales by 1/a^2.
    """

    def __init__(self, bg: BackgroundField, which: str):
        self.bg = bg
        self.which = which
        self.rank = operator_rank(which)
        self.shape_field = field_shape(bg.geometry, bg.algebra, self.rank)
        self.n = int(np.prod(self.shape_field))
        self.U = [np.ascontiguousarray(bg.link(mu)) for mu in range(NDIM)]
        self.UT = [np.ascontiguousarray(np.swapaxes(U, -1, -2)) for U in self.U]
        if self.rank == "vector":
            self.U = [U[..., None, :, :] for U in self.U]
            self.UT = [U[..., None, :, :] for U in self.UT]
            d = bg.dim
            G = -FIELD_STRENGTH_COUPLING * bg.field_strength_adjoint  # (..., mu, nu, a, b)
            self.G = np.ascontiguousarray(np.transpose(G, (0, 1, 2, 3, 4, 6, 5, 7))).reshape(
                *bg.geometry.extents, NDIM * d, NDIM * d)
            if not np.any(self.G):
                self.G = None
        self.trivial = bg.is_trivial()

    @property
    def shape(self):
        return (self.n, self.n)

    def laplacian(self, v):
        """-nabla^2 v on an array of shape field_shape + (k,)."""
        out = (2.0 * NDIM) * v
        for mu in range(NDIM):
            if self.trivial:
                out -= np.roll(v, -1, axis=mu)
                out -= np.roll(v, 1, axis=mu)
            else:
                out -= self.U[mu] @ np.roll(v, -1, axis=mu)
                out -= np.roll(self.UT[mu] @ v, 1, axis=mu)
        return out

    def matmat(self, X):
        X = np.asarray(X, dtype=float)
        vec = X.ndim == 1
        if vec:
            X = X[:, None]
        k = X.shape[1]
        v = X.reshape(*self.shape_field, k)
        out = self.laplacian(v)
        if self.rank == "vector" and self.G is not None:
            vv = v.reshape(*self.bg.geometry.extents, -1, k)
            out = out + (self.G @ vv).reshape(out.shape)
        out = out.reshape(self.n, k)
        return out[:, 0] if vec else out

    __call__ = matmat

    def as_linear_operator(self):
        from scipy.sparse.linalg import LinearOperator
        return LinearOperator(self.shape, matvec=self.matmat, matmat=self.matmat, dtype=float)

    def dense(self) -> np.ndarray:
        """Assemble the full matrix (small lattices only)."""
        return np.asarray(self.matmat(np.eye(self.n)))


def apply_operator(bg: BackgroundField, which: str, v: AdjointField) -> AdjointField:
    """Apply M0 (scalar fields) or M1 (vector fields), in units of 1/a^2."""
    rank = operator_rank(which)
    if v.rank != rank:
        raise ShapeError(f"{which} acts on {rank} fields, got a {v.rank} field")
    if v.geometry != bg.geometry or v.algebra.dim != bg.algebra.dim:
        raise ShapeError("field and background live on different lattices or algebras")
    op = LatticeOperator(bg, which)
    out = op.matmat(v.values.reshape(-1)).reshape(v.values.shape) / bg.geometry.spacing**2
    return AdjointField(bg.geometry, bg.algebra, rank, out)


def transform_field(v: AdjointField, h) -> AdjointField:
    """Covariant companion of ``gauge_transform``: v(x) -> h(x)^T v(x)."""
    hT = np.swapaxes(np.asarray(h), -1, -2)
    if v.rank == "scalar":
        vals = np.einsum("...ab,...b->...a", hT, v.values)
    else:
        vals = np.einsum("...ab,...mb->...ma", hT, v.values)
    return AdjointField(v.geometry, v.algebra, v.rank, vals)


# ---------------------------------------------------------------- container

MAGIC = b"YMLBG001"


def write_background(path, bg: BackgroundField) -> None:
    """Binary container: magic, uint32 header length, JSON header, float64 LE links."""
    header = {
        "extents": list(bg.geometry.extents),
        "spacing": bg.geometry.spacing,
        "family": bg.algebra.family,
        "N": bg.algebra.N,
        "d": bg.dim,
        "kind": bg.kind,
        "params": bg.params,
        "seed": bg.seed,
        "boundary": list(bg.boundary),
        "layout": "links[x0][x1][x2][x3][mu][a][b]",
    }
    raw = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        fh.write(np.ascontiguousarray(bg.links, dtype="<f8").tobytes())


def read_background(path) -> BackgroundField:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ShapeError(f"{path}: not a background container")
    (n,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12:12 + n])
    geom = LatticeGeometry(tuple(header["extents"]), header["spacing"])
    alg = build_algebra(header["family"], header["N"])
    d = header["d"]
    links = np.frombuffer(blob[12 + n:], dtype="<f8").reshape(*geom.extents, NDIM, d, d).copy()
    return BackgroundField(geom, alg, links, kind=header["kind"], params=header["params"],
                           seed=header["seed"], boundary=tuple(header.get("boundary", (1, 1, 1, 1))))
