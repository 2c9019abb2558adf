import itertools

import numpy as np
import pytest

from ymlab.errors import DiscretizationError, InvalidGaugeError, ParameterError, ShapeError
from ymlab.field import (
    AdjointField,
    LatticeGeometry,
    LatticeOperator,
    action_integral,
    apply_operator,
    classical_action,
    free_eigenvalue,
    gauge_transform,
    make_background,
    plane_wave,
    quantized_strength,
    random_gauge,
    read_background,
    transform_field,
    write_background,
)
from ymlab.heatkernel import TraceMethod, subtracted_trace
from ymlab.lie import build_algebra

SU2 = build_algebra("su", 2)
G4 = LatticeGeometry((4, 4, 4, 4))


@pytest.fixture(scope="module")
def smooth():
    return make_background(G4, SU2, "random_smooth", seed=7, amplitude=0.3)


def test_zero_background_has_no_action():
    bg = make_background(G4, SU2, "zero")
    assert bg.is_trivial()
    assert classical_action(bg, 0.5) == 0.0


def test_random_smooth_is_deterministic():
    a = make_background(G4, SU2, "random_smooth", seed=7)
    b = make_background(G4, SU2, "random_smooth", seed=7)
    assert np.array_equal(a.links, b.links)
    assert a.orthogonality_defect() < 1e-13


def test_constant_abelian_interior_value():
    geom = LatticeGeometry((8, 8, 8, 8))
    bg = make_background(geom, SU2, "constant_abelian", strength=0.05, plane=(1, 2), color=[0, 0, 1])
    F = bg.field_strength
    # clover at x1 in 1..L-3 never touches the seam
    interior = F[:, 1:6, :, :, 1, 2, :]
    assert np.allclose(interior[..., 2], 0.05, atol=1e-13)
    assert np.allclose(interior[..., :2], 0.0, atol=1e-13)


def test_twisted_field_is_exactly_uniform():
    geom = LatticeGeometry((8, 8, 8, 8))
    f = quantized_strength(geom, (1, 2))
    bg = make_background(geom, SU2, "constant_abelian", strength=f, plane=(1, 2), twist=True)
    F = bg.field_strength
    assert np.allclose(F[..., 1, 2, 2], f, atol=1e-13)
    assert np.allclose(F[..., 2, 1, 2], -f, atol=1e-13)
    mask = np.ones((4, 4), bool)
    mask[1, 2] = mask[2, 1] = False
    assert np.max(np.abs(F[..., mask, :])) < 1e-13
    # closed form: 2 f^2 per site for the (1,2) and (2,1) entries
    assert action_integral(bg) == pytest.approx(2 * f * f * geom.nsites, rel=1e-12)
    with pytest.raises(ParameterError):
        make_background(geom, SU2, "constant_abelian", strength=0.1, twist=True)


def test_untwisted_action_closed_form_up_to_seam():
    geom = LatticeGeometry((8, 8, 8, 8))
    f = 0.02
    bg = make_background(geom, SU2, "constant_abelian", strength=f)
    F = bg.field_strength
    # interior slices x1 = 1..5 carry exactly 2 f^2 per site; the two seam slices differ
    interior = np.sum(F[:, 1:6] ** 2)
    assert interior == pytest.approx(2 * f * f * geom.nsites * 5 / 8, rel=1e-12)
    assert classical_action(bg, 0.5) == pytest.approx(action_integral(bg) / 2.0, rel=1e-15)
    assert action_integral(bg) > interior


def test_strength_bound():
    with pytest.raises(DiscretizationError):
        make_background(G4, SU2, "constant_abelian", strength=2.0)


def test_action_gauge_invariant(smooth):
    s0 = classical_action(smooth, 1.0)
    for seed in range(10):
        h = random_gauge(G4, SU2, seed)
        assert abs(classical_action(gauge_transform(smooth, h), 1.0) / s0 - 1) < 1e-10


def test_gauge_identity_and_composition(smooth):
    eye = np.broadcast_to(np.eye(3), (*G4.extents, 3, 3))
    assert np.allclose(gauge_transform(smooth, eye).links, smooth.links, atol=1e-15)
    h, k = random_gauge(G4, SU2, 1), random_gauge(G4, SU2, 2)
    two = gauge_transform(gauge_transform(smooth, h), k)
    one = gauge_transform(smooth, h @ k)
    assert np.allclose(two.links, one.links, atol=1e-12)
    with pytest.raises(InvalidGaugeError):
        gauge_transform(smooth, 2 * eye)


def test_operator_is_gauge_covariant(smooth):
    h = random_gauge(G4, SU2, 3)
    bgh = gauge_transform(smooth, h)
    for which, rank in (("M0", "scalar"), ("M1", "vector")):
        v = AdjointField.random(G4, SU2, rank, 5)
        lhs = apply_operator(bgh, which, transform_field(v, h))
        rhs = transform_field(apply_operator(smooth, which, v), h)
        assert np.allclose(lhs.values, rhs.values, atol=1e-12)


@pytest.mark.parametrize("which,rank", [("M0", "scalar"), ("M1", "vector")])
def test_operator_symmetric(smooth, which, rank):
    v = AdjointField.random(G4, SU2, rank, 1)
    w = AdjointField.random(G4, SU2, rank, 2)
    lhs = w.dot(apply_operator(smooth, which, v))
    rhs = apply_operator(smooth, which, w).dot(v)
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


@pytest.mark.parametrize("k", [(0, 0, 0, 0), (1, 0, 0, 0), (1, 2, 3, 1), (2, 2, 2, 2), (3, 1, 0, 2)])
def test_plane_wave_eigenvalue(k):
    zero = make_background(G4, SU2, "zero")
    lam = sum(2 - 2 * np.cos(2 * np.pi * kk / 4) for kk in k)
    assert free_eigenvalue(G4, k) == pytest.approx(lam, abs=1e-14)
    v = plane_wave(G4, SU2, k, color=1)
    assert np.allclose(apply_operator(zero, "M0", v).values, lam * v.values, atol=1e-12)
    w = plane_wave(G4, SU2, k, color=2, rank="vector", lorentz=3)
    assert np.allclose(apply_operator(zero, "M1", w).values, lam * w.values, atol=1e-12)


def test_free_spectrum_matches_fourier_oracle():
    zero = make_background(G4, SU2, "zero")
    dense = LatticeOperator(zero, "M0").dense()
    ev = np.linalg.eigvalsh(dense)
    oracle = sorted(
        sum(2 - 2 * np.cos(2 * np.pi * kk / 4) for kk in k)
        for k in itertools.product(range(4), repeat=4)
        for _ in range(SU2.dim)
    )
    assert np.max(np.abs(ev - oracle)) < 1e-12


def test_free_m1_is_componentwise_m0():
    zero = make_background(G4, SU2, "zero")
    v = AdjointField.random(G4, SU2, "vector", 4)
    out = apply_operator(zero, "M1", v).values
    for mu in range(4):
        comp = AdjointField(G4, SU2, "scalar", v.values[..., mu, :].copy())
        assert np.allclose(out[..., mu, :], apply_operator(zero, "M0", comp).values, atol=1e-14)


def test_shape_errors(smooth):
    with pytest.raises(ShapeError):
        apply_operator(smooth, "M1", AdjointField.zeros(G4, SU2, "scalar"))
    with pytest.raises(ShapeError):
        LatticeGeometry((4, 4, 4))


def test_container_round_trip(tmp_path, smooth):
    path = tmp_path / "bg.bin"
    write_background(path, smooth)
    back = read_background(path)
    assert np.array_equal(back.links, smooth.links)
    assert back.geometry == smooth.geometry and back.kind == smooth.kind
    assert back.params == smooth.params and back.seed == smooth.seed


def test_subtracted_traces_gauge_invariant_exact(smooth):
    ts = np.array([0.5, 1.0, 2.0])
    ref, _ = subtracted_trace(smooth, "M0", ts, TraceMethod.exact())
    for seed in range(10):
        bgh = gauge_transform(smooth, random_gauge(G4, SU2, seed))
        val, _ = subtracted_trace(bgh, "M0", ts, TraceMethod.exact())
        assert np.allclose(val, ref, rtol=1e-9, atol=1e-10)


def test_subtracted_traces_gauge_invariant_stochastic(smooth):
    ts = np.array([0.5, 1.0, 2.0])
    ref, ref_err = subtracted_trace(smooth, "M0", ts, TraceMethod.stochastic(nprobes=32, seed=11, dilution="site"))
    for seed in range(10):
        bgh = gauge_transform(smooth, random_gauge(G4, SU2, seed))
        method = TraceMethod.stochastic(nprobes=32, seed=100 + seed, dilution="site")
        val, err = subtracted_trace(bgh, "M0", ts, method)
        assert np.all(np.abs(val - ref) <= 3 * np.hypot(err, ref_err))


def test_pure_gauge_traces_vanish():
    zero = make_background(G4, SU2, "zero")
    pure = gauge_transform(zero, random_gauge(G4, SU2, 9))
    assert not pure.is_trivial()
    val, _ = subtracted_trace(pure, "M0", np.array([0.3, 1.0, 3.0]), TraceMethod.exact())
    assert np.max(np.abs(val)) < 1e-10
    val, err = subtracted_trace(pure, "M0", np.array([0.3, 1.0, 3.0]), TraceMethod.stochastic(nprobes=16))
    assert np.all(np.abs(val) <= 3 * err + 1e-9)
