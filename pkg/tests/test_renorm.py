import math

import numpy as np
import pytest

from ymlab.errors import MismatchError
from ymlab.field import LatticeGeometry, action_integral, make_background, quantized_strength
from ymlab.heatkernel import SmallTFit
from ymlab.lie import build_algebra, from_structure_constants
from ymlab.renorm import beta_theoretical, divergence_coefficient

G8 = LatticeGeometry((8, 8, 8, 8))


def fit(operator, A2, window=(2.0, 5.0), var=1e-4, sys=0.0):
    return SmallTFit(window, 0.0, A2, np.diag([var, var]), 1.0, 8, False, 2.0, 5.0, operator, 0.0, sys)


def test_beta_values():
    assert beta_theoretical(build_algebra("su", 2)) == pytest.approx(22 / (48 * math.pi**2), rel=1e-14)
    assert beta_theoretical(build_algebra("su", 2)) == pytest.approx(0.04643, abs=1e-5)
    assert beta_theoretical(build_algebra("su", 3)) == pytest.approx(0.06965, abs=1e-5)
    assert beta_theoretical(from_structure_constants(np.zeros((1, 1, 1)))) == 0


def test_zero_background_is_exact_zero_case():
    bg = make_background(G8, build_algebra("su", 2), "zero")
    rep = divergence_coefficient(fit("M0", 0.0), fit("M1", 0.0), bg)
    assert rep.exact_zero and rep.rho is None and rep.K == 0 and rep.S4 == 0
    assert rep.to_dict()["rho"] is None


@pytest.mark.parametrize("N", [2, 3])
def test_continuum_coefficients_give_beta(N):
    # continuum Seeley values for a covariantly constant field:
    # A2(M0) = -C S4 / 12, A2(M1) = 4 A2(M0) + 2 C S4 = 5 C S4 / 3
    alg = build_algebra("su", N)
    bg = make_background(G8, alg, "random_smooth", seed=1)
    S4 = action_integral(bg)
    C = float(N)
    rep = divergence_coefficient(fit("M0", -C * S4 / 12), fit("M1", 5 * C * S4 / 3), bg)
    assert rep.K == pytest.approx(-11 * C * S4 / 12, rel=1e-13)
    assert rep.rho > 0
    assert rep.rho == pytest.approx(beta_theoretical(alg), rel=1e-13)
    assert abs(rep.deviation) < 1e-12


def test_error_budget_combines_in_quadrature():
    bg = make_background(G8, build_algebra("su", 2), "constant_abelian", strength=quantized_strength(G8),
                         twist=True)
    S4 = action_integral(bg)
    rep = divergence_coefficient(fit("M0", -S4 / 6, sys=0.3), fit("M1", 10 * S4 / 3, var=4e-4, sys=1.0), bg)
    unit = (1 / (16 * math.pi**2)) / (S4 / 4)
    assert rep.budget["statistical"] == pytest.approx(unit * math.sqrt(1e-4 + 0.25 * 4e-4), rel=1e-12)
    assert rep.budget["window"] == pytest.approx(unit * math.hypot(0.3, 0.5), rel=1e-12)
    assert rep.budget["discretization"] is None
    assert rep.rho_err == pytest.approx(math.hypot(rep.budget["statistical"], rep.budget["window"]), rel=1e-12)


def test_mismatch_errors():
    bg = make_background(G8, build_algebra("su", 2), "constant_abelian", strength=quantized_strength(G8),
                         twist=True)
    with pytest.raises(MismatchError):
        divergence_coefficient(fit("M1", 1.0), fit("M0", 1.0), bg)
    with pytest.raises(MismatchError):
        divergence_coefficient(fit("M0", 1.0), fit("M1", 1.0, window=(2.0, 4.0)), bg)
