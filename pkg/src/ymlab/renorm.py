"""One-loop divergence of the background effective action and the beta coefficient.

With Gamma(B) = ln det M0 - 1/2 ln det M1 (ghost +1, gluon -1/2), the
coefficient of ln(eps) is K / (16 pi^2), K = A2(M0) - A2(M1)/2.  Comparing
with the renormalized action (1/4)(1/g^2 + beta ln(eps/mu)) S4, S4 = int F^a F^a
summed over all mu, nu, the one-loop ln(eps) term of -Gamma gives

    rho = -(K / 16 pi^2) / (S4 / 4)   ->   beta = 11 C / (48 pi^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ymlab.errors import MismatchError
from ymlab.field import BackgroundField, action_integral
from ymlab.heatkernel import SEELEY_PREFACTOR, HeatTraceSeries, SmallTFit, fit_small_t
from ymlab.lie import LieAlgebraSpec, casimir_adjoint

GHOST_WEIGHT = 1.0
GLUON_WEIGHT = -0.5
NORMALIZATION = "rho = -(K/16pi^2)/(S4/4), S4 = sum_{mu,nu} int F^a F^a"


def beta_theoretical(spec: LieAlgebraSpec) -> float:
    """11 C / (48 pi^2)."""
    return 11.0 * casimir_adjoint(spec) / (48.0 * math.pi**2)


@dataclass
class DivergenceReport:
    background: dict
    A2_0: float
    A2_1: float
    K: float
    S4: float
    rho: float | None
    beta_theory: float
    deviation: float | None
    budget: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    normalization: str = NORMALIZATION

    @property
    def rho_err(self) -> float:
        """Quadrature sum of the reported error contributions."""
        vals = [v for v in self.budget.values() if v is not None and np.isfinite(v)]
        return float(math.sqrt(sum(v * v for v in vals)))

    @property
    def exact_zero(self) -> bool:
        return self.rho is None

    def to_dict(self) -> dict:
        return {
            "background": self.background,
            "A2_0": self.A2_0,
            "A2_1": self.A2_1,
            "K": self.K,
            "S4": self.S4,
            "rho": self.rho,
            "rho_err": self.rho_err,
            "beta_theory": self.beta_theory,
            "relative_deviation": self.deviation,
            "budget": self.budget,
            "fits": self.fits,
            "normalization": self.normalization,
        }


def background_descriptor(bg: BackgroundField) -> dict:
    return {
        "algebra": bg.algebra.tag,
        "extents": list(bg.geometry.extents),
        "spacing": bg.geometry.spacing,
        "kind": bg.kind,
        "params": {k: v for k, v in bg.params.items()},
        "max_field_strength": bg.max_field_strength() / bg.geometry.spacing**2,
    }


def _rho(K, S4):
    return -(K * SEELEY_PREFACTOR) / (S4 / 4.0)


def divergence_coefficient(fit0: SmallTFit, fit1: SmallTFit, bg: BackgroundField,
                           series0: HeatTraceSeries | None = None, series1: HeatTraceSeries | None = None,
                           companion: "DivergenceReport | None" = None) -> DivergenceReport:
    """Assemble rho and its error budget from the M0 and M1 fits on ``bg``.

    Budget entries (absolute errors on rho):
      statistical   fit covariances (probes), M0 and M1 independent;
      window        refits on shrunk windows (SmallTFit.*_window_sys);
      discretization  |rho - rho'| against ``companion`` (another lattice spacing)
                      when given; otherwise the shift from refitting with the
                      lattice-artifact term A1 constrained to zero (needs the series).
    """
    if fit0.operator and fit0.operator != "M0" or fit1.operator and fit1.operator != "M1":
        raise MismatchError(f"expected (M0, M1) fits, got ({fit0.operator}, {fit1.operator})")
    if not np.allclose(fit0.window, fit1.window, rtol=1e-9):
        raise MismatchError(f"incompatible fit windows {fit0.window} and {fit1.window}")
    for s in (series0, series1):
        if s is not None and s.field_norm is not None and bg.max_field_strength() > 0:
            fn = bg.max_field_strength() / bg.geometry.spacing**2
            if not math.isclose(s.field_norm, fn, rel_tol=1e-9):
                raise MismatchError("series and background disagree on ||F||")
    beta = beta_theoretical(bg.algebra)
    S4 = action_integral(bg)
    K = GHOST_WEIGHT * fit0.A2 + GLUON_WEIGHT * fit1.A2
    fits = {"M0": fit0.to_dict(), "M1": fit1.to_dict()}
    if S4 == 0:
        return DivergenceReport(background_descriptor(bg), fit0.A2, fit1.A2, K, 0.0, None, beta, None,
                                {"statistical": 0.0, "window": 0.0, "discretization": 0.0}, fits)
    rho = _rho(K, S4)
    dK = lambda a0, a1: abs(GHOST_WEIGHT * a0 + GLUON_WEIGHT * a1)
    stat = abs(_rho(1.0, S4)) * math.sqrt(fit0.covariance[1, 1] + 0.25 * fit1.covariance[1, 1])
    window = abs(_rho(1.0, S4)) * math.hypot(fit0.A2_window_sys, 0.5 * fit1.A2_window_sys)
    if companion is not None and companion.rho is not None:
        disc = abs(rho - companion.rho)
    elif series0 is not None and series1 is not None:
        c0 = fit_small_t(series0, fit0.window, free_A1=False)
        c1 = fit_small_t(series1, fit1.window, free_A1=False)
        disc = abs(_rho(1.0, S4)) * dK(c0.A2 - fit0.A2, c1.A2 - fit1.A2)
    else:
        disc = None
    budget = {"statistical": stat, "window": window, "discretization": disc}
    return DivergenceReport(background_descriptor(bg), fit0.A2, fit1.A2, K, S4, rho, beta,
                            (rho - beta) / beta if beta else None, budget, fits)
