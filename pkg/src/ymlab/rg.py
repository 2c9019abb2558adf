"""One-loop running of u = g^2 in the proper-time scheme.

The flow variable is ln eps (eps a proper time, dimension [L]^2):

    du / d ln eps = beta u^2,    1/u(eps) = 1/g2_ren - beta ln(eps/mu),

so u -> 0 as eps -> 0 (asymptotic freedom) and u blows up at the pole
eps* = mu exp(1/(beta g2_ren)), which is also the invariant scale Lambda_t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from ymlab.errors import IntegrationError, LandauPoleError, ParameterError


@dataclass(frozen=True)
class RGState:
    u: float          # g^2
    scale: float      # eps, [L]^2
    beta: float

    def __post_init__(self):
        if not (self.u > 0 and self.scale > 0 and self.beta >= 0):
            raise ParameterError(f"need u > 0, scale > 0, beta >= 0; got {self}")

    @property
    def log_scale(self) -> float:
        return math.log(self.scale)

    @property
    def pole_scale(self) -> float:
        return transmutation_scale(self.u, self.scale, self.beta)


def _positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ParameterError(f"{name} must be positive, got {v}")


def transmutation_scale(g2_ren: float, mu: float, beta: float) -> float:
    """Lambda_t = mu exp(1/(beta g2_ren)); inf when the exponent overflows."""
    _positive(g2_ren=g2_ren, mu=mu, beta=beta)
    x = 1.0 / (beta * g2_ren)
    return mu * math.exp(x) if x < 700 else math.inf


def run_coupling(g2_ren: float, mu: float, eps, beta: float):
    """u(eps) from the closed form; scalar or array eps."""
    _positive(g2_ren=g2_ren, mu=mu)
    if beta < 0:
        raise ParameterError(f"beta must be non-negative, got {beta}")
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(eps_arr <= 0):
        raise ParameterError("eps must be positive")
    denom = 1.0 - beta * g2_ren * np.log(eps_arr / mu)
    if np.any(denom <= 0):
        pole = transmutation_scale(g2_ren, mu, beta)
        raise LandauPoleError(f"eps at or above the pole scale {pole:.17g}", pole_scale=pole)
    u = g2_ren / denom
    return float(u) if np.ndim(eps) == 0 else u


def flow_ode(state: RGState, target_log_scale: float, rtol: float = 1e-13, atol: float = 0.0) -> RGState:
    """Integrate du/d ln eps = beta u^2 to ln eps = target with adaptive steps."""
    s0 = state.log_scale
    if target_log_scale == s0:
        return state
    if state.beta > 0:
        s_pole = s0 + 1.0 / (state.beta * state.u)
        if target_log_scale >= s_pole:
            raise LandauPoleError(f"flow crosses the pole at ln eps = {s_pole:.17g}",
                                  pole_scale=math.exp(s_pole) if s_pole < 700 else math.inf)
    sol = solve_ivp(lambda s, u: state.beta * u * u, (s0, target_log_scale), [state.u],
                    method="DOP853", rtol=rtol, atol=atol or 1e-16 * state.u)
    if not sol.success:
        raise IntegrationError(f"RG flow integration failed: {sol.message}", partial=None)
    u = float(sol.y[0, -1])
    if not (u > 0 and math.isfinite(u)):
        raise IntegrationError("RG flow left the admissible branch", partial=u)
    return replace(state, u=u, scale=math.exp(target_log_scale))
