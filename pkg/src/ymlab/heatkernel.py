"""Heat traces of M0/M1, small proper-time fits and the regularized log-determinant.

Conventions (lattice units, a = 1 internally):

    Tr_sub(t) = Tr(e^{-M(B) t} - e^{-M(0) t}) = (A1 / t + A2) / (16 pi^2) + O(t)

with A1, A2 the volume-integrated, color-traced Seeley coefficients.  The
log-determinant is split at ``mu_split`` and cut off at ``epsilon``:

    ln det M(B) - ln det M(0) = A2 ln(eps/mu) / (16 pi^2)            (divergent)
                              - int_{t0}^{mu} dt/t [Tr_sub - A2/(16 pi^2)]  (finite_below)
                              - int_{mu}^{inf} dt/t [Tr_sub - dn0]          (finite_above)

where t0 is the lattice-artifact floor of the fit window and dn0 the
difference of zero-mode counts (zero modes are excluded, i.e. ln det').
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from ymlab.errors import (
    FitDegeneracyError,
    IntegrationError,
    ParameterError,
    SizeError,
)
from ymlab.field import (
    NDIM,
    BackgroundField,
    LatticeOperator,
    make_background,
    operator_dimension,
    operator_rank,
)
from ymlab.krylov import GaussRule, expm_multiply, lanczos_quadrature

EXACT_SIZE_LIMIT = 20000
SEELEY_PREFACTOR = 1.0 / (16.0 * math.pi**2)
ARTIFACT_FLOOR = 2.0          # t_min >= 2 a^2
VALIDITY_CEILING = 0.5        # t_max <= 0.5 / ||F||_inf
MISFIT_THRESHOLD = 2.0
ZERO_MODE_TOL = 1e-8

BOUNDARY_SETS = {
    "periodic": [(1, 1, 1, 1)],
    "twist-average": [tuple(s) for s in itertools.product((1, -1), repeat=NDIM)],
}


@dataclass(frozen=True)
class TraceMethod:
    """How traces are evaluated.

    kind: "exact" (dense spectrum) or "stochastic" (Z2 probes + Lanczos quadrature).
    dilution: "none" -- Hutchinson with +-1 entries on every component, the free
              operator sampled with the same probes;
              "site" -- each probe is a random site, fully diluted in
              color/Lorentz slots with +-1 signs, rescaled by the number of
              sites; the free local trace is then exact and taken in closed form.
    boundary: "periodic", or "twist-average" over the 16 periodic/antiperiodic
              wraps (removes odd winding contributions; equals the trace on the
              doubled lattice divided by 16).  Each probe vector is applied under
              every wrap, so ``nprobes`` (probe applications) must be a multiple
              of 16 and the independent samples number nprobes/16.
    """

    kind: str = "stochastic"
    nprobes: int = 64
    seed: int = 0
    dilution: str = "none"
    boundary: str = "periodic"
    tol: float = 1e-10
    batch: int = 24

    def __post_init__(self):
        if self.kind not in ("exact", "stochastic"):
            raise ParameterError(f"unknown trace method {self.kind!r}")
        if self.dilution not in ("none", "site"):
            raise ParameterError(f"unknown dilution {self.dilution!r}")
        if self.boundary not in BOUNDARY_SETS:
            raise ParameterError(f"unknown boundary treatment {self.boundary!r}")
        if self.kind == "stochastic" and self.nprobes < 2:
            raise ParameterError("stochastic traces need at least 2 probes")

    @property
    def tag(self) -> str:
        if self.kind == "exact":
            base = "exact"
        else:
            base = f"stochastic(nprobes={self.nprobes},seed={self.seed},dilution={self.dilution})"
        return base if self.boundary == "periodic" else f"{base}+{self.boundary}"

    @classmethod
    def exact(cls, **kw):
        return cls(kind="exact", **kw)

    @classmethod
    def stochastic(cls, nprobes=64, seed=0, **kw):
        return cls(kind="stochastic", nprobes=nprobes, seed=seed, **kw)


def _as_method(method) -> TraceMethod:
    if isinstance(method, TraceMethod):
        return method
    if method == "exact":
        return TraceMethod.exact()
    if method == "stochastic":
        return TraceMethod.stochastic()
    if isinstance(method, dict):
        return TraceMethod(**method)
    raise ParameterError(f"cannot interpret trace method {method!r}")


# ------------------------------------------------------------------ heat_apply

def heat_apply(bg: BackgroundField, which: str, v, t: float, tol: float = 1e-8):
    """e^{-M t} v for an AdjointField (or flat array) with relative error <= tol."""
    from ymlab.field import AdjointField

    if not t > 0:
        raise ParameterError(f"t must be positive, got {t}")
    if not 0 < tol <= 1e-4:
        raise ParameterError(f"tol must lie in (0, 1e-4], got {tol}")
    op = LatticeOperator(bg, which)
    a2 = bg.geometry.spacing**2
    if isinstance(v, AdjointField):
        if v.rank != op.rank:
            from ymlab.errors import ShapeError
            raise ShapeError(f"{which} acts on {op.rank} fields")
        y, _ = expm_multiply(op.matmat, v.values.reshape(-1), t / a2, tol=tol)
        return AdjointField(v.geometry, v.algebra, v.rank, y.reshape(v.values.shape))
    y, _ = expm_multiply(op.matmat, np.asarray(v, dtype=float).reshape(-1), t / a2, tol=tol)
    return y


# ------------------------------------------------------------------ sampling

@dataclass
class TraceSamples:
    """Spectral data behind a trace estimate; evaluates at any proper time.

    The sampling unit is one probe (block of columns) applied under every wrap
    in ``wraps``: ``rules_B[u][w]`` is the spectral measure (Gauss rules, or the
    exact spectrum) of unit u under wrap w, ``rules_0`` the same for M(0), or
    None when the free part is taken in closed form (site dilution, where the
    free local trace is exact).  ``scale`` converts a local trace into a full one.
    """

    which: str
    method: TraceMethod
    geometry: object
    dim: int
    wraps: list
    rules_B: list
    rules_0: list | None
    scale: float = 1.0
    trivial: bool = False
    lowest_ritz: float = np.nan
    zero_modes: tuple = (np.nan, np.nan)
    field_norm: float = 0.0

    @property
    def n_units(self) -> int:
        return len(self.rules_B)

    def sample_values(self, ts, subtract=True):
        """(n_units, len(ts)) array of wrap-averaged, full-trace-normalized samples."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        lat_t = ts / self.geometry.spacing**2
        out = np.zeros((self.n_units, ts.size))
        if subtract and self.trivial:
            return out
        for w_idx, w in enumerate(self.wraps):
            free = None
            if subtract and self.rules_0 is None:
                free = free_heat_trace(self.geometry, self.which, self.dim, ts, w)
            for u in range(self.n_units):
                v = self.scale * self.rules_B[u][w_idx].quadratic_form_t(lat_t)
                if subtract:
                    v = v - (free if free is not None else self.scale * self.rules_0[u][w_idx].quadratic_form_t(lat_t))
                out[u] += v
        return out / len(self.wraps)

    def estimate(self, ts, subtract=True, covariance=False):
        """Mean over units; covariance of the mean from the unit-to-unit scatter."""
        x = self.sample_values(ts, subtract)
        mean = x.mean(axis=0)
        if self.method.kind == "exact" or self.n_units < 2:
            cov = np.zeros((x.shape[1], x.shape[1]))
        else:
            cov = np.atleast_2d(np.cov(x, rowvar=False)) / self.n_units
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
        return (mean, err, cov) if covariance else (mean, err)


def _snap_zero(x):
    # roundoff zero modes (~ -1e-14) would otherwise grow like e^{+|x| t} at large t
    return np.where(np.abs(x) < ZERO_MODE_TOL, 0.0, x)


class _Spectrum:
    """Exact spectral measure: unit weight on every eigenvalue."""

    def __init__(self, eigenvalues):
        self.nodes = _snap_zero(np.asarray(eigenvalues))

    def quadratic_form_t(self, ts):
        return np.exp(-np.outer(ts, self.nodes)).sum(axis=1)


class _Rules:
    """Sum over the columns of one sample of their Gauss rules."""

    def __init__(self, nodes, weights):
        self.cols = [(_snap_zero(np.asarray(x)), w) for x, w in zip(nodes, weights)]

    def quadratic_form_t(self, ts):
        return sum(np.exp(-np.outer(ts, x)) @ w for x, w in self.cols)

    @property
    def nodes(self):
        return np.concatenate([x for x, _ in self.cols])


def _dense(op: LatticeOperator, block=512) -> np.ndarray:
    n = op.n
    M = np.empty((n, n))
    for s in range(0, n, block):
        e = np.zeros((n, min(block, n - s)))
        e[np.arange(s, s + e.shape[1]), np.arange(e.shape[1])] = 1.0
        M[:, s:s + e.shape[1]] = op.matmat(e)
    return 0.5 * (M + M.T)


_SPECTRUM_CACHE = {}


def operator_spectrum(bg: BackgroundField, which: str) -> np.ndarray:
    """All eigenvalues of M (lattice units); dense, size-limited, cached per background."""
    n = operator_dimension(bg, which)
    if n > EXACT_SIZE_LIMIT:
        raise SizeError(f"exact spectrum needs dimension <= {EXACT_SIZE_LIMIT}, got {n}")
    key = (id(bg), bg.boundary, which)
    hit = _SPECTRUM_CACHE.get(key)
    if hit is not None and hit[0] is bg:
        return hit[1]
    ev = scipy.linalg.eigvalsh(_dense(LatticeOperator(bg, which)), overwrite_a=True, check_finite=False)
    if len(_SPECTRUM_CACHE) > 64:
        _SPECTRUM_CACHE.clear()
    _SPECTRUM_CACHE[key] = (bg, ev)
    return ev


def _free_like(bg: BackgroundField) -> BackgroundField:
    return make_background(bg.geometry, bg.algebra, "zero")


def _probe_columns(bg, method, unit, n):
    """Columns of probe ``unit``: deterministic in (seed, unit) only."""
    rng = np.random.default_rng([method.seed, unit])
    if method.dilution == "none":
        return rng.choice((-1.0, 1.0), size=(n, 1))
    inner = n // bg.geometry.nsites
    site = int(rng.integers(bg.geometry.nsites))
    signs = rng.choice((-1.0, 1.0), size=inner)
    Z = np.zeros((n, inner))
    Z[site * inner + np.arange(inner), np.arange(inner)] = signs
    return Z


def n_units(method: TraceMethod) -> int:
    """Independent probes: ``nprobes`` counts probe applications, one per wrap."""
    S = len(BOUNDARY_SETS[method.boundary])
    if method.nprobes % S:
        raise ParameterError(f"nprobes must be a multiple of the {S} wraps of {method.boundary!r}")
    units = method.nprobes // S
    if units < 2:
        raise ParameterError(f"need at least 2 independent probes, got {units}")
    return units


def sample_traces(bg: BackgroundField, which: str, method=None, t_max: float = 16.0) -> TraceSamples:
    """Collect the spectral data needed for (subtracted) heat traces up to ``t_max``."""
    method = _as_method(method or TraceMethod())
    operator_rank(which)
    spacing = bg.geometry.spacing
    # wraps compose with the background's own boundary signs
    wraps = [tuple(a * b for a, b in zip(bg.boundary, w)) for w in BOUNDARY_SETS[method.boundary]]
    free = _free_like(bg)
    n = operator_dimension(bg, which)
    field_norm = bg.max_field_strength() / spacing**2
    trivial = bg.is_trivial()
    common = dict(which=which, method=method, geometry=bg.geometry, dim=bg.dim, wraps=wraps,
                  trivial=trivial, field_norm=field_norm)
    if method.kind == "exact":
        if n > EXACT_SIZE_LIMIT:
            raise SizeError(f"exact traces need dimension <= {EXACT_SIZE_LIMIT}, got {n}")
        spec0 = [_Spectrum(operator_spectrum(free.with_boundary(w), which)) for w in wraps]
        specB = spec0 if trivial else [_Spectrum(operator_spectrum(bg.with_boundary(w), which)) for w in wraps]
        low = min(float(r.nodes[0]) for r in specB) / spacing**2
        zB = np.mean([np.sum(np.abs(r.nodes) < ZERO_MODE_TOL) for r in specB])
        z0 = np.mean([np.sum(np.abs(r.nodes) < ZERO_MODE_TOL) for r in spec0])
        return TraceSamples(rules_B=[specB], rules_0=[spec0], lowest_ritz=low, zero_modes=(zB, z0), **common)

    units = n_units(method)
    ts_conv = np.geomspace(1e-2, max(t_max, 1e-2) / spacing**2, 24)
    cols = [_probe_columns(bg, method, u, n) for u in range(units)]
    widths = [c.shape[1] for c in cols]
    Z = np.concatenate(cols, axis=1)
    closed_free = method.dilution == "site"
    rules_B = [[None] * len(wraps) for _ in range(units)]
    rules_0 = None if closed_free else [[None] * len(wraps) for _ in range(units)]
    for w_idx, w in enumerate(wraps):
        jobs = [] if trivial else [(LatticeOperator(bg.with_boundary(w), which), rules_B)]
        if not closed_free:
            jobs.append((LatticeOperator(free.with_boundary(w), which), rules_0))
        elif trivial:
            jobs.append((LatticeOperator(free.with_boundary(w), which), rules_B))
        for op, out in jobs:
            rules = _batched_rules(op, Z, ts_conv, method)
            pos = 0
            for u, k in enumerate(widths):
                out[u][w_idx] = _Rules(rules.nodes[pos:pos + k], rules.weights[pos:pos + k])
                pos += k
        if trivial and not closed_free:
            for u in range(units):
                rules_B[u][w_idx] = rules_0[u][w_idx]
    low = min(float(np.min(r.nodes)) for unit in rules_B for r in unit) / spacing**2
    scale = float(bg.geometry.nsites) if closed_free else 1.0
    return TraceSamples(rules_B=rules_B, rules_0=rules_0, scale=scale, lowest_ritz=low, **common)


def _batched_rules(op, Z, ts, method):
    nodes, weights = [], []
    for s in range(0, Z.shape[1], method.batch):
        r = lanczos_quadrature(op.matmat, Z[:, s:s + method.batch], ts, tol=method.tol)
        nodes += r.nodes
        weights += r.weights
    return GaussRule(nodes, weights)


# ------------------------------------------------------------------ traces

def heat_trace(bg: BackgroundField, which: str, t, method=None, samples: TraceSamples | None = None):
    """Tr e^{-M t}: (value, stderr), scalars for scalar t, arrays otherwise."""
    method = _as_method(method or TraceMethod())
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise ParameterError("proper times must be positive")
    samples = samples or sample_traces(bg, which, method, t_max=float(ts.max()))
    val, err = samples.estimate(ts, subtract=False)
    return (float(val[0]), float(err[0])) if np.ndim(t) == 0 else (val, err)


def subtracted_trace(bg: BackgroundField, which: str, t, method=None, samples: TraceSamples | None = None):
    """Tr(e^{-M(B) t} - e^{-M(0) t}) with common probes; exactly 0 for B = 0."""
    method = _as_method(method or TraceMethod())
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise ParameterError("proper times must be positive")
    if bg.is_trivial():
        z = np.zeros_like(ts)
        return (0.0, 0.0) if np.ndim(t) == 0 else (z, z.copy())
    samples = samples or sample_traces(bg, which, method, t_max=float(ts.max()))
    val, err = samples.estimate(ts)
    return (float(val[0]), float(err[0])) if np.ndim(t) == 0 else (val, err)


def free_heat_trace(geometry, which: str, dim: int, t, boundary=(1, 1, 1, 1)):
    """Closed form of Tr e^{-M(0) t}: product of 1-d lattice sums (M1 has 4 copies)."""
    t = np.asarray(t, dtype=float) / geometry.spacing**2
    out = np.ones_like(t) * dim * (NDIM if which == "M1" else 1)
    for L, s in zip(geometry.extents, boundary):
        k = (2 * np.pi * np.arange(L) + (np.pi if s == -1 else 0.0)) / L
        out = out * np.exp(-np.multiply.outer(t, 2 - 2 * np.cos(k))).sum(axis=-1)
    return out


# ------------------------------------------------------------------ series & fits

@dataclass
class HeatTraceSeries:
    """Sampled subtracted traces (t in physical units [L]^2)."""

    operator: str
    t: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    method: str = "exact"
    covariance: np.ndarray | None = None
    spacing: float = 1.0
    field_norm: float | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if np.any(self.t <= 0) or np.any(np.diff(self.t) <= 0):
            raise ParameterError("t values must be positive and strictly increasing")

    def restrict(self, window):
        lo, hi = window
        m = (self.t >= lo * (1 - 1e-12)) & (self.t <= hi * (1 + 1e-12))
        cov = None if self.covariance is None else self.covariance[np.ix_(m, m)]
        return HeatTraceSeries(self.operator, self.t[m], self.value[m], self.stderr[m], self.method, cov,
                               self.spacing, self.field_norm)

    def rows(self):
        return [(float(t), float(v), float(e), self.method) for t, v, e in zip(self.t, self.value, self.stderr)]


def default_window(bg: BackgroundField, boundary: str = "periodic"):
    """[2 a^2, min(0.5/||F||_inf, L^2 a^2 / 16)], L the smallest (effective) extent."""
    a2 = bg.geometry.spacing**2
    L = min(bg.geometry.extents) * (2 if boundary == "twist-average" else 1)
    hi = L * L * a2 / 16.0
    fn = bg.max_field_strength() / a2
    if fn > 0:
        hi = min(hi, VALIDITY_CEILING / fn)
    return (ARTIFACT_FLOOR * a2, hi)


def measure_series(bg: BackgroundField, which: str, method=None, window=None, npoints: int = 12,
                   samples: TraceSamples | None = None) -> HeatTraceSeries:
    """Subtracted traces on ``npoints`` log-spaced times spanning the window."""
    method = _as_method(method or TraceMethod())
    window = window or default_window(bg, method.boundary)
    if window[1] <= window[0]:
        raise FitDegeneracyError(f"empty fit window {window}")
    ts = np.geomspace(window[0], window[1], npoints)
    if bg.is_trivial():
        z = np.zeros_like(ts)
        return HeatTraceSeries(which, ts, z, z.copy(), method.tag, np.zeros((npoints, npoints)),
                               bg.geometry.spacing, 0.0)
    samples = samples or sample_traces(bg, which, method, t_max=window[1])
    val, err, cov = samples.estimate(ts, covariance=True)
    return HeatTraceSeries(which, ts, val, err, method.tag, cov, bg.geometry.spacing, samples.field_norm)


@dataclass
class SmallTFit:
    window: tuple
    A1: float
    A2: float
    covariance: np.ndarray
    residual: float
    dof: int
    misfit: bool
    floor: float
    ceiling: float | None
    operator: str = ""
    A1_window_sys: float = 0.0
    A2_window_sys: float = 0.0

    @property
    def A1_err(self) -> float:
        return float(math.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def A2_err(self) -> float:
        return float(math.sqrt(max(self.covariance[1, 1], 0.0)))

    @property
    def A1_total_err(self) -> float:
        return math.hypot(self.A1_err, self.A1_window_sys)

    @property
    def A2_total_err(self) -> float:
        return math.hypot(self.A2_err, self.A2_window_sys)

    def model(self, t):
        t = np.asarray(t, dtype=float)
        return SEELEY_PREFACTOR * (self.A1 / t + self.A2)

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "window": list(self.window),
            "A1": self.A1,
            "A2": self.A2,
            "A1_err": self.A1_err,
            "A2_err": self.A2_err,
            "A1_window_sys": self.A1_window_sys,
            "A2_window_sys": self.A2_window_sys,
            "covariance": self.covariance.tolist(),
            "residual_per_dof": self.residual,
            "dof": self.dof,
            "misfit": self.misfit,
            "artifact_floor": self.floor,
            "validity_ceiling": self.ceiling,
        }


def fit_small_t(series: HeatTraceSeries, window=None, check_bounds: bool = True,
                free_A1: bool = True) -> SmallTFit:
    """Weighted least squares in c (A1/t + A2), c = 1/(16 pi^2).

    The point estimate uses the diagonal errors as weights; the parameter
    covariance propagates the full covariance of the series when present.
    ``free_A1=False`` fits the continuum form with A1 pinned to zero.
    """
    a2 = series.spacing**2
    window = tuple(window) if window is not None else (float(series.t[0]), float(series.t[-1]))
    floor = ARTIFACT_FLOOR * a2
    ceiling = VALIDITY_CEILING / series.field_norm if series.field_norm else None
    if check_bounds:
        if window[0] < floor * (1 - 1e-12):
            raise ParameterError(f"fit window starts at {window[0]:g} < lattice floor {floor:g}")
        if ceiling is not None and window[1] > ceiling * (1 + 1e-12):
            raise ParameterError(f"fit window ends at {window[1]:g} > validity ceiling {ceiling:g}")
    sub = series.restrict(window)
    n = sub.t.size
    if n < 4:
        raise FitDegeneracyError(f"need >= 4 points in the window, got {n}")
    X = SEELEY_PREFACTOR * np.column_stack([1.0 / sub.t, np.ones(n)])
    if not free_A1:
        X = X[:, 1:]
    scale = max(np.max(np.abs(sub.value)), 1e-300)
    sig = np.maximum(sub.stderr, 1e-13 * scale)
    Xw = X / sig[:, None]
    cond = np.linalg.cond(Xw / np.linalg.norm(Xw, axis=0))
    if not np.isfinite(cond) or cond > 1e8:
        raise FitDegeneracyError(f"fit design is ill-conditioned (cond {cond:.3e}); widen the window")
    Lmap = np.linalg.pinv(Xw) / sig[None, :]          # theta = Lmap @ y
    theta = Lmap @ sub.value
    Sigma = sub.covariance if sub.covariance is not None else np.diag(sub.stderr**2)
    cov = Lmap @ Sigma @ Lmap.T
    r = (sub.value - X @ theta) / sig
    dof = n - X.shape[1]
    chi2 = float(r @ r) / dof
    if not free_A1:
        theta = np.concatenate([[0.0], theta])
        cov = np.pad(cov, ((1, 0), (1, 0)))
    return SmallTFit(window, float(theta[0]), float(theta[1]), cov, chi2, dof, chi2 > MISFIT_THRESHOLD,
                     floor, ceiling, series.operator)


def fit_with_window_systematic(series: HeatTraceSeries, shrink: float = 1.3) -> SmallTFit:
    """Fit the full series, then refit on windows shrunk from either end by ``shrink``.

    The window systematic of each coefficient is the largest shift among the refits.
    """
    base = fit_small_t(series)
    lo, hi = base.window
    r = math.sqrt(shrink)
    shifts = []
    for w in ((lo * shrink, hi), (lo, hi / shrink), (lo * r, hi / r)):
        try:
            f = fit_small_t(series, w)
        except FitDegeneracyError:
            continue
        shifts.append((abs(f.A1 - base.A1), abs(f.A2 - base.A2)))
    if shifts:
        base.A1_window_sys, base.A2_window_sys = (float(x) for x in np.max(shifts, axis=0))
    return base


# ------------------------------------------------------------------ log det

@dataclass
class LogDetResult:
    operator: str
    A1: float
    A2: float
    covariance: np.ndarray
    epsilon: float
    mu_split: float
    t_floor: float
    divergent_part: float
    finite_below: float
    finite_above: float
    t_cap: float
    lowest_ritz: float
    zero_mode_shift: float

    @property
    def value(self) -> float:
        return self.divergent_part + self.finite_below + self.finite_above

    def at(self, epsilon: float) -> "LogDetResult":
        """Same finite pieces, divergent piece re-evaluated at another cutoff."""
        _check_cutoffs(epsilon, self.mu_split)
        return replace(self, epsilon=epsilon,
                       divergent_part=self.A2 * math.log(epsilon / self.mu_split) * SEELEY_PREFACTOR)

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "A1": self.A1,
            "A2": self.A2,
            "covariance": np.asarray(self.covariance).tolist(),
            "divergent_part": self.divergent_part,
            "finite_below": self.finite_below,
            "finite_above": self.finite_above,
            "value": self.value,
            "epsilon": self.epsilon,
            "mu_split": self.mu_split,
            "t_floor": self.t_floor,
            "t_cap": self.t_cap,
            "lowest_ritz": self.lowest_ritz,
            "zero_mode_shift": self.zero_mode_shift,
        }


@dataclass(frozen=True)
class Quadrature:
    points_per_decade: int = 64
    tol: float = 1e-10
    max_decades: int = 8


def _check_cutoffs(eps, mu):
    if not (0 < eps < mu):
        raise ParameterError(f"need 0 < epsilon < mu_split, got epsilon={eps}, mu_split={mu}")


def _log_simpson(fun, a, b, ppd):
    """int_a^b fun(t) dt/t by Simpson's rule in ln t."""
    n = max(2, int(math.ceil(ppd * math.log10(b / a))))
    n += n % 2
    u = np.linspace(math.log(a), math.log(b), n + 1)
    y = fun(np.exp(u))
    h = (u[-1] - u[0]) / n
    return float(h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())), y


def _zero_mode_shift(bg, which, samples):
    """n0(B) - n0(0) averaged over the wraps in use."""
    if not np.isnan(samples.zero_modes[0]):
        return float(samples.zero_modes[0] - samples.zero_modes[1])
    wraps = samples.wraps
    shifts = []
    for w in wraps:
        n0 = bg.dim * (NDIM if which == "M1" else 1) if all(s == 1 for s in w) else 0
        op = LatticeOperator(bg.with_boundary(w), which)
        k = min(n0 + 6, op.n - 2)
        ev = scipy.sparse.linalg.eigsh(op.as_linear_operator(), k=k, which="SA", tol=1e-10,
                                       return_eigenvectors=False)
        if np.min(ev) < -ZERO_MODE_TOL:
            raise IntegrationError(f"{which} has negative modes (lowest {np.min(ev):.6g}); "
                                   "the proper-time integral above mu diverges",
                                   partial={"lowest_ritz": float(np.min(ev))})
        shifts.append(int(np.sum(np.abs(ev) < 1e-6)) - n0)
    return float(np.mean(shifts))


def regularized_logdet(bg: BackgroundField, which: str, mu_split: float | None = None, epsilon: float = 1e-4,
                       quadrature: Quadrature | None = None, method=None, fit: SmallTFit | None = None,
                       samples: TraceSamples | None = None, window=None) -> LogDetResult:
    """epsilon-regularized ln det M(B) - ln det M(0), split at mu_split (see module docstring)."""
    quadrature = quadrature or Quadrature()
    method = _as_method(method or TraceMethod())
    if bg.is_trivial():
        mu = mu_split if mu_split is not None else 1.0
        _check_cutoffs(epsilon, mu)
        return LogDetResult(which, 0.0, 0.0, np.zeros((2, 2)), epsilon, mu, 0.0, 0.0, 0.0, 0.0, mu, 0.0, 0.0)
    window = window or (fit.window if fit is not None else default_window(bg, method.boundary))
    mu = float(mu_split if mu_split is not None else window[1])
    _check_cutoffs(epsilon, mu)
    t_floor = window[0]
    if mu < t_floor:
        raise ParameterError(f"mu_split {mu:g} lies below the lattice floor {t_floor:g}")
    t_reach = mu * 10.0**quadrature.max_decades
    if samples is None:
        samples = sample_traces(bg, which, method, t_max=min(t_reach, 1e4))
    if fit is None:
        fit = fit_small_t(measure_series(bg, which, method, window, samples=samples))
    c2 = fit.A2 * SEELEY_PREFACTOR
    divergent = c2 * math.log(epsilon / mu)
    partial = {"divergent_part": divergent, "A2": fit.A2}

    def sub(ts):
        return samples.estimate(ts)[0]

    below, _ = _log_simpson(lambda ts: sub(ts) - c2, t_floor, mu, quadrature.points_per_decade)
    finite_below = -below
    partial["finite_below"] = finite_below
    if samples.lowest_ritz < -ZERO_MODE_TOL:
        raise IntegrationError(f"{which} has negative modes (lowest Ritz value {samples.lowest_ritz:.6g}); "
                               "the proper-time integral above mu diverges",
                               partial={**partial, "lowest_ritz": samples.lowest_ritz})
    try:
        dn0 = _zero_mode_shift(bg, which, samples)
    except IntegrationError as exc:
        exc.partial = {**partial, **exc.partial}
        raise
    total, lo = 0.0, mu
    t_cap = None
    for _ in range(quadrature.max_decades * 2):
        hi = lo * math.sqrt(10.0)
        piece, y = _log_simpson(lambda ts: sub(ts) - dn0, lo, hi, quadrature.points_per_decade)
        total += piece
        if abs(y[-1]) < quadrature.tol and abs(piece) < quadrature.tol * max(1.0, abs(total)):
            t_cap = hi
            break
        lo = hi
    if t_cap is None:
        raise IntegrationError("proper-time integral above mu did not converge",
                               partial={**partial, "finite_above_partial": -total, "t_reached": lo})
    return LogDetResult(which, fit.A1, fit.A2, fit.covariance, epsilon, mu, t_floor, divergent, finite_below,
                        -total, t_cap, samples.lowest_ritz, dn0)
