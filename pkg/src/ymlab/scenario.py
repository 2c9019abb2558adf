"""Scenario configuration (TOML) and the full field -> traces -> fits -> report -> RG pipeline."""

from __future__ import annotations

import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from ymlab import io as yio
from ymlab.errors import ConfigError, IntegrationError, YMLabError
from ymlab.field import (
    LatticeGeometry,
    action_integral,
    make_background,
    operator_dimension,
    quantized_strength,
    write_background,
)
from ymlab.heatkernel import (
    EXACT_SIZE_LIMIT,
    TraceMethod,
    default_window,
    fit_with_window_systematic,
    measure_series,
    regularized_logdet,
    sample_traces,
)
from ymlab.lie import build_algebra
from ymlab.renorm import beta_theoretical, divergence_coefficient
from ymlab.rg import RGState, flow_ode, run_coupling, transmutation_scale

OUTPUT_ENV = "YMLAB_OUTPUT_DIR"
BUNDLED = Path(__file__).parent / "configs"


@dataclass
class AlgebraConfig:
    family: str = "su"
    N: int = 2


@dataclass
class GeometryConfig:
    extents: list = field(default_factory=lambda: [8, 8, 8, 8])
    spacing: float = 1.0


@dataclass
class BackgroundConfig:
    kind: str = "zero"
    strength: float | None = None      # f (physical units); overrides flux_quanta
    flux_quanta: int | None = None     # quantized f = 2 pi k / (L_mu L_nu a^2)
    plane: list = field(default_factory=lambda: [1, 2])
    twist: bool = False
    seed: int | None = None
    amplitude: float | None = None


@dataclass
class TracesConfig:
    method: str = "stochastic"
    nprobes: int = 64
    seed: int = 0
    dilution: str = "none"
    boundary: str = "periodic"
    npoints: int = 12


@dataclass
class FitConfig:
    window: list | None = None


@dataclass
class LogdetConfig:
    epsilon: list = field(default_factory=lambda: [1e-3, 1e-4, 1e-5])
    mu: float | None = None            # default: upper end of the fit window


@dataclass
class RGConfig:
    g2_ren: float = 0.5
    mu: float = 1.0
    beta_source: str = "report"        # "report" or "theory"
    log_eps_min: float = -10.0
    log_eps_max: float = 1.0
    points: int = 23


@dataclass
class ScenarioConfig:
    algebra: AlgebraConfig = field(default_factory=AlgebraConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    traces: TracesConfig = field(default_factory=TracesConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    logdet: LogdetConfig = field(default_factory=LogdetConfig)
    rg: RGConfig = field(default_factory=RGConfig)
    output_dir: str | None = None

    # ---- on-disk form

    def to_dict(self) -> dict:
        def clean(d):
            return {k: clean(v) if isinstance(v, dict) else v for k, v in d.items() if v is not None}
        return clean(asdict(self))

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        kw = {}
        for f in fields(cls):
            if f.name not in data:
                continue
            raw = data.pop(f.name)
            sub = {"algebra": AlgebraConfig, "geometry": GeometryConfig, "background": BackgroundConfig,
                   "traces": TracesConfig, "fit": FitConfig, "logdet": LogdetConfig, "rg": RGConfig}.get(f.name)
            if sub is None:
                kw[f.name] = raw
                continue
            if not isinstance(raw, dict):
                raise ConfigError(f"[{f.name}] must be a table")
            known = {g.name for g in fields(sub)}
            unknown = set(raw) - known
            if unknown:
                raise ConfigError(f"unknown keys in [{f.name}]: {sorted(unknown)}")
            kw[f.name] = sub(**raw)
        if data:
            raise ConfigError(f"unknown top-level keys: {sorted(data)}")
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, text: str) -> "ScenarioConfig":
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        p = Path(path)
        if not p.exists() and (BUNDLED / f"{path}.toml").exists():
            p = BUNDLED / f"{path}.toml"
        if not p.exists():
            raise ConfigError(f"no such config: {path}")
        return cls.from_toml(p.read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_toml())

    # ---- validation

    def geometry_obj(self) -> LatticeGeometry:
        return LatticeGeometry(tuple(int(x) for x in self.geometry.extents), float(self.geometry.spacing))

    def method(self) -> TraceMethod:
        t = self.traces
        if t.method == "exact":
            return TraceMethod.exact(boundary=t.boundary)
        return TraceMethod.stochastic(t.nprobes, t.seed, dilution=t.dilution, boundary=t.boundary)

    def validate(self) -> None:
        try:
            alg = build_algebra(self.algebra.family, self.algebra.N)
            geom = self.geometry_obj()
            self.method()
        except YMLabError as exc:
            raise ConfigError(str(exc)) from exc
        if self.background.kind not in ("zero", "constant_abelian", "random_smooth"):
            raise ConfigError(f"unknown background kind {self.background.kind!r}")
        if self.traces.method == "exact":
            n = geom.nsites * alg.dim * 4
            if n > EXACT_SIZE_LIMIT:
                raise ConfigError(f"exact traces need operator dimension <= {EXACT_SIZE_LIMIT}; M1 here has {n}")
        if self.traces.npoints < 4:
            raise ConfigError("need at least 4 trace points for the fit")
        eps = list(self.logdet.epsilon)
        if not eps or any(e <= 0 for e in eps):
            raise ConfigError("epsilon values must be positive")
        if self.logdet.mu is not None and any(e >= self.logdet.mu for e in eps):
            raise ConfigError(f"every epsilon must lie below mu = {self.logdet.mu}")
        w = self.fit.window
        if w is not None:
            if len(w) != 2 or not 0 < w[0] < w[1]:
                raise ConfigError(f"fit window must be [t_min, t_max] with 0 < t_min < t_max, got {w}")
            if any(e >= w[1] for e in eps) and self.logdet.mu is None:
                raise ConfigError("every epsilon must lie below mu (the fit window end)")
        if self.rg.beta_source not in ("report", "theory"):
            raise ConfigError("rg.beta_source must be 'report' or 'theory'")
        if not (self.rg.g2_ren > 0 and self.rg.mu > 0):
            raise ConfigError("rg.g2_ren and rg.mu must be positive")
        if self.rg.log_eps_min >= self.rg.log_eps_max or self.rg.points < 2:
            raise ConfigError("rg scale range is empty")

    def build_background(self):
        alg = build_algebra(self.algebra.family, self.algebra.N)
        geom = self.geometry_obj()
        b = self.background
        kw = {}
        if b.kind == "constant_abelian":
            plane = tuple(b.plane)
            strength = b.strength
            if strength is None:
                strength = quantized_strength(geom, plane, b.flux_quanta or 1)
            kw = dict(strength=strength, plane=plane, twist=b.twist)
        elif b.kind == "random_smooth":
            kw = dict(seed=b.seed if b.seed is not None else 0)
            if b.amplitude is not None:
                kw["amplitude"] = b.amplitude
        return make_background(geom, alg, b.kind, **kw)


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "ymlab-out"))


# ------------------------------------------------------------------ pipeline

class _Manifest:
    def __init__(self, outdir: Path, config: ScenarioConfig):
        self.outdir = outdir
        self.data = {"config": config.to_dict(), "stages": {}, "files": {}, "complete": False}

    def add(self, name: str, text: str | None = None):
        path = self.outdir / name
        if text is not None:
            path.write_text(text)
        self.data["files"][name] = yio.sha256_file(path)

    def stage(self, name, status, **extra):
        self.data["stages"][name] = {"status": status, **extra}
        self.flush()

    def flush(self):
        (self.outdir / "manifest.json").write_text(yio.dumps(self.data))


def _series_csv(series) -> str:
    return yio.csv_text(["t", "value", "stderr", "method"], series.rows())


def run_scenario(config: ScenarioConfig, outdir=None, workers: int = 1) -> int:
    """Run every stage; artifacts and ``manifest.json`` land in ``outdir``.

    Returns 0 when every stage validation passes.  A failing stage raises its
    error with ``stage`` set; the manifest keeps what was produced so far.
    """
    config.validate()
    outdir = Path(outdir or config.output_dir or default_output_dir())
    outdir.mkdir(parents=True, exist_ok=True)
    man = _Manifest(outdir, config)
    man.flush()
    ok = True
    state = {}

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except YMLabError as exc:
            exc.stage = name
            man.stage(name, "failed", error=f"{type(exc).__name__}: {exc}")
            raise
        man.stage(name, "ok", seconds=round(time.perf_counter() - t0, 3))
        return out

    method = config.method()

    def s_field():
        bg = config.build_background()
        write_background(outdir / "background.ymlbg", bg)
        man.add("background.ymlbg")
        state["bg"] = bg
        return bg

    bg = stage("field", s_field)
    window = tuple(config.fit.window) if config.fit.window else default_window(bg, method.boundary)
    mu = config.logdet.mu if config.logdet.mu is not None else window[1]

    def s_traces():
        for which in ("M0", "M1"):
            samples = None
            if not bg.is_trivial():
                samples = sample_traces(bg, which, method, t_max=max(window[1], 400.0))
            series = measure_series(bg, which, method, window, config.traces.npoints, samples=samples)
            state[which] = (samples, series)
            man.add(f"trace_{which}.csv", _series_csv(series))

    stage("traces", s_traces)

    def s_fits():
        for which in ("M0", "M1"):
            series = state[which][1]
            fit = fit_with_window_systematic(series) if not bg.is_trivial() else _zero_fit(series, which)
            state["fit" + which] = fit
            man.add(f"fit_{which}.json", yio.dumps(fit.to_dict()))

    stage("fits", s_fits)

    def s_report():
        rep = divergence_coefficient(state["fitM0"], state["fitM1"], bg, state["M0"][1], state["M1"][1])
        state["report"] = rep
        man.add("report.json", yio.dumps(rep.to_dict()))
        if rep.rho is not None and not rep.rho > 0:
            raise_validation("rho is not positive (wrong running direction)")
        return rep

    def raise_validation(msg):
        nonlocal ok
        ok = False
        man.data.setdefault("validation_failures", []).append(msg)

    stage("report", s_report)

    def s_logdet():
        out = {}
        for which in ("M0", "M1"):
            fit = state["fit" + which]
            entry = {}
            try:
                res = regularized_logdet(bg, which, mu, min(config.logdet.epsilon), method=method, fit=fit,
                                         samples=state[which][0], window=window)
                entry = {"status": "ok", **res.to_dict(),
                         "values": [{"epsilon": e, "value": res.at(e).value} for e in config.logdet.epsilon]}
            except IntegrationError as exc:
                entry = {"status": "unstable", "error": str(exc), "partial": exc.partial}
            out[which] = entry
        man.add("logdet.json", yio.dumps(out))

    stage("logdet", s_logdet)

    def s_rg():
        rep = state["report"]
        # a non-positive rho already failed validation; the demonstration then runs on theory
        use_report = config.rg.beta_source == "report" and rep.rho is not None and rep.rho > 0
        beta = rep.rho if use_report else beta_theoretical(bg.algebra)
        r = config.rg
        s = np.linspace(r.log_eps_min, r.log_eps_max, r.points)
        lam = transmutation_scale(r.g2_ren, r.mu, beta)
        s = s[s < math.log(lam)] if math.isfinite(lam) else s
        closed = run_coupling(r.g2_ren, r.mu, np.exp(s), beta)
        st = RGState(r.g2_ren, r.mu, beta)
        ode = np.array([flow_ode(st, x).u for x in s])
        rows = [(float(a), float(b), float(c)) for a, b, c in zip(s, closed, ode)]
        man.add("rg_flow.csv", yio.csv_text(["ln_eps", "g2_closed", "g2_ode"], rows))
        inv = [(float(x), float(u), transmutation_scale(float(u), float(np.exp(x)), beta))
               for x, u in zip(s[:: max(1, len(s) // 5)], closed[:: max(1, len(s) // 5)])]
        man.add("rg_invariance.csv", yio.csv_text(["ln_eps", "g2", "Lambda_t"], inv))
        spread = max(abs(row[2] / lam - 1) for row in inv) if math.isfinite(lam) else 0.0
        if spread > 1e-10:
            raise_validation(f"Lambda_t not invariant along the flow (spread {spread:.3e})")
        dev = float(np.max(np.abs(ode / closed - 1)))
        if dev > 1e-10:
            raise_validation(f"ODE flow deviates from the closed form by {dev:.3e}")
        state["beta_used"] = beta
        man.data["rg"] = {"beta": beta, "beta_source": "report" if use_report else "theory", "Lambda_t": lam}

    stage("rg", s_rg)

    def s_plot():
        from ymlab.plotting import trace_plot
        trace_plot(outdir / "traces.svg", [state["M0"][1], state["M1"][1]],
                   [state["fitM0"], state["fitM1"]], title=f"{bg.algebra.tag} {bg.kind}")
        man.add("traces.svg")

    stage("plot", s_plot)
    man.data["complete"] = True
    man.data["exit_status"] = 0 if ok else 1
    man.flush()
    return 0 if ok else 1


def _zero_fit(series, which):
    from ymlab.heatkernel import SmallTFit
    return SmallTFit((float(series.t[0]), float(series.t[-1])), 0.0, 0.0, np.zeros((2, 2)), 0.0,
                     series.t.size - 2, False, 2.0 * series.spacing**2, None, which)
