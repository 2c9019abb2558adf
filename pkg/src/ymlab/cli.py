"""Command-line interface: ``ymlab <subcommand>``."""

from __future__ import annotations

import math
import sys
from pathlib import Path

import click
import numpy as np

from ymlab import io as yio
from ymlab.errors import YMLabError


def _emit(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _method(method, nprobes, seed, dilution, boundary):
    from ymlab.heatkernel import TraceMethod
    if method == "exact":
        return TraceMethod.exact(boundary=boundary)
    return TraceMethod.stochastic(nprobes, seed, dilution=dilution, boundary=boundary)


trace_options = [
    click.option("--method", type=click.Choice(["exact", "stochastic"]), default="stochastic", show_default=True),
    click.option("--nprobes", type=int, default=64, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--dilution", type=click.Choice(["none", "site"]), default="none", show_default=True),
    click.option("--boundary", type=click.Choice(["periodic", "twist-average"]), default="periodic",
                 show_default=True),
]


def with_trace_options(fn):
    for opt in reversed(trace_options):
        fn = opt(fn)
    return fn


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except YMLabError as exc:
            stage = f"[{exc.stage}] " if getattr(exc, "stage", None) else ""
            click.echo(f"error {stage}{type(exc).__name__}: {exc}", err=True)
            ctx.exit(2)


@click.group(cls=_Group)
def main():
    """Heat-kernel renormalization laboratory for Yang-Mills backgrounds."""


@main.command()
@click.option("--family", default="su", show_default=True)
@click.option("--N", "N", type=int, default=2, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="text", show_default=True)
def lie(family, N, fmt):
    """Structure constants, Casimir and Jacobi residual of an algebra."""
    from ymlab.lie import build_algebra, jacobi_residual, to_json_dict
    spec = build_algebra(family, N)
    d = to_json_dict(spec)
    d["jacobi_residual"] = jacobi_residual(spec)
    if fmt == "json":
        click.echo(yio.dumps(d), nl=False)
        return
    click.echo(f"algebra {spec.tag}  dim {spec.dim}  C_adj {yio.fmt(d['casimir'])}  "
               f"jacobi_residual {yio.fmt(d['jacobi_residual'])}")
    click.echo(yio.csv_text(["a", "b", "c", "f_abc"], [(a, b, c, float(v)) for a, b, c, v in d["f"]]), nl=False)


@main.group()
def field():
    """Background-field utilities."""


@field.command("make")
@click.option("--family", default="su", show_default=True)
@click.option("--N", "N", type=int, default=2, show_default=True)
@click.option("--extents", type=int, nargs=4, default=(8, 8, 8, 8), show_default=True)
@click.option("--spacing", type=float, default=1.0, show_default=True)
@click.option("--kind", type=click.Choice(["zero", "constant_abelian", "random_smooth"]), default="zero",
              show_default=True)
@click.option("--strength", type=float, default=None, help="f; default: one flux quantum")
@click.option("--flux-quanta", type=int, default=1, show_default=True)
@click.option("--plane", type=int, nargs=2, default=(1, 2), show_default=True)
@click.option("--twist/--no-twist", default=False, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--amplitude", type=float, default=None)
@click.option("--out", "out", type=click.Path(), default=None)
def field_make(family, N, extents, spacing, kind, strength, flux_quanta, plane, twist, seed, amplitude, out):
    """Build a background and write it as a .ymlbg container."""
    from ymlab.field import LatticeGeometry, action_integral, make_background, quantized_strength, write_background
    from ymlab.lie import build_algebra
    from ymlab.scenario import default_output_dir
    geom = LatticeGeometry(tuple(extents), spacing)
    alg = build_algebra(family, N)
    kw = {}
    if kind == "constant_abelian":
        kw = dict(strength=strength if strength is not None else quantized_strength(geom, plane, flux_quanta),
                  plane=tuple(plane), twist=twist)
    elif kind == "random_smooth":
        kw = dict(seed=seed)
        if amplitude is not None:
            kw["amplitude"] = amplitude
    bg = make_background(geom, alg, kind, **kw)
    path = Path(out) if out else default_output_dir() / "background.ymlbg"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_background(path, bg)
    click.echo(yio.dumps({"path": str(path), "algebra": alg.tag, "extents": list(extents), "kind": kind,
                          "params": bg.params, "action_integral": action_integral(bg),
                          "max_field_strength": bg.max_field_strength() / spacing**2}), nl=False)


def _load_bg(path):
    from ymlab.field import read_background
    return read_background(path)


@main.command("heat-trace")
@click.option("--background", "bgpath", type=click.Path(exists=True), required=True)
@click.option("--operator", "which", type=click.Choice(["M0", "M1"]), default="M0", show_default=True)
@click.option("--t", "ts", type=float, multiple=True, help="proper times (repeatable)")
@click.option("--npoints", type=int, default=12, show_default=True, help="points across the default window")
@click.option("--subtract/--no-subtract", default=True, show_default=True)
@with_trace_options
@click.option("--out", type=click.Path(), default=None)
def heat_trace_cmd(bgpath, which, ts, npoints, subtract, method, nprobes, seed, dilution, boundary, out):
    """CSV of (subtracted) heat traces: t, value, stderr, method."""
    from ymlab.heatkernel import default_window, heat_trace, sample_traces, subtracted_trace
    bg = _load_bg(bgpath)
    m = _method(method, nprobes, seed, dilution, boundary)
    if ts:
        t = np.array(sorted(ts))
    else:
        lo, hi = default_window(bg, m.boundary)
        t = np.geomspace(lo, hi, npoints)
    samples = None if (subtract and bg.is_trivial()) else sample_traces(bg, which, m, t_max=float(t.max()))
    fn = subtracted_trace if subtract else heat_trace
    val, err = fn(bg, which, t, m, samples=samples)
    rows = [(float(a), float(b), float(c), m.tag) for a, b, c in zip(t, val, err)]
    _emit(yio.csv_text(["t", "value", "stderr", "method"], rows), out)


@main.command()
@click.option("--background", "bgpath", type=click.Path(exists=True), required=True)
@click.option("--operator", "which", type=click.Choice(["M0", "M1"]), default="M0", show_default=True)
@click.option("--epsilon", type=float, multiple=True, default=(1e-3, 1e-4, 1e-5), show_default=True)
@click.option("--mu", type=float, default=None, help="split point (default: fit window end)")
@with_trace_options
@click.option("--out", type=click.Path(), default=None)
def logdet(bgpath, which, epsilon, mu, method, nprobes, seed, dilution, boundary, out):
    """Regularized ln det M(B) - ln det M(0) at each epsilon (JSON)."""
    from ymlab.heatkernel import regularized_logdet
    bg = _load_bg(bgpath)
    m = _method(method, nprobes, seed, dilution, boundary)
    res = regularized_logdet(bg, which, mu, min(epsilon), method=m)
    d = res.to_dict()
    d["values"] = [{"epsilon": e, "value": res.at(e).value} for e in epsilon]
    _emit(yio.dumps(d), out)


@main.command("beta-extract")
@click.option("--config", "cfg", default=None, help="scenario TOML (or a bundled name) for geometry/background")
@click.option("--background", "bgpath", type=click.Path(exists=True), default=None)
@click.option("--window", type=float, nargs=2, default=None)
@click.option("--npoints", type=int, default=12, show_default=True)
@with_trace_options
@click.option("--out", type=click.Path(), default=None)
def beta_extract(cfg, bgpath, window, npoints, method, nprobes, seed, dilution, boundary, out):
    """Heat traces -> fits -> divergence report (JSON) plus a summary table on stderr."""
    from ymlab.heatkernel import default_window, fit_with_window_systematic, measure_series, sample_traces
    from ymlab.renorm import divergence_coefficient
    from ymlab.scenario import ScenarioConfig
    if cfg:
        conf = ScenarioConfig.load(cfg)
        bg = conf.build_background()
        m = conf.method()
        window = window or conf.fit.window
        npoints = conf.traces.npoints
    elif bgpath:
        bg = _load_bg(bgpath)
        m = _method(method, nprobes, seed, dilution, boundary)
    else:
        raise click.UsageError("give --config or --background")
    window = tuple(window) if window else default_window(bg, m.boundary)
    fits, series = {}, {}
    for which in ("M0", "M1"):
        s = measure_series(bg, which, m, window, npoints,
                           samples=None if bg.is_trivial() else sample_traces(bg, which, m, t_max=window[1]))
        series[which] = s
        fits[which] = fit_with_window_systematic(s) if not bg.is_trivial() else None
    if bg.is_trivial():
        from ymlab.scenario import _zero_fit
        fits = {w: _zero_fit(series[w], w) for w in series}
    rep = divergence_coefficient(fits["M0"], fits["M1"], bg, series["M0"], series["M1"])
    _emit(yio.dumps(rep.to_dict()), out)
    click.echo(_report_table(rep), err=True)


def _report_table(rep) -> str:
    lines = [f"{'quantity':<16}{'value':>26}"]
    for name, v in [("A2(M0)", rep.A2_0), ("A2(M1)", rep.A2_1), ("K", rep.K), ("S4", rep.S4),
                    ("rho", rep.rho), ("rho_err", rep.rho_err), ("beta_theory", rep.beta_theory),
                    ("rel_deviation", rep.deviation)] + [(f"err:{k}", v) for k, v in rep.budget.items()]:
        lines.append(f"{name:<16}{'n/a' if v is None else yio.fmt(v):>26}")
    return "\n".join(lines)


@main.command("rg-flow")
@click.option("--g2", type=float, default=0.5, show_default=True, help="g^2 at the scheme point mu")
@click.option("--mu", type=float, default=1.0, show_default=True)
@click.option("--beta", type=float, default=None, help="default: 11 C/(48 pi^2) of --family/--N")
@click.option("--report", type=click.Path(exists=True), default=None, help="take beta = rho from a report JSON")
@click.option("--family", default="su", show_default=True)
@click.option("--N", "N", type=int, default=2, show_default=True)
@click.option("--log-eps-min", type=float, default=-10.0, show_default=True)
@click.option("--log-eps-max", type=float, default=1.0, show_default=True)
@click.option("--points", type=int, default=23, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="trajectory CSV; invariance table goes next to it")
def rg_flow(g2, mu, beta, report, family, N, log_eps_min, log_eps_max, points, out):
    """One-loop trajectory (ln eps, g^2) and the Lambda_t invariance table (CSV)."""
    import json
    from ymlab.lie import build_algebra
    from ymlab.renorm import beta_theoretical
    from ymlab.rg import RGState, flow_ode, run_coupling, transmutation_scale
    if report:
        beta = json.loads(Path(report).read_text())["rho"]
        if beta is None:
            raise click.UsageError("report has no rho (exact-zero background)")
    if beta is None:
        beta = beta_theoretical(build_algebra(family, N))
    lam = transmutation_scale(g2, mu, beta)
    s = np.linspace(log_eps_min, log_eps_max, points)
    s = s[s < math.log(lam)] if math.isfinite(lam) else s
    u = run_coupling(g2, mu, np.exp(s), beta)
    st = RGState(g2, mu, beta)
    rows = [(float(x), float(a), flow_ode(st, float(x)).u) for x, a in zip(s, u)]
    traj = yio.csv_text(["ln_eps", "g2_closed", "g2_ode"], rows)
    inv = yio.csv_text(["ln_eps", "g2", "Lambda_t"],
                       [(float(x), float(a), transmutation_scale(float(a), float(np.exp(x)), beta))
                        for x, a in zip(s, u)])
    if out:
        _emit(traj, out)
        _emit(inv, str(Path(out).with_name(Path(out).stem + "_invariance.csv")))
    else:
        click.echo(f"# beta = {yio.fmt(beta)}  Lambda_t = {yio.fmt(lam)}")
        click.echo(traj, nl=False)
        click.echo()
        click.echo(inv, nl=False)


@main.command()
@click.option("--max-loops", type=int, default=2, show_default=True)
@click.option("--eom", is_flag=True, help="one-external-line graphs instead of vacuum graphs")
@click.option("--all-connected", is_flag=True, help="include weakly connected vacuum graphs")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="text", show_default=True)
def diagrams(max_loops, eom, all_connected, fmt):
    """Enumerate vacuum graphs (or EOM graphs) up to isomorphism."""
    from ymlab.diagrams import enumerate_vacuum_graphs, eom_expansion, to_json
    graphs = eom_expansion(max_loops) if eom else enumerate_vacuum_graphs(
        max_loops, "all" if all_connected else "strong")
    if fmt == "json":
        click.echo(to_json(graphs))
    else:
        for g in graphs:
            click.echo(g.text_art())


@main.command()
@click.argument("config")
@click.option("--out", "outdir", type=click.Path(), default=None, help="default: $YMLAB_OUTPUT_DIR or ./ymlab-out")
@click.option("--workers", type=int, default=1, show_default=True, help="parallelism cap (stages run serially)")
def run(config, outdir, workers):
    """Run the full scenario described by CONFIG (path or bundled name, e.g. su2-8x4)."""
    from ymlab.scenario import ScenarioConfig, default_output_dir, run_scenario
    conf = ScenarioConfig.load(config)
    outdir = Path(outdir or conf.output_dir or default_output_dir())
    status = run_scenario(conf, outdir, workers=workers)
    rep = Path(outdir) / "report.json"
    if rep.exists():
        click.echo(rep.read_text(), nl=False)
    sys.exit(status)


if __name__ == "__main__":
    main()
