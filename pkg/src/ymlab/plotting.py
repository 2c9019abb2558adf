"""SVG figures with the plotted numbers embedded as a CSV table in the file's metadata."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ymlab import io as yio  # noqa: E402

plt.rcParams["svg.hashsalt"] = "ymlab"   # stable element ids


def _table(series, fits) -> str:
    rows = []
    for s, f in zip(series, fits):
        for t, v, e in zip(s.t, s.value, s.stderr):
            rows.append((s.operator, float(t), float(v), float(e), float(f.model(t))))
    return yio.csv_text(["operator", "t", "value", "stderr", "model"], rows)


def trace_plot(path, series, fits, title: str = "") -> str:
    """Log-log |Tr_sub| vs t with error bars and the fitted (A1/t + A2)/(16 pi^2)."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for s, f, c in zip(series, fits, ("C0", "C3")):
        y = np.abs(s.value)
        ax.errorbar(s.t, y, yerr=s.stderr, fmt="o", ms=4, color=c, label=f"{s.operator} data")
        tt = np.geomspace(s.t[0], s.t[-1], 100)
        ax.plot(tt, np.abs(f.model(tt)), "-", color=c, lw=1,
                label=f"{s.operator} fit A1={f.A1:.4g}, A2={f.A2:.4g}")
    ax.set_xscale("log")
    if any(np.any(np.abs(s.value) > 0) for s in series):
        ax.set_yscale("log")
    ax.set_xlabel("proper time t")
    ax.set_ylabel("|Tr exp(-tM(B)) - Tr exp(-tM(0))|")
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    table = _table(series, fits)
    fig.savefig(path, format="svg", metadata={"Title": title or "subtracted heat traces",
                                              "Description": table, "Date": None})
    plt.close(fig)
    return table
