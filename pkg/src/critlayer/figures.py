"""Figure rendering for report and field outputs.

Every CSV the CLI writes gets a companion PNG: log-log exponent-fit panels
for the verification tables, and field heatmaps/wall-normal profiles for the
synthesized packets.  Rendering is headless (Agg) and deterministic.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.markersize": 4,
})

_STATUS_COLORS = {"PASS": "tab:green", "FAIL": "tab:red", "KNOWN-DEFECT": "tab:orange", "INFO": "tab:gray"}


def fit_panels(case, beta, samples, rows, out_path):
    """One figure per regime: every swept quantity with its fit line.

    samples: the case_report raw sweep dict; rows: its ReportRow list.
    """
    sc = samples.get("scalar", {})
    fs = samples.get("field", {})
    panels = []
    if sc:
        eps = np.asarray(sc["eps"])
        for name, vals in sc["lam"].items():
            panels.append((f"|lam| {name}", eps, np.asarray(vals)))
        panels.append(("|det M|", eps, np.asarray(sc["det"])))
        for name, vals in sc["a"].items():
            panels.append((f"|a| {name}", eps, np.asarray(vals)))
        panels.append(("|B| fast layer", eps, np.asarray(sc["b5"])))
        if sc["re_lam2"] and all(v > 0 for v in sc["re_lam2"]):
            panels.append(("Re lam slow layer", eps, np.asarray(sc["re_lam2"])))
    if fs:
        eps = np.asarray(fs["eps"])
        for name, vals in fs["packet_linf"].items():
            panels.append((f"Linf {name}", eps, np.asarray(vals)))
        for name, vals in fs["packet_l2"].items():
            panels.append((f"L2 {name}", eps, np.asarray(vals)))
        panels.append(("Linf incident", eps, np.asarray(fs["incident_linf"])))
        panels.append(("L2 incident", eps, np.asarray(fs["incident_l2"])))
        panels.append(("L2 defect", eps, np.asarray(fs["residual_l2"])))
    if not panels:
        return None

    ncol = 4
    nrow = math.ceil(len(panels) / ncol)
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.2 * ncol, 2.6 * nrow), squeeze=False)
    for ax in axes.ravel()[len(panels):]:
        ax.set_axis_off()
    for ax, (title, eps, vals) in zip(axes.ravel(), panels):
        ax.loglog(eps, vals, "o", color="tab:blue")
        if np.all(vals > 0):
            slope, intercept = np.polyfit(np.log(eps), np.log(vals), 1)
            ax.loglog(eps, np.exp(intercept) * eps**slope, "-", color="tab:blue", alpha=0.7)
            title = f"{title}  (slope {slope:+.2f})"
        ax.set_title(title, fontsize=8)
        ax.set_xlabel("eps")
    fig.suptitle(f"case {case}, beta = {beta:g}")
    fig.tight_layout(rect=(0, 0, 1, 0.97))
    fig.savefig(out_path)
    plt.close(fig)
    return Path(out_path)


def comparison_chart(rows, out_path):
    """Predicted vs fitted exponents for every gated row, colored by status."""
    fitted_rows = [r for r in rows if r.tol > 0]
    if not fitted_rows:
        return None
    n = len(fitted_rows)
    fig, ax = plt.subplots(figsize=(8, 0.28 * n + 1.2))
    ypos = np.arange(n)
    for i, r in enumerate(fitted_rows):
        ax.plot([r.predicted - r.tol, r.predicted + r.tol], [i, i], "-", color="0.75", lw=5, zorder=1)
        ax.plot(r.predicted, i, "k|", ms=10, zorder=2)
        ax.plot(r.fitted, i, "o", color=_STATUS_COLORS.get(r.status, "k"), zorder=3)
    ax.set_yticks(ypos)
    ax.set_yticklabels([f"C{r.case} b={r.beta:g} {r.table}/{r.label}" for r in fitted_rows], fontsize=6)
    ax.set_xlabel("exponent (bar: predicted +/- tol; dot: fitted)")
    ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return Path(out_path)


def field_figure(field, name, out_path, component="u", log_y=True):
    """Heatmap of |component| over (x, y) plus the wall-normal profile at x=0."""
    x = np.asarray(field.grid.x)
    y = np.asarray(field.grid.y)
    z = np.abs(field.component(component))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ypl = y.copy()
    if log_y:
        positive = ypl > 0
        ypl = np.where(positive, ypl, ypl[positive].min() / 2 if positive.any() else 1e-12)
    pc = ax1.pcolormesh(x, ypl, z.T, shading="nearest", cmap="viridis")
    if log_y:
        ax1.set_yscale("log")
    fig.colorbar(pc, ax=ax1, label=f"|{component}|")
    ax1.set_xlabel("x")
    ax1.set_ylabel("y")
    ax1.set_title(f"{name}: |{component}|")
    prof = z[0, :]
    mask = (y > 0) & (prof > 0)
    if mask.any():
        ax2.loglog(y[mask], prof[mask], "-")
    ax2.set_xlabel("y")
    ax2.set_ylabel(f"|{component}|(x=0, y)")
    ax2.set_title("wall-normal profile")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return Path(out_path)
