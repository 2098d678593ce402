"""Diagnostic figures written next to the CSV output.

Figures are built on bare :class:`matplotlib.figure.Figure` objects, so no
pyplot state or interactive backend is involved and the functions are safe
to call from batch jobs.  Every figure is a view of a CSV the caller already
wrote; the CSV stays the primary record.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
WIDTH = 7.0  # inches

RC = {
    "font.size": 8,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _figure(nrows=1, ncols=1, height_scale=1.0):
    fig = Figure(figsize=(WIDTH, WIDTH * GOLDEN * height_scale), layout="constrained")
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    fig.savefig(path)
    return path


def _col(columns, rows, name):
    j = list(columns).index(name)
    return np.array([np.nan if r[j] is None else r[j] for r in rows], dtype=float)


def plot_timeseries(columns, rows, path, title: str = "") -> Path:
    """Energies, residual, cone margin and the two energy derivatives against time."""
    with mpl.rc_context(RC):
        fig, ax = _figure(2, 2, height_scale=1.2)
        t = _col(columns, rows, "t")
        a = ax[0, 0]
        a.plot(t, _col(columns, rows, "E"), color="C0")
        a.axhline(1.0 / 3.0, color="k", ls=":", lw=0.8)
        a.set_xlabel("t")
        a.set_ylabel(r"$\mathcal{E}$ (dotted: 1/3)", color="C0")
        b = a.twinx()
        b.plot(t, _col(columns, rows, "Eeps"), color="C1")
        b.set_ylabel(r"$\mathcal{E}_\varepsilon$", color="C1")
        b.grid(False)
        a = ax[0, 1]
        res = _col(columns, rows, "residual")
        a.semilogy(t, np.where(res > 0, res, np.nan))
        a.set_xlabel("t")
        a.set_ylabel("sup residual")
        a = ax[1, 0]
        a.plot(t, _col(columns, rows, "min_sigma1W"))
        a.set_xlabel("t")
        a.set_ylabel(r"min $\sigma_1(W)$")
        a = ax[1, 1]
        a.plot(t, _col(columns, rows, "dEeps_dt_formula"), label="formula")
        a.plot(t, _col(columns, rows, "dEeps_dt_numeric"), ls="--", label="difference quotient")
        a.set_xlabel("t")
        a.set_ylabel(r"$d\mathcal{E}_\varepsilon/dt$")
        a.legend()
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_sweep(rows, path) -> Path:
    """Converged energies and the eps-dependent upper bound against eps."""
    with mpl.rc_context(RC):
        fig, ax = _figure()
        a = ax[0, 0]
        eps = np.array([r["eps"] for r in rows], dtype=float)
        get = lambda k: np.array([np.nan if r[k] is None else r[k] for r in rows], dtype=float)
        a.plot(eps, get("E"), "o-", label=r"$\mathcal{E}$")
        a.plot(eps, get("Eeps"), "s-", label=r"$\mathcal{E}_\varepsilon$")
        a.plot(eps, get("lemma6_bound"), "^--", label="bound")
        a.axhline(1.0 / 3.0, color="k", ls=":", lw=0.8)
        for r in rows:
            if r["verdict"] != "Converged":
                a.annotate(r["verdict"], (r["eps"], 1.0 / 3.0), fontsize=6, rotation=90,
                           va="bottom", ha="center")
        a.set_xscale("log")
        a.set_xlabel(r"$\varepsilon$")
        a.legend()
        return _save(fig, path)


def plot_audit(samples, path) -> Path:
    """Energy histogram and the two sides of the traceless Ricci inequality."""
    with mpl.rc_context(RC):
        fig, ax = _figure(1, 2, height_scale=0.7)
        E = np.array([s["E"] for s in samples], dtype=float)
        a = ax[0, 0]
        a.hist(E, bins=20)
        a.axvline(1.0 / 3.0, color="k", ls=":", lw=0.8)
        a.set_xlabel(r"$\mathcal{E}$")
        a.set_ylabel("samples")
        a = ax[0, 1]
        lhs = np.array([s["dlt_lhs"] for s in samples], dtype=float)
        rhs = np.array([s["dlt_rhs"] for s in samples], dtype=float)
        a.scatter(rhs, lhs, s=6)
        top = max(float(np.max(rhs, initial=0.0)), float(np.max(lhs, initial=0.0)), 1e-12)
        a.plot([0, top], [0, top], "k:", lw=0.8)
        a.set_xlabel("right side")
        a.set_ylabel("left side")
        return _save(fig, path)


def plot_refine(rows, path) -> Path:
    """Oracle disagreement against grid size with an ``h^2`` guide line."""
    with mpl.rc_context(RC):
        fig, ax = _figure(height_scale=0.8)
        a = ax[0, 0]
        n = np.array([r["n_cells"] for r in rows], dtype=float)
        for key, label in (("err_sigma1", r"$\sigma_1$"), ("err_sigma2", r"$\sigma_2$")):
            a.loglog(n, [r[key] for r in rows], "o-", label=label)
        e0 = rows[0]["err"]
        a.loglog(n, e0 * (n[0] / n) ** 2, "k:", lw=0.8, label=r"$h^2$")
        a.set_xlabel("cells")
        a.set_ylabel("max relative gap")
        a.legend()
        return _save(fig, path)
