"""Static SVG figures for sweeps: profile overlays, heat maps and slope convergence."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import FreeBoundaryReport  # noqa: E402
from .grid import ScalarField  # noqa: E402

# fixed ids and no timestamp so repeated runs give identical files
plt.rcParams["svg.hashsalt"] = "pxflame"
plt.rcParams["svg.fonttype"] = "none"
plt.rcParams["path.simplify"] = False
_META = {"Date": None, "Creator": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def profile_overlay(fields: list[tuple[float, ScalarField]], path, oracle: ScalarField | None = None,
                    max_points: int = 2000):
    """One line per eps and an optional dashed oracle profile (1D only). Returns (path, axes)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for eps, u in fields:
        x, v = _thin(u, max_points)
        ax.plot(x, v, lw=1.0, label=f"eps={eps:g}")
    if oracle is not None:
        x, v = _thin(oracle, max_points)
        ax.plot(x, v, "k--", lw=1.0, label="oracle")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend(fontsize=7)
    return _save(fig, path), ax


def _thin(u: ScalarField, max_points: int):
    x = u.grid.axes[0]
    step = max(1, x.size // max_points)
    idx = np.unique(np.concatenate([np.arange(0, x.size, step), [x.size - 1]]))
    return x[idx], u.values[idx]


def heat_map(u: ScalarField, report: FreeBoundaryReport | None, path):
    """Solution colour map with the free boundary polyline and per-point slope error."""
    grid = u.grid
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    X, Y = grid.axes
    mesh = ax.pcolormesh(X, Y, u.values.T, shading="nearest", cmap="viridis", rasterized=False)
    fig.colorbar(mesh, ax=ax, label="u")
    if report is not None and len(report):
        for c in report.curves:
            ax.plot(c[:, 0], c[:, 1], color="white", lw=0.8)
        pos = report.positions
        err = report.rel_errors
        if np.all(np.isfinite(err)):
            sc = ax.scatter(pos[:, 0], pos[:, 1], c=err, s=4, cmap="magma")
            fig.colorbar(sc, ax=ax, label="relative slope error")
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    return _save(fig, path), ax


def slope_convergence(eps: list[float], slopes: list[float], reference: float | None, path):
    """Mean free-boundary slope against eps with the limit slope as a reference line."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    e = np.asarray(eps, dtype=float)
    s = np.asarray(slopes, dtype=float)
    ok = np.isfinite(s)
    ax.semilogx(e[ok], s[ok], "o-", label="mean slope")
    if reference is not None and np.isfinite(reference):
        ax.axhline(reference, color="k", ls=":", label="limit slope")
        lo, hi = ax.get_ylim()
        ax.set_ylim(min(lo, reference - 0.05 * abs(reference)), max(hi, reference + 0.05 * abs(reference)))
    ax.invert_xaxis()
    ax.set_xlabel("eps")
    ax.set_ylabel("|grad u| on the free boundary")
    ax.legend(fontsize=8)
    return _save(fig, path), ax
