"""Matplotlib renderings of report outputs.

Every report command writes delimited data first; these helpers render the
same tables as PNG files next to them. The Agg backend keeps rendering
headless and deterministic.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 130


def _finish(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_fit_curves(rows, path) -> Path:
    """Objective, residual RMS and RKHS norm against lambda (log x-axis)."""
    lams = [r["lambda"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.2))
    axes[0].plot(lams, [r["objective"] for r in rows], "o-", label="J")
    axes[0].plot(lams, [r["residual_rms"] for r in rows], "s--", label="residual RMS")
    axes[0].set_xscale("log")
    axes[0].set_xlabel("lambda")
    axes[0].legend(frameon=False)
    norms = [r["rkhs_norm_sq"] for r in rows]
    axes[1].plot(lams, norms, "o-", color="tab:green")
    axes[1].set_xscale("log")
    if any(v > 0 for v in norms):
        axes[1].set_yscale("log")
    axes[1].set_xlabel("lambda")
    axes[1].set_ylabel("||f||_H^2")
    return _finish(fig, path)


def save_objective_path(traces, path) -> Path:
    """J along each optimizer trace (one line per run)."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, objs in traces:
        ax.plot(range(len(objs)), objs, marker=".", label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("J")
    if len(traces) <= 8:
        ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)


def save_beta_path(points, path) -> Path:
    """Coordinate trajectories of a single optimizer trace."""
    arr = np.asarray(points)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for k in range(arr.shape[1]):
        ax.plot(range(arr.shape[0]), arr[:, k], marker=".", label=f"x{k + 1}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("beta")
    if arr.shape[1] <= 10:
        ax.legend(frameon=False, fontsize=8, ncol=2)
    return _finish(fig, path)


def save_fd_sweep(rows, path) -> Path:
    """Finite-difference relative error against step size, per probe."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    by_probe: dict[str, list] = {}
    for r in rows:
        by_probe.setdefault(r["probe"], []).append((r["step"], r["rel_err"]))
    for probe, pts in by_probe.items():
        pts.sort()
        ax.loglog([p[0] for p in pts], [max(p[1], 1e-18) for p in pts], "o-", label=probe)
    ax.set_xlabel("step")
    ax.set_ylabel("relative error")
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)


def save_gap_scaling(rows, path) -> Path:
    """|lambda DJ + M| against lambda with a sqrt(lambda) guide line."""
    lams = np.array([r[0] for r in rows])
    gaps = np.array([max(abs(r[1]), 1e-18) for r in rows])
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.loglog(lams, gaps, "o-", label="|gap|")
    guide = gaps[0] * np.sqrt(lams / lams[0])
    ax.loglog(lams, guide, "--", color="gray", label="sqrt(lambda)")
    ax.set_xlabel("lambda")
    ax.set_ylabel("|lambda DJ + M|")
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)
