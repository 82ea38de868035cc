"""Figure rendering for run artifacts.

Static vector graphics (SVG) generated from the stored histories: state
trajectories, the auxiliary-system phase portrait, and the control input
against the disturbance it rejects.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

plt.rcParams["svg.hashsalt"] = "assosm"


def _decimate(result, max_points=4000):
    stride = max(1, result.t.size // max_points)
    return slice(None, None, stride)


def plot_states(result, ax=None):
    if ax is None:
        _, ax = plt.subplots()
    sl = _decimate(result)
    for i in range(result.x.shape[1]):
        ax.plot(result.t[sl], result.x[sl, i], label=f"$x_{{{i + 1}}}$", lw=1.0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("state")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    return ax


def plot_phase(result, ax=None):
    if ax is None:
        _, ax = plt.subplots()
    sl = _decimate(result)
    ax.plot(result.sigma[sl], result.s2_hat[sl], lw=0.8)
    ax.plot([result.sigma[0]], [result.s2_hat[0]], "o", ms=4, label="start")
    ax.plot([0], [0], "k*", ms=8, label="origin")
    ax.set_xlabel(r"$\sigma$")
    ax.set_ylabel(r"$\hat{\dot\sigma}$")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    return ax


def plot_input(result, ax=None):
    if ax is None:
        _, ax = plt.subplots()
    sl = _decimate(result)
    ax.plot(result.t[sl], result.u[sl], label="$u$", lw=1.0)
    ax.plot(result.t[sl], result.d[sl], label="$d$", lw=1.0, ls="--")
    ax.set_xlabel("time [s]")
    ax.legend(loc="best")
    ax.grid(alpha=0.3)
    return ax


def plot_gain(result, ax=None):
    if ax is None:
        _, ax = plt.subplots()
    sl = _decimate(result)
    ax.plot(result.t[sl], result.upsilon[sl], lw=1.0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel(r"$\Upsilon_{ad}$")
    ax.grid(alpha=0.3)
    return ax


def render_run(result, out_dir: str) -> list:
    """Save the standard figure set next to the CSV output."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, fn in (
        ("states", plot_states),
        ("phase", plot_phase),
        ("input", plot_input),
        ("gain", plot_gain),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        fn(result, ax)
        fig.tight_layout()
        path = os.path.join(out_dir, f"{name}.svg")
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths
