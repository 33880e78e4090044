"""Figure rendering for the report commands.

Kept separate so the command line only pays the matplotlib import when
a figure is actually requested.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analysis import BREAKPOINT, SweepRow
from .engine import fl_success


def render_sweep(rows: list[SweepRow], path: str) -> None:
    """Halt distribution and regime boundary across the swept targets."""
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    for attr, style, label in (
        ("p_AB", "o-", "A-B Bell"),
        ("p_AC", "s-", "A-C Bell"),
        ("p_BC", "^-", "B-C at target"),
    ):
        xs = [r.t for r in rows if getattr(r, attr) is not None]
        ys = [getattr(r, attr) for r in rows if getattr(r, attr) is not None]
        ax.plot(xs, ys, style, ms=3.5, lw=1.2, label=label)
    ax.axvline(BREAKPOINT, color="0.4", lw=0.9, ls="--")
    ax.text(
        BREAKPOINT,
        1.015,
        "finite | unbounded",
        ha="center",
        va="bottom",
        fontsize=8,
        color="0.35",
    )
    ax.set_xlabel("target concurrence t")
    ax.set_ylabel("halt probability")
    ax.set_ylim(-0.02, 1.05)
    ax.grid(alpha=0.25, lw=0.5)
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_fl(epsilon: float, cycles: int, path: str) -> None:
    """Bell yield of the nibbling protocol against the pass count."""
    ns = list(range(cycles + 1))
    ys = [fl_success(epsilon, n) for n in ns]
    ceiling = (6.0 - 4.0 * epsilon) / (6.0 - 3.0 * epsilon)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(ns, ys, "o-", ms=3, lw=1.1, label=f"yield at eps={epsilon:g}")
    ax.axhline(ceiling, color="0.4", lw=0.9, ls="--", label="all-passes ceiling")
    ax.axhline(1.0 - epsilon, color="tab:red", lw=0.9, ls=":", label="1 - eps")
    ax.set_xlabel("passes")
    ax.set_ylabel("total Bell probability")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.25, lw=0.5)
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
