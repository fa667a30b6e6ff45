"""Figures written next to the CSV/JSON reports (non-interactive Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 3.6),
    "figure.dpi": 110,
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def residual_history(history, path, title="Newton residual"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(np.arange(len(history)), np.maximum(history, 1e-300), "o-")
        ax.set_xlabel("iteration")
        ax.set_ylabel(r"$\sup|F_k(u)-f|$")
        ax.set_title(title)
        return _save(fig, path)


def time_slice(values, x, path, title):
    """Heat map of a 2-d cut (first two spatial axes, others at index 0)."""
    v = np.asarray(values)
    if v.ndim > 2:
        title = f"{title} (x3..x{v.ndim} = 0)"
    while v.ndim > 2:
        v = v[..., 0]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if v.ndim == 1:
            ax.plot(x, v)
            ax.set_xlabel("$x_1$")
        else:
            im = ax.imshow(v.T, origin="lower", extent=(x[0], x[-1], x[0], x[-1]), aspect="equal", cmap="viridis")
            fig.colorbar(im, ax=ax)
            ax.set_xlabel("$x_1$")
            ax.set_ylabel("$x_2$")
            ax.grid(False)
        ax.set_title(title)
        return _save(fig, path)


def sweep(schedule, cauchy, sup_utt, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        s = np.asarray(schedule)
        if len(cauchy):
            ax.loglog(s[1:], cauchy, "o-", label=r"$\sup|u^{s}-u^{2s}|$")
        ax.loglog(s, sup_utt, "s--", label=r"$\sup u_{tt}$")
        ax.invert_xaxis()
        ax.set_xlabel("$s$")
        ax.legend()
        ax.set_title("degenerate sweep")
        return _save(fig, path)


def certification(rows, path):
    """Worst interlacing slack per (n, k); ``rows`` are dicts with n, k, interlace."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = [f"{r['n']},{r['k']}" for r in rows]
        vals = [max(float(r["interlace"]), 1e-16) for r in rows]
        ax.bar(np.arange(len(rows)), vals, color="0.4")
        ax.set_yscale("log")
        ax.set_xticks(np.arange(len(rows)), labels, rotation=90)
        ax.set_xlabel("(n, k)")
        ax.set_ylabel("worst interlacing gap")
        ax.set_title("certification campaign")
        return _save(fig, path)


def refinement(reports, path):
    keys = ("sup_grad", "sup_utt", "sup_hess", "sup_grad_ut")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        N = [r.N for r in reports]
        for key in keys:
            ax.plot(N, [getattr(r, key) for r in reports], "o-", label=key)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("N")
        ax.legend()
        ax.set_title("suprema under refinement")
        return _save(fig, path)
