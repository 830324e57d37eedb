"""PNG figures written next to the CSV outputs of the command-line tool."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_fields(coords: np.ndarray, fields: np.ndarray, path, obs=None, max_paths: int = 20,
                title: str = "") -> Path:
    """Sample paths on a 1-d grid (log scale), or the first field on a 2-d grid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if coords.shape[1] == 1:
        x = coords[:, 0]
        order = np.argsort(x)
        for row in fields[:max_paths]:
            ax.plot(x[order], row[order], lw=0.8, alpha=0.7)
        if fields.shape[0] > max_paths:
            lo, mid, hi = np.quantile(fields, [0.05, 0.5, 0.95], axis=0)
            ax.fill_between(x[order], lo[order], hi[order], color="0.8", alpha=0.5, label="5-95%")
            ax.plot(x[order], mid[order], "k--", lw=1, label="median")
        if obs is not None:
            ax.plot(coords[obs.ids, 0], obs.y, "ro", label="observed")
        ax.set_yscale("log")
        ax.set_xlabel("site")
        ax.set_ylabel("value")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=8)
    else:
        sc = ax.scatter(coords[:, 0], coords[:, 1], c=np.log(np.maximum(fields[0], 1e-300)), s=40)
        fig.colorbar(sc, ax=ax, label="log value (replicate 0)")
        if obs is not None:
            ax.scatter(coords[obs.ids, 0], coords[obs.ids, 1], marker="x", c="r", s=60)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_title(title)
    return _save(fig, Path(path))


def plot_posterior(table, path) -> Path:
    labels = [r[0] for r in table]
    pis = [r[2] for r in table]
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * len(labels) + 2), 3.5))
    ax.bar(range(len(pis)), pis, color="tab:blue")
    ax.set_xticks(range(len(pis)))
    ax.set_xticklabels(labels, rotation=90 if len(labels) > 8 else 0, fontsize=8)
    ax.set_ylabel("posterior probability")
    ax.set_xlabel("partition (restricted-growth string)")
    return _save(fig, Path(path))


def plot_cdf(rows, path) -> Path:
    """rows: (site_id, z, cdf, se); one curve per site."""
    rows = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for sid in np.unique(rows[:, 0]):
        r = rows[rows[:, 0] == sid]
        r = r[np.argsort(r[:, 1])]
        ax.errorbar(r[:, 1], r[:, 2], yerr=3 * r[:, 3], marker="o", ms=3, label=f"site {int(sid)}")
    ax.set_xscale("log")
    ax.set_xlabel("z")
    ax.set_ylabel("conditional CDF")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    return _save(fig, Path(path))


def plot_validation_curves(curves: dict, outdir) -> list[Path]:
    """Conditional CDF against the sampler and band-oracle estimates."""
    out = []
    for tag, rows in sorted(curves.items()):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(rows[:, 0], rows[:, 1], "k-o", ms=3, label="conditional CDF")
        ax.plot(rows[:, 0], rows[:, 2], "s", ms=4, mfc="none", label="sampler")
        ax.plot(rows[:, 0], rows[:, 3], "^", ms=4, mfc="none", label="band oracle")
        ax.set_xlabel("z")
        ax.set_ylabel("P(eta(s) < z | data)")
        ax.set_title(tag)
        ax.legend(fontsize=8)
        out.append(_save(fig, Path(outdir) / f"{tag.replace('.', '_')}.png"))
    return out
