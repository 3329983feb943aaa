"""Optional SVG charts; matplotlib is imported only when a chart is requested."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "strata"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> None:
    # no timestamp metadata so reruns give identical bytes
    fig.savefig(path, format="svg", metadata={"Date": None})


def drift_scatter(counts: Sequence[int], distances: Sequence[float], path: Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter([max(c, 1) for c in counts], distances, s=4, alpha=0.5)
    ax.set_xscale("log")
    ax.set_xlabel("training count")
    ax.set_ylabel("L2 distance, pre vs post training")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def sweep_line(ns: Sequence[int], f1s: Sequence[float], mode: str, path: Path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ns, f1s, marker="o")
    ax.set_xscale("log", base=2)
    ax.set_xlabel(f"top-n cutoff ({mode})")
    ax.set_ylabel("F1 under 5-same attack")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
