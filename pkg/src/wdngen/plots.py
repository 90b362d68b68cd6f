"""Diagnostic figures of a written dataset."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .pipeline import read_metadata, read_table, table_values  # noqa: E402

WHAT = ("demand-corr", "pressure-demand", "demand-ts")


def load_output(root: str | Path, output: str, junctions_only: bool = True) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Columns, values ``(rows, n)`` and scenario index of a node output table."""
    root = Path(root)
    meta = read_metadata(root)
    shards = sorted(root.glob(f"node_{output}_*_dynamic_output.*"), key=lambda p: int(p.stem.split("_")[-3]))
    cols, parts, scen = None, [], []
    for p in shards:
        t = read_table(p)
        cols, vals = table_values(t)
        parts.append(vals)
        scen.append(t.column("scenario").to_numpy())
    values = np.concatenate(parts)
    scenario = np.concatenate(scen)
    if junctions_only:
        keep = set(meta["onames"].get("junction", []))
        idx = [j for j, c in enumerate(cols) if c in keep]
        cols, values = [cols[j] for j in idx], values[:, idx]
    return cols, values, scenario


def scenario_correlation(values: np.ndarray, scenario: np.ndarray) -> np.ndarray:
    """Correlation between scenarios of their flattened demand matrices."""
    ids = np.unique(scenario)
    flat = np.array([values[scenario == s].ravel() for s in ids])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.corrcoef(flat)


def offdiag_mean(c: np.ndarray) -> float:
    mask = ~np.eye(c.shape[0], dtype=bool)
    return float(np.nanmean(c[mask]))


def plot(root: str | Path, what: str, out: str | Path | None = None) -> tuple[Path, dict]:
    """Render one diagnostic; returns the image path and summary numbers."""
    if what not in WHAT:
        raise ValueError(f"unknown plot {what!r}; choose from {WHAT}")
    root = Path(root)
    out = Path(out) if out else root / f"{what}.png"
    fig, ax = plt.subplots(figsize=(6, 5))
    info: dict = {}
    if what == "demand-corr":
        _, values, scen = load_output(root, "demand")
        c = scenario_correlation(values, scen)
        info["offdiag_mean"] = offdiag_mean(c)
        im = ax.imshow(c, vmin=-1, vmax=1, cmap="coolwarm")
        fig.colorbar(im, ax=ax)
        ax.set_title(f"scenario demand correlation (off-diagonal mean {info['offdiag_mean']:.3f})")
        ax.set_xlabel("scenario")
        ax.set_ylabel("scenario")
    elif what == "pressure-demand":
        _, demand, _ = load_output(root, "demand")
        _, pressure, _ = load_output(root, "pressure")
        ax.scatter(demand.ravel(), pressure.ravel(), s=2, alpha=0.3)
        ax.set_xlabel("demand (m3/s)")
        ax.set_ylabel("pressure (m)")
        info["points"] = int(demand.size)
    else:
        cols, demand, scen = load_output(root, "demand")
        first = demand[scen == scen[0]]
        for j in range(min(first.shape[1], 8)):
            ax.plot(first[:, j], label=cols[j], lw=1)
        ax.set_xlabel("step")
        ax.set_ylabel("demand (m3/s)")
        ax.legend(fontsize=6)
        info["series"] = min(first.shape[1], 8)
    fig.tight_layout()
    fig.savefig(out, dpi=100)
    plt.close(fig)
    return out, info
