"""Run artifacts: density CSVs, figures, key=value summaries, hash manifests.

Every writer here is deterministic for a fixed estimate: floats are
serialized with repr (exact round-trip), figures render through the Agg
backend at fixed size and dpi, and the manifest hashes whatever the run
produced so a replay can verify byte identity.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fokker import (
    MarginalEstimate,
    analytic_moments,
    marginal_mode,
    probability_interval,
    tabulate_and_repair,
)

__all__ = [
    "density_table",
    "export_density_csv",
    "write_summary",
    "summarize_marginals",
    "render_density_figure",
    "render_trace_figure",
    "write_manifest",
    "read_manifest",
    "hash_file",
]

_FIG_DPI = 110


def density_table(est: MarginalEstimate, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid, pdf, and cdf columns for coordinate n of a finished estimate.

    The cdf is the repaired table; the pdf column is its finite-difference
    derivative (centered inside, one-sided at the ends) so the emitted
    curve is a valid density: non-negative and trapezoid-integrating to
    exactly cdf[-1] - cdf[0] = 1.
    """
    table = tabulate_and_repair(est.expansion(n), est.table_size)
    grid, cdf = table.grid, table.values
    dx = grid[1] - grid[0]
    pdf = np.empty_like(cdf)
    pdf[0] = (cdf[1] - cdf[0]) / dx
    pdf[-1] = (cdf[-1] - cdf[-2]) / dx
    pdf[1:-1] = (cdf[2:] - cdf[:-2]) / (2.0 * dx)
    return grid, pdf, cdf


def export_density_csv(est: MarginalEstimate, out_dir, stem: str = "density") -> list[Path]:
    """Write one x,pdf,cdf file per variable; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for n in range(est.dimension):
        grid, pdf, cdf = density_table(est, n)
        path = out_dir / f"{stem}_x{n}.csv"
        lines = ["x,pdf,cdf"]
        lines += [
            f"{x!r},{p!r},{c!r}"
            for x, p, c in zip(grid.tolist(), pdf.tolist(), cdf.tolist())
        ]
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
        paths.append(path)
    return paths


def write_summary(path, entries: Sequence[tuple[str, object]]) -> Path:
    """Flat key = value text file; floats via repr, vectors as space-joined repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, value in entries:
        if isinstance(value, (float, np.floating)):
            text = repr(float(value))
        elif isinstance(value, (np.ndarray, list, tuple)):
            text = " ".join(
                repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                for v in np.asarray(value).ravel()
            )
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def summarize_marginals(est: MarginalEstimate, mass: float = 0.95) -> list[tuple[str, object]]:
    """Per-variable mode, sigma, and interval rows for the summary file."""
    rows: list[tuple[str, object]] = []
    for n in range(est.dimension):
        lo, hi = est.bounds[n]
        mode = marginal_mode(est, n)
        mean, sigma = analytic_moments(est, n)
        int_lo, int_hi = probability_interval(est, n, mass)
        rows += [
            (f"var{n}.mode", mode),
            (f"var{n}.mean", mean),
            (f"var{n}.sigma", sigma),
            (f"var{n}.interval_lo", int_lo),
            (f"var{n}.interval_hi", int_hi),
            (f"var{n}.interval_norm", (int_hi - int_lo) / (hi - lo)),
        ]
    return rows


def render_density_figure(est: MarginalEstimate, path, title: str, mass: float = 0.95) -> Path:
    """Small-multiple pdf panels, one per variable, with the HDI shaded."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_var = est.dimension
    n_cols = min(n_var, 5)
    n_rows = (n_var + n_cols - 1) // n_cols
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(3.2 * n_cols, 2.4 * n_rows), squeeze=False
    )
    for n in range(n_var):
        ax = axes[n // n_cols][n % n_cols]
        grid, pdf, _ = density_table(est, n)
        int_lo, int_hi = probability_interval(est, n, mass)
        ax.plot(grid, pdf, lw=1.2, color="#1f5f8b")
        ax.axvspan(int_lo, int_hi, color="#1f5f8b", alpha=0.15, lw=0)
        ax.axvline(marginal_mode(est, n), color="#c0392b", lw=0.9, ls="--")
        ax.set_title(f"x{n}", fontsize=9)
        ax.tick_params(labelsize=7)
    for k in range(n_var, n_rows * n_cols):
        axes[k // n_cols][k % n_cols].axis("off")
    fig.suptitle(title, fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)
    return path


def render_trace_figure(trace: Iterable[tuple[int, float, int]], path, title: str) -> Path:
    """Best objective value against hybrid iteration."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(trace)
    iters = [r[0] for r in rows]
    values = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(iters, values, marker="o", ms=3, lw=1.2, color="#1f5f8b")
    if min(values) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("best cost")
    ax.set_title(title, fontsize=11)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# Manifest


def hash_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, name: str = "manifest.txt") -> Path:
    """Hash every file under out_dir (except the manifest itself)."""
    out_dir = Path(out_dir)
    records = []
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != name:
            records.append(f"{hash_file(path)}  {path.relative_to(out_dir).as_posix()}")
    manifest = out_dir / name
    manifest.write_text("\n".join(records) + "\n", encoding="ascii")
    return manifest


def read_manifest(path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for line in Path(path).read_text(encoding="ascii").splitlines():
        if line.strip():
            digest, rel = line.split(None, 1)
            mapping[rel.strip()] = digest
    return mapping
