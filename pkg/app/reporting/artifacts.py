"""Run directory writers: CSV tables, plots, report text and the manifest."""
import hashlib
import json
import logging
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from app.core.config import settings  # noqa: E402
from app.core.reports import CheckReport  # noqa: E402
from app.evolution.stepper import Trajectory  # noqa: E402
from app.kernels.builders import Kernel  # noqa: E402

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class RunDirectory:
    """Collects the artifacts of one experiment under a single directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.artifacts: List[Path] = []

    def path(self, name: str) -> Path:
        return self.root / name

    def _track(self, path: Path) -> Path:
        if path not in self.artifacts:
            self.artifacts.append(path)
        return path

    def write_table(self, name: str, rows: Sequence[Dict[str, Any]]) -> Path:
        return self._track(write_csv(self.path(name), rows))

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.path(name)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return self._track(path)

    def write_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        path.write_text(text, encoding="utf-8")
        return self._track(path)

    def track(self, path: Path) -> Path:
        return self._track(Path(path))


def write_csv(path: Path, rows: Sequence[Dict[str, Any]]) -> Path:
    """Rows of scalars to CSV with a header row and full float precision."""
    frame = pd.DataFrame(list(rows))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return Path(path)


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """Long format: one row per (snapshot, cell) with coordinates and u."""
    grid = traj.grid
    coords = [c.ravel() for c in grid.mesh()]
    frames = []
    for t, snap in zip(traj.times, traj.snapshots):
        data = {"t": np.full(grid.size, t)}
        for axis, c in enumerate(coords):
            data[f"x{axis}"] = c
        data["u"] = snap.values.ravel()
        frames.append(pd.DataFrame(data))
    return pd.concat(frames, ignore_index=True)


def export_kernel_csv(kernel: Kernel, path: Path) -> Path:
    """Cell center (lag) coordinates and density value of every nonzero weight."""
    mask = kernel.weights != 0
    data = {f"y{axis}": lag[mask] for axis, lag in enumerate(kernel.grid.lag_mesh())}
    data["density"] = kernel.density[mask]
    pd.DataFrame(data).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return Path(path)


def report_text(title: str, reports: Iterable[CheckReport], notes: Optional[List[str]] = None) -> str:
    lines = [title, "=" * len(title)]
    for report in reports:
        lines.append(report.to_text())
    for note in notes or []:
        lines.append(note)
    return "\n".join(lines) + "\n"


def plot_trajectory(traj: Trajectory, path: Path, max_curves: int = 8) -> Path:
    """Curves of u at evenly picked snapshots (1D) or a raster of the last one (2D)."""
    grid = traj.grid
    fig, ax = plt.subplots(figsize=(7, 4))
    if grid.dims == 1:
        picks = np.unique(np.linspace(0, len(traj.snapshots) - 1, max_curves).astype(int))
        for i in picks:
            ax.plot(grid.centers(0), traj.snapshots[i].values, lw=1, label=f"t={traj.times[i]:g}")
        ax.set_xlabel("x")
        ax.set_ylabel("u")
        ax.legend(fontsize=7)
    else:
        half = [e / 2 for e in grid.extent]
        img = ax.imshow(traj.final.values.T, origin="lower", extent=(-half[0], half[0], -half[1], half[1]))
        fig.colorbar(img, ax=ax)
        ax.set_title(f"u at t={traj.times[-1]:g}")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_series(rows: Sequence[Dict[str, Any]], x: str, ys: Sequence[str], path: Path, title: str = "") -> Path:
    frame = pd.DataFrame(list(rows))
    fig, ax = plt.subplots(figsize=(6, 4))
    for y in ys:
        if y in frame:
            ax.plot(frame[x], frame[y], marker=".", lw=1, label=y)
    ax.set_xlabel(x)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_polygon(vertices: np.ndarray, drift: Sequence[float], path: Path) -> Path:
    """Outline of the sampled spreading set with the drift point marked."""
    fig, ax = plt.subplots(figsize=(5, 5))
    if len(vertices):
        closed = np.vstack([vertices, vertices[:1]])
        ax.plot(closed[:, 0], closed[:, 1], "-o", ms=3)
    ax.plot([drift[0]], [drift[1] if len(drift) > 1 else 0.0], "r*", ms=10)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    run: RunDirectory,
    config: Dict[str, Any],
    exit_status: int,
    seed: int,
    error: Optional[str] = None,
) -> Path:
    """
    Resolved config, versions, thread count, seed, exit status and checksums.

    Written last so it covers every artifact produced before it.
    """
    manifest = {
        "app": settings.app_name,
        "app_version": settings.app_version,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": settings.max_workers,
        "seed": seed,
        "exit_status": exit_status,
        "created": datetime.now(timezone.utc).isoformat(),
        "config": config,
        "checksums": {p.name: sha256_of(p) for p in run.artifacts if p.exists()},
    }
    if error:
        manifest["error"] = error
    path = run.path("manifest.json")
    path.write_text(json.dumps(manifest, indent=2, default=str), encoding="utf-8")
    logger.info(f"Manifest written to {path} ({len(manifest['checksums'])} artifacts)")
    return path
