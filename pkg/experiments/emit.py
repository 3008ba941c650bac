"""
File emitters: CSV tables, scatter SVGs and the run manifest
"""
import hashlib
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from analysis.poincare import KamDiagram  # noqa: E402
from reservoir import __version__  # noqa: E402
from reservoir.errors import ReservoirError  # noqa: E402

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"

# Fixed salt keeps SVG element ids identical between runs
plt.rcParams["svg.hashsalt"] = "reservoir-kam"


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot create output directory {path}: {e}")
    return path


def write_csv(path: str, columns: Sequence[str], table: np.ndarray) -> str:
    """Header row, then one row per sample with 17 significant digits"""
    table = np.asarray(table, dtype=float).reshape(-1, len(columns))
    try:
        np.savetxt(path, table, fmt=CSV_FORMAT, delimiter=",", header=",".join(columns), comments="")
    except OSError as e:
        raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot write {path}: {e}")
    logger.debug(f"Wrote {table.shape[0]} rows to {path}")
    return path


def read_csv(path: str) -> Tuple[List[str], np.ndarray]:
    """(column names, rows) of a CSV written by write_csv"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            columns = f.readline().strip().split(",")
            body = f.read()
    except OSError as e:
        raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot read {path}: {e}")
    if not body.strip():
        return columns, np.empty((0, len(columns)))
    rows = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
    return columns, rows


def write_series_csv(path: str, series: np.ndarray, dt: float, names: Sequence[str], start: int = 0) -> str:
    """Time series (d x N) with a leading time column t = (start + k) dt"""
    series = np.atleast_2d(series)
    t = (start + np.arange(series.shape[1])) * dt
    return write_csv(path, ["t", *names], np.column_stack([t, series.T]))


def read_series_csv(path: str) -> Tuple[List[str], np.ndarray, float]:
    """(state names, d x N series, dt) from a time-series CSV"""
    columns, rows = read_csv(path)
    if not columns or columns[0] != "t":
        raise ReservoirError(ReservoirError.CONFIG_INVALID, f"{path} has no leading time column")
    dt = float(rows[1, 0] - rows[0, 0]) if rows.shape[0] > 1 else 1.0
    return columns[1:], rows[:, 1:].T, dt


def write_diagram_csv(path: str, diagram: KamDiagram, names: Sequence[str]) -> str:
    return write_csv(path, ["beta", "point_index", *names], diagram.rows())


def read_diagram_csv(path: str, source: str = "model") -> Tuple[List[str], KamDiagram]:
    columns, rows = read_csv(path)
    if columns[:2] != ["beta", "point_index"]:
        raise ReservoirError(ReservoirError.CONFIG_INVALID, f"{path} is not a diagram table")
    return columns[2:], KamDiagram.from_rows(source, rows)


def scatter_svg(
    path: str,
    panels: Sequence[Tuple[str, Dict[float, np.ndarray]]],
    viewport: Tuple[float, float, float, float],
    axis_names: Tuple[str, str],
) -> str:
    """One scatter panel per (title, {beta: n x 2 points}) with a fixed viewport and one color per beta"""
    fig, axes = plt.subplots(1, len(panels), figsize=(5 * len(panels), 5), squeeze=False)
    cycle = plt.get_cmap("tab20")
    for ax, (title, groups) in zip(axes[0], panels):
        for index, (beta, points) in enumerate(groups.items()):
            if len(points) == 0:
                continue
            ax.scatter(points[:, 0], points[:, 1], s=0.5, color=cycle(index % cycle.N), label=f"{beta:.4g}", rasterized=False)
        ax.set_xlim(viewport[0], viewport[1])
        ax.set_ylim(viewport[2], viewport[3])
        ax.set_xlabel(axis_names[0])
        ax.set_ylabel(axis_names[1])
        ax.set_title(title)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot write {path}: {e}")
    finally:
        plt.close(fig)
    logger.debug(f"Wrote scatter plot {path}")
    return path


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def strict_json(value: Any) -> Any:
    """Copy of value with NaN and infinities replaced by None and numpy scalars unwrapped"""
    if isinstance(value, dict):
        return {key: strict_json(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [strict_json(item) for item in value]
    if isinstance(value, np.ndarray):
        return strict_json(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def write_json(path: str, data: Any) -> str:
    """Strict JSON document: non-finite numbers are written as null"""
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(strict_json(data), f, indent=2, ensure_ascii=False, allow_nan=False)
    except OSError as e:
        raise ReservoirError(ReservoirError.IO_FAILURE, f"cannot write {path}: {e}")
    return path


def write_manifest(
    out_dir: str,
    command: str,
    config: Optional[Dict[str, Any]],
    files: Iterable[str],
    entries: Optional[List[Dict[str, Any]]] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> str:
    """Merge per-worker results into manifest.json; called once after all workers finish"""
    path = os.path.join(out_dir, MANIFEST_NAME)
    manifest = {
        "command": command,
        "version": __version__,
        "created_at": datetime.now().isoformat(),
        "config": config,
        "files": {os.path.relpath(f, out_dir): sha256_file(f) for f in sorted(set(files))},
        "entries": entries or [],
    }
    if extra:
        manifest.update(extra)
    write_json(path, manifest)
    logger.info(f"Wrote manifest with {len(manifest['files'])} files to {path}")
    return path
