"""
CSV readers and writers for landmarks, fields, maps, controls and reports
"""

import csv
import io
import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np

from .. import __version__
from ..exceptions import ConfigError
from ..fields import Grid2, LandmarkSet, VectorField
from ..file import write_text_atomic
from ..flows import Diffeomorphism, FlowPath

logger = logging.getLogger(__name__)


def run_header(seed: int, command: str) -> str:
    """
    First line of every emitted CSV

    Example:
        >>> run_header(7, 'verify').startswith('# msdiffeo v')
        True
    """
    return f"# msdiffeo v{__version__} seed={seed} cmd={command}"


def format_value(value: Any) -> str:
    """Round-trip float formatting; other values as str"""
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_csv(data: List[Dict[str, Any]], file_path: str, fieldnames: Optional[List[str]] = None,
              header: Optional[str] = None) -> bool:
    """
    Write rows to a CSV file, optionally preceded by a comment line

    Args:
        data: List of dictionaries to write
        file_path: Path to output CSV file
        fieldnames: Column order (keys of the first row if None)
        header: Comment line written first, e.g. run_header(...)

    Returns:
        bool: True if successful, False otherwise

    Example:
        >>> write_csv([{'check': 'A1', 'status': 'PASS'}], 'report.csv')  # doctest: +SKIP
        True
    """
    if not data and fieldnames is None:
        logger.error("✗ No data to write")
        return False
    fieldnames = fieldnames or list(data[0].keys())
    buf = io.StringIO()
    if header:
        buf.write(header + "\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in data:
        writer.writerow({k: format_value(row[k]) for k in fieldnames})
    if not write_text_atomic(buf.getvalue(), file_path):
        return False
    logger.debug(f"✓ CSV written to {file_path}")
    return True


def read_csv(file_path: str) -> List[Dict[str, str]]:
    """
    Read a CSV file with a header row, skipping '#' comment lines

    Returns:
        list: One dictionary per row, empty on error
    """
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            lines = [line for line in f if not line.startswith("#")]
        return list(csv.DictReader(lines))
    except OSError as e:
        logger.error(f"✗ Error reading CSV: {e}")
        return []


def _require(rows: List[Dict[str, str]], columns: List[str], file_path: str) -> None:
    if not rows:
        raise ConfigError(f"{file_path} is missing or empty")
    absent = [c for c in columns if c not in rows[0]]
    if absent:
        raise ConfigError(f"{file_path} lacks column(s) {', '.join(absent)}")


def read_landmarks(file_path: str) -> LandmarkSet:
    """Landmarks from a CSV with columns id,x,y (rows sorted by id)"""
    rows = read_csv(file_path)
    _require(rows, ["id", "x", "y"], file_path)
    try:
        rows = sorted(rows, key=lambda r: int(r["id"]))
        return LandmarkSet([[float(r["x"]), float(r["y"])] for r in rows], [int(r["id"]) for r in rows])
    except ValueError as e:
        raise ConfigError(f"invalid landmark file {file_path}: {e}") from e


def write_landmarks(q: LandmarkSet, file_path: str, header: Optional[str] = None) -> bool:
    rows = [{"id": i, "x": float(p[0]), "y": float(p[1])} for i, p in zip(q.ids, q.points)]
    return write_csv(rows, file_path, ["id", "x", "y"], header)


def write_field(v: VectorField, file_path: str, header: Optional[str] = None) -> bool:
    """Vector field as i,j,vx,vy"""
    rows = [{"i": i, "j": j, "vx": float(v.values[i, j, 0]), "vy": float(v.values[i, j, 1])}
            for i in range(v.grid.nx) for j in range(v.grid.ny)]
    return write_csv(rows, file_path, ["i", "j", "vx", "vy"], header)


def read_field(file_path: str, grid: Grid2) -> VectorField:
    rows = read_csv(file_path)
    _require(rows, ["i", "j", "vx", "vy"], file_path)
    values = np.zeros(grid.shape + (2,))
    for r in rows:
        values[int(r["i"]), int(r["j"])] = (float(r["vx"]), float(r["vy"]))
    return VectorField(grid, values)


def write_diffeomorphism(phi: Diffeomorphism, file_path: str, header: Optional[str] = None) -> bool:
    """Map as i,j,phix,phiy plus invx,invy when the inverse is known"""
    inv = phi.inverse_values
    fields = ["i", "j", "phix", "phiy"] + (["invx", "invy"] if inv is not None else [])
    rows = []
    for i in range(phi.grid.nx):
        for j in range(phi.grid.ny):
            row = {"i": i, "j": j, "phix": float(phi.map_values[i, j, 0]), "phiy": float(phi.map_values[i, j, 1])}
            if inv is not None:
                row["invx"] = float(inv[i, j, 0])
                row["invy"] = float(inv[i, j, 1])
            rows.append(row)
    return write_csv(rows, file_path, fields, header)


def read_diffeomorphism(file_path: str, grid: Grid2) -> Diffeomorphism:
    rows = read_csv(file_path)
    _require(rows, ["i", "j", "phix", "phiy"], file_path)
    values = np.zeros(grid.shape + (2,))
    inv = np.zeros(grid.shape + (2,)) if "invx" in rows[0] else None
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        values[i, j] = (float(r["phix"]), float(r["phiy"]))
        if inv is not None:
            inv[i, j] = (float(r["invx"]), float(r["invy"]))
    return Diffeomorphism(grid, values, inv)


def write_flowpath(path: FlowPath, directory: str, header: Optional[str] = None, scale: Optional[int] = None) -> bool:
    """One vel_t{m}[_s{k}].csv file per time node"""
    suffix = "" if scale is None else f"_s{scale}"
    ok = True
    for m, v in enumerate(path.velocities):
        ok = write_field(v, os.path.join(directory, f"vel_t{m}{suffix}.csv"), header) and ok
    return ok


def write_control(momenta: np.ndarray, ids, file_path: str, header: Optional[str] = None) -> bool:
    """Landmark control as scale,m,id,px,py"""
    rows = []
    for k in range(momenta.shape[0]):
        for m in range(momenta.shape[1]):
            for a, ident in enumerate(ids):
                rows.append({"scale": k, "m": m, "id": ident,
                             "px": float(momenta[k, m, a, 0]), "py": float(momenta[k, m, a, 1])})
    return write_csv(rows, file_path, ["scale", "m", "id", "px", "py"], header)


def read_control(file_path: str, ids) -> np.ndarray:
    """
    Landmark control written by write_control

    Returns:
        (scales, M, n, 2) momenta ordered like `ids`
    """
    rows = read_csv(file_path)
    _require(rows, ["scale", "m", "id", "px", "py"], file_path)
    position = {int(i): a for a, i in enumerate(ids)}
    n_scales = 1 + max(int(r["scale"]) for r in rows)
    n_steps = 1 + max(int(r["m"]) for r in rows)
    out = np.zeros((n_scales, n_steps, len(position), 2))
    try:
        for r in rows:
            out[int(r["scale"]), int(r["m"]), position[int(r["id"])]] = (float(r["px"]), float(r["py"]))
    except KeyError as e:
        raise ConfigError(f"control file {file_path} refers to unknown landmark id {e}") from e
    return out
