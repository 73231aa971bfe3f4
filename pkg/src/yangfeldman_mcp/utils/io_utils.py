"""
Input/output helpers: deterministic JSON reports, CSV tables and propagator dumps.
"""

import csv
import json
import struct
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..api.errors import ConfigError
from ..api.types import PropagatorSet

DUMP_MAGIC = b"YFPR"
DUMP_HEADER = struct.Struct("<4sIII")
DUMP_REAL = 1
DUMP_COMPLEX = 2


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars and arrays, complex numbers, enums and dataclasses
    into plain JSON values. Complex numbers become {"re": .., "im": ..}.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return to_jsonable(np.stack([value.real, value.imag], axis=-1).tolist())
        return value.tolist()
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps_report(report: Dict[str, Any]) -> str:
    """Serialize a report with sorted keys so equal reports give equal bytes."""
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2) + "\n"


def write_json(report: Dict[str, Any], path: Optional[Union[str, Path]]) -> str:
    """
    Write a report as JSON.

    Args:
        report: The report.
        path: Output file; nothing is written when None.

    Returns:
        The serialized text.
    """
    text = dumps_report(report)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def table_rows(report: Dict[str, Any]) -> List[Dict[str, Any]]:
    """The table-shaped part of a report: checks, orders or the coefficient table."""
    for key in ("checks", "orders", "coefficient_table", "baseline_trend"):
        rows = report.get(key)
        if isinstance(rows, list) and rows and isinstance(rows[0], dict):
            return [
                {k: v for k, v in to_jsonable(row).items() if not isinstance(v, (list, dict))}
                for row in rows
            ]
    return []


def write_csv(rows: Sequence[Dict[str, Any]], path: Union[str, Path]) -> int:
    """
    Write rows with the union of their keys as header, in first-seen order.

    Returns:
        Number of rows written.
    """
    header: List[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=header)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return len(rows)


def _dump_arrays(propagators: PropagatorSet) -> Dict[str, np.ndarray]:
    arrays = {"gr": propagators.gr_float(), "d": propagators.d_float()}
    if propagators.dplus is not None:
        arrays["dplus"] = propagators.dplus
    return arrays


def dump_propagators(propagators: PropagatorSet, path: Union[str, Path], fmt: str = "binary") -> Path:
    """
    Export the propagator tables.

    The binary layout is a 16-byte little-endian header (b"YFPR", nt, nx, dtype
    code) followed by the row-major tables: Gr and D as float64 (code 1), or
    Gr, D and D+ as complex128 (code 2) when the two-point function exists.

    Args:
        propagators: The tables to export.
        path: Output file.
        fmt: "binary" or "json".

    Returns:
        The written path.

    Raises:
        ConfigError: For an unknown format.
    """
    path = Path(path)
    lattice = propagators.lattice
    arrays = _dump_arrays(propagators)
    if fmt == "json":
        payload = {"nt": lattice.nt, "nx": lattice.nx}
        payload.update({name: to_jsonable(array) for name, array in arrays.items()})
        path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
        return path
    if fmt != "binary":
        raise ConfigError(f"Unknown dump format '{fmt}'. Use binary or json")

    code = DUMP_COMPLEX if "dplus" in arrays else DUMP_REAL
    dtype = "<c16" if code == DUMP_COMPLEX else "<f8"
    with open(path, "wb") as handle:
        handle.write(DUMP_HEADER.pack(DUMP_MAGIC, lattice.nt, lattice.nx, code))
        for array in arrays.values():
            handle.write(np.ascontiguousarray(array, dtype=dtype).tobytes())
    return path


def load_propagator_dump(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a binary dump written by dump_propagators.

    Raises:
        ConfigError: If the magic or the payload size do not match.
    """
    data = Path(path).read_bytes()
    if len(data) < DUMP_HEADER.size:
        raise ConfigError(f"{path} is too short for a propagator dump")
    magic, nt, nx, code = DUMP_HEADER.unpack_from(data)
    if magic != DUMP_MAGIC:
        raise ConfigError(f"{path} is not a propagator dump (magic {magic!r})")
    if code not in (DUMP_REAL, DUMP_COMPLEX):
        raise ConfigError(f"Unknown dtype code {code} in {path}")
    names = ["gr", "d", "dplus"] if code == DUMP_COMPLEX else ["gr", "d"]
    dtype = np.dtype("<c16" if code == DUMP_COMPLEX else "<f8")
    n = nt * nx
    body = np.frombuffer(data, dtype=dtype, offset=DUMP_HEADER.size)
    if body.size != len(names) * n * n:
        raise ConfigError(f"{path} holds {body.size} entries, expected {len(names) * n * n}")
    tables = body.reshape(len(names), n, n)
    result: Dict[str, Any] = {"nt": nt, "nx": nx, "code": code}
    result.update({name: tables[k].copy() for k, name in enumerate(names)})
    return result
