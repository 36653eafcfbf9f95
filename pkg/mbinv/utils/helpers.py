from typing import Any, List, Optional, Sequence, Tuple
from decimal import Decimal, ROUND_HALF_EVEN
from pathlib import Path
import csv
import io
import json
import sys

import numpy as np
import structlog

from mbinv.exceptions import InputError, InvalidGrid

logger = structlog.get_logger()


def parse_int_list(text: str) -> List[int]:
    """
    Parse a comma-separated list of positive integers

    Args:
        text: e.g. "5,10,50"
    Returns:
        List of ints
    Examples:
        "5,10,50" -> [5, 10, 50]
        "3" -> [3]
    """
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated integers, got '{text}'")
    if not values or any(value < 1 for value in values):
        raise InputError(f"expected positive integers, got '{text}'")
    return values


def format_half_even(value: float, places: int = 2) -> str:
    """
    Round to a fixed number of decimals, ties to even

    Examples:
        format_half_even(1.6666) -> "1.67"
        format_half_even(250.3751) -> "250.38"
    """
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_EVEN))


def to_jsonable(value: Any) -> Any:
    """numpy arrays and scalars to plain lists and floats"""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {key: to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    return value


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def write_text(text: str, path: Optional[str] = None) -> None:
    """Write to path, or stdout when path is None"""
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")
    logger.info("output_written", path=path, size=len(text))


def dump_json(payload: Any, path: Optional[str] = None) -> None:
    """
    Floats are written with the shortest representation that round-trips
    """
    write_text(json.dumps(to_jsonable(payload), indent=2) + "\n", path)


def dump_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], path: Optional[str] = None) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    write_text(buffer.getvalue(), path)


def read_measurements(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a "t,z" or "t,z1,...,zm" CSV

    Returns:
        (points of shape (n,), values of shape (n, m))
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = [name.strip() for name in next(reader, [])]
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]

    if len(header) < 2 or header[0] != "t" or not all(name.startswith("z") for name in header[1:]):
        raise InputError(f"measurement header must be t,z or t,z1..zm, got {','.join(header)}")
    if not rows:
        raise InvalidGrid("measurement file has no rows")

    try:
        table = np.array([[float(cell) for cell in row] for row in rows])
    except ValueError as e:
        raise InputError(f"non-numeric measurement: {e}")
    if table.ndim != 2 or table.shape[1] != len(header):
        raise InputError("every measurement row needs one value per column")

    return table[:, 0], table[:, 1:]
