from __future__ import annotations

import math
import re
from typing import Optional


_INTERVAL_COLUMN_RE = re.compile(r"^\s*([^@\s]+)@(\d+)\s*$")
_RANGE_RE = re.compile(r"^\s*(\d+)\s*[-:]\s*(\d+)\s*$")
_NONE_VALUES = {"", "none", "off", "null", "no"}


def normalize_cell(value: Optional[str]) -> str:
    if value is None:
        return ""
    return " ".join(str(value).split())


def is_blank(value: Optional[str]) -> bool:
    cell = normalize_cell(value).lower()
    return cell in {"", "na", "nan", "null"}


def parse_number(value: Optional[str]) -> Optional[float]:
    """Blank cell -> None; anything else must be a finite decimal (ValueError otherwise)."""
    if is_blank(value):
        return None
    number = float(normalize_cell(value).replace(",", "."))
    if not math.isfinite(number):
        raise ValueError(f"non-finite number: {value!r}")
    return number


def split_interval_column(name: str) -> Optional[tuple[str, int]]:
    m = _INTERVAL_COLUMN_RE.match(name or "")
    if not m:
        return None
    return m.group(1), int(m.group(2))


def interval_column(parameter: str, index: int) -> str:
    return f"{parameter}@{index}"


def parse_csv_list(value: Optional[str]) -> list[str]:
    if not value:
        return []
    return [part.strip() for part in value.split(",") if part.strip()]


def parse_hidden_range(value: str) -> list[int]:
    """Accepts "0-3", "0:3" or "0,1,2"; returns a sorted list without duplicates."""
    m = _RANGE_RE.match(value or "")
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            return []
        return list(range(lo, hi + 1))
    return sorted({int(part) for part in parse_csv_list(value)})


def parse_balance(value: Optional[str]) -> Optional[dict[str, float]]:
    """ "a,b,theta,mult" -> dict, "none" -> None."""
    if value is None or normalize_cell(value).lower() in _NONE_VALUES:
        return None
    parts = parse_csv_list(value)
    if len(parts) != 4:
        raise ValueError(f"balance must be 'a,b,theta,mult' or 'none', got {value!r}")
    a, b, theta = (float(p) for p in parts[:3])
    multiplier = int(parts[3])
    return {"a": a, "b": b, "theta": theta, "multiplier": multiplier}


def format_number(value: Optional[float], digits: int) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""
    if digits == 0:
        return str(int(round(value)))
    return f"{value:.{digits}f}"
