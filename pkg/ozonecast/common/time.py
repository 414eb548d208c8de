from __future__ import annotations

from datetime import date, timedelta
from typing import Iterable, Optional


HOURS_PER_DAY = 24.0

# апрель..сентябрь, сезон озона
DEFAULT_SEASON_MONTHS: tuple[int, ...] = (4, 5, 6, 7, 8, 9)


def parse_day(raw: Optional[str]) -> Optional[date]:
    """ISO-8601 calendar day ("2003-07-14"); a trailing time part is ignored."""
    raw = (raw or "").strip()
    if not raw:
        return None
    raw = raw.split("T", 1)[0].split(" ", 1)[0]
    try:
        return date.fromisoformat(raw)
    except ValueError:
        return None


def format_day(day: date) -> str:
    return day.isoformat()


def is_next_day(previous: date, current: date) -> bool:
    return current - previous == timedelta(days=1)


def in_season(day: date, months: Optional[Iterable[int]] = DEFAULT_SEASON_MONTHS) -> bool:
    if months is None:
        return True
    return day.month in set(months)


def interval_bounds(index: int, count: int) -> tuple[float, float]:
    """Hours covered by the index-th of `count` equal intervals of a day."""
    width = HOURS_PER_DAY / count
    return index * width, (index + 1) * width


def season_dates(start_year: int, count: int, months: Iterable[int] = DEFAULT_SEASON_MONTHS) -> list[date]:
    """`count` consecutive in-season days starting April 1st of start_year, rolling over years."""
    months = tuple(months)
    out: list[date] = []
    day = date(start_year, months[0], 1)
    while len(out) < count:
        if day.month in months:
            out.append(day)
            day += timedelta(days=1)
        else:
            day = date(day.year + 1, months[0], 1)
    return out
