"""CSV interchange: ``time,value`` series and ``key,value`` statistics."""
from __future__ import annotations

import io
import os
from typing import Iterable

SERIES_HEADER = "time,value"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_series(series: Iterable[tuple]) -> str:
    lines = [SERIES_HEADER]
    lines += [f"{int(t)},{fmt(v)}" for t, v in series]
    return "\n".join(lines) + "\n"


def parse_series(text: str) -> list[tuple]:
    lines = text.split("\n")
    if lines[0] != SERIES_HEADER:
        raise ValueError(f"expected header {SERIES_HEADER!r}")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        t, v = line.split(",")
        out.append((int(t), float(v)))
    return out


def format_stats(rows: Iterable[tuple]) -> str:
    lines = ["key,value"]
    for key, value in rows:
        lines.append(f"{key},{fmt(value) if isinstance(value, float) else value}")
    return "\n".join(lines) + "\n"


def write_text(text: str, destination) -> None:
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", newline="") as fh:
            fh.write(text)
    elif isinstance(destination, io.TextIOBase) or hasattr(destination, "write"):
        destination.write(text)
    else:
        raise TypeError(f"cannot write to {destination!r}")
