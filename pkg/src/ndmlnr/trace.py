"""Line-delimited JSON trace records with byte-stable rendering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Union


@dataclass(frozen=True)
class TraceRecord:
    time: float
    node: Union[int, str]
    event: str
    detail: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.detail.get(key, default)


def _value(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        if math.isnan(v):
            return '"nan"'
        return repr(v)
    return json.dumps(str(v))


def format_record(rec: TraceRecord) -> str:
    body = ", ".join(f"{json.dumps(k)}: {_value(v)}" for k, v in rec.detail.items())
    return (f'{{"time": {rec.time:.6f}, "node": {_value(rec.node)}, '
            f'"event": {json.dumps(rec.event)}, "detail": {{{body}}}}}')


def parse_record(line: str) -> TraceRecord:
    obj = json.loads(line)
    return TraceRecord(time=float(obj["time"]), node=obj["node"], event=obj["event"], detail=obj["detail"])


def dumps(records: Iterable[TraceRecord]) -> str:
    return "".join(format_record(r) + "\n" for r in records)


def read_trace(path: Union[str, Path]) -> list[TraceRecord]:
    with open(path) as fh:
        return [parse_record(line) for line in fh if line.strip()]


def iter_lines(text: str) -> Iterator[TraceRecord]:
    for line in text.splitlines():
        if line.strip():
            yield parse_record(line)


def as_float(v) -> float:
    """Numeric detail value, undoing the string rendering of infinities."""
    return float(v)
