"""
Run event log.

Every record is a dict with keys t, seq, kind, server, request, detail (in
that order) and is written as one compact JSON object per line. The log is
the source every report is computed from.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

Record = Dict[str, Any]


class EventLog:
    """In-memory, append-only list of run records."""

    def __init__(self):
        self.records: List[Record] = []

    def append(self, t: float, kind: str, server: Optional[str] = None,
               request: Optional[int] = None, detail: Optional[Dict[str, Any]] = None) -> Record:
        record = {
            "t": t,
            "seq": len(self.records),
            "kind": kind,
            "server": server,
            "request": request,
            "detail": detail if detail is not None else {},
        }
        self.records.append(record)
        return record

    def of_kind(self, *kinds: str) -> Iterator[Record]:
        return (r for r in self.records if r["kind"] in kinds)

    def dumps(self) -> str:
        """The whole log as JSON Lines text."""
        return "".join(encode_record(r) + "\n" for r in self.records)

    def write(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for record in self.records:
                f.write(encode_record(record))
                f.write("\n")


def encode_record(record: Record) -> str:
    # NaN/inf have no JSON spelling; refusing them keeps the log portable.
    return json.dumps(record, separators=(",", ":"), allow_nan=False)


def read_log(path: Union[str, Path]) -> List[Record]:
    """Load a JSON Lines event log written by EventLog.write."""
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
