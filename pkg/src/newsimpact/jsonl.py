"""Line-delimited JSON helpers.

All stage files are JSONL so any stage output can be inspected or diffed.
Writers are deterministic: keys sorted, no trailing whitespace, one
record per line, UTF-8.
"""

import json
from pathlib import Path
from typing import Any, Iterable, Iterator


def dumps_line(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_records(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    """Write records to ``path``, replacing any existing file. Returns count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps_line(record) + "\n")
            n += 1
    return n


def append_record(path: str | Path, record: dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(dumps_line(record) + "\n")


def read_records(path: str | Path) -> Iterator[dict[str, Any]]:
    """Yield parsed records; raises on malformed lines (use for stage files
    the pipeline itself wrote)."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
