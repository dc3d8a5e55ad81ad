"""Run configuration and machine-readable record output.

Every CLI run is described by a flat key-value configuration; records
embed a hash of that configuration plus the seed so results are
reproducible and diffable. JSON writes one object per record; CSV mirrors
the record fields as columns. No timestamps: identical configuration and
seed must produce byte-identical output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field

__all__ = ["RunConfig", "config_hash", "parse_config_file", "write_records"]


@dataclass(frozen=True)
class RunConfig:
    """Flat, fully serializable description of one CLI run."""

    command: str
    options: dict = field(default_factory=dict)

    def canonical(self) -> str:
        return json.dumps({"command": self.command, **self.options}, sort_keys=True, default=str)

    @property
    def hash(self) -> str:
        return config_hash(self)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(config.canonical().encode()).hexdigest()[:12]


def parse_config_file(path: str) -> dict:
    """Read ``key = value`` lines; '#' starts a comment, blank lines skipped.

    Values are parsed as JSON scalars when possible (numbers, booleans),
    else kept as strings. CLI flags override these values.
    """
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            try:
                out[key.replace("-", "_")] = json.loads(value)
            except json.JSONDecodeError:
                out[key.replace("-", "_")] = value
    return out


def _json_default(value):
    """Degrade numpy scalars to plain Python for serialization."""
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_records(records: list[dict], out: str | None, fmt: str) -> None:
    """Write records as JSON (one array) or CSV to ``out`` (stdout if None)."""
    if fmt == "json":
        text = json.dumps(records if len(records) != 1 else records[0], indent=2,
                          sort_keys=True, default=_json_default)
        text += "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        keys: list[str] = []
        for rec in records:
            for k in rec:
                if k not in keys:
                    keys.append(k)
        writer = csv.DictWriter(buf, fieldnames=keys)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: _csv_cell(rec.get(k)) for k in keys})
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _csv_cell(value):
    if isinstance(value, (list, tuple)):
        return ";".join(str(v) for v in value)
    return value
