"""Flat ``key = value`` text files.

One assignment per line, ``#`` starts a comment, values are JSON
(numbers, quoted strings, ``true``/``false``, bracketed arrays).  A bare
token such as ``semiclassical`` or ``poisson-residual`` is accepted as a
string.  Every entry remembers its line so diagnostics can point at it.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ConfigError

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")
_BARE = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-.]*$")


@dataclass(frozen=True)
class Entry:
    key: str
    value: Any
    line: int


def _strip_comment(line: str) -> str:
    in_string = False
    for i, ch in enumerate(line):
        if ch == '"' and (i == 0 or line[i - 1] != "\\"):
            in_string = not in_string
        elif ch == "#" and not in_string:
            return line[:i]
    return line


def parse_flat(text: str, source: str = "<string>") -> dict[str, Entry]:
    entries: dict[str, Entry] = {}
    problems: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if not _KEY.match(key):
            problems.append(f"{source}:{lineno}: invalid key {key!r}")
            continue
        if key in entries:
            problems.append(
                f"{source}:{lineno}: duplicate key {key!r} (first set on line {entries[key].line})"
            )
            continue
        try:
            value = json.loads(value_text)
        except json.JSONDecodeError:
            if _BARE.match(value_text):
                value = value_text
            else:
                problems.append(f"{source}:{lineno}: cannot parse value for {key!r}: {value_text!r}")
                continue
        entries[key] = Entry(key, value, lineno)
    if problems:
        raise ConfigError(problems)
    return entries


def read_flat(path: str | Path) -> dict[str, Entry]:
    path = Path(path)
    return parse_flat(path.read_text(), source=str(path))


def dump_flat(values: dict[str, Any]) -> str:
    """Inverse of :func:`parse_flat` for JSON-serialisable values."""
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in values.items())
