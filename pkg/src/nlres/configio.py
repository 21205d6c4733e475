"""Flat text-config parsing.

Both run configs and model recipes share one syntax: ``[section]`` headers
with ``key = value`` lines, ``#`` comments, nothing nested.  Sections with the
same name may repeat; order is preserved.  Every key must be consumed by the
caller, so typos surface as errors instead of silently ignored settings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModelIOError

_REQUIRED = object()


@dataclass
class Section:
    name: str
    line: int
    source: str
    entries: dict[str, str] = field(default_factory=dict)
    _used: set[str] = field(default_factory=set)

    def locate(self) -> str:
        return f"{self.source}: [{self.name}] at line {self.line}"

    def has(self, key: str) -> bool:
        return key in self.entries

    def raw(self, key: str, default=_REQUIRED) -> str:
        if key not in self.entries:
            if default is _REQUIRED:
                raise ConfigError(f"{self.locate()} is missing key '{key}'")
            return default
        self._used.add(key)
        return self.entries[key]

    def get_str(self, key: str, default=_REQUIRED, choices: tuple[str, ...] | None = None) -> str:
        value = self.raw(key, default)
        if choices is not None and value not in choices:
            raise ConfigError(
                f"{self.locate()}: '{key}' must be one of {', '.join(choices)}; got {value!r}"
            )
        return value

    def get_int(self, key: str, default=_REQUIRED) -> int:
        value = self.raw(key, default)
        if value is None or isinstance(value, int):
            return value
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"{self.locate()}: '{key}' is not an integer: {value!r}") from exc

    def get_float(self, key: str, default=_REQUIRED) -> float:
        value = self.raw(key, default)
        if value is None or isinstance(value, float):
            return value
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"{self.locate()}: '{key}' is not a number: {value!r}") from exc

    def get_floats(self, key: str, count: int | None = None, default=_REQUIRED) -> np.ndarray:
        value = self.raw(key, default)
        if isinstance(value, np.ndarray):
            return value
        try:
            arr = np.array(value.split(), dtype=np.float64)
        except ValueError as exc:
            raise ConfigError(f"{self.locate()}: '{key}' is not a number list: {value!r}") from exc
        if count is not None and arr.size != count:
            raise ConfigError(
                f"{self.locate()}: '{key}' needs {count} values, got {arr.size}"
            )
        return arr

    def get_ints(self, key: str, count: int | None = None, default=_REQUIRED) -> tuple[int, ...]:
        value = self.raw(key, default)
        if isinstance(value, tuple):
            return value
        try:
            items = tuple(int(v) for v in value.split())
        except ValueError as exc:
            raise ConfigError(f"{self.locate()}: '{key}' is not an integer list: {value!r}") from exc
        if count is not None and len(items) != count:
            raise ConfigError(
                f"{self.locate()}: '{key}' needs {count} values, got {len(items)}"
            )
        return items

    def reject_unknown(self) -> None:
        stray = sorted(set(self.entries) - self._used)
        if stray:
            raise ConfigError(f"{self.locate()} has unknown key '{stray[0]}'")


def parse_sections(path: str | Path) -> list[Section]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelIOError(f"cannot read {path}: {exc}") from exc

    sections: list[Section] = []
    current: Section | None = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = Section(name=line[1:-1].strip(), line=ln, source=str(path))
            sections.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value', got {raw.strip()!r}")
        if current is None:
            raise ConfigError(f"{path}:{ln}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in current.entries:
            raise ConfigError(f"{path}:{ln}: duplicate key '{key}' in [{current.name}]")
        current.entries[key] = value.strip()
    return sections


def take_single(sections: list[Section], name: str, source: str, required: bool = True) -> Section | None:
    found = [s for s in sections if s.name == name]
    if len(found) > 1:
        raise ConfigError(f"{source}: section [{name}] given {len(found)} times, expected one")
    if not found:
        if required:
            raise ConfigError(f"{source}: missing required section [{name}]")
        return None
    return found[0]


def take_all(sections: list[Section], name: str) -> list[Section]:
    return [s for s in sections if s.name == name]


def check_section_names(sections: list[Section], allowed: tuple[str, ...], source: str) -> None:
    for sec in sections:
        if sec.name not in allowed:
            raise ConfigError(
                f"{source}: unknown section [{sec.name}] at line {sec.line}; "
                f"allowed: {', '.join(allowed)}"
            )
