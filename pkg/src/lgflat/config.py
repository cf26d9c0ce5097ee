"""INI-style run configuration with line-numbered validation errors."""

from __future__ import annotations

import configparser
import re
from pathlib import Path

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


class ConfigError(Exception):
    pass


class Section:
    """Typed accessors over one config section; errors cite file and line."""

    def __init__(self, config: "RunConfig", name: str):
        self.config = config
        self.name = name
        self.used: dict[str, object] = {}

    def _raw(self, key):
        p = self.config.parser
        if p.has_section(self.name) and p.has_option(self.name, key):
            return p.get(self.name, key)
        return None

    def where(self, key: str) -> str:
        line = self.config.lines.get((self.name, key))
        loc = str(self.config.path) if self.config.path else "<config>"
        if line is not None:
            loc += f":{line}"
        return f"{loc}: [{self.name}] {key}"

    def error(self, key: str, msg: str) -> ConfigError:
        return ConfigError(f"{self.where(key)}: {msg}")

    def has(self, key: str) -> bool:
        return self._raw(key) is not None

    def _get(self, key, default, conv, what):
        raw = self._raw(key)
        if raw is None:
            self.used[key] = default
            return default
        try:
            val = conv(raw.strip())
        except (TypeError, ValueError):
            raise self.error(key, f"expected {what}, got {raw!r}") from None
        self.used[key] = val
        return val

    def str(self, key, default=None):
        return self._get(key, default, str, "a string")

    def int(self, key, default=None, minimum=None):
        val = self._get(key, default, int, "an integer")
        if val is not None and minimum is not None and val < minimum:
            raise self.error(key, f"must be >= {minimum}, got {val}")
        return val

    def float(self, key, default=None, positive=False):
        val = self._get(key, default, float, "a number")
        if val is not None and positive and not val > 0:
            raise self.error(key, f"must be positive, got {val}")
        return val

    def bool(self, key, default=False):
        def conv(s):
            s = s.lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)

        return self._get(key, default, conv, "true/false")

    def choice(self, key, options, default=None):
        val = self.str(key, default)
        if val is not None and val not in options:
            raise self.error(key, f"must be one of {', '.join(options)}; got {val!r}")
        return val

    def list(self, key, conv=None, default=None):
        conv = conv or (lambda x: x)

        def split(s):
            items = [x for x in re.split(r"[,\s]+", s) if x]
            return [conv(x) for x in items]

        return self._get(key, default, split, "a comma-separated list")


class RunConfig:
    """Parsed config file (or an empty one) plus the values actually read."""

    def __init__(self, text: str = "", path: Path | None = None):
        self.path = path
        self.parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        self.parser.optionxform = str
        try:
            self.parser.read_string(text, source=str(path or "<config>"))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        self.lines = _index_lines(text)
        self._sections: dict[str, Section] = {}

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls(text, path)

    def section(self, name: str) -> Section:
        if name not in self._sections:
            self._sections[name] = Section(self, name)
        return self._sections[name]

    def resolved(self) -> dict:
        """Every value that was read, defaults included, by section."""
        return {name: dict(sec.used) for name, sec in self._sections.items() if sec.used}

    def check_unknown(self, allowed: dict[str, set[str]]) -> None:
        for name in self.parser.sections():
            if name not in allowed:
                continue
            for key in self.parser.options(name):
                if key not in allowed[name]:
                    raise self.section(name).error(key, "unknown key")


def _index_lines(text: str) -> dict[tuple[str, str], int]:
    out = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            continue
        m = _KEY.match(line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip()), no)
    return out
