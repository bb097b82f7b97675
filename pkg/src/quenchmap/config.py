"""INI-style run configuration with sections per command.

A config file looks like::

    [run]
    seed = 1234
    output_dir = out
    cache_dir = cache

    [lattice]
    L = 8
    J = 1.0

    [qmc]
    n_measure = 100000

    [equilibrium]
    engine = qmc
    h = 2.0
    T = 1.0

Values are overridable from the command line as ``key=value`` (applied to the
active command's section) or ``section.key=value``.  The environment
variables QUENCHMAP_OUTPUT_DIR and QUENCHMAP_CACHE_DIR override the [run]
directories.  Grids are either comma lists (``0.5,1.0,1.5``) or ranges
(``start:stop:step``, endpoints inclusive within half a step).
"""

from __future__ import annotations

import configparser
import io
import os

import numpy as np


class ConfigError(Exception):
    """Invalid configuration; message names the section and field."""

    def __init__(self, section: str, field: str, message: str):
        super().__init__(f"[{section}] {field}: {message}")
        self.section = section
        self.field = field


class RunConfig:
    """Typed access to a parsed INI config; round-trips losslessly."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("<file>", "<parse>", str(exc)) from exc
        return cls(parser)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as f:
            return cls.from_text(f.read())

    def to_text(self) -> str:
        buf = io.StringIO()
        self.parser.write(buf)
        return buf.getvalue()

    def apply_overrides(self, overrides: list, default_section: str) -> None:
        for item in overrides:
            if "=" not in item:
                raise ConfigError(default_section, item,
                                  "override must look like key=value")
            key, value = item.split("=", 1)
            if "." in key:
                section, field = key.split(".", 1)
            else:
                section, field = default_section, key
            if not self.parser.has_section(section):
                self.parser.add_section(section)
            self.parser.set(section.strip(), field.strip(), value.strip())

    # typed getters -------------------------------------------------------

    def _raw(self, section: str, field: str, default=None):
        if self.parser.has_option(section, field):
            return self.parser.get(section, field)
        if default is not None:
            return default
        raise ConfigError(section, field, "missing required value")

    def get_str(self, section, field, default=None) -> str:
        return str(self._raw(section, field, default))

    def get_int(self, section, field, default=None) -> int:
        raw = self._raw(section, field, default)
        try:
            return int(str(raw))
        except ValueError as exc:
            raise ConfigError(section, field,
                              f"not an integer: {raw!r}") from exc

    def get_float(self, section, field, default=None) -> float:
        raw = self._raw(section, field, default)
        try:
            return float(str(raw))
        except ValueError as exc:
            raise ConfigError(section, field,
                              f"not a number: {raw!r}") from exc

    def get_bool(self, section, field, default=None) -> bool:
        raw = str(self._raw(section, field, default)).strip().lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(section, field, f"not a boolean: {raw!r}")

    def get_grid(self, section, field, default=None) -> list:
        raw = str(self._raw(section, field, default)).strip()
        try:
            return parse_grid(raw)
        except ValueError as exc:
            raise ConfigError(section, field, str(exc)) from exc

    def get_positive_float(self, section, field, default=None) -> float:
        value = self.get_float(section, field, default)
        if value <= 0:
            raise ConfigError(section, field, f"must be > 0, got {value}")
        return value

    # common blocks -------------------------------------------------------

    def run_seed(self) -> int:
        return self.get_int("run", "seed", "0")

    def output_dir(self) -> str:
        return os.environ.get("QUENCHMAP_OUTPUT_DIR",
                              self.get_str("run", "output_dir", "out"))

    def cache_dir(self) -> str:
        return os.environ.get("QUENCHMAP_CACHE_DIR",
                              self.get_str("run", "cache_dir", "cache"))

    def max_workers(self) -> int:
        return self.get_int("run", "max_workers", "1")

    def lattice_L(self) -> int:
        L = self.get_int("lattice", "L")
        if L < 2:
            raise ConfigError("lattice", "L", f"must be >= 2, got {L}")
        return L

    def coupling_J(self) -> float:
        return self.get_float("lattice", "J", "1.0")

    def qmc_policy(self) -> dict:
        policy = {
            "n_thermalization": self.get_int("qmc", "n_thermalization",
                                             "10000"),
            "n_measure": self.get_int("qmc", "n_measure", "100000"),
            "n_bins": self.get_int("qmc", "n_bins", "32"),
            "n_chains": self.get_int("qmc", "n_chains", "1"),
        }
        if policy["n_bins"] < 16:
            raise ConfigError("qmc", "n_bins",
                              f"must be >= 16, got {policy['n_bins']}")
        if policy["n_measure"] % policy["n_bins"] != 0:
            raise ConfigError("qmc", "n_measure",
                              f"{policy['n_measure']} not divisible by "
                              f"n_bins={policy['n_bins']}")
        return policy


def parse_grid(raw: str) -> list:
    """Parse '0.5,1.0,1.5' or 'start:stop:step' into a float list."""
    if not raw:
        raise ValueError("empty grid")
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ValueError(f"range grid needs start:stop:step, got {raw!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {raw!r}")
        n = int(np.floor((stop - start) / step + 0.5)) + 1
        return [round(start + k * step, 12) for k in range(n)
                if start + k * step <= stop + step / 2]
    return [float(p) for p in raw.split(",") if p.strip()]
