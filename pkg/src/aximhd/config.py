"""Run configuration: a flat INI document parsed fail-closed.

Grammar
-------
Three sections, each holding ``key = value`` lines (``#`` and ``;`` start
comments)::

    [solver]    every SolverConfig field, e.g. Nr, Nz, R, Lz, dt, T_end, cfl,
                scheme, dealias, cadence, preset, ring_amp, ..., seed
    [run]       output, checkpoint_cadence, monitors, box_size, box_length,
                box_every
    [losing]    optional: scenario, sigma, eps, p, T, amplitude, sizes

Values are scalars; ``monitors``, ``eps`` and ``sizes`` are comma-separated
lists.  Integers must be written without a decimal point, booleans as
``true``/``false``.  Unknown sections or keys, type mismatches and invalid
values raise :class:`ConfigError` naming the key.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .diagnostics import ALL_MONITORS, CHEAP_MONITORS
from .solver import SolverConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LosingScenario:
    scenario: str = "shear"
    sigma: float = 0.5
    eps: tuple = (0.1, 0.2, 0.4)
    p: float = 2.0
    T: float = 2.0
    amplitude: float = 3.0
    sizes: tuple = (64,)

    def __post_init__(self):
        if self.scenario not in ("shear", "baseline"):
            raise ConfigError(f"losing.scenario: unknown scenario {self.scenario!r}")
        if not (-1 < self.sigma < 1):
            raise ConfigError("losing.sigma: must lie in (-1, 1)")
        if not self.eps or any(e < 0 or self.sigma - e <= -1 for e in self.eps):
            raise ConfigError("losing.eps: each loss must satisfy 0 <= eps < sigma + 1")
        if self.p < 1:
            raise ConfigError("losing.p: must be >= 1")
        if self.T <= 0:
            raise ConfigError("losing.T: must be positive")
        if not self.sizes or any(n < 8 or n & (n - 1) for n in self.sizes):
            raise ConfigError("losing.sizes: entries must be powers of two >= 8")


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str = "output"
    checkpoint_cadence: int = 0
    monitors: tuple = CHEAP_MONITORS
    box_size: int = 64
    box_length: float = 0.0
    box_every: int = 0
    losing: Optional[LosingScenario] = None

    def __post_init__(self):
        if self.checkpoint_cadence < 0:
            raise ConfigError("run.checkpoint_cadence: must be >= 0")
        if self.checkpoint_cadence % self.solver.cadence:
            raise ConfigError("run.checkpoint_cadence: must be a multiple of solver.cadence")
        bad = [m for m in self.monitors if m not in ALL_MONITORS]
        if bad:
            raise ConfigError(f"run.monitors: unknown monitor(s) {bad}; choose from {ALL_MONITORS}")
        if self.box_size < 8 or self.box_size & (self.box_size - 1):
            raise ConfigError("run.box_size: must be a power of two >= 8")
        if self.box_length and self.box_length < 2 * self.solver.R:
            raise ConfigError("run.box_length: must be 0 (auto) or >= 2 R")
        if self.box_every < 0:
            raise ConfigError("run.box_every: must be >= 0")

    def as_dict(self):
        return dataclasses.asdict(self)

    @property
    def digest(self):
        """SHA-256 of the canonical JSON form of every resolved value."""
        text = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _convert(section, key, raw, default):
    name = f"{section}.{key}"
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(s) for s in items)
            if default and isinstance(default[0], float):
                return tuple(float(s) for s in items)
            return tuple(items)
        return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {type(default).__name__}") from None


def _section(parser, name, defaults):
    out = {}
    if not parser.has_section(name):
        return out
    for key, raw in parser.items(name):
        if key not in defaults:
            raise ConfigError(f"{name}.{key}: unknown key")
        out[key] = _convert(name, key, raw, defaults[key])
    return out


def _defaults(cls):
    return {f.name: getattr(cls(), f.name) for f in dataclasses.fields(cls)}


def parse_config(text):
    """Parse INI text into a validated :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    unknown = set(parser.sections()) - {"solver", "run", "losing"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    solver_defaults = _defaults(SolverConfig)
    run_defaults = {k: v for k, v in _defaults(RunConfig).items() if k not in ("solver", "losing")}
    try:
        solver = SolverConfig(**_section(parser, "solver", solver_defaults))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    run = _section(parser, "run", run_defaults)
    losing = None
    if parser.has_section("losing"):
        losing = LosingScenario(**_section(parser, "losing", _defaults(LosingScenario)))
    return RunConfig(solver=solver, losing=losing, **run)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


__all__ = ["RunConfig", "LosingScenario", "ConfigError", "parse_config", "load_config"]
