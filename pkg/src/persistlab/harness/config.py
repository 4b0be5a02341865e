"""Declarative experiment configuration (one JSON document per experiment)."""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..kernels import parse_correlation, parse_kernel, parse_weights

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "config_hash"]

METHODS = ("mc", "orthant-qmc", "both")
MIN_MC_REPS = 1000


class ConfigError(ValueError):
    """Invalid experiment configuration, with the offending line when known."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


@dataclass
class ExperimentConfig:
    """One persistence experiment.

    Either ``kernel``/``weights`` with an n-ladder (weighted partial sums) or
    ``correlation`` with a T-ladder and grid spacing ``delta`` (stationary
    process sampled on a grid).
    """

    experiment_id: str
    ladder: list
    kernel: str | None = None
    weights: str | None = "const"
    correlation: str | None = None
    delta: float | None = None
    r: float = 0.0
    R: int = 100_000
    seed: int = 0
    method: str = "mc"
    budget: int = 1 << 16
    output: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def ladder_kind(self):
        return "T" if self.correlation is not None else "n"

    def to_dict(self):
        return asdict(self)

    def validate(self, lines=None, source=None):
        def fail(key, msg):
            raise ConfigError(msg, (lines or {}).get(key), source)

        if not isinstance(self.experiment_id, str) or not self.experiment_id:
            fail("experiment_id", "experiment_id must be a nonempty string")
        if self.method not in METHODS:
            fail("method", f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if (self.kernel is None) == (self.correlation is None):
            fail("kernel", "give exactly one of 'kernel' (n-ladder) or 'correlation' (T-ladder)")
        lad = self.ladder
        if not isinstance(lad, list) or len(lad) == 0:
            fail("ladder", "ladder must be a nonempty list")
        if any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in lad):
            fail("ladder", "ladder entries must be numbers")
        if any(b <= a for a, b in zip(lad, lad[1:])):
            fail("ladder", "ladder must be strictly increasing")
        if self.kernel is not None:
            if any(int(v) != v or v < 1 for v in lad):
                fail("ladder", "n-ladder entries must be integers >= 1")
            try:
                parse_kernel(self.kernel)
            except ValueError as exc:
                fail("kernel", str(exc))
            try:
                parse_weights(self.weights)
            except (ValueError, TypeError) as exc:
                fail("weights", str(exc))
            if self.delta is not None:
                fail("delta", "delta applies only to a correlation T-ladder")
        else:
            try:
                parse_correlation(self.correlation)
            except (ValueError, KeyError) as exc:
                fail("correlation", str(exc))
            if not isinstance(self.delta, (int, float)) or not self.delta > 0:
                fail("delta", f"grid spacing delta must be > 0, got {self.delta!r}")
            if lad[0] <= 0:
                fail("ladder", "T-ladder entries must be positive")
            for T in lad:
                m = round(T / self.delta)
                if abs(m * self.delta - T) > 1e-9 * max(1.0, T):
                    fail("ladder", f"T = {T} is not a multiple of delta = {self.delta}")
        if self.method in ("mc", "both"):
            if not isinstance(self.R, int) or self.R < MIN_MC_REPS:
                fail("R", f"R must be an integer >= {MIN_MC_REPS} for Monte Carlo, got {self.R!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            fail("seed", "seed must be an unsigned 64-bit integer")
        if not isinstance(self.budget, int) or self.budget < 256:
            fail("budget", "budget must be an integer >= 256")
        if not isinstance(self.r, (int, float)):
            fail("r", "level r must be a number")
        return self


def _key_lines(text):
    """Line number of the first occurrence of each top-level key."""
    lines = {}
    for num, line in enumerate(text.splitlines(), start=1):
        for m in re.finditer(r'"([A-Za-z_][A-Za-z0-9_]*)"\s*:', line):
            lines.setdefault(m.group(1), num)
    return lines


def load_config(source):
    """ExperimentConfig from a JSON file path, JSON text, or a dict."""
    name = None
    if isinstance(source, dict):
        data, text = dict(source), None
    else:
        s = str(source)
        if s.lstrip().startswith("{"):
            text = s
        else:
            name = s
            text = Path(s).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, name) from None
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object", 1, name)
    lines = _key_lines(text) if text is not None else {}
    known = set(ExperimentConfig.__dataclass_fields__)
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown field {key!r}", lines.get(key), name)
    for key in ("experiment_id", "ladder"):
        if key not in data:
            raise ConfigError(f"missing required field {key!r}", None, name)
    cfg = ExperimentConfig(**data)
    return cfg.validate(lines, name)


def config_hash(cfg):
    text = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()
