"""INI-style run configuration.

Rates are given in units of ``gamma1``; if a ``gamma1`` entry is present all
rates are divided by it so that internally ``gamma1 = 1``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from qvdp.errors import ConfigError
from qvdp.hilbert import FockSpace
from qvdp.lindblad import MAX_UNKNOWNS, SystemParams


@dataclass
class RunConfig:
    params: SystemParams
    n_max: int
    frame: str
    center: complex | None
    sections: dict[str, dict[str, str]] = field(default_factory=dict)
    max_unknowns: int = MAX_UNKNOWNS
    workers: int | None = None

    def space(self, center: complex | None = None) -> FockSpace:
        """Fock space of the run; the displaced center defaults to the classical fixed point."""
        if self.frame == "lab":
            return FockSpace(self.n_max)
        c = self.center if self.center is not None else center
        if c is None:
            from qvdp.effective import default_center

            c = default_center(self.params)
        return FockSpace(self.n_max, c)

    def get(self, section: str, key: str, default=None, kind=float):
        raw = self.sections.get(section, {}).get(key)
        if raw is None:
            return default
        try:
            value = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} as {kind.__name__}") from exc
        if kind is float and not math.isfinite(value):
            raise ConfigError(f"{section}.{key}", "must be finite")
        return value

    def get_str(self, section: str, key: str, default: str | None = None, choices=None) -> str | None:
        raw = self.sections.get(section, {}).get(key, default)
        if raw is not None and choices is not None and raw not in choices:
            raise ConfigError(f"{section}.{key}", f"must be one of {', '.join(choices)}, got {raw!r}")
        return raw

    def get_list(self, section: str, key: str) -> list[float] | None:
        raw = self.sections.get(section, {}).get(key)
        if raw is None:
            return None
        try:
            return [float(v) for v in raw.replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} as a list of numbers") from exc

    def linspace(self, section: str, prefix: str, default=None) -> np.ndarray | None:
        """Grid from ``<prefix>_min``, ``<prefix>_max``, ``n_<prefix>`` or an explicit list."""
        explicit = self.get_list(section, prefix + "_values")
        if explicit is not None:
            return np.array(explicit)
        lo = self.get(section, prefix + "_min")
        hi = self.get(section, prefix + "_max")
        n = self.get(section, "n_" + prefix, kind=int)
        if lo is None and hi is None and n is None:
            return default
        if lo is None or hi is None or n is None:
            missing = [k for k, v in ((prefix + "_min", lo), (prefix + "_max", hi), ("n_" + prefix, n)) if v is None]
            raise ConfigError(f"{section}.{missing[0]}", "grid needs min, max and count")
        if n < 1:
            raise ConfigError(f"{section}.n_{prefix}", "must be >= 1")
        return np.linspace(lo, hi, n)

    def resolved(self) -> dict:
        """Fully resolved configuration, echoed into every output."""
        out = {k: dict(sorted(v.items())) for k, v in sorted(self.sections.items())}
        out["params"] = {
            "gamma1": self.params.gamma1,
            "gamma2": self.params.gamma2,
            "F": self.params.F,
            "Delta": self.params.Delta,
        }
        trunc = {"n_max": self.n_max, "frame": self.frame}
        if self.center is not None:
            trunc["center_re"] = self.center.real
            trunc["center_im"] = self.center.imag
        out["truncation"] = trunc
        out["run"] = {"max_unknowns": self.max_unknowns}
        return out


def _float(section, key, raw):
    try:
        value = float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r} as a number") from exc
    if not math.isfinite(value):
        raise ConfigError(f"{section}.{key}", "must be finite")
    return value


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"unparseable: {exc}") from exc
    sections = {name: dict(parser[name]) for name in parser.sections()}

    if "params" not in sections:
        raise ConfigError("params", "section is required")
    raw = sections["params"]
    g1 = _float("params", "gamma1", raw.get("gamma1", "1"))
    if g1 <= 0:
        raise ConfigError("params.gamma1", f"must be > 0, got {g1}")
    values = {}
    for key in ("gamma2", "F", "Delta"):
        if key not in raw:
            raise ConfigError(f"params.{key}", "is required")
        values[key] = _float("params", key, raw[key]) / g1
    if values["gamma2"] <= 0:
        raise ConfigError("params.gamma2", f"must be > 0, got {values['gamma2'] * g1}")
    if values["F"] < 0:
        raise ConfigError("params.F", f"must be >= 0, got {values['F'] * g1}")
    unknown = set(raw) - {"gamma1", "gamma2", "F", "Delta"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"params.{key}", "unknown parameter")
    params = SystemParams(1.0, values["gamma2"], values["F"], values["Delta"])

    trunc = sections.get("truncation", {})
    try:
        n_max = int(trunc.get("n_max", "40"))
    except ValueError as exc:
        raise ConfigError("truncation.n_max", f"cannot parse {trunc.get('n_max')!r} as an integer") from exc
    if n_max < 2:
        raise ConfigError("truncation.n_max", f"must be >= 2, got {n_max}")
    frame = trunc.get("frame", "lab")
    if frame not in ("lab", "displaced"):
        raise ConfigError("truncation.frame", f"must be 'lab' or 'displaced', got {frame!r}")
    center = None
    if "center_re" in trunc or "center_im" in trunc:
        center = complex(
            _float("truncation", "center_re", trunc.get("center_re", "0")),
            _float("truncation", "center_im", trunc.get("center_im", "0")),
        )

    run = sections.get("run", {})
    max_unknowns = MAX_UNKNOWNS
    if "max_unknowns" in run:
        try:
            max_unknowns = int(run["max_unknowns"])
        except ValueError as exc:
            raise ConfigError("run.max_unknowns", "must be an integer") from exc
    workers = None
    if "workers" in run:
        try:
            workers = int(run["workers"])
        except ValueError as exc:
            raise ConfigError("run.workers", "must be an integer") from exc
        if workers < 1:
            raise ConfigError("run.workers", "must be >= 1")

    rest = {k: v for k, v in sections.items() if k not in ("params", "truncation", "run")}
    return RunConfig(params, n_max, frame, center, rest, max_unknowns, workers)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    return parse_config(text)
