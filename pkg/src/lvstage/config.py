"""Run configuration: line-oriented ``key = value`` text.

``#`` starts a comment, ``[section]`` headers group keys, and keys above the
first header belong to ``[run]``.  Every key is typed and range-checked at
parse time; unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, LvstageError
from .grid import KERNEL_TERMS, Grid
from .model import ModelParams
from .profiles import parse_profile
from .simulate import CONV_TOL, DWELL, Variant

_REQUIRED = object()


def _float(lo=None, hi=None, strict_lo=False):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise ValueError(f"expected a number, got {text!r}") from None
        if not math.isfinite(v):
            raise ValueError("must be finite")
        if lo is not None and (v < lo or (strict_lo and v == lo)):
            raise ValueError(f"must be {'>' if strict_lo else '>='} {lo:g}, got {v:g}")
        if hi is not None and v > hi:
            raise ValueError(f"must be <= {hi:g}, got {v:g}")
        return v
    return conv


def _int(lo=None):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise ValueError(f"expected an integer, got {text!r}") from None
        if lo is not None and v < lo:
            raise ValueError(f"must be >= {lo}, got {v}")
        return v
    return conv


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _profile(text):
    parse_profile(text)  # raises with offset on bad syntax
    return text.strip()


def _floats(lo=None):
    conv = _float(lo)

    def parse(text):
        vals = [conv(t) for t in text.replace(";", ",").split(",") if t.strip()]
        if not vals:
            raise ValueError("expected a comma-separated list of numbers")
        return vals
    return parse


def _pairs(text):
    out = []
    for item in text.split(","):
        if not item.strip():
            continue
        parts = item.split(":")
        if len(parts) != 2:
            raise ValueError(f"expected tau1:tau2 pairs, got {item.strip()!r}")
        a, b = (_float(0)(p) for p in parts)
        out.append((a, b))
    return out


def _choice(*options):
    def conv(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return conv


pos = _float(0, strict_lo=True)
nonneg = _float(0)

SCHEMA = {
    "run": {
        "seed": (_int(0), 0),
        "tol_neutral": (pos, 1e-7),
    },
    "grid": {
        "length": (pos, math.pi),
        "n": (_int(3), 201),
    },
    "model": {
        "d1": (pos, _REQUIRED),
        "d2": (pos, _REQUIRED),
        "tau1": (nonneg, 0.0),
        "tau2": (nonneg, 0.0),
        "gamma1": (nonneg, 0.0),
        "gamma2": (nonneg, 0.0),
        "b": (pos, 1.0),
        "c": (pos, 1.0),
        "m1": (_profile, "1"),
        "m2": (_profile, "1"),
        "relaxed": (_bool, False),
    },
    "simulation": {
        "variant": (_choice(*(v.value for v in Variant)), "local"),
        "dt": (pos, 0.01),
        "t_end": (pos, 100.0),
        "u0": (_profile, "1"),
        "v0": (_profile, "1"),
        "dtilde1": (nonneg, 0.0),
        "dtilde2": (nonneg, 0.0),
        "kernel_terms": (_int(1), KERNEL_TERMS),
        "snapshot_every": (pos, 1.0),
        "conv_tol": (pos, CONV_TOL),
        "dwell": (pos, DWELL),
        "stop_on_convergence": (_bool, True),
    },
    "eigen": {
        "d": (pos, _REQUIRED),
        "w": (_profile, _REQUIRED),
        "tau": (nonneg, 0.0),
        "gamma": (nonneg, 0.0),
        "m": (_profile, "0"),
        "q": (_profile, "0"),
    },
    "example_a": {
        "taus": (_floats(0), [0.2, 0.4, 0.6, 0.8, 1.0]),
        "simulate": (_bool, True),
        "t_end": (pos, 600.0),
    },
    "example_b": {
        "tau1": (pos, 1.0),
        "margin": (pos, 0.2),
        "simulate": (_bool, True),
        "t_end": (pos, 1500.0),
    },
    "harmless": {
        "pairs": (_pairs, [(0.5, 0.8), (2.0, 1.0)]),
        "t_end": (pos, 300.0),
    },
    "sweep": {
        "n_points": (_int(0), 50),
        "d_min": (pos, 0.05),
        "d_max": (pos, 5.0),
        "tau_min": (nonneg, 0.05),
        "tau_max": (nonneg, 1.0),
        "gamma_max": (nonneg, 2.0),
        "coef_min": (pos, 0.1),  # lower bound for sampled b and c
        "t_end": (pos, 2000.0),
    },
}


@dataclass(frozen=True)
class RunConfig:
    values: dict  # section -> key -> parsed value (defaults filled)
    source: str | None = None

    def __getitem__(self, section):
        return self.values[section]

    def require(self, section: str) -> dict:
        sec = self.values[section]
        missing = [k for k, v in sec.items() if v is _REQUIRED]
        if missing:
            raise ConfigError(f"{section}.{missing[0]}", "required key is missing")
        return sec

    def grid(self) -> Grid:
        g = self.values["grid"]
        try:
            return Grid(g["length"], g["n"])
        except LvstageError as exc:
            raise ConfigError("grid", str(exc)) from exc

    def model(self) -> ModelParams:
        m = self.require("model")
        try:
            return ModelParams(**m)
        except LvstageError as exc:
            raise ConfigError("model", str(exc)) from exc

    def resolved(self) -> dict:
        """Echo of the configuration with defaults filled in (required-but-missing keys omitted)."""
        out = {}
        for sec, keys in self.values.items():
            out[sec] = {
                k: (list(map(list, v)) if k == "pairs" else v)
                for k, v in keys.items() if v is not _REQUIRED
            }
        return out


def parse_config(text: str, source: str | None = None) -> RunConfig:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",),
        strict=True, empty_lines_in_values=False,
    )
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text, source=source or "<config>")
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{exc.section}.{exc.option}", "key given twice") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(exc.section, "section given twice") from None
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None

    values = {sec: {k: default for k, (_, default) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(sec, "unknown section")
        for key, raw in parser.items(sec, raw=True):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{sec}.{key}" if sec != "run" else key, "unknown key")
            conv = SCHEMA[sec][key][0]
            try:
                values[sec][key] = conv(raw)
            except (ValueError, LvstageError) as exc:
                raise ConfigError(key, str(exc)) from None
    return RunConfig(values, source)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
