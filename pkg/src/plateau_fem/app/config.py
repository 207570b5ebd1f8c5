"""Run configuration: flat ``key = value`` files merged with command-line flags."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..admm import AdmmParams


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# shape parameters accepted per kind
SHAPE_PARAMS = {
    "sphere": {"radius"},
    "donut": {"R", "r"},
    "croissant": {"R", "r", "L"},
    "peanut": {"lobe_radius", "offset", "blend"},
    "custom": {"path"},
}

ALIASES = {"iterations": "iters", "gamma-m": "gamma_m", "gamma-c": "gamma_c", "log-every": "log_every", "no-vtk": "no_vtk"}


@dataclass(frozen=True)
class RunConfig:
    shape: str = "sphere"
    shape_params: dict = field(default_factory=dict)
    beta: tuple = ()
    phi: tuple = (0.0,)
    psi: tuple = (0.0,)
    admm: AdmmParams = field(default_factory=AdmmParams)
    subdiv: Optional[tuple] = None
    box: Optional[float] = None  # None: twice the circumradius of the shape
    msh: Optional[str] = None
    out: str = "out"
    log_every: int = 100
    vtk: bool = True
    cut_out: bool = False

    def sweep_points(self):
        """(beta, phi, psi) triples, orientations outermost so each H is set up once."""
        return [(b, f, s) for f in self.phi for s in self.psi for b in self.beta]


def _floats(key, text, *, nonneg=False):
    text = text.strip().strip("[]()")
    if not text:
        return ()
    try:
        vals = tuple(float(eval_number(t)) for t in text.replace(";", ",").split(",") if t.strip())
    except ValueError:
        raise ConfigError(key, f"expected a number or comma-separated list, got {text!r}") from None
    if any(not math.isfinite(v) for v in vals):
        raise ConfigError(key, "values must be finite")
    if nonneg and any(v < 0 for v in vals):
        raise ConfigError(key, f"values must be nonnegative, got {text!r}")
    return vals


def eval_number(text: str) -> float:
    """Parse a float, also accepting multiples of pi such as ``pi/2`` or ``0.25*pi``."""
    t = text.strip().lower().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("*pi", "").replace("pi", "") or "1"
    value = (-1.0 if coef == "-" else float(coef)) * math.pi
    return value / float(den) if den else value


def _one(key, text, kind=float, *, positive=False, nonneg=False):
    try:
        v = kind(eval_number(text)) if kind is float else kind(text.strip())
    except ValueError:
        raise ConfigError(key, f"invalid value {text!r}") from None
    if positive and not v > 0:
        raise ConfigError(key, f"must be positive, got {text!r}")
    if nonneg and v < 0:
        raise ConfigError(key, f"must be nonnegative, got {text!r}")
    return v


def _bool(key, text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {text!r}")


def read_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        entries[key.strip()] = value.strip()
    return entries


def build_config(entries: dict) -> RunConfig:
    """Validate raw string entries and fill in defaults."""
    entries = {ALIASES.get(k, k).replace("-", "_"): v for k, v in entries.items() if v is not None}
    shape = str(entries.pop("shape", "sphere")).strip().lower()
    if shape not in SHAPE_PARAMS:
        raise ConfigError("shape", f"unknown shape {shape!r}; expected one of {sorted(SHAPE_PARAMS)}")
    shape_params = {}
    for key in SHAPE_PARAMS[shape]:
        if key in entries:
            text = entries.pop(key)
            shape_params[key] = str(text) if key == "path" else _one(key, str(text), positive=True)
    if shape == "custom" and "path" not in shape_params:
        raise ConfigError("path", "shape 'custom' needs a level-set file")

    kw = {}
    admm_kw = {}
    for key, text in list(entries.items()):
        text = str(text)
        if key == "beta":
            kw["beta"] = _floats(key, text, nonneg=True)
        elif key in ("phi", "psi"):
            kw[key] = _floats(key, text) or (0.0,)
        elif key == "iters":
            admm_kw["iterations"] = _one(key, text, int, nonneg=True)
        elif key in ("gamma_m", "gamma_c", "w_E", "eps"):
            admm_kw[key] = _one(key, text, positive=True)
        elif key == "alpha":
            a = _one(key, text)
            if not 1.0 <= a < 2.0:
                raise ConfigError(key, f"must lie in [1, 2), got {text!r}")
            admm_kw[key] = a
        elif key == "d_gamma":
            admm_kw[key] = None if text.strip().lower() in ("h", "auto") else _one(key, text, nonneg=True)
        elif key == "tol":
            admm_kw[key] = None if text.strip().lower() in ("none", "") else _one(key, text, positive=True)
        elif key in ("u0_profile", "u0_shift"):
            admm_kw[key] = text.strip()
        elif key == "subdiv":
            try:
                n = tuple(int(t) for t in text.split(","))
            except ValueError:
                raise ConfigError(key, f"expected NX,NY,NZ, got {text!r}") from None
            if len(n) == 1:
                n = n * 3
            if len(n) != 3 or min(n) < 1:
                raise ConfigError(key, f"expected three positive integers, got {text!r}")
            kw[key] = n
        elif key == "box":
            kw[key] = _one(key, text, positive=True)
        elif key in ("msh", "out"):
            kw[key] = text.strip()
        elif key == "log_every":
            kw[key] = _one(key, text, int, nonneg=True)
        elif key == "no_vtk":
            kw["vtk"] = not _bool(key, text)
        elif key in ("vtk", "cut_out"):
            kw[key] = _bool(key, text)
        else:
            raise ConfigError(key, "unknown key")

    if "subdiv" in kw and "msh" in kw:
        raise ConfigError("msh", "exactly one mesh source: give either subdiv or msh")
    if "msh" not in kw:
        kw.setdefault("subdiv", (32, 32, 32))
    try:
        admm = AdmmParams(**admm_kw)
    except ValueError as err:
        raise ConfigError("admm", str(err)) from None
    return RunConfig(shape=shape, shape_params=shape_params, admm=admm, **kw)


def parse_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Config from an optional file, with ``overrides`` (e.g. CLI flags) taking precedence."""
    entries = read_config_file(path) if path is not None else {}
    if overrides:
        entries.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(entries)


def with_admm(config: RunConfig, **changes) -> RunConfig:
    return dataclasses.replace(config, admm=dataclasses.replace(config.admm, **changes))
