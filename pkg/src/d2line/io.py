"""File formats: spectrum CSV, JSON run configs, fit reports and summaries.

Spectrum files look like::

    # axis=cm-1
    # config_digest=sha256:...      (optional extra comment lines)
    -599,12.5
    -597,13.25

Floats are written with 12 significant digits and LF line endings, so
files are byte-stable for a given input.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .ensemble import EnsembleConfig, FluctuationModel, OrientationDistribution
from .fitting import nm_to_wavenumber
from .optics import Analyzer, Depolarized, Geometry, NoAnalyzer

__all__ = [
    "Spectrum",
    "SpectrumFormatError",
    "ConfigError",
    "RunConfig",
    "fmt",
    "read_spectrum",
    "write_spectrum",
    "format_spectrum",
    "load_run_config",
    "parse_run_config",
    "config_digest",
    "file_digest",
    "dump_json",
    "RUN_CONFIG_SCHEMA",
]

AXES = ("cm-1", "nm")


class SpectrumFormatError(ValueError):
    """Malformed spectrum file; the message names the offending line."""


class ConfigError(ValueError):
    """Run configuration failed schema or semantic validation."""


def fmt(v: float) -> str:
    """12-significant-digit float formatting used by every output file."""
    s = format(float(v), ".12g")
    return "0" if s == "-0" else s


@dataclass(frozen=True, eq=False)
class Spectrum:
    x: np.ndarray
    y: np.ndarray
    axis: str = "cm-1"
    comments: tuple = ()

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}")
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))

    def __len__(self):
        return self.x.size

    def in_wavenumbers(self) -> "Spectrum":
        """Copy on an ascending cm^-1 axis (intensities are kept as sampled)."""
        if self.axis == "cm-1":
            return self
        k = nm_to_wavenumber(self.x)
        order = np.argsort(k)
        return Spectrum(k[order], self.y[order], "cm-1", self.comments)


def read_spectrum(path) -> Spectrum:
    """Parse a spectrum CSV. Raises ``SpectrumFormatError`` naming the bad line."""
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith("# axis="):
        raise SpectrumFormatError(f"{path}: line 1: missing '# axis=<nm|cm-1>' header")
    axis = lines[0][len("# axis=") :].strip()
    if axis not in AXES:
        raise SpectrumFormatError(f"{path}: line 1: unknown axis {axis!r}")
    xs, ys, comments = [], [], []
    direction = 0
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r").strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise SpectrumFormatError(f"{path}: line {lineno}: expected 'x,intensity', got {line!r}")
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            raise SpectrumFormatError(f"{path}: line {lineno}: non-numeric value in {line!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise SpectrumFormatError(f"{path}: line {lineno}: non-finite value in {line!r}")
        if xs:
            step = np.sign(x - xs[-1])
            if step == 0 or (direction and step != direction):
                raise SpectrumFormatError(f"{path}: line {lineno}: x values are not strictly monotone")
            direction = step
        xs.append(x)
        ys.append(y)
    if not xs:
        raise SpectrumFormatError(f"{path}: no data rows")
    return Spectrum(np.array(xs), np.array(ys), axis, tuple(comments))


def format_spectrum(x, y, axis: str = "cm-1", comments=()) -> str:
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    out = [f"# axis={axis}"]
    out += [f"# {c}" for c in comments]
    out += [f"{fmt(a)},{fmt(b)}" for a, b in zip(np.asarray(x), np.asarray(y))]
    return "\n".join(out) + "\n"


def write_spectrum(path, x, y, axis: str = "cm-1", comments=()) -> None:
    Path(path).write_text(format_spectrum(x, y, axis, comments), newline="\n")


def _round(obj):
    """Round floats to 12 significant digits; non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return float(fmt(v))
    return obj


def dump_json(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def file_digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["seed", "n_samples"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "n_samples": {"type": "integer", "minimum": 1},
        "static_B": {"type": "number"},
        "orientation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": ["fixed", "isotropic"]}, "axis": _VEC3},
        },
        "fluctuation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma_aniso": {"type": "number", "minimum": 0},
                "sigma_iso": {"type": "number", "minimum": 0},
                "mean_shift": {"type": "number"},
            },
        },
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["excitation", "detection"],
            "properties": {
                "excitation": _VEC3,
                "detection": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["mode"],
                    "properties": {
                        "mode": {"enum": ["analyzer", "no_analyzer", "depolarized"]},
                        "vector": _VEC3,
                        "direction": _VEC3,
                    },
                },
            },
        },
        "histogram": {
            "type": "object",
            "additionalProperties": False,
            "required": ["e_min", "e_max", "n_bins"],
            "properties": {
                "e_min": {"type": "number"},
                "e_max": {"type": "number"},
                "n_bins": {"type": "integer", "minimum": 2},
            },
        },
        "kernel_width": {"type": "number", "minimum": 0},
        "resolution_floor": {"type": "number", "exclusiveMinimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "sigmas": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "method": {"enum": ["sticks", "fit"]},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "spectrum": {"type": "string"},
                "summary": {"type": "string"},
                "contrast": {"type": "string"},
            },
        },
    },
}

# keys that do not change any computed number
_NON_PHYSICS_KEYS = ("threads", "output")


def config_digest(raw: dict) -> str:
    body = {k: v for k, v in raw.items() if k not in _NON_PHYSICS_KEYS}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    ensemble: EnsembleConfig
    raw: dict
    digest: str
    threads: int = 1
    sigmas: tuple | None = None
    method: str = "sticks"
    outputs: dict = field(default_factory=dict)


def _geometry(g: dict | None) -> Geometry:
    if g is None:
        return Geometry(np.array([0.0, 0.0, 1.0]), Analyzer(np.array([0.0, 0.0, 1.0])))
    det = g["detection"]
    direction = np.asarray(det.get("direction", [0.0, 1.0, 0.0]), dtype=float)
    mode = det["mode"]
    if mode == "analyzer":
        if "vector" not in det:
            raise ConfigError("analyzer detection needs a 'vector'")
        detection = Analyzer(np.asarray(det["vector"], dtype=float), direction)
    elif mode == "no_analyzer":
        detection = NoAnalyzer(direction)
    else:
        detection = Depolarized()
    return Geometry(np.asarray(g["excitation"], dtype=float), detection)


def parse_run_config(raw: dict, base_dir=None) -> RunConfig:
    """Validate a config dict against the schema and build the ensemble config."""
    try:
        jsonschema.validate(raw, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    try:
        o = raw.get("orientation", {"kind": "fixed"})
        orientation = OrientationDistribution(o["kind"], tuple(o.get("axis", (0.0, 0.0, 1.0))))
        fluct = FluctuationModel(**raw.get("fluctuation", {}))
        h = raw.get("histogram")
        ens = EnsembleConfig(
            n_samples=raw["n_samples"],
            seed=raw["seed"],
            static_B=float(raw.get("static_B", 0.0)),
            orientation=orientation,
            fluctuation=fluct,
            geometry=_geometry(raw.get("geometry")),
            histogram=None if h is None else (h["e_min"], h["e_max"], h["n_bins"]),
            kernel_width=float(raw.get("kernel_width", 0.0)),
            resolution_floor=float(raw.get("resolution_floor", 1e-6)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"config error: {exc}") from None
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    outputs = {k: base / v for k, v in raw.get("output", {}).items()}
    sigmas = tuple(float(s) for s in raw["sigmas"]) if "sigmas" in raw else None
    return RunConfig(
        ensemble=ens,
        raw=raw,
        digest=config_digest(raw),
        threads=raw.get("threads", 1),
        sigmas=sigmas,
        method=raw.get("method", "sticks"),
        outputs=outputs,
    )


def load_run_config(path) -> RunConfig:
    """Read and validate a JSON config; relative output paths resolve against its folder."""
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_run_config(raw, path.parent)
