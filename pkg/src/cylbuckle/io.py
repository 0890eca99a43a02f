"""Field snapshots, run configuration, CSV tables and run metadata."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import platform
import struct
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from .grid import DomainSpec, ScalarField

MAGIC = b"VKDW"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIddd")


class SnapshotError(OSError):
    pass


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


# --- binary field snapshots -------------------------------------------------


def write_snapshot(path: str | Path, field: ScalarField, lambda_tag: float = math.nan) -> None:
    s = field.spec
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, s.nx, s.ny, float(s.a), float(s.b), float(lambda_tag))
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_snapshot(path: str | Path) -> tuple[ScalarField, float]:
    """Returns (field, lambda_tag); lambda_tag is NaN when the writer had none."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header")
    magic, version, nx, ny, a, b, lam = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"{path}: unsupported format version {version}")
    n = (nx + 1) * ny
    body = raw[_HEADER.size:]
    if len(body) != 8 * n:
        raise SnapshotError(f"{path}: payload has {len(body)} bytes, header implies {8 * n}")
    vals = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(nx + 1, ny)
    try:
        spec = DomainSpec(a, b, nx, ny)
    except ValueError as exc:
        raise SnapshotError(f"{path}: invalid header ({exc})") from exc
    return ScalarField(spec, vals), lam


# --- run configuration ------------------------------------------------------


SEED_SHAPES = ("one_peak", "two_peaks_y", "two_peaks_x")
METRICS = ("l2", "x_preconditioned")


def _onoff(text: str) -> bool:
    t = text.strip().lower()
    if t not in ("on", "off"):
        raise ValueError("expected on or off")
    return t == "on"


def _choice(options):
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t
    return parse


def _pos_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise ValueError("must be a positive integer")
    return v


def _pos_float(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise ValueError("must be a positive number")
    return v


# config key -> (dataclass field, parser)
_KEYS = {
    "lambda": ("lam", _pos_float),
    "domain_a": ("domain_a", _pos_float),
    "domain_b": ("domain_b", _pos_float),
    "nx": ("nx", _pos_int),
    "ny": ("ny", _pos_int),
    "tol": ("tol", _pos_float),
    "metric": ("metric", _choice(METRICS)),
    "n_path": ("n_path", _pos_int),
    "seed_shape": ("seed_shape", _choice(SEED_SHAPES)),
    "symmetrize": ("symmetrize", _onoff),
    "max_iters": ("max_iters", _pos_int),
    "out_dir": ("out_dir", str),
}


def _default_out_dir() -> str:
    return os.environ.get("VKD_OUT_DIR", ".")


@dataclass
class RunConfig:
    lam: float = 1.5
    domain_a: float = 50.0
    domain_b: float = 50.0
    nx: int = 128
    ny: int = 128
    tol: float = 1e-6
    metric: str = "x_preconditioned"
    n_path: int = 41
    seed_shape: str = "one_peak"
    symmetrize: bool = True
    max_iters: int = 20_000
    out_dir: str = dataclasses.field(default_factory=_default_out_dir)

    @property
    def spec(self) -> DomainSpec:
        return DomainSpec(self.domain_a, self.domain_b, self.nx, self.ny)

    def as_dict(self) -> dict:
        """Values keyed by configuration-file key names."""
        inv = {v[0]: k for k, v in _KEYS.items()}
        d = {inv[k]: v for k, v in dataclasses.asdict(self).items()}
        d["symmetrize"] = "on" if self.symmetrize else "off"
        return d

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.as_dict().items())

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(**parse_config_text(text))

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: dict | None = None) -> "RunConfig":
        """Defaults < file values < overrides (CLI flags, already keyed by config name)."""
        values = {}
        if path is not None:
            values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        for key, raw in (overrides or {}).items():
            if raw is None:
                continue
            if key not in _KEYS:
                raise ConfigError(f"unknown key {key!r}")
            name, parse = _KEYS[key]
            try:
                values[name] = parse(raw) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        return cls(**values)


def parse_config_text(text: str) -> dict:
    """key = value lines; '#' starts a comment; unknown or repeated keys are errors."""
    out, seen = {}, set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key = value, got {body!r}", lineno)
        key, raw = (p.strip() for p in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        seen.add(key)
        name, parse = _KEYS[key]
        try:
            out[name] = parse(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
    return out


def parse_domain(text: str) -> tuple[float, float]:
    """'AxB' -> half-widths (A, B)."""
    parts = text.strip().lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"domain {text!r} is not of the form AxB")
    a, b = (float(p) for p in parts)
    if not (a > 0 and b > 0):
        raise ValueError(f"domain {text!r} must have positive half-widths")
    return a, b


def parse_float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValueError(f"cannot parse number list {text!r}") from None
    if not vals:
        raise ValueError("empty number list")
    return vals


# --- CSV tables -------------------------------------------------------------


BRANCH_COLUMNS = ("lambda", "level", "x_norm_sq", "fold_flag", "snapshot_path")
CURVE_COLUMNS = ("lambda", "load_ratio", "geom_ratio", "target", "value")


def write_csv(path: str | Path, columns: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(columns))
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return v


def read_branch_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames[:4]) != BRANCH_COLUMNS[:4]:
            raise ValueError(f"{path}: expected columns {', '.join(BRANCH_COLUMNS)}")
        rows = []
        for lineno, r in enumerate(reader, start=2):
            try:
                rows.append({"lambda": float(r["lambda"]), "level": float(r["level"]),
                             "x_norm_sq": float(r["x_norm_sq"]), "fold_flag": int(r["fold_flag"]),
                             "snapshot_path": r.get("snapshot_path") or ""})
            except (TypeError, ValueError):
                raise ValueError(f"{path}: line {lineno}: malformed branch row") from None
    return rows


# --- metadata sidecar -------------------------------------------------------


def module_versions() -> dict:
    import scipy

    from . import __version__

    return {"cylbuckle": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def sidecar_path(output: str | Path) -> Path:
    p = Path(output)
    return p.with_name(p.name + ".meta.json")


def write_metadata(output: str | Path, command: str, config: dict | None = None, **extra) -> Path:
    meta = {"command": command, "config": config or {}, "versions": module_versions()}
    meta.update(extra)
    path = sidecar_path(output)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if dataclasses.is_dataclass(o):
        return {f.name: getattr(o, f.name) for f in fields(o)}
    if isinstance(o, Path):
        return str(o)
    return str(o)
