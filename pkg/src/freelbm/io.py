"""Flat-text configuration, metrics CSV, legacy VTK field dumps and run manifests."""
from __future__ import annotations

import dataclasses
import math
import os
from pathlib import Path

import numpy as np

from .cases import CaseConfig
from .errors import ConfigError
from .grid import BULK
from .units import DimensionlessGroup

CSV_HEADER = "step,tbar,D,theta_deg,fragments,mass_c1,sum_rho,sum_phi,free_energy"
CSV_FIELDS = CSV_HEADER.split(",")
GROUP_KEYS = ("re", "ca", "pe", "ch")
ALIASES = {"case": "kind", "shear_rate": "rate", "extension_rate": "rate"}


class OutputError(OSError):
    """IO failure with the offending path attached."""

    def __init__(self, path, err):
        super().__init__(f"{path}: {err}")
        self.path = str(path)


def fmt(x) -> str:
    """Full-precision text form used in every output file."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    if isinstance(x, (tuple, list)):
        return ", ".join(fmt(v) for v in x)
    return str(x)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines with ``#`` comments; later keys override earlier ones."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = val
    return out


def _coerce(name: str, typ, val: str):
    typ = str(typ)
    try:
        if "tuple" in typ:
            return tuple(float(v) for v in val.replace(",", " ").split())
        if "bool" in typ:
            low = val.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(val)
        if "int" in typ and "float" not in typ:
            return int(float(val)) if float(val).is_integer() else int(val)
        if "float" in typ:
            if "None" in typ and val.lower() in ("none", "auto", ""):
                return None
            return float(val)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {val!r}") from None
    return val


def config_from_dict(raw: dict) -> CaseConfig:
    raw = {ALIASES.get(k, k): v for k, v in raw.items() if not k.startswith("derived.")}
    missing = [k for k in ("kind", "a", *GROUP_KEYS) if k not in raw]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    groups = DimensionlessGroup(**{k: _coerce(k, "float", raw.pop(k)) for k in GROUP_KEYS})
    fields = {f.name: f for f in dataclasses.fields(CaseConfig)}
    kwargs = {"groups": groups}
    for key, val in raw.items():
        if key not in fields or key in ("groups", "source"):
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, fields[key].type, val)
    kwargs["source"] = dict(raw)
    return CaseConfig(**kwargs)


def load_config(path) -> CaseConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise OutputError(path, err) from err
    return config_from_dict(parse_config_text(text))


def config_to_text(config: CaseConfig) -> str:
    lines = [f"case = {config.kind}", f"a = {fmt(config.a)}"]
    for k in GROUP_KEYS:
        lines.append(f"{k} = {fmt(getattr(config.groups, k))}")
    for f in dataclasses.fields(CaseConfig):
        if f.name in ("kind", "a", "groups", "source"):
            continue
        val = getattr(config, f.name)
        lines.append(f"{f.name} = {'auto' if val is None else fmt(val)}")
    return "\n".join(lines) + "\n"


def _open_write(path):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="\n")
    except OSError as err:
        raise OutputError(path, err) from err


def metrics_row(m) -> str:
    return ",".join(fmt(getattr(m, k)) for k in CSV_FIELDS)


class MetricsWriter:
    """Streams metric rows to CSV, flushing each row so partial runs stay readable."""

    def __init__(self, path):
        self.path = str(path)
        self._fh = _open_write(path)
        self._write(CSV_HEADER + "\n")

    def _write(self, text):
        try:
            self._fh.write(text)
            self._fh.flush()
        except OSError as err:
            raise OutputError(self.path, err) from err

    def write(self, m):
        self._write(metrics_row(m) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_metrics_csv(path, metrics) -> str:
    with MetricsWriter(path) as w:
        for m in metrics:
            w.write(m)
    return str(path)


def read_metrics_csv(path) -> dict:
    try:
        data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    except OSError as err:
        raise OutputError(path, err) from err
    data = np.atleast_1d(data)
    return {k: np.asarray(data[k]) for k in data.dtype.names}


def _vtk_values(a: np.ndarray) -> str:
    # VTK structured points run x fastest
    flat = np.asarray(a, dtype=float).reshape(a.shape).transpose().reshape(-1)
    return "\n".join(format(v, ".17g") for v in flat.tolist())


def write_vtk(path, state, grid, step: int | None = None, tbar: float | None = None) -> str:
    """Legacy VTK STRUCTURED_POINTS (ASCII) with phi, rho, node type and u."""
    dims = tuple(grid.dims)
    d = len(dims)
    vdims = dims + (1,) * (3 - d)
    n = int(np.prod(dims))
    step = state.time if step is None else step
    title = f"freelbm step={int(step)}"
    if tbar is not None:
        title += f" tbar={fmt(tbar)}"
    title += " periodic=" + "".join("1" if p else "0" for p in grid.periodic)
    u = np.zeros((3,) + dims)
    u[:d] = state.u
    uflat = np.stack([u[k].transpose().reshape(-1) for k in range(3)], axis=1)
    parts = [
        "# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(v) for v in vdims), "ORIGIN 0 0 0", "SPACING 1 1 1",
        f"POINT_DATA {n}",
        "SCALARS phi double 1", "LOOKUP_TABLE default", _vtk_values(state.phi),
        "SCALARS rho double 1", "LOOKUP_TABLE default", _vtk_values(state.rho),
        "SCALARS node_type int 1", "LOOKUP_TABLE default",
        "\n".join(str(int(v)) for v in grid.mask.transpose().reshape(-1).tolist()),
        "VECTORS u double",
        "\n".join(" ".join(format(v, ".17g") for v in row) for row in uflat.tolist()),
    ]
    with _open_write(path) as fh:
        try:
            fh.write("\n".join(parts) + "\n")
        except OSError as err:
            raise OutputError(path, err) from err
    return str(path)


def read_vtk(path) -> dict:
    """Inverse of :func:`write_vtk`: dims, periodic flags, step and the stored arrays."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise OutputError(path, err) from err
    if not lines or not lines[0].startswith("# vtk"):
        raise OutputError(path, "not a legacy VTK file")
    meta = dict(tok.split("=", 1) for tok in lines[1].split() if "=" in tok)
    out = {"step": int(meta.get("step", 0))}
    if "tbar" in meta:
        out["tbar"] = float(meta["tbar"])
    i = 2
    vdims = None
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        if head[0] == "DIMENSIONS":
            vdims = tuple(int(v) for v in head[1:4])
        elif head[0] == "POINT_DATA":
            n = int(head[1])
        elif head[0] == "SCALARS":
            name = head[1]
            i += 2  # skip LOOKUP_TABLE
            vals = np.array([float(v) for v in lines[i:i + n]])
            out[name] = vals
            i += n
            continue
        elif head[0] == "VECTORS":
            name = head[1]
            i += 1
            out[name] = np.array([[float(v) for v in ln.split()] for ln in lines[i:i + n]])
            i += n
            continue
        i += 1
    if vdims is None:
        raise OutputError(path, "missing DIMENSIONS")
    dims = tuple(v for v in vdims if v > 1) if vdims[2] == 1 else vdims
    d = len(dims)
    out["dims"] = dims
    per = meta.get("periodic", "0" * d)
    out["periodic"] = tuple(c == "1" for c in per[:d])

    def grid_shape(a):
        return a.reshape(vdims[::-1]).transpose().reshape(dims)

    for key in ("phi", "rho"):
        if key in out:
            out[key] = grid_shape(out[key])
    if "node_type" in out:
        out["node_type"] = grid_shape(out["node_type"]).astype(np.int8)
        out["fluid"] = out["node_type"] == BULK
    if "u" in out:
        out["u"] = np.stack([grid_shape(out["u"][:, k]) for k in range(d)])
    return out


def write_manifest(path, config: CaseConfig, derived: dict | None = None) -> str:
    """Resolved configuration plus ``derived.*`` lines; loadable with :func:`load_config`."""
    text = "# freelbm run manifest\n" + config_to_text(config)
    for k, v in (derived or {}).items():
        text += f"derived.{k} = {fmt(v)}\n"
    with _open_write(path) as fh:
        fh.write(text)
    return str(path)


def ensure_dir(path) -> Path:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as err:
        raise OutputError(path, err) from err
    return Path(path)
