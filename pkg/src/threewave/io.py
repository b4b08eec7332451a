"""Config parsing, binary field snapshots, and deterministic CSV histories.

The snapshot format is fixed little-endian: a 64-byte header (magic "NLS3",
format version, grid and model parameters, time) followed by the three
components as interleaved re/im float64 pairs in row-major order. Round
trips are bit-identical; histories render every float with 17 significant
digits so CSV bytes are reproducible.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from .grid import SpectralGrid
from .model import ModelParams, ParameterError
from .dynamics import EvolutionState, HISTORY_COLUMNS


MAGIC = b"NLS3"
FORMAT_VERSION = 1
HEADER_STRUCT = struct.Struct("<4sIII6d")  # 64 bytes exactly
assert HEADER_STRUCT.size == 64


class ConfigError(ValueError):
    pass


class SnapshotError(ValueError):
    pass


@dataclass
class RunConfig:
    dim: int = 1
    points: int = 256
    box_half_length: float = 20.0
    p: float = 6.0
    alpha: float = 1.0
    a1: float = 0.5
    a2: float = 0.5
    dt: float = 1e-3
    horizon: float = 10.0
    seed: int = 0
    solver_step_size: float = 0.5
    solver_grad_tol: float = 1e-8
    solver_max_iters: int = 60000
    experiment: str = ""
    output_dir: str = ""
    snapshot_every: int = 0

    KEY_MAP = {
        "dim": ("dim", int),
        "points": ("points", int),
        "box_half_length": ("box_half_length", float),
        "p": ("p", float),
        "alpha": ("alpha", float),
        "a1": ("a1", float),
        "a2": ("a2", float),
        "dt": ("dt", float),
        "horizon": ("horizon", float),
        "seed": ("seed", int),
        "solver.step_size": ("solver_step_size", float),
        "solver.grad_tol": ("solver_grad_tol", float),
        "solver.max_iters": ("solver_max_iters", int),
        "experiment": ("experiment", str),
        "output_dir": ("output_dir", str),
        "snapshot_every": ("snapshot_every", int),
    }

    def set_key(self, key: str, raw: str):
        if key not in self.KEY_MAP:
            raise ConfigError(f"unknown config key {key!r}")
        attr, conv = self.KEY_MAP[key]
        try:
            setattr(self, attr, conv(raw))
        except ValueError as exc:
            raise ConfigError(f"malformed value for {key!r}: {raw!r} ({exc})") from None

    def validate(self):
        """Physical keys go through the model invariants before any compute."""
        try:
            self.model_params()
            self.grid()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be nonnegative, got {self.horizon}")
        if self.snapshot_every < 0:
            raise ConfigError(f"snapshot_every must be nonnegative, got {self.snapshot_every}")
        if min(self.solver_step_size, self.solver_grad_tol) <= 0 or self.solver_max_iters <= 0:
            raise ConfigError("solver.* entries must be positive")
        return self

    def model_params(self) -> ModelParams:
        return ModelParams(dim=self.dim, p=self.p, alpha=self.alpha, a1=self.a1, a2=self.a2)

    def grid(self) -> SpectralGrid:
        return SpectralGrid(self.dim, self.points, self.box_half_length)

    def solver_config(self):
        from .groundstate import SolverConfig

        return SolverConfig(step_size=self.solver_step_size, grad_tol=self.solver_grad_tol,
                            max_iters=self.solver_max_iters, seed=self.seed)

    def echo(self) -> dict:
        """Flat key-value echo with the documented key spelling."""
        rev = {attr: key for key, (attr, _) in self.KEY_MAP.items()}
        out = {}
        for f in dc_fields(self):
            if f.name in rev:
                out[rev[f.name]] = getattr(self, f.name)
        return out


def load_config(path) -> RunConfig:
    cfg = RunConfig()
    text = Path(path).read_text()
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        cfg.set_key(key.strip(), raw.strip())
    return cfg.validate()


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, _, raw = item.partition("=")
        cfg.set_key(key.strip(), raw.strip())
    return cfg.validate()


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def save_snapshot(path, params: ModelParams, state: EvolutionState):
    grid = state.grid
    header = HEADER_STRUCT.pack(
        MAGIC, FORMAT_VERSION, grid.dim, grid.points_per_dim,
        grid.box_half_length, params.p, params.alpha, params.a1, params.a2, state.time,
    )
    payload = np.ascontiguousarray(state.fields, dtype=np.dtype("<c16")).tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name)
    with os.fdopen(fd, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)


def load_snapshot(path, allow_migration: bool = False) -> tuple[ModelParams, EvolutionState]:
    blob = Path(path).read_bytes()
    if len(blob) < HEADER_STRUCT.size:
        raise SnapshotError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, dim, points, L, p, alpha, a1, a2, t = HEADER_STRUCT.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION and not allow_migration:
        raise SnapshotError(
            f"{path}: format version {version} != {FORMAT_VERSION}; pass the migration flag to force"
        )
    grid = SpectralGrid(dim, points, L)
    expected = 3 * grid.size * 16
    payload = blob[HEADER_STRUCT.size:]
    if len(payload) != expected:
        raise SnapshotError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    fields = np.frombuffer(payload, dtype=np.dtype("<c16")).astype(np.complex128)
    fields = fields.reshape(3, *grid.shape)
    params = ModelParams(dim=dim, p=p, alpha=alpha, a1=a1, a2=a2)
    state = EvolutionState(grid=grid, fields=fields.copy(), time=t)
    return params, state


# ---------------------------------------------------------------------------
# histories
# ---------------------------------------------------------------------------


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_history_csv(path, history) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(HISTORY_COLUMNS)]
    for row in history:
        lines.append(",".join(format_float(v) for v in row))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name)
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_history_csv(path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text or text[0].split(",") != list(HISTORY_COLUMNS):
        raise ConfigError(f"{path}: not a history CSV (bad column header)")
    return np.array([[float(v) for v in line.split(",")] for line in text[1:]])
