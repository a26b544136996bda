"""ASCII snapshot format for grid functions and tabulated kernels.

Layout::

    # nch-field v1
    # nx=<int> ny=<int> X=<float> Y=<float> t=<float>
    <ny lines of nx values, %.17g, row j ascending>

Kernels use the same layout with the tag ``# nch-kernel v1``.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import GridFunction, PeriodicGrid

FIELD_TAG = "# nch-field v1"
KERNEL_TAG = "# nch-kernel v1"

_HEADER_RE = re.compile(
    r"^#\s*nx=(?P<nx>\S+)\s+ny=(?P<ny>\S+)\s+X=(?P<X>\S+)\s+Y=(?P<Y>\S+)\s+t=(?P<t>\S+)\s*$"
)


@dataclass(frozen=True)
class Snapshot:
    grid: PeriodicGrid
    values: np.ndarray
    time: float
    tag: str

    def field(self) -> GridFunction:
        return GridFunction(self.grid, self.values)


def format_snapshot(grid: PeriodicGrid, values: np.ndarray, time: float = 0.0, tag: str = FIELD_TAG) -> str:
    values = np.asarray(values, dtype=np.float64).reshape(grid.shape)
    out = io.StringIO()
    out.write(tag + "\n")
    out.write(
        f"# nx={grid.nx} ny={grid.ny} X={grid.half_width_x!r} "
        f"Y={grid.half_width_y!r} t={float(time)!r}\n"
    )
    for row in values:
        out.write(" ".join(f"{v:.17g}" for v in row))
        out.write("\n")
    return out.getvalue()


def write_field(path: str | os.PathLike, f: GridFunction, time: float = 0.0, tag: str = FIELD_TAG) -> None:
    if f.is_complex:
        raise ValueError("only real grid functions can be written")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_snapshot(f.grid, f.values, time, tag))


def parse_snapshot(text: str, expect_tag: str | None = FIELD_TAG, source: str = "<string>") -> Snapshot:
    lines = text.splitlines()
    if len(lines) < 2:
        raise ConfigError(f"{source}: truncated snapshot header")
    tag = lines[0].strip()
    if tag not in (FIELD_TAG, KERNEL_TAG):
        raise ConfigError(f"{source}:1: unknown snapshot tag {tag!r}")
    if expect_tag is not None and tag != expect_tag:
        raise ConfigError(f"{source}:1: expected {expect_tag!r}, found {tag!r}")
    m = _HEADER_RE.match(lines[1].strip())
    if m is None:
        raise ConfigError(f"{source}:2: malformed header line {lines[1]!r}")
    try:
        nx, ny = int(m["nx"]), int(m["ny"])
        grid = PeriodicGrid(float(m["X"]), float(m["Y"]), nx, ny)
        time = float(m["t"])
    except ValueError as exc:
        raise ConfigError(f"{source}:2: {exc}") from None
    body = [ln for ln in lines[2:] if ln.strip()]
    if len(body) != ny:
        raise ConfigError(f"{source}: expected {ny} data rows, found {len(body)}")
    values = np.empty((ny, nx))
    for j, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != nx:
            raise ConfigError(f"{source}:{j + 3}: expected {nx} values, found {len(parts)}")
        try:
            values[j] = [float(p) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"{source}:{j + 3}: {exc}") from None
    if not np.isfinite(values).all():
        raise ConfigError(f"{source}: non-finite values")
    return Snapshot(grid, values, time, tag)


def read_snapshot(path: str | os.PathLike, expect_tag: str | None = FIELD_TAG) -> Snapshot:
    with open(path, encoding="ascii") as fh:
        return parse_snapshot(fh.read(), expect_tag, source=os.fspath(path))


def read_field(path: str | os.PathLike) -> tuple[GridFunction, float]:
    snap = read_snapshot(path, FIELD_TAG)
    return snap.field(), snap.time
