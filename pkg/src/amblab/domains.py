"""Concentration regions in the time-frequency plane and their rasterization.

A region is described analytically (balls, rectangles, annuli and finite
unions/differences of those) or by a 0/1 mask file.  Rasterization uses the
cell-center rule: cell ``(k, l)`` belongs to the mask iff ``(t_k, omega_l)``
satisfies the region predicate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DomainOutsideGrid, EmptyDomain, GridMismatch, SchemaError
from .tf import PhasePoint, TimeGrid


@dataclass(frozen=True)
class Ball:
    center: PhasePoint
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("ball radius must be positive")

    def contains(self, x, w):
        return (x - self.center.x) ** 2 + (w - self.center.omega) ** 2 < self.r ** 2

    def bbox(self):
        c, r = self.center, self.r
        return c.x - r, c.x + r, c.omega - r, c.omega + r


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    w0: float
    w1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.w0 < self.w1):
            raise ValueError("rectangle needs x0 < x1 and w0 < w1")

    def contains(self, x, w):
        return (x >= self.x0) & (x < self.x1) & (w >= self.w0) & (w < self.w1)

    def bbox(self):
        return self.x0, self.x1, self.w0, self.w1


@dataclass(frozen=True)
class Annulus:
    center: PhasePoint
    r_in: float
    r_out: float

    def __post_init__(self):
        if not (0 < self.r_in < self.r_out):
            raise ValueError("annulus needs 0 < r_in < r_out")

    def contains(self, x, w):
        d2 = (x - self.center.x) ** 2 + (w - self.center.omega) ** 2
        return (d2 >= self.r_in ** 2) & (d2 <= self.r_out ** 2)

    def bbox(self):
        c, r = self.center, self.r_out
        return c.x - r, c.x + r, c.omega - r, c.omega + r


@dataclass(frozen=True)
class Union_:
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("union of no regions")
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, x, w):
        out = self.parts[0].contains(x, w)
        for p in self.parts[1:]:
            out = out | p.contains(x, w)
        return out

    def bbox(self):
        boxes = np.array([p.bbox() for p in self.parts])
        return boxes[:, 0].min(), boxes[:, 1].max(), boxes[:, 2].min(), boxes[:, 3].max()


@dataclass(frozen=True)
class Difference:
    base: "DomainSpec"
    cut: "DomainSpec"

    def contains(self, x, w):
        return self.base.contains(x, w) & ~self.cut.contains(x, w)

    def bbox(self):
        return self.base.bbox()


@dataclass(frozen=True)
class MaskFile:
    path: str


DomainSpec = Union[Ball, Rect, Annulus, Union_, Difference, MaskFile]


@dataclass(frozen=True, eq=False)
class DomainMask:
    grid: TimeGrid
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.grid.n, self.grid.n):
            raise GridMismatch(f"mask shape {m.shape} does not match grid size {self.grid.n}")
        if not m.any():
            raise EmptyDomain("domain contains no grid cell")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "rows", np.flatnonzero(m.any(axis=1)))

    @property
    def cell_area(self) -> float:
        return self.grid.cell_area

    def measure(self) -> float:
        return measure(self)


def rasterize(spec: DomainSpec, grid: TimeGrid) -> DomainMask:
    if isinstance(spec, MaskFile):
        from .io import read_mask

        mask = read_mask(spec.path)
        if mask.grid != grid:
            raise GridMismatch(f"mask file grid {mask.grid} differs from {grid}")
        return mask
    x0, x1, w0, w1 = spec.bbox()
    tlo, thi = grid.time_box
    flo, fhi = grid.freq_box
    if x0 < tlo or x1 > thi or w0 < flo or w1 > fhi:
        raise DomainOutsideGrid(
            f"domain box [{x0}, {x1}] x [{w0}, {w1}] exceeds the grid box "
            f"[{tlo}, {thi}) x [{flo}, {fhi})"
        )
    X, W = np.meshgrid(grid.t, grid.omega, indexing="ij")
    return DomainMask(grid, spec.contains(X, W))


def measure(mask: DomainMask) -> float:
    return float(np.count_nonzero(mask.mask) * mask.cell_area)


def full_mask(grid: TimeGrid) -> DomainMask:
    return DomainMask(grid, np.ones((grid.n, grid.n), dtype=bool))


# Local probe used when the origin sits on the boundary of a subtracted set.
_PROBE_RADII = (1e-6, 3e-7, 1e-7)
_PROBE_ANGLES = np.linspace(0, 2 * np.pi, 720, endpoint=False)


def origin_density_positive(spec: DomainSpec) -> Optional[bool]:
    """Whether every ball around the origin meets the region in positive measure.

    Mask files give ``None`` (unknown): a raster cannot resolve arbitrarily
    small balls.
    """
    if isinstance(spec, MaskFile):
        return None
    if isinstance(spec, Ball):
        return spec.center.norm() <= spec.r
    if isinstance(spec, Rect):
        return spec.x0 <= 0 <= spec.x1 and spec.w0 <= 0 <= spec.w1
    if isinstance(spec, Annulus):
        return spec.r_in <= spec.center.norm() <= spec.r_out
    if isinstance(spec, Union_):
        return any(origin_density_positive(p) for p in spec.parts)
    if isinstance(spec, Difference):
        if not origin_density_positive(spec.base):
            return False
        if _origin_interior(spec.cut):
            return False
        if not origin_density_positive(spec.cut):
            return True
        return _probe_origin(spec)
    raise TypeError(f"unknown domain spec {spec!r}")


def _origin_interior(spec: DomainSpec) -> bool:
    if isinstance(spec, Ball):
        return spec.center.norm() < spec.r
    if isinstance(spec, Rect):
        return spec.x0 < 0 < spec.x1 and spec.w0 < 0 < spec.w1
    if isinstance(spec, Annulus):
        return spec.r_in < spec.center.norm() < spec.r_out
    if isinstance(spec, Union_):
        if any(_origin_interior(p) for p in spec.parts):
            return True
        return not _probe_origin(Difference(_Everything(), spec))
    if isinstance(spec, Difference):
        return _origin_interior(spec.base) and not origin_density_positive(spec.cut)
    return False


@dataclass(frozen=True)
class _Everything:
    def contains(self, x, w):
        return np.ones(np.shape(x), dtype=bool)


def _probe_origin(spec) -> bool:
    # Boundaries of all primitives are lines or circles, which are straight at
    # these scales, so a dense ring of probes resolves the local picture.
    for r in _PROBE_RADII:
        for frac in (1.0, 0.5):
            x = frac * r * np.cos(_PROBE_ANGLES)
            w = frac * r * np.sin(_PROBE_ANGLES)
            if np.any(spec.contains(x, w)):
                return True
    return False


# -- 1-D domains for the time-correlation objective ---------------------------

@dataclass(frozen=True)
class Interval:
    """Half-open time interval ``[a, b)``."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("interval needs a < b")

    def contains(self, t):
        return (t >= self.a) & (t < self.b)


@dataclass(frozen=True, eq=False)
class TimeMask:
    grid: TimeGrid
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.grid.n,):
            raise GridMismatch("time mask length does not match grid")
        if not m.any():
            raise EmptyDomain("time domain contains no grid point")
        object.__setattr__(self, "mask", m)

    def measure(self) -> float:
        return float(np.count_nonzero(self.mask) * self.grid.dx)


def rasterize_time(spec: Union[Interval, tuple], grid: TimeGrid) -> TimeMask:
    parts = spec if isinstance(spec, tuple) else (spec,)
    lo, hi = grid.time_box
    m = np.zeros(grid.n, dtype=bool)
    for p in parts:
        if p.a < lo or p.b > hi:
            raise DomainOutsideGrid(f"interval [{p.a}, {p.b}) exceeds the grid [{lo}, {hi})")
        m |= p.contains(grid.t)
    return TimeMask(grid, m)


# -- JSON ---------------------------------------------------------------------

def _point(d) -> PhasePoint:
    if isinstance(d, dict):
        return PhasePoint(float(d["x"]), float(d["omega"]))
    x, w = d
    return PhasePoint(float(x), float(w))


def domain_from_json(d: dict) -> DomainSpec:
    try:
        tag = d["variant"]
        if tag == "ball":
            return Ball(_point(d.get("center", (0, 0))), float(d["r"]))
        if tag == "rect":
            return Rect(float(d["x0"]), float(d["x1"]), float(d["omega0"]), float(d["omega1"]))
        if tag == "annulus":
            return Annulus(_point(d.get("center", (0, 0))), float(d["r_in"]), float(d["r_out"]))
        if tag == "union":
            return Union_(tuple(domain_from_json(p) for p in d["parts"]))
        if tag == "difference":
            return Difference(domain_from_json(d["base"]), domain_from_json(d["cut"]))
        if tag == "mask_file":
            return MaskFile(str(d["path"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid domain spec {d!r}: {exc}") from exc
    raise SchemaError(f"unknown domain variant {d.get('variant')!r}")


def domain_to_json(spec: DomainSpec) -> dict:
    if isinstance(spec, Ball):
        return {"variant": "ball", "center": [spec.center.x, spec.center.omega], "r": spec.r}
    if isinstance(spec, Rect):
        return {"variant": "rect", "x0": spec.x0, "x1": spec.x1, "omega0": spec.w0, "omega1": spec.w1}
    if isinstance(spec, Annulus):
        return {
            "variant": "annulus",
            "center": [spec.center.x, spec.center.omega],
            "r_in": spec.r_in,
            "r_out": spec.r_out,
        }
    if isinstance(spec, Union_):
        return {"variant": "union", "parts": [domain_to_json(p) for p in spec.parts]}
    if isinstance(spec, Difference):
        return {"variant": "difference", "base": domain_to_json(spec.base), "cut": domain_to_json(spec.cut)}
    if isinstance(spec, MaskFile):
        return {"variant": "mask_file", "path": spec.path}
    raise TypeError(f"unknown domain spec {spec!r}")


def load_domain(path) -> DomainSpec:
    return domain_from_json(json.loads(Path(path).read_text()))
