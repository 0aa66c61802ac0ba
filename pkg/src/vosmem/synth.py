"""Deterministic synthetic videos: parametric movers over a jittered
background, with ground-truth masks for every frame.

Shapes are rasterized on the cell lattice (positions snap to whole cells),
so every ground-truth mask is exactly representable at descriptor
resolution and a video regenerates bit-identically from (spec, seed).
Occluded objects vanish entirely and reappear after their window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LabeledMaskSet, ObjectMask, upsample_nearest
from .errors import SpecError

Color = tuple[float, float, float]


def _check_color(color, what: str) -> Color:
    c = tuple(float(v) for v in color)
    if len(c) != 3 or any(v < 0 or v > 1 for v in c):
        raise SpecError(f"{what} must be three reals in [0, 1], got {color!r}")
    return c


@dataclass(frozen=True)
class Recolor:
    """Appearance change: from `frame` on, the object takes `color`,
    blended linearly over `blend` frames (0 = abrupt)."""

    frame: int
    color: Color
    blend: int = 0


@dataclass(frozen=True)
class MoverSpec:
    """One target object: a disc or rectangle following piecewise-linear
    waypoints (cell coordinates), evenly spaced over the video.

    snap="cell" aligns the shape to whole descriptor cells (masks are then
    exactly representable at grid resolution); snap="pixel" rasterizes at
    pixel granularity, so mask boundaries cut through cells and decoded
    masks are only approximations (harder, more realistic)."""

    shape: str  # "disc" | "rect"
    size: float | tuple[int, int]  # disc radius in cells, or (h, w) cells
    color: Color
    waypoints: tuple[tuple[float, float], ...]
    occlusions: tuple[tuple[int, int], ...] = ()  # [start, end) frame ranges
    recolors: tuple[Recolor, ...] = ()
    snap: str = "cell"  # "cell" | "pixel"


@dataclass(frozen=True)
class DistractorSpec:
    """Static background clutter with a near-object color; never part of
    the ground truth."""

    shape: str
    size: float | tuple[int, int]
    color: Color
    position: tuple[float, float]  # (row, col) cell center


@dataclass(frozen=True)
class VideoSpec:
    frame_count: int
    height: int = 64
    width: int = 64
    cell: int = 4
    background: Color = (0.4, 0.4, 0.4)
    background_jitter: float = 0.015
    objects: tuple[MoverSpec, ...] = ()
    distractors: tuple[DistractorSpec, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.frame_count < 2:
            raise SpecError("frame_count must be >= 2")
        if self.height < 1 or self.width < 1 or self.cell < 1:
            raise SpecError("resolution and cell size must be positive")
        if self.height % self.cell or self.width % self.cell:
            raise SpecError(
                f"cell {self.cell} must divide {self.height}x{self.width}")
        if not self.objects:
            raise SpecError("a video needs at least one object")
        grid_h = self.height // self.cell
        grid_w = self.width // self.cell
        for i, obj in enumerate(self.objects):
            _validate_shape(obj.shape, obj.size, f"object {i + 1}")
            _check_color(obj.color, f"object {i + 1} color")
            if obj.snap not in ("cell", "pixel"):
                raise SpecError(f"object {i + 1}: snap must be cell or pixel")
            if len(obj.waypoints) < 1:
                raise SpecError(f"object {i + 1} needs at least one waypoint")
            for r, c in obj.waypoints:
                if not (0 <= r < grid_h and 0 <= c < grid_w):
                    raise SpecError(
                        f"object {i + 1} waypoint ({r}, {c}) outside the "
                        f"{grid_h}x{grid_w} cell grid")
            for a, b in obj.occlusions:
                if a < 0 or b <= a:
                    raise SpecError(
                        f"object {i + 1} occlusion window [{a}, {b}) invalid")
            for rc in obj.recolors:
                _check_color(rc.color, f"object {i + 1} recolor")
                if rc.frame < 0 or rc.blend < 0:
                    raise SpecError("recolor frame and blend must be >= 0")
        for i, d in enumerate(self.distractors):
            _validate_shape(d.shape, d.size, f"distractor {i + 1}")
            _check_color(d.color, f"distractor {i + 1} color")
            r, c = d.position
            if not (0 <= r < grid_h and 0 <= c < grid_w):
                raise SpecError(
                    f"distractor {i + 1} position outside the cell grid")


def _validate_shape(shape: str, size, what: str) -> None:
    if shape == "disc":
        if not np.isscalar(size) or float(size) <= 0:
            raise SpecError(f"{what}: disc size must be a positive radius")
    elif shape == "rect":
        try:
            h, w = size
        except (TypeError, ValueError):
            raise SpecError(f"{what}: rect size must be (h, w) cells") from None
        if int(h) < 1 or int(w) < 1:
            raise SpecError(f"{what}: rect size must be positive")
    else:
        raise SpecError(f"{what}: unknown shape {shape!r}")


def _shape_cells(shape: str, size, center: tuple[int, int],
                 grid_h: int, grid_w: int) -> np.ndarray:
    """Boolean (grid_h, grid_w) occupancy of the shape, clipped to the grid."""
    occ = np.zeros((grid_h, grid_w), dtype=bool)
    cr, cc = center
    if shape == "disc":
        radius = float(size)
        rr, cc_idx = np.ogrid[:grid_h, :grid_w]
        occ = (rr - cr) ** 2 + (cc_idx - cc) ** 2 <= radius ** 2
    else:  # rect
        h, w = int(size[0]), int(size[1])
        top = cr - (h - 1) // 2
        left = cc - (w - 1) // 2
        r0, r1 = max(0, top), min(grid_h, top + h)
        c0, c1 = max(0, left), min(grid_w, left + w)
        if r0 < r1 and c0 < c1:
            occ[r0:r1, c0:c1] = True
    return occ


def _shape_pixels(shape: str, size, pos: tuple[float, float], cell: int,
                  height: int, width: int) -> np.ndarray:
    """Boolean (height, width) occupancy of a pixel-snapped shape whose
    position and size are given in cell units."""
    cr = (pos[0] + 0.5) * cell
    cc = (pos[1] + 0.5) * cell
    if shape == "disc":
        radius = float(size) * cell
        rr, cc_idx = np.ogrid[:height, :width]
        return ((rr + 0.5 - cr) ** 2
                + (cc_idx + 0.5 - cc) ** 2) <= radius ** 2
    h_px, w_px = int(size[0]) * cell, int(size[1]) * cell
    occ = np.zeros((height, width), dtype=bool)
    top = int(round(cr - h_px / 2.0))
    left = int(round(cc - w_px / 2.0))
    r0, r1 = max(0, top), min(height, top + h_px)
    c0, c1 = max(0, left), min(width, left + w_px)
    if r0 < r1 and c0 < c1:
        occ[r0:r1, c0:c1] = True
    return occ


class SyntheticVideo:
    """Lazy frame/mask generator for one VideoSpec.

    frame(t) and masks(t) are pure functions of (spec, t); nothing is cached
    beyond the static background, so arbitrarily long videos stay cheap.
    """

    def __init__(self, spec: VideoSpec):
        self.spec = spec
        self.grid_h = spec.height // spec.cell
        self.grid_w = spec.width // spec.cell
        rng = np.random.default_rng(spec.seed)
        jitter = rng.uniform(-spec.background_jitter, spec.background_jitter,
                             (self.grid_h, self.grid_w, 3))
        bg = np.clip(np.asarray(spec.background) + jitter, 0.0, 1.0)
        self._background_cells = bg
        self._distractor_layer = self._paint_distractors()

    @property
    def frame_count(self) -> int:
        return self.spec.frame_count

    @property
    def object_count(self) -> int:
        return len(self.spec.objects)

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.spec.height, self.spec.width)

    def _paint_distractors(self) -> np.ndarray:
        cells = self._background_cells.copy()
        for d in self.spec.distractors:
            center = (int(round(d.position[0])), int(round(d.position[1])))
            occ = _shape_cells(d.shape, d.size, center, self.grid_h, self.grid_w)
            cells[occ] = d.color
        return cells

    def position(self, obj_index: int, t: int) -> tuple[float, float]:
        """Interpolated (row, col) cell position of the object at frame t."""
        obj = self.spec.objects[obj_index]
        pts = obj.waypoints
        if len(pts) == 1 or self.frame_count == 1:
            return (float(pts[0][0]), float(pts[0][1]))
        segs = len(pts) - 1
        u = t * segs / (self.frame_count - 1)
        seg = min(int(u), segs - 1)
        frac = u - seg
        r = pts[seg][0] + frac * (pts[seg + 1][0] - pts[seg][0])
        c = pts[seg][1] + frac * (pts[seg + 1][1] - pts[seg][1])
        return (r, c)

    def color(self, obj_index: int, t: int) -> Color:
        """Object color at frame t after any recolor events."""
        obj = self.spec.objects[obj_index]
        color = np.asarray(obj.color, dtype=np.float64)
        for rc in sorted(obj.recolors, key=lambda r: r.frame):
            if t < rc.frame:
                break
            target = np.asarray(rc.color, dtype=np.float64)
            if rc.blend > 0 and t < rc.frame + rc.blend:
                frac = (t - rc.frame + 1) / rc.blend
                color = color + frac * (target - color)
            else:
                color = target
        return tuple(color)

    def visible(self, obj_index: int, t: int) -> bool:
        obj = self.spec.objects[obj_index]
        return not any(a <= t < b for a, b in obj.occlusions)

    def _object_pixels(self, t: int) -> list[np.ndarray | None]:
        """Per-object boolean occupancy at pixel resolution (None when
        occluded)."""
        cell = self.spec.cell
        out: list[np.ndarray | None] = []
        for i, obj in enumerate(self.spec.objects):
            if not self.visible(i, t):
                out.append(None)
                continue
            pos = self.position(i, t)
            if obj.snap == "cell":
                center = (int(round(pos[0])), int(round(pos[1])))
                occ = _shape_cells(obj.shape, obj.size, center,
                                   self.grid_h, self.grid_w)
                out.append(upsample_nearest(occ, cell, cell))
            else:
                out.append(_shape_pixels(obj.shape, obj.size, pos, cell,
                                         *self.resolution))
        return out

    def frame(self, t: int) -> np.ndarray:
        """(H, W, 3) float64 image of frame t."""
        self._check_index(t)
        image = upsample_nearest(self._distractor_layer, self.spec.cell,
                                 self.spec.cell).copy()
        for i, occ in enumerate(self._object_pixels(t)):
            if occ is not None:
                image[occ] = self.color(i, t)
        return image

    def masks(self, t: int) -> LabeledMaskSet:
        """Ground-truth masks of frame t; a later-indexed object occludes
        earlier ones where they overlap."""
        self._check_index(t)
        occs = self._object_pixels(t)
        h, w = self.resolution
        masks = []
        for i, occ in enumerate(occs):
            if occ is None:
                masks.append(ObjectMask.empty(h, w))
                continue
            vis = occ.copy()
            for later in occs[i + 1:]:
                if later is not None:
                    vis &= ~later
            masks.append(ObjectMask(h, w, vis.astype(np.float64)))
        return LabeledMaskSet(tuple(masks))

    def _check_index(self, t: int) -> None:
        if not 0 <= t < self.frame_count:
            raise SpecError(
                f"frame index {t} outside [0, {self.frame_count})")


def generate_video(spec: VideoSpec) -> SyntheticVideo:
    """Materialize the deterministic video described by `spec`."""
    return SyntheticVideo(spec)
