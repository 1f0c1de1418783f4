"""Software reimplementation of the defocus shader pipeline.

Computes a per-pixel blur field from a depth map and focus state, and applies
spatially varying elliptical blur to an image. Blur is a gather: every output
pixel averages the source pixels inside its own blur disc (flat kernel,
geometric circle-of-confusion model), normalized by the in-bounds sample
count. There is no occlusion-aware weighting, so depth discontinuities bleed
exactly as in a single-pass shader.

Evaluation is tiled over row bands so the per-band offset loop only spans the
largest disc actually present in that band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .depth import DepthMap
from .optics import (
    ARCMIN_PER_RADIAN,
    FocusState,
    PowerMap,
    RefractionProfile,
)

# Angular blur below this is sub-resolution on typical displays; render as sharp.
BLUR_FLOOR_ARCMIN = 0.5
# Blur diameters are capped at this fraction of image width.
MAX_BLUR_FRACTION = 0.25


@dataclass(frozen=True)
class ViewGeometry:
    """Angular extent of the rendered view."""

    horizontal_fov: float
    image_width: int
    image_height: int

    def __post_init__(self):
        if not 0 < self.horizontal_fov < 180:
            raise ValueError(f"horizontal_fov must be in (0, 180), got {self.horizontal_fov}")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be >= 1")


def pixel_pitch(geometry: ViewGeometry) -> float:
    """Arcminutes per pixel: fov * 60 / width."""
    return geometry.horizontal_fov * 60.0 / geometry.image_width


class BlurField:
    """Per-pixel blur ellipse in pixels: major_px, minor_px, orientation (deg)."""

    def __init__(self, major_px, minor_px, orientation):
        major = np.asarray(major_px, dtype=np.float64)
        minor = np.asarray(minor_px, dtype=np.float64)
        orient = np.asarray(orientation, dtype=np.float64)
        if not (major.shape == minor.shape == orient.shape) or major.ndim != 2:
            raise ValueError("blur field components must share one 2-D shape")
        if np.any(minor < 0) or np.any(major < minor):
            raise ValueError("require major_px >= minor_px >= 0 everywhere")
        self.major_px = major
        self.minor_px = minor
        self.orientation = orient

    @property
    def shape(self):
        return self.major_px.shape

    @classmethod
    def zero(cls, width: int, height: int) -> "BlurField":
        z = np.zeros((height, width))
        return cls(z, z.copy(), z.copy())

    @classmethod
    def uniform(cls, width: int, height: int, major_px: float,
                minor_px: Optional[float] = None, orientation: float = 0.0) -> "BlurField":
        if minor_px is None:
            minor_px = major_px
        shape = (height, width)
        return cls(np.full(shape, major_px), np.full(shape, minor_px),
                   np.full(shape, orientation))


def compute_blur_field(depth: DepthMap, profile: RefractionProfile,
                       focus: FocusState, power_map: Optional[PowerMap],
                       geometry: ViewGeometry) -> BlurField:
    """Blur field over the view, in pixels.

    Per pixel: object vergence from depth, effective lens power = tunable-lens
    power plus the progressive add sampled at the pixel's normalized view
    coordinate (pixel centers), then the sphero-cylindrical blur ellipse
    converted to pixels. Invalid depths get zero blur; blur below the
    sub-resolution floor renders sharp; diameters cap at 25% of image width.
    """
    h, w = depth.shape
    if (w, h) != (geometry.image_width, geometry.image_height):
        raise ValueError(
            f"depth map {w}x{h} does not match view geometry "
            f"{geometry.image_width}x{geometry.image_height}")

    valid = depth.valid_mask()
    vergence = np.zeros((h, w))
    vergence[valid] = 1.0 / depth.depths[valid]

    lens_eff = np.full((h, w), focus.lens_power)
    if power_map is not None:
        xs = (np.arange(w) + 0.5) / w
        ys = (np.arange(h) + 0.5) / h
        uu, vv = np.meshgrid(xs, ys)
        lens_eff = lens_eff + power_map.sample(uu, vv)

    accommodation = np.clip(vergence - profile.sphere - lens_eff,
                            0.0, profile.residual_accommodation)
    effective = profile.sphere + lens_eff + accommodation
    d1 = vergence - effective
    d2 = vergence - effective - profile.cylinder

    pupil_m = focus.pupil_diameter * 1e-3
    b1 = pupil_m * np.abs(d1) * ARCMIN_PER_RADIAN
    b2 = pupil_m * np.abs(d2) * ARCMIN_PER_RADIAN

    major_arc = np.maximum(b1, b2)
    minor_arc = np.minimum(b1, b2)
    orientation = np.where(b2 >= b1, profile.axis, (profile.axis + 90.0) % 180.0)

    sharp = (major_arc < BLUR_FLOOR_ARCMIN) | ~valid
    major_arc[sharp] = 0.0
    minor_arc[sharp] = 0.0

    pitch = pixel_pitch(geometry)
    cap = MAX_BLUR_FRACTION * w
    major_px = np.minimum(major_arc / pitch, cap)
    minor_px = np.minimum(minor_arc / pitch, cap)
    return BlurField(major_px, minor_px, orientation)


def apply_blur(image: np.ndarray, field: BlurField, band_height: int = 64) -> np.ndarray:
    """Spatially varying elliptical gather blur.

    Each output pixel is the average of the source pixels inside its ellipse
    (semi-axes major_px/2 and minor_px/2, rotated by orientation, flat
    kernel), counting only in-bounds samples. Ellipses with a major diameter
    below 1 px degenerate to the identity, so a zero field returns the input
    bit-identically.
    """
    img = np.asarray(image)
    if img.ndim not in (2, 3):
        raise ValueError("image must be 2-D grayscale or 3-D multichannel")
    if img.shape[:2] != field.shape:
        raise ValueError(f"image {img.shape[:2]} and blur field {field.shape} differ")

    out = img.copy()
    blurred = field.major_px >= 1.0
    if not blurred.any():
        return out

    h, w = field.shape
    chans = img if img.ndim == 3 else img[:, :, None]
    chans = chans.astype(np.float64, copy=False)
    n_chan = chans.shape[2]

    # Rasterized semi-axes; minor is floored at half a pixel so degenerate
    # (line-like) ellipses still cover their center row of pixels.
    a = np.maximum(field.major_px / 2.0, 0.5)
    b = np.maximum(field.minor_px / 2.0, 0.5)
    theta = np.deg2rad(field.orientation)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    inv_a2 = 1.0 / (a * a)
    inv_b2 = 1.0 / (b * b)
    # Quadratic form of the ellipse: q(dx,dy) = c2*dx^2 + cs*dx*dy + s2*dy^2 <= 1
    c2 = cos_t ** 2 * inv_a2 + sin_t ** 2 * inv_b2
    s2 = sin_t ** 2 * inv_a2 + cos_t ** 2 * inv_b2
    cs = 2.0 * cos_t * sin_t * (inv_a2 - inv_b2)

    r_global = int(math.ceil(a[blurred].max()))
    padded = np.zeros((h + 2 * r_global, w + 2 * r_global, n_chan))
    padded[r_global:r_global + h, r_global:r_global + w] = chans
    in_bounds = np.zeros((h + 2 * r_global, w + 2 * r_global), dtype=bool)
    in_bounds[r_global:r_global + h, r_global:r_global + w] = True

    result = np.empty((h, w, n_chan))
    for y0 in range(0, h, band_height):
        y1 = min(y0 + band_height, h)
        band_sel = blurred[y0:y1]
        if not band_sel.any():
            result[y0:y1] = chans[y0:y1]
            continue
        r_band = int(math.ceil(a[y0:y1][band_sel].max()))
        c2b, csb, s2b = c2[y0:y1], cs[y0:y1], s2[y0:y1]
        acc = np.zeros((y1 - y0, w, n_chan))
        cnt = np.zeros((y1 - y0, w))
        for dy in range(-r_band, r_band + 1):
            for dx in range(-r_band, r_band + 1):
                if dx * dx + dy * dy > r_band * r_band:
                    continue
                q = c2b * (dx * dx) + csb * (dx * dy) + s2b * (dy * dy)
                member = (q <= 1.0) & band_sel
                member &= in_bounds[y0 + dy + r_global:y1 + dy + r_global,
                                    r_global + dx:r_global + dx + w]
                if not member.any():
                    continue
                src = padded[y0 + dy + r_global:y1 + dy + r_global,
                             r_global + dx:r_global + dx + w]
                acc += src * member[:, :, None]
                cnt += member
        band_out = chans[y0:y1].copy()
        band_out[band_sel] = acc[band_sel] / cnt[band_sel][:, None]
        result[y0:y1] = band_out

    if np.issubdtype(img.dtype, np.integer):
        info = np.iinfo(img.dtype)
        values = np.clip(np.rint(result), info.min, info.max).astype(img.dtype)
    else:
        values = result.astype(img.dtype)
    if img.ndim == 2:
        values = values[:, :, 0]
    out[blurred] = values[blurred]
    return out


# ---------------------------------------------------------------------------
# Synthetic office scene: a flat-shaded stand-in for the three-screen layout
# ---------------------------------------------------------------------------

_SCREEN_FILLS = ((204, 208, 217), (196, 214, 196), (219, 209, 188),
                 (209, 196, 214), (214, 204, 196))
_BACKGROUND = (234, 233, 230)
# Screens are rendered 16:10-ish; vertical angular size as fraction of horizontal.
_VERTICAL_ASPECT = 0.6


def render_office_scene(scene, geometry: ViewGeometry):
    """Flat-shaded render of a screen layout with ground-truth depth.

    Screens are drawn far-to-near (painter's order) as filled rectangles with
    a dark frame and a bright center stimulus patch, positioned by lateral
    offset and angular size under a linear angle-to-pixel mapping. Returns
    ``(rgb_uint8, DepthMap)``; deterministic for fixed inputs.
    """
    w, h = geometry.image_width, geometry.image_height
    deg_per_px = geometry.horizontal_fov / w
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[:, :] = _BACKGROUND
    depths = np.full((h, w), float(scene.background_depth))

    x_angle = (np.arange(w) + 0.5 - w / 2.0) * deg_per_px
    y_angle = (np.arange(h) + 0.5 - h / 2.0) * deg_per_px

    order = sorted(range(len(scene.screens)),
                   key=lambda i: scene.screens[i].distance, reverse=True)
    for i in order:
        screen = scene.screens[i]
        half_w = screen.angular_size / 2.0
        half_h = screen.angular_size * _VERTICAL_ASPECT / 2.0
        cols = np.nonzero(np.abs(x_angle - screen.lateral_offset) <= half_w)[0]
        rows = np.nonzero(np.abs(y_angle) <= half_h)[0]
        if cols.size == 0 or rows.size == 0:
            continue
        x0, x1 = cols[0], cols[-1] + 1
        y0, y1 = rows[0], rows[-1] + 1
        fill = _SCREEN_FILLS[i % len(_SCREEN_FILLS)]
        rgb[y0:y1, x0:x1] = fill
        depths[y0:y1, x0:x1] = screen.distance
        # Frame plus a center stimulus patch give the blur something to act on.
        frame = max(1, (x1 - x0) // 24)
        rgb[y0:y0 + frame, x0:x1] = (40, 40, 46)
        rgb[y1 - frame:y1, x0:x1] = (40, 40, 46)
        rgb[y0:y1, x0:x0 + frame] = (40, 40, 46)
        rgb[y0:y1, x1 - frame:x1] = (40, 40, 46)
        cx, cy = (x0 + x1) // 2, (y0 + y1) // 2
        half_patch = max(1, (x1 - x0) // 10)
        rgb[cy - half_patch:cy + half_patch, cx - half_patch:cx + half_patch] = (20, 20, 24)

    return rgb, DepthMap(depths)
