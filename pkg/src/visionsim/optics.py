"""Defocus optics: vergence math, sphero-cylindrical blur geometry,
spatially varying (progressive) power, and temporally varying (autofocal)
lens controllers.

Conventions
-----------
* Powers and vergences are in diopters (1/m), distances in meters, angular
  blur in arcminutes.
* Defocus is signed, ``object_vergence - effective focusing power``, but only
  its magnitude enters blur size: myopic and hyperopic blur render the same.
* Geometric blur-disc model: a pupil of diameter p meters under defocus error
  d diopters subtends ``p * |d|`` radians.
* Cylinder power is non-negative; the axis names the meridian carrying
  sphere-only power, the crossed meridian carries ``sphere + cylinder``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

ARCMIN_PER_RADIAN = 3437.7468

#: Distinguished "object at infinity" input for vergence computations.
AT_INFINITY = math.inf

AUTOFOCAL_ALGORITHMS = ("instant", "slew_limited", "low_pass")
DEPTH_AGGREGATORS = ("center", "median", "mode")


@dataclass(frozen=True)
class RefractionProfile:
    """Sphero-cylindrical refraction plus residual accommodation.

    Parameters
    ----------
    sphere : float
        Spherical refractive error in diopters (signed).
    cylinder : float
        Cylinder power in diopters, >= 0 by convention.
    axis : float
        Cylinder axis in degrees, in [0, 180).
    residual_accommodation : float
        Maximum accommodation the simulated eye can still engage, diopters.
    """

    sphere: float = 0.0
    cylinder: float = 0.0
    axis: float = 0.0
    residual_accommodation: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in
                   (self.sphere, self.cylinder, self.axis, self.residual_accommodation)):
            raise ValueError("refraction parameters must be finite")
        if self.cylinder < 0:
            raise ValueError(f"cylinder must be >= 0, got {self.cylinder}")
        if not 0 <= self.axis < 180:
            raise ValueError(f"axis must be in [0, 180), got {self.axis}")
        if self.residual_accommodation < 0:
            raise ValueError("residual_accommodation must be >= 0")

    @classmethod
    def emmetropic(cls) -> "RefractionProfile":
        return cls(0.0, 0.0, 0.0, 0.0)


class PowerMap:
    """Grid of add-power values over normalized view coordinates.

    The grid is indexed ``grid[row, col]`` with ``v`` running over rows and
    ``u`` over columns, both in [0, 1]; sampling is bilinear with clamping.
    """

    def __init__(self, grid):
        arr = np.asarray(grid, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise ValueError(f"power map grid must be at least 2x2, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("power map values must be finite")
        self.grid = arr

    @classmethod
    def uniform(cls, add_power: float, shape: Tuple[int, int] = (2, 2)) -> "PowerMap":
        return cls(np.full(shape, float(add_power)))

    def sample(self, u, v):
        """Bilinear sample at (u, v); accepts scalars or arrays, clamps to [0, 1]."""
        u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
        rows, cols = self.grid.shape
        x = u * (cols - 1)
        y = v * (rows - 1)
        x0 = np.floor(x).astype(np.intp)
        y0 = np.floor(y).astype(np.intp)
        x1 = np.minimum(x0 + 1, cols - 1)
        y1 = np.minimum(y0 + 1, rows - 1)
        fx = x - x0
        fy = y - y0
        g = self.grid
        top = g[y0, x0] * (1 - fx) + g[y0, x1] * fx
        bottom = g[y1, x0] * (1 - fx) + g[y1, x1] * fx
        out = top * (1 - fy) + bottom * fy
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FocusState:
    """Current tunable-lens power, pupil, and timestamp of the simulated eye."""

    lens_power: float = 0.0
    pupil_diameter: float = 4.0
    timestamp: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.lens_power):
            raise ValueError("lens_power must be finite")
        if not 0.5 < self.pupil_diameter < 10.0:
            raise ValueError(
                f"pupil_diameter must be in (0.5, 10.0) mm, got {self.pupil_diameter}")


@dataclass(frozen=True)
class BlurEllipse:
    """Angular blur geometry: major/minor in arcminutes, orientation in degrees."""

    major: float
    minor: float
    orientation: float = 0.0

    def __post_init__(self):
        if not (self.major >= self.minor >= 0):
            raise ValueError(
                f"require major >= minor >= 0, got ({self.major}, {self.minor})")

    @property
    def is_circular(self) -> bool:
        return math.isclose(self.major, self.minor, rel_tol=1e-12, abs_tol=1e-12)


@dataclass(frozen=True)
class AutofocalConfig:
    """Configuration of the simulated focus-tunable lens controller.

    `algorithm` selects how lens power tracks the target vergence;
    `foveal_window` (degrees) and `depth_aggregator` govern how gaze depth is
    pooled into that target.
    """

    algorithm: str = "instant"
    slew_rate: float = 10.0
    time_constant: float = 0.2
    foveal_window: float = 2.0
    depth_aggregator: str = "median"

    def __post_init__(self):
        if self.algorithm not in AUTOFOCAL_ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; "
                             f"expected one of {AUTOFOCAL_ALGORITHMS}")
        if self.depth_aggregator not in DEPTH_AGGREGATORS:
            raise ValueError(f"unknown depth_aggregator {self.depth_aggregator!r}; "
                             f"expected one of {DEPTH_AGGREGATORS}")
        if self.slew_rate <= 0:
            raise ValueError("slew_rate must be > 0")
        if self.time_constant <= 0:
            raise ValueError("time_constant must be > 0")
        if self.foveal_window <= 0:
            raise ValueError("foveal_window must be > 0")

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "slew_rate": self.slew_rate,
            "time_constant": self.time_constant,
            "foveal_window": self.foveal_window,
            "depth_aggregator": self.depth_aggregator,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AutofocalConfig":
        return cls(**{k: d[k] for k in
                      ("algorithm", "slew_rate", "time_constant",
                       "foveal_window", "depth_aggregator") if k in d})


def vergence_from_distance(distance: float) -> float:
    """Vergence (diopters) of an object at `distance` meters; infinity -> 0."""
    if distance == AT_INFINITY:
        return 0.0
    if not math.isfinite(distance) or distance <= 0:
        raise ValueError(f"distance must be positive or AT_INFINITY, got {distance}")
    return 1.0 / distance


def distance_from_vergence(vergence: float) -> float:
    """Inverse of :func:`vergence_from_distance`; 0 D maps back to infinity."""
    if vergence == 0:
        return AT_INFINITY
    if vergence < 0 or not math.isfinite(vergence):
        raise ValueError(f"vergence must be >= 0 and finite, got {vergence}")
    return 1.0 / vergence


def meridional_defocus(profile: RefractionProfile, lens_power: float,
                       object_vergence: float) -> Tuple[float, float, float]:
    """Defocus along the two principal meridians, in diopters.

    Residual accommodation engages toward the target as an ideal clamp:
    ``a = clamp(object_vergence - sphere - lens_power, 0, residual)``.
    Returns ``(defocus_axis1, defocus_axis2, orientation)`` where axis 1 is
    the meridian at `profile.axis` (sphere-only power) and axis 2 the crossed
    meridian (sphere + cylinder).
    """
    accommodation = min(max(object_vergence - profile.sphere - lens_power, 0.0),
                        profile.residual_accommodation)
    effective = profile.sphere + lens_power + accommodation
    d1 = object_vergence - effective
    d2 = object_vergence - (effective + profile.cylinder)
    return d1, d2, profile.axis


def blur_ellipse(profile: RefractionProfile, lens_power: float,
                 object_vergence: float, pupil_diameter: float) -> BlurEllipse:
    """Angular blur ellipse for a point object seen through the eye+lens system.

    Per-meridian blur is ``pupil[m] * |defocus|`` radians, converted to
    arcminutes. The ellipse orientation follows the meridian with the larger
    blur: cylinder-dominated blur lies along the cylinder axis, sphere-
    dominated blur along the crossed meridian.
    """
    if not 0.5 < pupil_diameter < 10.0:
        raise ValueError(f"pupil_diameter must be in (0.5, 10.0) mm, got {pupil_diameter}")
    d1, d2, axis = meridional_defocus(profile, lens_power, object_vergence)
    pupil_m = pupil_diameter * 1e-3
    b1 = pupil_m * abs(d1) * ARCMIN_PER_RADIAN
    b2 = pupil_m * abs(d2) * ARCMIN_PER_RADIAN
    if b2 >= b1:
        return BlurEllipse(major=b2, minor=b1, orientation=axis)
    return BlurEllipse(major=b1, minor=b2, orientation=(axis + 90.0) % 180.0)


def progressive_add(power_map: PowerMap, view_coord: Tuple[float, float]) -> float:
    """Add power of a progressive surface at normalized view coordinate (u, v)."""
    u, v = view_coord
    return float(power_map.sample(u, v))


def autofocal_update(config: AutofocalConfig, state: FocusState,
                     target_vergence: float, dt: float) -> FocusState:
    """Advance the tunable-lens controller by one step of `dt` seconds.

    instant       lens jumps to the target.
    slew_limited  lens moves toward the target by at most ``slew_rate * dt``,
                  clamping exactly onto it on the final step.
    low_pass      exact first-order exponential step,
                  ``power += (target - power) * (1 - exp(-dt / tau))``,
                  which is unconditionally stable for any dt.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    power = state.lens_power
    if config.algorithm == "instant":
        power = target_vergence
    elif config.algorithm == "slew_limited":
        delta = target_vergence - power
        step = config.slew_rate * dt
        if abs(delta) <= step:
            power = target_vergence
        else:
            power += math.copysign(step, delta)
    else:  # low_pass
        power += (target_vergence - power) * (1.0 - math.exp(-dt / config.time_constant))
    return FocusState(lens_power=power, pupil_diameter=state.pupil_diameter,
                      timestamp=state.timestamp + dt)


def gaze_target_vergence(depth_map, gaze_point: Tuple[float, float],
                         config: AutofocalConfig, pixel_pitch: float) -> Optional[float]:
    """Target vergence for the gaze point, pooled over the foveal window.

    `gaze_point` is (x, y) in pixels, `pixel_pitch` in arcmin/pixel. The
    window is a disc of radius ``foveal_window / 2`` degrees around the gaze
    point; depths inside it are pooled with the configured aggregator
    ("center" reads the single gazed pixel). Returns None when no valid depth
    falls inside the window ("no depth" signal).

    Mode ties break toward the nearer depth.
    """
    x, y = gaze_point
    if not (0 <= x < depth_map.width and 0 <= y < depth_map.height):
        raise ValueError(f"gaze point {gaze_point} outside {depth_map.width}x{depth_map.height} map")
    if pixel_pitch <= 0:
        raise ValueError("pixel_pitch must be > 0")

    depths = depth_map.depths
    valid = depth_map.valid_mask()

    if config.depth_aggregator == "center":
        xi, yi = int(x), int(y)
        if not valid[yi, xi]:
            return None
        return 1.0 / float(depths[yi, xi])

    radius_px = (config.foveal_window * 60.0 / 2.0) / pixel_pitch
    r = int(math.ceil(radius_px))
    x0 = max(0, int(math.floor(x)) - r)
    x1 = min(depth_map.width - 1, int(math.floor(x)) + r)
    y0 = max(0, int(math.floor(y)) - r)
    y1 = min(depth_map.height - 1, int(math.floor(y)) + r)
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
    inside = ((xs - x) ** 2 + (ys - y) ** 2) <= radius_px ** 2
    window = valid[y0:y1 + 1, x0:x1 + 1] & inside
    values = depths[y0:y1 + 1, x0:x1 + 1][window]
    if values.size == 0:
        # Always include the gazed pixel itself, whatever the window radius.
        xi, yi = int(x), int(y)
        if valid[yi, xi]:
            values = np.array([depths[yi, xi]])
        else:
            return None

    if config.depth_aggregator == "median":
        depth = float(np.median(values))
    else:  # mode
        counts = Counter(values.tolist())
        best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
        depth = float(best[0])
    return 1.0 / depth
