"""Multi-distance optotype matching task with a synthetic observer.

Three screens at near, intermediate, and far viewing distance. One shows a
reference table pairing ring-gap orientations with letters, the other two a
single Landolt ring and a single Sloan letter; the answer is whether the two
single stimuli sit in the same table column. Which screen carries the table
is randomized per trial so no fixed gaze order works.

Headless runs replace the human with an observer model: a psychometric
identification probability per stimulus, driven by the blur major axis
relative to the optotype gap, with misreads drawn uniformly from the
alternatives. Blocks simulate gaze traversal between screens, step the
autofocal controller at the gaze sample rate, and score responses against
ground truth.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError
from .optics import (
    AutofocalConfig,
    BlurEllipse,
    FocusState,
    RefractionProfile,
    autofocal_update,
    blur_ellipse,
    vergence_from_distance,
)

SLOAN_LETTERS = ("C", "D", "H", "K", "N", "O", "R", "S")
ORIENTATIONS = (0, 45, 90, 135, 180, 225, 270, 315)

ANCHORS = ("center", "corner_tl", "corner_tr", "corner_bl", "corner_br")
STIMULI = ("landolt", "sloan", "table")

# Screens are 16:10-ish; vertical angular size as a fraction of horizontal.
VERTICAL_ASPECT = 0.6


# ---------------------------------------------------------------------------
# Layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Screen:
    """A flat display at a fixed distance, placed by lateral angular offset."""

    name: str
    distance: float  # meters
    angular_size: float  # degrees, horizontal
    lateral_offset: float = 0.0  # degrees, positive to the right

    def __post_init__(self):
        if not (math.isfinite(self.distance) and self.distance > 0):
            raise ValidationError(f"screen distance must be > 0, got {self.distance}")
        if self.angular_size <= 0:
            raise ValidationError("angular_size must be > 0")


@dataclass(frozen=True)
class SceneLayout:
    screens: Tuple[Screen, ...]
    background_depth: float = 10.0

    def __post_init__(self):
        distances = [s.distance for s in self.screens]
        if len(set(distances)) != len(distances):
            raise ValidationError("screen distances must be distinct")
        if self.background_depth <= 0:
            raise ValidationError("background_depth must be > 0")

    @classmethod
    def default_office(cls) -> "SceneLayout":
        """Smartphone at reading distance, desktop display, far TV."""
        return cls(screens=(
            Screen("smartphone", 0.3, 24.0, -30.0),
            Screen("display", 1.0, 26.0, 0.0),
            Screen("tv", 6.0, 12.0, 28.0),
        ))

    def task_screens(self) -> Tuple[Screen, Screen, Screen]:
        if len(self.screens) < 3:
            raise ValidationError(
                f"matching task needs >= 3 screens, layout has {len(self.screens)}")
        return self.screens[0], self.screens[1], self.screens[2]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaskConfig:
    optotype_gap_arcmin: float = 2.0
    p_center: float = 0.5
    jitter_sigma_deg: float = 0.5

    def __post_init__(self):
        if self.optotype_gap_arcmin <= 0:
            raise ValidationError("optotype_gap_arcmin must be > 0")
        if not 0.0 <= self.p_center <= 1.0:
            raise ValidationError("p_center must be in [0, 1]")
        if self.jitter_sigma_deg < 0:
            raise ValidationError("jitter_sigma_deg must be >= 0")


@dataclass(frozen=True)
class ObserverModel:
    """Psychometric stand-in for a subject.

    Identification probability of a single optotype under blur ratio
    r = blur major axis / optotype gap:

        p_id = lapse/8 + (1 - lapse) * (guess + (1 - guess) * logistic(slope * (1 - r / threshold_ratio)))

    At r = 0 this saturates near 1; at the threshold ratio the logistic term
    crosses 0.5; far beyond it identification collapses to the guess rate.
    """

    guess_rate: float = 1.0 / 8.0
    threshold_ratio: float = 1.0
    slope: float = 4.0
    lapse: float = 0.01

    def __post_init__(self):
        if not 0 <= self.lapse <= 0.05:
            raise ValidationError(f"lapse must be in [0, 0.05], got {self.lapse}")
        if self.threshold_ratio <= 0:
            raise ValidationError("threshold_ratio must be > 0")
        if self.slope <= 0:
            raise ValidationError("slope must be > 0")
        if not 0 <= self.guess_rate < 1:
            raise ValidationError("guess_rate must be in [0, 1)")

    def p_identify(self, blur_major_arcmin: float, gap_arcmin: float) -> float:
        r = blur_major_arcmin / gap_arcmin
        x = self.slope * (1.0 - r / self.threshold_ratio)
        # numerically stable logistic
        if x >= 0:
            sigma = 1.0 / (1.0 + math.exp(-x))
        else:
            e = math.exp(x)
            sigma = e / (1.0 + e)
        core = self.guess_rate + (1.0 - self.guess_rate) * sigma
        return self.lapse / 8.0 + (1.0 - self.lapse) * core

    def to_dict(self) -> dict:
        return {"guess_rate": self.guess_rate, "threshold_ratio": self.threshold_ratio,
                "slope": self.slope, "lapse": self.lapse}

    @classmethod
    def from_dict(cls, d: dict) -> "ObserverModel":
        return cls(**{k: d[k] for k in
                      ("guess_rate", "threshold_ratio", "slope", "lapse") if k in d})


@dataclass(frozen=True)
class GazeModel:
    """Scripted gaze dynamics used by block simulation."""

    dwell: float = 0.3  # seconds per fixation
    saccade_duration: float = 0.05
    sample_rate: float = 100.0
    noise_sigma: float = 0.0  # degrees, feeds the simulated device when recording

    def __post_init__(self):
        if self.dwell <= 0 or self.saccade_duration < 0 or self.sample_rate <= 0:
            raise ValidationError("gaze model timing parameters out of range")


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Placement:
    """Stimulus position on its screen: anchor plus angular jitter, clipped
    so the stimulus stays on the screen."""

    anchor: str
    jitter: Tuple[float, float]  # degrees (horizontal, vertical)

    def __post_init__(self):
        if self.anchor not in ANCHORS:
            raise ValidationError(f"unknown anchor {self.anchor!r}")

    def offset_deg(self, screen: Screen) -> Tuple[float, float]:
        """Offset from screen center in degrees, jitter included."""
        half_w = screen.angular_size / 2.0
        half_h = screen.angular_size * VERTICAL_ASPECT / 2.0
        base = {
            "center": (0.0, 0.0),
            "corner_tl": (-0.7 * half_w, 0.7 * half_h),
            "corner_tr": (0.7 * half_w, 0.7 * half_h),
            "corner_bl": (-0.7 * half_w, -0.7 * half_h),
            "corner_br": (0.7 * half_w, -0.7 * half_h),
        }[self.anchor]
        x = min(max(base[0] + self.jitter[0], -half_w), half_w)
        y = min(max(base[1] + self.jitter[1], -half_h), half_h)
        return x, y


@dataclass(frozen=True)
class Trial:
    trial_id: int
    table_screen: int
    landolt_screen: int
    sloan_screen: int
    landolt_orientation: int
    sloan_letter: str
    table: Dict[int, str]  # orientation -> letter, a bijection over 8 columns
    is_match: bool
    placements: Dict[str, Placement]
    optotype_gap_arcmin: float

    def __post_init__(self):
        screens = {self.table_screen, self.landolt_screen, self.sloan_screen}
        if len(screens) != 3:
            raise ValidationError("table/landolt/sloan screens must be distinct")
        if self.landolt_orientation not in ORIENTATIONS:
            raise ValidationError(f"bad orientation {self.landolt_orientation}")
        if self.sloan_letter not in SLOAN_LETTERS:
            raise ValidationError(f"bad letter {self.sloan_letter!r}")
        if (sorted(self.table) != sorted(ORIENTATIONS)
                or sorted(self.table.values()) != sorted(SLOAN_LETTERS)):
            raise ValidationError("table must be a bijection orientation -> letter")
        if self.is_match != (self.table[self.landolt_orientation] == self.sloan_letter):
            raise ValidationError("is_match inconsistent with table pairing")


@dataclass(frozen=True)
class TrialResponse:
    trial_id: int
    response: str  # "match" | "no_match"
    correct: bool
    response_time: float = 0.0


def _draw_placement(rng: np.random.Generator, config: TaskConfig) -> Placement:
    if rng.random() < config.p_center:
        anchor = "center"
    else:
        anchor = ANCHORS[1 + int(rng.integers(4))]
    jitter = rng.normal(0.0, config.jitter_sigma_deg, size=2)
    return Placement(anchor=anchor, jitter=(float(jitter[0]), float(jitter[1])))


def generate_trial(rng: np.random.Generator, layout: SceneLayout,
                   config: Optional[TaskConfig] = None, trial_id: int = 0) -> Trial:
    """Draw one trial: random screen roles, orientation, table bijection, and
    a balanced match/no-match assignment."""
    config = config or TaskConfig()
    layout.task_screens()
    roles = rng.permutation(3)
    table_screen, landolt_screen, sloan_screen = (int(roles[0]), int(roles[1]),
                                                  int(roles[2]))
    orientation = int(ORIENTATIONS[int(rng.integers(len(ORIENTATIONS)))])
    letters = list(SLOAN_LETTERS)
    rng.shuffle(letters)
    table = {o: letter for o, letter in zip(ORIENTATIONS, letters)}
    is_match = bool(rng.random() < 0.5)
    if is_match:
        sloan_letter = table[orientation]
    else:
        others = [c for c in SLOAN_LETTERS if c != table[orientation]]
        sloan_letter = others[int(rng.integers(len(others)))]
    placements = {name: _draw_placement(rng, config) for name in STIMULI}
    return Trial(trial_id=trial_id, table_screen=table_screen,
                 landolt_screen=landolt_screen, sloan_screen=sloan_screen,
                 landolt_orientation=orientation, sloan_letter=sloan_letter,
                 table=table, is_match=is_match, placements=placements,
                 optotype_gap_arcmin=config.optotype_gap_arcmin)


def ground_truth(trial: Trial) -> bool:
    return trial.table[trial.landolt_orientation] == trial.sloan_letter


def observer_respond(trial: Trial, blur_at_screen: Dict[int, BlurEllipse],
                     model: ObserverModel, rng: np.random.Generator,
                     response_time: float = 0.0) -> TrialResponse:
    """Simulated response: each stimulus is read through its screen's blur.

    A misread stimulus is replaced by a uniform draw over the alternatives; a
    misread table means the perceived orientation maps to a wrong letter. The
    answer matches iff the perceived table letter equals the perceived Sloan
    letter.
    """
    for idx in (trial.landolt_screen, trial.sloan_screen, trial.table_screen):
        if idx not in blur_at_screen:
            raise ValidationError(f"missing blur estimate for screen {idx}")
    gap = trial.optotype_gap_arcmin

    def read(screen: int) -> float:
        return model.p_identify(blur_at_screen[screen].major, gap)

    # Landolt ring: perceived orientation
    if rng.random() < read(trial.landolt_screen):
        perceived_orientation = trial.landolt_orientation
    else:
        alternatives = [o for o in ORIENTATIONS if o != trial.landolt_orientation]
        perceived_orientation = alternatives[int(rng.integers(len(alternatives)))]

    # Sloan letter
    if rng.random() < read(trial.sloan_screen):
        perceived_sloan = trial.sloan_letter
    else:
        alternatives = [c for c in SLOAN_LETTERS if c != trial.sloan_letter]
        perceived_sloan = alternatives[int(rng.integers(len(alternatives)))]

    # Table column lookup at the perceived orientation
    true_pair = trial.table[perceived_orientation]
    if rng.random() < read(trial.table_screen):
        perceived_pair = true_pair
    else:
        alternatives = [c for c in SLOAN_LETTERS if c != true_pair]
        perceived_pair = alternatives[int(rng.integers(len(alternatives)))]

    response = "match" if perceived_pair == perceived_sloan else "no_match"
    correct = (response == "match") == ground_truth(trial)
    return TrialResponse(trial_id=trial.trial_id, response=response,
                         correct=correct, response_time=response_time)


# ---------------------------------------------------------------------------
# Block simulation
# ---------------------------------------------------------------------------

# Gaze order within a trial: find the two single stimuli, then the table,
# then re-check both single/table once.
VISIT_ORDER = ("landolt", "sloan", "table", "landolt", "table")


@dataclass(frozen=True)
class BlockResult:
    n_trials: int
    proportion_correct: float
    per_distance: Dict[float, float]  # Landolt screen distance -> proportion correct
    mean_response_time: float


def aggregate_block(trials: Sequence[Trial], responses: Sequence[TrialResponse],
                    layout: SceneLayout) -> BlockResult:
    """Order-independent aggregation of a block's trial records."""
    if len(trials) != len(responses):
        raise ValidationError("trials and responses must align")
    if not trials:
        raise ValidationError("cannot aggregate an empty block")
    screens = layout.task_screens()
    by_id = {r.trial_id: r for r in responses}
    correct_total = 0
    per_distance_hits: Dict[float, List[int]] = {}
    rt_total = 0.0
    for trial in trials:
        response = by_id[trial.trial_id]
        correct_total += int(response.correct)
        rt_total += response.response_time
        distance = screens[trial.landolt_screen].distance
        per_distance_hits.setdefault(distance, []).append(int(response.correct))
    per_distance = {d: sum(hits) / len(hits)
                    for d, hits in sorted(per_distance_hits.items())}
    n = len(trials)
    return BlockResult(n_trials=n, proportion_correct=correct_total / n,
                       per_distance=per_distance, mean_response_time=rt_total / n)


def _stimulus_on(trial: Trial, screen_index: int) -> str:
    if screen_index == trial.landolt_screen:
        return "landolt"
    if screen_index == trial.sloan_screen:
        return "sloan"
    return "table"


def _gaze_direction(screen: Screen, offset_deg: Tuple[float, float]):
    azimuth = math.radians(screen.lateral_offset + offset_deg[0])
    elevation = math.radians(offset_deg[1])
    return (math.sin(azimuth) * math.cos(elevation),
            math.sin(elevation),
            math.cos(azimuth) * math.cos(elevation))


def run_block(n_trials: int, layout: SceneLayout, refraction: RefractionProfile,
              observer: ObserverModel, *,
              config: Optional[TaskConfig] = None,
              autofocal: Optional[AutofocalConfig] = None,
              fixed_focus_m: Optional[float] = None,
              gaze: Optional[GazeModel] = None,
              seed: int = 0,
              pupil_mm: float = 4.0,
              blur_multiplier: float = 1.0,
              gaze_sink=None,
              collect=None) -> BlockResult:
    """Simulate a block of matching trials.

    Per trial the gaze visits the screens in VISIT_ORDER (dwell at each, a
    saccade in between); every gaze step feeds the screen's vergence to the
    autofocal controller, or leaves the lens at ``1 / fixed_focus_m``. The
    observer reads each screen at its best end-of-fixation blur. Controller
    state carries across trials; everything is deterministic per seed.

    `gaze_sink(sample)` receives simulated GazeSamples when provided;
    `collect` (a list) receives (trial, response) pairs for persistence.
    """
    if n_trials < 1:
        raise ValidationError(f"n_trials must be >= 1, got {n_trials}")
    if (autofocal is None) == (fixed_focus_m is None):
        raise ValidationError("exactly one of autofocal or fixed_focus_m is required")
    if blur_multiplier < 0:
        raise ValidationError("blur_multiplier must be >= 0")
    config = config or TaskConfig()
    gaze = gaze or GazeModel()
    screens = layout.task_screens()
    rng = np.random.default_rng(seed)

    dt = 1.0 / gaze.sample_rate
    fixed_power = (vergence_from_distance(fixed_focus_m)
                   if fixed_focus_m is not None else None)
    focus = FocusState(lens_power=fixed_power if fixed_power is not None else 0.0,
                       pupil_diameter=pupil_mm, timestamp=0.0)
    vergences = [vergence_from_distance(s.distance) for s in screens]

    # Gaze sample emission, optional
    sample_index = 0

    def emit(direction, distance):
        nonlocal sample_index
        if gaze_sink is None:
            return
        from .gaze import EYE_ORIGINS, EyeData, GazeSample, _normalize
        point = tuple(c * distance for c in direction)
        ts = int(round(sample_index * dt * 1e9))
        eyes = {}
        for name, origin in EYE_ORIGINS.items():
            d = _normalize(tuple(p - o for p, o in zip(point, origin)))
            eyes[name] = EyeData(origin=origin, direction=d, pupil_mm=pupil_mm)
        gaze_sink(GazeSample(timestamp_ns=ts, left=eyes["left"],
                             right=eyes["right"], combined=eyes["combined"]))
        sample_index += 1

    def steps_for(duration: float) -> int:
        return max(1, int(round(duration * gaze.sample_rate)))

    trials: List[Trial] = []
    responses: List[TrialResponse] = []
    response_time = (len(VISIT_ORDER) * gaze.dwell
                     + (len(VISIT_ORDER) - 1) * gaze.saccade_duration)

    for i in range(n_trials):
        trial = generate_trial(rng, layout, config, trial_id=i)
        visit_screens = [getattr(trial, f"{name}_screen") for name in VISIT_ORDER]
        best_blur: Dict[int, BlurEllipse] = {}
        prev_dir = None
        for v, screen_index in enumerate(visit_screens):
            screen = screens[screen_index]
            stimulus = _stimulus_on(trial, screen_index)
            offset = trial.placements[stimulus].offset_deg(screen)
            direction = _gaze_direction(screen, offset)
            if v > 0 and gaze.saccade_duration > 0:
                # Saccade: controller already tracks the destination depth.
                for s in range(steps_for(gaze.saccade_duration)):
                    if fixed_power is None:
                        focus = autofocal_update(autofocal, focus,
                                                 vergences[screen_index], dt)
                    if prev_dir is not None:
                        frac = (s + 1) / steps_for(gaze.saccade_duration)
                        blend = tuple(a + (b - a) * frac
                                      for a, b in zip(prev_dir, direction))
                        emit(blend, screen.distance)
            for _ in range(steps_for(gaze.dwell)):
                if fixed_power is None:
                    focus = autofocal_update(autofocal, focus,
                                             vergences[screen_index], dt)
                emit(direction, screen.distance)
            prev_dir = direction
            ellipse = blur_ellipse(refraction, focus.lens_power,
                                   vergences[screen_index], pupil_mm)
            if blur_multiplier != 1.0:
                ellipse = BlurEllipse(major=ellipse.major * blur_multiplier,
                                      minor=ellipse.minor * blur_multiplier,
                                      orientation=ellipse.orientation)
            held = best_blur.get(screen_index)
            if held is None or ellipse.major < held.major:
                best_blur[screen_index] = ellipse
        response = observer_respond(trial, best_blur, observer, rng,
                                    response_time=response_time)
        trials.append(trial)
        responses.append(response)
        if collect is not None:
            collect.append((trial, response))

    return aggregate_block(trials, responses, layout)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

TRIALS_CSV_HEADER = ["trial_id", "table_screen", "landolt_screen", "sloan_screen",
                     "landolt_orientation", "sloan_letter", "table", "is_match",
                     "response", "correct", "response_time"]


def write_trials_csv(path, records: Iterable[Tuple[Trial, TrialResponse]]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRIALS_CSV_HEADER)
        for trial, response in records:
            table = json.dumps({str(o): trial.table[o] for o in ORIENTATIONS})
            writer.writerow([trial.trial_id, trial.table_screen,
                             trial.landolt_screen, trial.sloan_screen,
                             trial.landolt_orientation, trial.sloan_letter,
                             table, int(trial.is_match), response.response,
                             int(response.correct), repr(response.response_time)])
    return path


def read_trials_csv(path) -> List[dict]:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != TRIALS_CSV_HEADER:
            raise ValidationError(f"unrecognized trials header in {path}")
        for row in reader:
            rows.append({
                "trial_id": int(row["trial_id"]),
                "table_screen": int(row["table_screen"]),
                "landolt_screen": int(row["landolt_screen"]),
                "sloan_screen": int(row["sloan_screen"]),
                "landolt_orientation": int(row["landolt_orientation"]),
                "sloan_letter": row["sloan_letter"],
                "table": {int(k): v for k, v in json.loads(row["table"]).items()},
                "is_match": bool(int(row["is_match"])),
                "response": row["response"],
                "correct": bool(int(row["correct"])),
                "response_time": float(row["response_time"]),
            })
    return rows


# ---------------------------------------------------------------------------
# Task config files
# ---------------------------------------------------------------------------

def save_task_config(path, layout: SceneLayout, config: TaskConfig,
                     observer: ObserverModel) -> Path:
    path = Path(path)
    payload = {
        "screens": [{"name": s.name, "distance": s.distance,
                     "angular_size": s.angular_size,
                     "lateral_offset": s.lateral_offset} for s in layout.screens],
        "background_depth": layout.background_depth,
        "optotype_gap_arcmin": config.optotype_gap_arcmin,
        "p_center": config.p_center,
        "jitter_sigma_deg": config.jitter_sigma_deg,
        "observer": observer.to_dict(),
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def load_task_config(path) -> Tuple[SceneLayout, TaskConfig, ObserverModel]:
    data = json.loads(Path(path).read_text())
    try:
        layout = SceneLayout(
            screens=tuple(Screen(name=s["name"], distance=s["distance"],
                                 angular_size=s["angular_size"],
                                 lateral_offset=s.get("lateral_offset", 0.0))
                          for s in data["screens"]),
            background_depth=data.get("background_depth", 10.0))
        config = TaskConfig(
            optotype_gap_arcmin=data.get("optotype_gap_arcmin", 2.0),
            p_center=data.get("p_center", 0.5),
            jitter_sigma_deg=data.get("jitter_sigma_deg", 0.5))
        observer = ObserverModel.from_dict(data.get("observer", {}))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"invalid task config {path}: {exc}") from exc
    return layout, config, observer
