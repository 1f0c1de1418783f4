"""Questionnaire engine: JSON-defined question sets loaded by abbreviation.

A questionnaire file is ``<search_dir>/<abbreviation>.json``; dropping a new
file in is all it takes to make a new instrument loadable. Responses are
stored per scene in the session folder, never overwriting earlier runs of
the same scene.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .errors import ValidationError

ITEM_KINDS = ("likert", "choice", "free_text", "slider")

Answer = Union[int, float, str]


@dataclass(frozen=True)
class LikertItem:
    id: str
    text: str
    min: int
    max: int
    labels: Tuple[str, ...] = ()  # anchor labels, typically (low, high)
    required: bool = True
    kind: str = field(default="likert", init=False)

    def __post_init__(self):
        if self.min >= self.max:
            raise ValidationError(f"item {self.id!r}: likert needs min < max")

    def check_answer(self, value: Answer) -> None:
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValidationError(f"item {self.id!r}: likert answer must be an integer")
        if not self.min <= value <= self.max:
            raise ValidationError(
                f"item {self.id!r}: answer {value} outside scale {self.min}..{self.max}")

    def default_answer(self) -> int:
        return (self.min + self.max) // 2

    def to_dict(self) -> dict:
        d = {"id": self.id, "text": self.text, "kind": "likert",
             "min": self.min, "max": self.max, "required": self.required}
        if self.labels:
            d["labels"] = list(self.labels)
        return d


@dataclass(frozen=True)
class ChoiceItem:
    id: str
    text: str
    options: Tuple[str, ...]
    required: bool = True
    kind: str = field(default="choice", init=False)

    def __post_init__(self):
        if len(self.options) < 2:
            raise ValidationError(f"item {self.id!r}: choice needs >= 2 options")

    def check_answer(self, value: Answer) -> None:
        if value not in self.options:
            raise ValidationError(
                f"item {self.id!r}: answer {value!r} not among options")

    def default_answer(self) -> str:
        return self.options[0]

    def to_dict(self) -> dict:
        return {"id": self.id, "text": self.text, "kind": "choice",
                "options": list(self.options), "required": self.required}


@dataclass(frozen=True)
class FreeTextItem:
    id: str
    text: str
    required: bool = True
    kind: str = field(default="free_text", init=False)

    def check_answer(self, value: Answer) -> None:
        if not isinstance(value, str):
            raise ValidationError(f"item {self.id!r}: free-text answer must be a string")

    def default_answer(self) -> str:
        return ""

    def to_dict(self) -> dict:
        return {"id": self.id, "text": self.text, "kind": "free_text",
                "required": self.required}


@dataclass(frozen=True)
class SliderItem:
    id: str
    text: str
    min: float
    max: float
    step: float = 1.0
    required: bool = True
    kind: str = field(default="slider", init=False)

    def __post_init__(self):
        if self.min >= self.max:
            raise ValidationError(f"item {self.id!r}: slider needs min < max")
        if self.step <= 0:
            raise ValidationError(f"item {self.id!r}: slider step must be > 0")

    def check_answer(self, value: Answer) -> None:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ValidationError(f"item {self.id!r}: slider answer must be numeric")
        if not self.min <= value <= self.max:
            raise ValidationError(
                f"item {self.id!r}: answer {value} outside range "
                f"{self.min}..{self.max}")
        steps = (value - self.min) / self.step
        if abs(steps - round(steps)) > 1e-9:
            raise ValidationError(
                f"item {self.id!r}: answer {value} not aligned to step {self.step}")

    def default_answer(self) -> float:
        # midpoint snapped to the step grid
        steps = round((self.max - self.min) / (2 * self.step))
        return self.min + steps * self.step

    def to_dict(self) -> dict:
        return {"id": self.id, "text": self.text, "kind": "slider",
                "min": self.min, "max": self.max, "step": self.step,
                "required": self.required}


Item = Union[LikertItem, ChoiceItem, FreeTextItem, SliderItem]


def item_from_dict(d: dict) -> Item:
    item_id = d.get("id")
    if not item_id:
        raise ValidationError("item without an id")
    kind = d.get("kind")
    try:
        if kind == "likert":
            return LikertItem(id=item_id, text=d.get("text", ""),
                              min=int(d["min"]), max=int(d["max"]),
                              labels=tuple(d.get("labels", ())),
                              required=bool(d.get("required", True)))
        if kind == "choice":
            return ChoiceItem(id=item_id, text=d.get("text", ""),
                              options=tuple(d["options"]),
                              required=bool(d.get("required", True)))
        if kind == "free_text":
            return FreeTextItem(id=item_id, text=d.get("text", ""),
                                required=bool(d.get("required", True)))
        if kind == "slider":
            return SliderItem(id=item_id, text=d.get("text", ""),
                              min=float(d["min"]), max=float(d["max"]),
                              step=float(d.get("step", 1.0)),
                              required=bool(d.get("required", True)))
    except KeyError as exc:
        raise ValidationError(f"item {item_id!r}: missing field {exc}") from None
    raise ValidationError(f"item {item_id!r}: unknown kind {kind!r}")


@dataclass(frozen=True)
class Questionnaire:
    abbreviation: str
    title: str
    items: Tuple[Item, ...]

    def __post_init__(self):
        if not self.abbreviation:
            raise ValidationError("abbreviation must be non-empty")
        if not self.items:
            raise ValidationError("questionnaire needs at least one item")
        ids = [item.id for item in self.items]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate item ids: {dupes}")

    def item(self, item_id: str) -> Item:
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(item_id)

    def to_dict(self) -> dict:
        return {"abbreviation": self.abbreviation, "title": self.title,
                "items": [item.to_dict() for item in self.items]}

    @classmethod
    def from_dict(cls, d: dict) -> "Questionnaire":
        return cls(abbreviation=d.get("abbreviation", ""),
                   title=d.get("title", ""),
                   items=tuple(item_from_dict(i) for i in d.get("items", ())))


def load_questionnaire(abbreviation: str, search_dir) -> Questionnaire:
    """Load ``<search_dir>/<abbreviation>.json`` and validate it."""
    path = Path(search_dir) / f"{abbreviation}.json"
    if not path.exists():
        raise FileNotFoundError(f"no questionnaire file at {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    questionnaire = Questionnaire.from_dict(data)
    if questionnaire.abbreviation != abbreviation:
        raise ValidationError(
            f"{path}: abbreviation {questionnaire.abbreviation!r} does not match "
            f"file name {abbreviation!r}")
    return questionnaire


def save_questionnaire(questionnaire: Questionnaire, directory) -> Path:
    path = Path(directory) / f"{questionnaire.abbreviation}.json"
    path.write_text(json.dumps(questionnaire.to_dict(), indent=2) + "\n")
    return path


# ---------------------------------------------------------------------------
# Responses
# ---------------------------------------------------------------------------

@dataclass
class ResponseSet:
    questionnaire: Questionnaire
    scene_name: str
    answers: Dict[str, Answer] = field(default_factory=dict)
    completed_at: Optional[str] = None

    @property
    def abbreviation(self) -> str:
        return self.questionnaire.abbreviation

    def answer(self, item_id: str, value: Answer) -> None:
        try:
            item = self.questionnaire.item(item_id)
        except KeyError:
            raise ValidationError(f"no item {item_id!r} in "
                                  f"{self.abbreviation}") from None
        item.check_answer(value)
        self.answers[item_id] = value

    def unanswered(self) -> List[str]:
        return [item.id for item in self.questionnaire.items
                if item.required and item.id not in self.answers]

    def complete(self) -> None:
        missing = self.unanswered()
        if missing:
            raise ValidationError(f"unanswered items: {missing}")
        self.completed_at = datetime.now(timezone.utc).isoformat()

    def to_dict(self) -> dict:
        return {"abbreviation": self.abbreviation, "scene": self.scene_name,
                "completed_at": self.completed_at, "answers": dict(self.answers)}


def default_answers(questionnaire: Questionnaire) -> Dict[str, Answer]:
    """Deterministic neutral answers, used by headless auto-completion."""
    return {item.id: item.default_answer() for item in questionnaire.items}


def record_responses(responses: ResponseSet, session) -> Path:
    """Persist a completed response set under the scene's subfolder.

    The file is ``responses_<abbrev>.json``; existing files get an appended
    index instead of being overwritten.
    """
    if responses.completed_at is None:
        responses.complete()  # raises listing unanswered ids
    for item_id, value in responses.answers.items():
        responses.questionnaire.item(item_id).check_answer(value)
    scene_dir = session.scene_dir(responses.scene_name)
    base = f"responses_{responses.abbreviation}"
    path = scene_dir / f"{base}.json"
    counter = 0
    while path.exists():
        counter += 1
        path = scene_dir / f"{base}_{counter}.json"
    path.write_text(json.dumps(responses.to_dict(), indent=2) + "\n")
    return path


def load_responses(path) -> dict:
    return json.loads(Path(path).read_text())
