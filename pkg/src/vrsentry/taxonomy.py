"""Canonical label sets for both classification stages.

The enum values are the wire strings: they appear verbatim in prompts,
manifests, run outputs and API payloads, and the response parser matches
them case-sensitively. Everything else in the system derives label text
from here.
"""

from __future__ import annotations

from enum import Enum


class UnknownLabel(ValueError):
    """A string does not match any canonical wire string."""


class Stage1Label(Enum):
    BENIGN = "Benign"
    ANOMALY = "Anomaly"


class Stage2Label(Enum):
    BENIGN = "Benign"
    AGGRESSIVE = "Aggressive Behavior"
    PERSONAL_SPACE = "Personal Space Violation"
    DISRUPTIVE = "Disruptive Behavior"


class Subcategory(Enum):
    """Fine-grained behavior catalog. Ground-truth metadata only: the model
    is never asked to emit these."""

    PUNCHING = "Punching"
    SLAPPING = "Slapping"
    HITTING_WITH_OBJECT = "Hitting with object"
    LOOMING = "Looming"
    FOLLOWING_STALKING = "Following / Stalking"
    BLOCKING = "Blocking"
    BENIGN_OTHER = "Benign (other)"

    @property
    def definition(self) -> str:
        return _DEFINITIONS[self]


_DEFINITIONS = {
    Subcategory.PUNCHING: "Attacking another avatar with a fist",
    Subcategory.SLAPPING: "Attacking another avatar with an open hand",
    Subcategory.HITTING_WITH_OBJECT: "Attacking another avatar using an object",
    Subcategory.LOOMING: "Bringing one's avatar face close to another user's avatar",
    Subcategory.FOLLOWING_STALKING: "Tracking a user repeatedly over time",
    Subcategory.BLOCKING: "Obstructing the movement of another avatar",
    Subcategory.BENIGN_OTHER: "All other benign behaviors (e.g., talking, rock-paper-scissors, walking)",
}

_PARENTS = {
    Subcategory.PUNCHING: Stage2Label.AGGRESSIVE,
    Subcategory.SLAPPING: Stage2Label.AGGRESSIVE,
    Subcategory.HITTING_WITH_OBJECT: Stage2Label.AGGRESSIVE,
    Subcategory.LOOMING: Stage2Label.PERSONAL_SPACE,
    Subcategory.FOLLOWING_STALKING: Stage2Label.PERSONAL_SPACE,
    Subcategory.BLOCKING: Stage2Label.DISRUPTIVE,
    Subcategory.BENIGN_OTHER: Stage2Label.BENIGN,
}

STAGE1_WIRE = tuple(label.value for label in Stage1Label)
STAGE2_WIRE = tuple(label.value for label in Stage2Label)


def coarsen(label: Stage2Label) -> Stage1Label:
    """Collapse the four-way label to the binary one: anything that is not
    benign is an anomaly."""
    if label is Stage2Label.BENIGN:
        return Stage1Label.BENIGN
    return Stage1Label.ANOMALY


def parent_of(sub: Subcategory) -> Stage2Label:
    """Owning category of a subcategory."""
    return _PARENTS[sub]


def parse_stage1(text: str) -> Stage1Label:
    for label in Stage1Label:
        if label.value == text:
            return label
    raise UnknownLabel(f"not a stage 1 label: {text!r}")


def parse_stage2(text: str) -> Stage2Label:
    for label in Stage2Label:
        if label.value == text:
            return label
    raise UnknownLabel(f"not a stage 2 label: {text!r}")


def parse_subcategory(text: str) -> Subcategory:
    for sub in Subcategory:
        if sub.value == text:
            return sub
    raise UnknownLabel(f"not a subcategory: {text!r}")


def gold_reason(sub: Subcategory) -> str:
    """One-phrase rationale used for gold answers in exported training
    records and few-shot exemplars: the catalog definition, lower-cased."""
    text = sub.definition
    return text[0].lower() + text[1:]
