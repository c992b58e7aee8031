"""Enforce the strict-JSON output contract on raw model responses.

`parse` is total: any input string yields a Verdict whose parse_status says
how it went. Clean means the body was exactly one JSON object with exactly
the fields `label` and `reason` and an allowed label. Salvaged means such
an object could be extracted from surrounding prose. Anything else is
Failed; the fallback policy belongs to the pipeline, not here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

from .taxonomy import Stage1Label, Stage2Label

Label = Union[Stage1Label, Stage2Label]


class Stage(Enum):
    STAGE1 = "stage1"
    STAGE2 = "stage2"


class ParseStatus(Enum):
    CLEAN = "Clean"
    SALVAGED = "Salvaged"
    FAILED = "Failed"


@dataclass(frozen=True)
class ResponseSchema:
    """Allowed labels and required fields for one stage's answers."""

    stage: Stage
    allowed_labels: Tuple[str, ...]
    required_fields: Tuple[str, ...] = ("label", "reason")

    def label_for(self, wire: str) -> Label:
        if self.stage is Stage.STAGE1:
            return Stage1Label(wire)
        return Stage2Label(wire)


@dataclass(frozen=True)
class Verdict:
    stage: Stage
    label: Optional[Label]
    reason: str
    parse_status: ParseStatus
    segment_id: Optional[str] = None
    raw_body: Optional[str] = None
    attempt: int = 1
    latency: float = 0.0
    backend: str = ""

    @property
    def label_wire(self) -> Optional[str]:
        return self.label.value if self.label is not None else None


def _validate(obj: object, schema: ResponseSchema) -> Optional[Tuple[str, str]]:
    """Return (label, reason) when obj satisfies the schema exactly."""
    if not isinstance(obj, dict):
        return None
    if set(obj.keys()) != set(schema.required_fields):
        return None
    label = obj.get("label")
    reason = obj.get("reason")
    if not isinstance(label, str) or not isinstance(reason, str):
        return None
    label = label.strip()
    if label not in schema.allowed_labels:
        return None
    if not reason:
        return None
    return label, reason


def _balanced_objects(body: str):
    """Yield every balanced {...} substring, string- and escape-aware."""
    opens = [i for i, ch in enumerate(body) if ch == "{"]
    for start in opens:
        depth = 0
        in_string = False
        escaped = False
        for j in range(start, len(body)):
            ch = body[j]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield body[start : j + 1]
                    break


def parse(body: str, schema: ResponseSchema) -> Verdict:
    """Convert a raw response body into a typed Verdict. Never raises."""
    strict: Optional[Tuple[str, str]] = None
    try:
        strict = _validate(json.loads(body), schema)
    except (json.JSONDecodeError, RecursionError, ValueError):
        strict = None
    if strict is not None:
        label, reason = strict
        return Verdict(
            stage=schema.stage,
            label=schema.label_for(label),
            reason=reason,
            parse_status=ParseStatus.CLEAN,
            raw_body=body,
        )

    for candidate in _balanced_objects(body):
        try:
            salvaged = _validate(json.loads(candidate), schema)
        except (json.JSONDecodeError, RecursionError, ValueError):
            continue
        if salvaged is not None:
            label, reason = salvaged
            return Verdict(
                stage=schema.stage,
                label=schema.label_for(label),
                reason=reason,
                parse_status=ParseStatus.SALVAGED,
                raw_body=body,
            )

    return Verdict(
        stage=schema.stage,
        label=None,
        reason="",
        parse_status=ParseStatus.FAILED,
        raw_body=body,
    )
