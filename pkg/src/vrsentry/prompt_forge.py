"""Render the stage 1 / stage 2 classification prompts in four variants.

Variants layer monotonically: Context adds the cue-definition block to
Baseline, CoT adds the internal-reasoning block on top of Context, and
FewShot is Baseline plus labeled exemplar frame sets delivered as extra
messages. The rendered user text always ends with the strict-JSON output
instruction.

The stage 1 baseline, context, and reasoning blocks are fixed texts that
must match the golden files under prompts/ byte for byte; tests enforce
this. Keep the trailing double spaces inside the block constants - they
are part of the canonical text.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

from .taxonomy import Stage2Label, Subcategory, gold_reason, parent_of
from .verdict_parser import ResponseSchema, Stage

SYSTEM_TEXT = "You are a strict VR harassment video classifier"


class PromptVariant(Enum):
    BASELINE = "baseline"
    CONTEXT = "context"
    COT = "cot"
    FEWSHOT = "fewshot"


class MissingExemplars(ValueError):
    """FewShot requested without exemplars (or exemplars passed elsewhere)."""


class InvalidFrameCount(ValueError):
    """Fewer than two frames requested."""


@dataclass(frozen=True)
class Exemplar:
    """One labeled frame set shown before the query in FewShot bundles."""

    frame_hashes: Tuple[str, ...]
    label_wire: str
    reason: str

    def gold_answer(self) -> str:
        return '{"label": "%s", "reason": "%s"}' % (self.label_wire, self.reason)


@dataclass(frozen=True)
class PromptBundle:
    stage: Stage
    variant: PromptVariant
    system_text: str
    user_text: str
    frame_slots: int
    exemplars: Optional[Tuple[Exemplar, ...]] = None


_INTRO = (
    "You are given {N} sequential frames sampled from ONE short VR video (chronological order).\n"
    "Judge ONLY avatars' actions toward other avatars (ignore background/camera).\n"
)

_STAGE1_DEFINITIONS = (
    "Benign  = normal play with no hostile intent.\n"
    "Anomaly = clear hostile actions such as punching, slapping, or very close following.\n"
    "If you are uncertain, choose Benign.\n"
)

_STAGE1_CONTEXT_BLOCK = (
    "Anomaly =  \n"
    "1) Aggressive behavior: punching, slapping, striking with objects.  \n"
    "2) Personal space violation: standing uncomfortably close, persistent following, looming.  \n"
    "3) Disruptive behavior: blocking, cornering, targeted interference.  \n"
    "4) If multiple weak cues occur together (e.g., following + blocking), classify as Anomaly.  \n"
)

_COT_BLOCK = (
    "Reasoning (internal, do NOT output):  \n"
    "1) Are multiple avatars present?  \n"
    "2) Is there interaction between them?  \n"
    "3) Any striking or object-based attack?  \n"
    "4) Any invasive closeness, following, or looming?  \n"
    "5) Any blocking, cornering, or targeted interference?  \n"
    "6) If cues exist, assign the most appropriate hostile class; otherwise Benign.  \n"
)

_STAGE1_OUTPUT = (
    "Return ONLY a strict JSON object with EXACTLY these fields (no extra text):\n"
    '{"label": "<Benign|Anomaly>", "reason": "<one short phrase about avatars/actions/intent>"}'
)

# Stage 2 texts extend the stage 1 template: the binary definitions become
# the four category definitions and the answer alternation widens.
_STAGE2_DEFINITIONS = (
    "Benign = normal play with no hostile intent.\n"
    "Aggressive Behavior = punching, slapping, striking with objects.\n"
    "Personal Space Violation = standing uncomfortably close, persistent following, looming.\n"
    "Disruptive Behavior = blocking, cornering, targeted interference.\n"
    "If you are uncertain, choose Benign.\n"
)

_STAGE2_CONTEXT_BLOCK = (
    "Harassment =  \n"
    "1) Aggressive Behavior: punching, slapping, striking with objects.  \n"
    "2) Personal Space Violation: standing uncomfortably close, persistent following, looming.  \n"
    "3) Disruptive Behavior: blocking, cornering, targeted interference.  \n"
    "4) If multiple weak cues occur together (e.g., following + blocking), classify as the most appropriate harassment class.  \n"
)

_STAGE2_OUTPUT = (
    "Return ONLY a strict JSON object with EXACTLY these fields (no extra text):\n"
    '{"label": "<Benign|Aggressive Behavior|Personal Space Violation|Disruptive Behavior>", '
    '"reason": "<one short phrase about avatars/actions/intent>"}'
)

REPAIR_REMINDER = (
    "Your previous reply was not a valid answer. "
    "Return ONLY the strict JSON object with EXACTLY the fields label and reason, no extra text."
)


def render_template(stage: Stage, variant: PromptVariant) -> str:
    """The user-prompt template with the {N} placeholder unsubstituted."""
    if stage is Stage.STAGE1:
        definitions, context_block, output = (
            _STAGE1_DEFINITIONS,
            _STAGE1_CONTEXT_BLOCK,
            _STAGE1_OUTPUT,
        )
    else:
        definitions, context_block, output = (
            _STAGE2_DEFINITIONS,
            _STAGE2_CONTEXT_BLOCK,
            _STAGE2_OUTPUT,
        )
    blocks = [_INTRO, definitions]
    if variant in (PromptVariant.CONTEXT, PromptVariant.COT):
        blocks.append(context_block)
    if variant is PromptVariant.COT:
        blocks.append(_COT_BLOCK)
    blocks.append(output)
    return "\n".join(blocks)


def build_prompt(
    stage: Stage,
    variant: PromptVariant,
    n_frames: int,
    exemplars: Optional[Sequence[Exemplar]] = None,
) -> PromptBundle:
    """Render the fully substituted bundle for one (stage, variant, N)."""
    if n_frames < 2:
        raise InvalidFrameCount(f"need at least 2 frames, got {n_frames}")
    if variant is PromptVariant.FEWSHOT:
        if not exemplars:
            raise MissingExemplars("FewShot requires exemplars")
    elif exemplars:
        raise MissingExemplars(f"{variant.value} takes no exemplars")
    user_text = render_template(stage, variant).replace("{N}", str(n_frames))
    return PromptBundle(
        stage=stage,
        variant=variant,
        system_text=SYSTEM_TEXT,
        user_text=user_text,
        frame_slots=n_frames,
        exemplars=tuple(exemplars) if exemplars else None,
    )


def expected_schema(stage: Stage) -> ResponseSchema:
    """Allowed answer labels plus the two required fields for a stage."""
    if stage is Stage.STAGE1:
        return ResponseSchema(stage=stage, allowed_labels=("Benign", "Anomaly"))
    return ResponseSchema(
        stage=stage, allowed_labels=tuple(label.value for label in Stage2Label)
    )


def pick_exemplars(
    pool: Sequence[Tuple[Tuple[str, ...], Stage2Label, Subcategory]],
    stage: Stage,
    seed: int = 0,
) -> Tuple[Exemplar, ...]:
    """Class-balanced exemplar selection for FewShot prompts.

    Stage 2 draws one exemplar per class (k=4); stage 1 draws two per
    coarse class (k=4). Pool entries are (frame hashes, label, subcategory)
    of ground-truth segments.
    """
    rng = random.Random(seed)
    chosen: list = []
    if stage is Stage.STAGE2:
        for label in Stage2Label:
            members = [entry for entry in pool if entry[1] is label]
            if not members:
                raise MissingExemplars(f"no exemplar available for {label.value}")
            hashes, _, sub = rng.choice(members)
            chosen.append(Exemplar(tuple(hashes), label.value, gold_reason(sub)))
    else:
        benign = [e for e in pool if e[1] is Stage2Label.BENIGN]
        anomalous = [e for e in pool if e[1] is not Stage2Label.BENIGN]
        if len(benign) < 2 or len(anomalous) < 2:
            raise MissingExemplars("need two benign and two anomalous exemplars")
        for hashes, label, sub in rng.sample(benign, 2) + rng.sample(anomalous, 2):
            wire = "Benign" if label is Stage2Label.BENIGN else "Anomaly"
            chosen.append(Exemplar(tuple(hashes), wire, gold_reason(sub)))
    return tuple(chosen)


def stage2_parent_wire(sub: Subcategory) -> str:
    return parent_of(sub).value
