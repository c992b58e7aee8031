"""Turn raw clips into fixed-length segments and sampled frame sets.

Clips are cut into consecutive non-overlapping 10-second segments starting
at t=0; the trailing remainder is discarded, and clips shorter than 10 s
yield nothing. From each segment N frames are sampled endpoint-inclusive,
re-encoded as JPEG (longest side capped at 768 px), and written to a
content-addressed store at frames/<first-2-hex>/<hash>.jpg.

Two clip layouts are readable: a directory holding a clip.json plus an
ordered image sequence (the synthetic corpus format), and ordinary video
files when OpenCV is importable.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from PIL import Image

from .taxonomy import (
    Stage1Label,
    Stage2Label,
    Subcategory,
    coarsen,
    parse_stage2,
    parse_subcategory,
)

logger = logging.getLogger(__name__)

SEGMENT_SECONDS = 10.0
DEFAULT_FRAMES_PER_SEGMENT = 6
MAX_FRAME_EDGE = 768
JPEG_QUALITY = 90
MAX_PARTICIPANTS = 2


class UnreadableMedia(RuntimeError):
    """Clip file missing or undecodable; the clip must be skipped."""


class DecodeFailure(RuntimeError):
    """A segment could not be decoded; mark the segment unusable."""


class TooFewFrames(ValueError):
    """Segment holds fewer frames than the requested sample size."""


class DuplicateClipId(ValueError):
    pass


class Room(Enum):
    COMMUNICATION = "Communication"
    WHACK_A_PIG = "WhackAPig"
    SLING_SHOT = "SlingShot"
    CLIMBING = "Climbing"


@dataclass(frozen=True)
class GroundTruth:
    label: Stage2Label
    subcategory: Subcategory

    def to_json(self) -> dict:
        return {"label": self.label.value, "subcategory": self.subcategory.value}

    @staticmethod
    def from_json(obj: Optional[dict]) -> Optional["GroundTruth"]:
        if obj is None:
            return None
        return GroundTruth(
            label=parse_stage2(obj["label"]),
            subcategory=parse_subcategory(obj["subcategory"]),
        )


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    path: str
    duration: float
    fps: float
    participant_count: int
    room: Room
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"{self.clip_id}: duration must be positive")
        if self.fps <= 0:
            raise ValueError(f"{self.clip_id}: fps must be positive")
        if self.participant_count < 1:
            raise ValueError(f"{self.clip_id}: participant_count must be >= 1")

    def to_json(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "path": self.path,
            "duration": self.duration,
            "fps": self.fps,
            "participant_count": self.participant_count,
            "room": self.room.value,
            "truth": self.truth.to_json() if self.truth else None,
        }

    @staticmethod
    def from_json(obj: dict) -> "ClipRecord":
        return ClipRecord(
            clip_id=obj["clip_id"],
            path=obj["path"],
            duration=float(obj["duration"]),
            fps=float(obj["fps"]),
            participant_count=int(obj["participant_count"]),
            room=Room(obj["room"]),
            truth=GroundTruth.from_json(obj.get("truth")),
        )


@dataclass(frozen=True)
class Segment:
    segment_id: str
    clip_id: str
    index: int
    start: float
    length: float = SEGMENT_SECONDS
    truth: Optional[GroundTruth] = None


@dataclass(frozen=True)
class FrameRef:
    timestamp: float
    content_hash: str


@dataclass(frozen=True)
class FrameSet:
    segment_id: str
    frames: Tuple[FrameRef, ...]

    @property
    def n(self) -> int:
        return len(self.frames)

    @property
    def hashes(self) -> Tuple[str, ...]:
        return tuple(f.content_hash for f in self.frames)


def segment_id_for(clip_id: str, index: int) -> str:
    return f"{clip_id}:{index}"


def segment_clip(clip: ClipRecord) -> List[Segment]:
    """Cut a clip into consecutive 10-second segments from t=0."""
    if not Path(clip.path).exists():
        raise UnreadableMedia(f"clip file missing: {clip.path}")
    count = int(clip.duration // SEGMENT_SECONDS)
    return [
        Segment(
            segment_id=segment_id_for(clip.clip_id, i),
            clip_id=clip.clip_id,
            index=i,
            start=i * SEGMENT_SECONDS,
            truth=clip.truth,
        )
        for i in range(count)
    ]


def uniform_indices(frame_count: int, n: int) -> List[int]:
    """Endpoint-inclusive uniform sample: round(i*(F-1)/(n-1)), half up."""
    if n < 2:
        raise ValueError("need n >= 2")
    if frame_count < n:
        raise TooFewFrames(f"{frame_count} frames < {n} requested")
    return [math.floor(i * (frame_count - 1) / (n - 1) + 0.5) for i in range(n)]


# --- clip readers -----------------------------------------------------------

CLIP_META_NAME = "clip.json"


class ImageSequenceReader:
    """Clip stored as a directory: clip.json plus ordered image files."""

    def __init__(self, path: Path):
        meta_path = path / CLIP_META_NAME
        try:
            meta = json.loads(meta_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UnreadableMedia(f"bad clip directory {path}: {exc}") from exc
        self.fps = float(meta["fps"])
        self._files = sorted(
            p for p in path.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
        if not self._files:
            raise UnreadableMedia(f"no frames in clip directory {path}")
        self.frame_count = len(self._files)
        self.duration = self.frame_count / self.fps

    def get_frame(self, index: int) -> Image.Image:
        try:
            with Image.open(self._files[index]) as img:
                return img.convert("RGB")
        except (OSError, IndexError) as exc:
            raise DecodeFailure(f"cannot decode frame {index}: {exc}") from exc


class VideoFileReader:
    """Clip stored as a video file; decoding via OpenCV."""

    def __init__(self, path: Path):
        try:
            import cv2
        except ImportError as exc:
            raise UnreadableMedia(
                "video file clips need opencv-python-headless installed"
            ) from exc
        self._cv2 = cv2
        self._cap = cv2.VideoCapture(str(path))
        if not self._cap.isOpened():
            raise UnreadableMedia(f"cannot open video {path}")
        self.fps = self._cap.get(cv2.CAP_PROP_FPS) or 0.0
        self.frame_count = int(self._cap.get(cv2.CAP_PROP_FRAME_COUNT))
        if self.fps <= 0 or self.frame_count <= 0:
            raise UnreadableMedia(f"video metadata unreadable: {path}")
        self.duration = self.frame_count / self.fps

    def get_frame(self, index: int) -> Image.Image:
        self._cap.set(self._cv2.CAP_PROP_POS_FRAMES, index)
        ok, frame = self._cap.read()
        if not ok:
            raise DecodeFailure(f"cannot decode frame {index}")
        rgb = self._cv2.cvtColor(frame, self._cv2.COLOR_BGR2RGB)
        return Image.fromarray(rgb)


def open_clip(path: str):
    """Pick a reader for a clip path (directory corpus or video file)."""
    p = Path(path)
    if not p.exists():
        raise UnreadableMedia(f"clip path missing: {path}")
    if p.is_dir():
        return ImageSequenceReader(p)
    return VideoFileReader(p)


# --- content-addressed frame store ------------------------------------------


class FrameStore:
    """Immutable JPEG store keyed by sha256 of the encoded bytes."""

    def __init__(self, root: str):
        self.root = Path(root)
        (self.root / "frames").mkdir(parents=True, exist_ok=True)

    def frame_path(self, content_hash: str) -> Path:
        return self.root / "frames" / content_hash[:2] / f"{content_hash}.jpg"

    def has(self, content_hash: str) -> bool:
        return self.frame_path(content_hash).exists()

    def read(self, content_hash: str) -> bytes:
        return self.frame_path(content_hash).read_bytes()

    def put(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self.frame_path(digest)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return digest


def encode_frame(img: Image.Image) -> bytes:
    """Normalize to the storage format: RGB JPEG, longest side <= 768."""
    if img.mode != "RGB":
        img = img.convert("RGB")
    longest = max(img.size)
    if longest > MAX_FRAME_EDGE:
        scale = MAX_FRAME_EDGE / longest
        img = img.resize(
            (max(1, round(img.width * scale)), max(1, round(img.height * scale))),
            Image.LANCZOS,
        )
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=JPEG_QUALITY)
    return buf.getvalue()


def sample_frames(segment: Segment, n: int, reader, store: FrameStore) -> FrameSet:
    """Sample, re-encode, and persist N frames of one segment."""
    fps = reader.fps
    first = math.ceil(segment.start * fps - 1e-9)
    end = math.floor((segment.start + segment.length) * fps + 1e-9)
    available = min(end, reader.frame_count) - first
    locals_ = uniform_indices(available, n)
    frames = []
    for local in locals_:
        global_index = first + local
        data = encode_frame(reader.get_frame(global_index))
        digest = store.put(data)
        frames.append(FrameRef(timestamp=global_index / fps, content_hash=digest))
    return FrameSet(segment_id=segment.segment_id, frames=tuple(frames))


# --- manifest validation ------------------------------------------------------


@dataclass
class ValidationReport:
    total: int
    included: List[ClipRecord]
    excluded: List[Tuple[str, str]]
    room_counts: Dict[str, int]
    stage2_counts: Dict[str, int]
    stage1_counts: Dict[str, int]

    @property
    def stage1_ratios(self) -> Dict[str, float]:
        labeled = sum(self.stage1_counts.values())
        if labeled == 0:
            return {}
        return {k: v / labeled for k, v in self.stage1_counts.items()}

    @property
    def stage2_ratios(self) -> Dict[str, float]:
        labeled = sum(self.stage2_counts.values())
        if labeled == 0:
            return {}
        return {k: v / labeled for k, v in self.stage2_counts.items()}


def validate_manifest(clips: Sequence[ClipRecord]) -> ValidationReport:
    """Exclusion flags plus per-room / per-label tallies of included clips."""
    seen = set()
    for clip in clips:
        if clip.clip_id in seen:
            raise DuplicateClipId(clip.clip_id)
        seen.add(clip.clip_id)
    included: List[ClipRecord] = []
    excluded: List[Tuple[str, str]] = []
    room_counts = {room.value: 0 for room in Room}
    stage2_counts = {label.value: 0 for label in Stage2Label}
    stage1_counts = {label.value: 0 for label in Stage1Label}
    for clip in clips:
        if clip.participant_count > MAX_PARTICIPANTS:
            excluded.append((clip.clip_id, "participant_count>2"))
            continue
        included.append(clip)
        room_counts[clip.room.value] += 1
        if clip.truth is not None:
            stage2_counts[clip.truth.label.value] += 1
            stage1_counts[coarsen(clip.truth.label).value] += 1
    return ValidationReport(
        total=len(clips),
        included=included,
        excluded=excluded,
        room_counts=room_counts,
        stage2_counts=stage2_counts,
        stage1_counts=stage1_counts,
    )


# --- manifest and registry I/O ------------------------------------------------


def load_manifest(path: str) -> List[ClipRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ClipRecord.from_json(json.loads(line)))
    return records


def write_manifest(path: str, clips: Iterable[ClipRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for clip in clips:
            fh.write(json.dumps(clip.to_json(), sort_keys=True) + "\n")


FRAMESETS_NAME = "framesets.jsonl"
CLIPS_NAME = "clips.jsonl"


@dataclass
class IngestResult:
    store_root: str
    segments: int
    clips_ingested: int
    clips_skipped: List[Tuple[str, str]]
    clips_excluded: List[Tuple[str, str]]


class SegmentRegistry:
    """Segments and frame sets known to a store, loaded from its journals.

    Appending is cheap and readers may refresh; the mock backend resolves
    frame-hash tuples back to segments through this registry.
    """

    def __init__(self, store_root: str):
        self.store_root = Path(store_root)
        self.segments: Dict[str, Segment] = {}
        self.framesets: Dict[str, FrameSet] = {}
        self.clips: Dict[str, ClipRecord] = {}
        self._by_hashes: Dict[Tuple[str, ...], str] = {}
        self._by_first_hash: Dict[str, str] = {}
        self.refresh()

    def refresh(self) -> None:
        clips_path = self.store_root / CLIPS_NAME
        if clips_path.exists():
            for clip in load_manifest(str(clips_path)):
                self.clips[clip.clip_id] = clip
        fs_path = self.store_root / FRAMESETS_NAME
        if fs_path.exists():
            with open(fs_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._add_record(json.loads(line))

    def _add_record(self, obj: dict) -> None:
        segment = Segment(
            segment_id=obj["segment_id"],
            clip_id=obj["clip_id"],
            index=int(obj["index"]),
            start=float(obj["start"]),
            truth=GroundTruth.from_json(obj.get("truth")),
        )
        frameset = FrameSet(
            segment_id=segment.segment_id,
            frames=tuple(
                FrameRef(timestamp=float(f["t"]), content_hash=f["hash"])
                for f in obj["frames"]
            ),
        )
        self.segments[segment.segment_id] = segment
        self.framesets[segment.segment_id] = frameset
        self._by_hashes[frameset.hashes] = segment.segment_id
        self._by_first_hash.setdefault(frameset.hashes[0], segment.segment_id)

    def add(self, segment: Segment, frameset: FrameSet, clip: ClipRecord) -> None:
        if segment.segment_id in self.segments:
            return
        obj = {
            "segment_id": segment.segment_id,
            "clip_id": segment.clip_id,
            "index": segment.index,
            "start": segment.start,
            "truth": segment.truth.to_json() if segment.truth else None,
            "frames": [
                {"t": f.timestamp, "hash": f.content_hash} for f in frameset.frames
            ],
        }
        with open(self.store_root / FRAMESETS_NAME, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
        if clip.clip_id not in self.clips:
            with open(self.store_root / CLIPS_NAME, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(clip.to_json(), sort_keys=True) + "\n")
            self.clips[clip.clip_id] = clip
        self._add_record(obj)

    def resolve_hashes(self, hashes: Sequence[str]) -> Optional[str]:
        """Segment id for a frame-hash tuple (exact match, else first hash)."""
        sid = self._by_hashes.get(tuple(hashes))
        if sid is None:
            sid = self._by_first_hash.get(hashes[0]) if hashes else None
        if sid is None:
            self.refresh()
            sid = self._by_hashes.get(tuple(hashes)) or (
                self._by_first_hash.get(hashes[0]) if hashes else None
            )
        return sid


def ingest_manifest(
    manifest_path: str,
    store_root: str,
    frames_per_segment: int = DEFAULT_FRAMES_PER_SEGMENT,
) -> IngestResult:
    """Validate a manifest and ingest every included clip into the store."""
    clips = load_manifest(manifest_path)
    report = validate_manifest(clips)
    store = FrameStore(store_root)
    registry = SegmentRegistry(store_root)
    skipped: List[Tuple[str, str]] = []
    n_segments = 0
    n_clips = 0
    for clip in report.included:
        try:
            reader = open_clip(clip.path)
            segments = segment_clip(clip)
            for segment in segments:
                frameset = sample_frames(segment, frames_per_segment, reader, store)
                registry.add(segment, frameset, clip)
                n_segments += 1
            n_clips += 1
        except (UnreadableMedia, DecodeFailure, TooFewFrames) as exc:
            logger.warning("skipping clip %s: %s", clip.clip_id, exc)
            skipped.append((clip.clip_id, str(exc)))
    return IngestResult(
        store_root=store_root,
        segments=n_segments,
        clips_ingested=n_clips,
        clips_skipped=skipped,
        clips_excluded=report.excluded,
    )
