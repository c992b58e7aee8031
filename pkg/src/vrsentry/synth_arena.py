"""Synthetic labeled corpus: scripted avatar trajectories, schematic clip
renders, and a deterministic rule oracle over the behavior catalog.

Each script enacts one subcategory with two avatars in a small arena and is
rendered top-down at 10 fps (circle body, wedge heading, stroke for an
extended limb, marker for a held object). A trajectory sidecar is written
next to the frames so the mock backend can replay the oracle later.

All kinematic thresholds are invented calibration constants collected in
OracleThresholds; the oracle evaluates rules in fixed priority order
(aggressive, then disruptive, then personal-space, else benign), so
overlapping cues resolve deterministically.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from PIL import Image, ImageDraw

from .media_ingest import CLIP_META_NAME, ClipRecord, GroundTruth, Room
from .taxonomy import Stage2Label, Subcategory, parent_of

DT = 0.1
FPS = 10
ARENA = (8.0, 8.0)
SIDECAR_NAME = "trajectory.json"


class InvalidScript(ValueError):
    pass


class WindowOutOfRange(ValueError):
    pass


class GenerationError(RuntimeError):
    """A generated trajectory failed its own oracle self-check."""


@dataclass
class AvatarTrack:
    xs: List[float] = field(default_factory=list)
    ys: List[float] = field(default_factory=list)
    headings: List[float] = field(default_factory=list)
    limb_ext: List[float] = field(default_factory=list)
    fist: List[bool] = field(default_factory=list)
    held: List[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.xs)

    def pos(self, i: int) -> Tuple[float, float]:
        return self.xs[i], self.ys[i]

    def tip(self, i: int) -> Tuple[float, float]:
        return (
            self.xs[i] + math.cos(self.headings[i]) * self.limb_ext[i],
            self.ys[i] + math.sin(self.headings[i]) * self.limb_ext[i],
        )

    def speed(self, i: int, dt: float) -> float:
        if i <= 0:
            return 0.0
        return math.dist(self.pos(i), self.pos(i - 1)) / dt

    def tip_speed(self, i: int, dt: float) -> float:
        if i <= 0:
            return 0.0
        return math.dist(self.tip(i), self.tip(i - 1)) / dt


@dataclass
class Trajectory:
    dt: float
    tracks: Tuple[AvatarTrack, AvatarTrack]
    bounds: Tuple[float, float] = ARENA
    attacker: int = 0
    victim: int = 1

    @property
    def ticks(self) -> int:
        return len(self.tracks[0])

    @property
    def duration(self) -> float:
        return self.ticks * self.dt

    def to_json(self) -> dict:
        return {
            "dt": self.dt,
            "bounds": list(self.bounds),
            "attacker": self.attacker,
            "victim": self.victim,
            "tracks": [
                {
                    "x": t.xs,
                    "y": t.ys,
                    "heading": t.headings,
                    "limb": t.limb_ext,
                    "fist": t.fist,
                    "held": t.held,
                }
                for t in self.tracks
            ],
        }

    @staticmethod
    def from_json(obj: dict) -> "Trajectory":
        tracks = tuple(
            AvatarTrack(
                xs=list(map(float, t["x"])),
                ys=list(map(float, t["y"])),
                headings=list(map(float, t["heading"])),
                limb_ext=list(map(float, t["limb"])),
                fist=list(map(bool, t["fist"])),
                held=list(map(bool, t["held"])),
            )
            for t in obj["tracks"]
        )
        return Trajectory(
            dt=float(obj["dt"]),
            tracks=tracks,  # type: ignore[arg-type]
            bounds=tuple(obj["bounds"]),  # type: ignore[arg-type]
            attacker=int(obj["attacker"]),
            victim=int(obj["victim"]),
        )


@dataclass(frozen=True)
class BehaviorScript:
    scenario: Subcategory
    duration: float = 12.0
    attacker: int = 0
    victim: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.duration < 10.0:
            raise InvalidScript("duration must be >= 10 s")
        if {self.attacker, self.victim} != {0, 1}:
            raise InvalidScript("roles must cover avatars 0 and 1")


@dataclass(frozen=True)
class OracleThresholds:
    strike_distance: float = 0.5
    strike_tip_speed: float = 2.0
    loom_distance: float = 0.4
    loom_victim_speed: float = 0.2
    loom_sustain: float = 2.0
    follow_speed: float = 0.3
    follow_distance_min: float = 0.5
    follow_distance_max: float = 2.0
    follow_heading_deg: float = 30.0
    follow_sustain: float = 5.0
    block_distance: float = 0.8
    block_cone_half_deg: float = 30.0
    block_sustain: float = 2.0
    block_speed_drop: float = 0.5
    block_min_start_speed: float = 0.2
    moving_eps: float = 0.05


DEFAULT_THRESHOLDS = OracleThresholds()


def _wrap_angle(a: float) -> float:
    while a > math.pi:
        a -= 2 * math.pi
    while a < -math.pi:
        a += 2 * math.pi
    return a


def _runs(flags: Sequence[bool]):
    """Maximal runs of consecutive True values as (start, length)."""
    start = None
    for i, flag in enumerate(flags):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            yield start, i - start
            start = None
    if start is not None:
        yield start, len(flags) - start


def oracle_classify(
    traj: Trajectory,
    window: Tuple[float, float],
    thresholds: OracleThresholds = DEFAULT_THRESHOLDS,
) -> Tuple[Stage2Label, Subcategory]:
    """Rule-based classification of one 10-second window.

    Rules fire in priority order: contact strike, blocking, looming,
    following; anything else is benign. All predicates use relative
    quantities only, so the result is invariant to rigid motions of the
    whole scene.
    """
    th = thresholds
    dt = traj.dt
    i0 = int(round(window[0] / dt))
    i1 = int(round(window[1] / dt))
    if i0 < 0 or i1 > traj.ticks or i0 >= i1:
        raise WindowOutOfRange(f"window {window} outside 0..{traj.duration:.1f}")
    att = traj.tracks[traj.attacker]
    vic = traj.tracks[traj.victim]
    ticks = range(i0, i1)

    dist = {i: math.dist(att.pos(i), vic.pos(i)) for i in ticks}

    # 1. aggressive contact: close range plus a fast limb tip
    for i in ticks:
        if dist[i] < th.strike_distance and att.tip_speed(i, dt) > th.strike_tip_speed:
            if att.fist[i]:
                return Stage2Label.AGGRESSIVE, Subcategory.PUNCHING
            if att.held[i]:
                return Stage2Label.AGGRESSIVE, Subcategory.HITTING_WITH_OBJECT
            return Stage2Label.AGGRESSIVE, Subcategory.SLAPPING

    # 2. blocking: attacker camped in the victim's way while the victim
    # slows to a crawl
    cone = math.radians(th.block_cone_half_deg)
    motion_dir: Optional[float] = None
    in_front = []
    for i in ticks:
        if vic.speed(i, dt) >= th.moving_eps and i > 0:
            motion_dir = math.atan2(
                vic.ys[i] - vic.ys[i - 1], vic.xs[i] - vic.xs[i - 1]
            )
        if motion_dir is None or dist[i] >= th.block_distance:
            in_front.append(False)
            continue
        to_attacker = math.atan2(att.ys[i] - vic.ys[i], att.xs[i] - vic.xs[i])
        in_front.append(abs(_wrap_angle(to_attacker - motion_dir)) <= cone)
    probe = max(1, int(round(0.5 / dt)))
    for start, length in _runs(in_front):
        if length * dt < th.block_sustain:
            continue
        run_ticks = [i0 + start + k for k in range(length)]
        v_start = sum(vic.speed(i, dt) for i in run_ticks[:probe]) / probe
        v_end = sum(vic.speed(i, dt) for i in run_ticks[-probe:]) / probe
        if v_start >= th.block_min_start_speed and v_end < th.block_speed_drop * v_start:
            return Stage2Label.DISRUPTIVE, Subcategory.BLOCKING

    # 3a. looming: sustained face-range proximity to a near-still victim
    looming = [
        dist[i] < th.loom_distance and vic.speed(i, dt) < th.loom_victim_speed
        for i in ticks
    ]
    if any(length * dt >= th.loom_sustain for _, length in _runs(looming)):
        return Stage2Label.PERSONAL_SPACE, Subcategory.LOOMING

    # 3b. following: both moving, trailing at range, heading locked on
    heading_tol = math.radians(th.follow_heading_deg)
    following = []
    for i in ticks:
        if (
            att.speed(i, dt) > th.follow_speed
            and vic.speed(i, dt) > th.follow_speed
            and th.follow_distance_min <= dist[i] <= th.follow_distance_max
        ):
            bearing = math.atan2(vic.ys[i] - att.ys[i], vic.xs[i] - att.xs[i])
            following.append(
                abs(_wrap_angle(att.headings[i] - bearing)) <= heading_tol
            )
        else:
            following.append(False)
    if any(length * dt >= th.follow_sustain for _, length in _runs(following)):
        return Stage2Label.PERSONAL_SPACE, Subcategory.FOLLOWING_STALKING

    return Stage2Label.BENIGN, Subcategory.BENIGN_OTHER


def transform_trajectory(
    traj: Trajectory, dx: float = 0.0, dy: float = 0.0, theta: float = 0.0
) -> Trajectory:
    """Rigidly rotate (about the arena center) and translate a trajectory."""
    cx, cy = traj.bounds[0] / 2, traj.bounds[1] / 2
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    new_tracks = []
    for track in traj.tracks:
        xs, ys, headings = [], [], []
        for x, y, h in zip(track.xs, track.ys, track.headings):
            rx, ry = x - cx, y - cy
            xs.append(cx + rx * cos_t - ry * sin_t + dx)
            ys.append(cy + rx * sin_t + ry * cos_t + dy)
            headings.append(h + theta)
        new_tracks.append(
            AvatarTrack(
                xs=xs,
                ys=ys,
                headings=headings,
                limb_ext=list(track.limb_ext),
                fist=list(track.fist),
                held=list(track.held),
            )
        )
    return replace(traj, tracks=tuple(new_tracks))


# --- script enactment ---------------------------------------------------------


class _Actor:
    """Tick-by-tick track builder with a maximum step length."""

    def __init__(self, x: float, y: float, heading: float = 0.0):
        self.track = AvatarTrack()
        self.x, self.y, self.heading = x, y, heading
        self.limb, self.fist, self.held = 0.0, False, False

    def step_towards(self, tx: float, ty: float, max_step: float) -> None:
        d = math.dist((self.x, self.y), (tx, ty))
        if d <= max_step:
            self.x, self.y = tx, ty
        else:
            self.x += (tx - self.x) / d * max_step
            self.y += (ty - self.y) / d * max_step

    def face(self, tx: float, ty: float) -> None:
        if (tx, ty) != (self.x, self.y):
            self.heading = math.atan2(ty - self.y, tx - self.x)

    def commit(self) -> None:
        t = self.track
        t.xs.append(self.x)
        t.ys.append(self.y)
        t.headings.append(self.heading)
        t.limb_ext.append(self.limb)
        t.fist.append(self.fist)
        t.held.append(self.held)


def _jitter(rng: random.Random, actor: _Actor, home: Tuple[float, float], step: float):
    tx = home[0] + rng.uniform(-0.15, 0.15)
    ty = home[1] + rng.uniform(-0.15, 0.15)
    actor.step_towards(tx, ty, step)


def enact(script: BehaviorScript) -> Trajectory:
    """Build the two-avatar trajectory for a scenario."""
    rng = random.Random(script.seed)
    ticks = int(round(script.duration / DT))
    scenario = script.scenario
    attacker = _Actor(6.2 + rng.uniform(-0.2, 0.2), 4.0 + rng.uniform(-0.3, 0.3))
    victim = _Actor(4.2, 4.0 + rng.uniform(-0.2, 0.2))

    if scenario in (
        Subcategory.PUNCHING,
        Subcategory.SLAPPING,
        Subcategory.HITTING_WITH_OBJECT,
    ):
        attacker.fist = scenario is Subcategory.PUNCHING
        attacker.held = scenario is Subcategory.HITTING_WITH_OBJECT
        strike_phase = 0
        for i in range(ticks):
            _jitter(rng, victim, (4.2, 4.0), 0.010)
            gap = math.dist((attacker.x, attacker.y), (victim.x, victim.y))
            if gap > 0.47:
                attacker.step_towards(victim.x, victim.y, 0.14)
                attacker.limb = 0.12
            else:
                # hold range and cycle a fast extension every 1.2 s
                _jitter(rng, attacker, (attacker.x, attacker.y), 0.008)
                strike_phase = (strike_phase + 1) % 12
                attacker.limb = 0.78 if strike_phase == 0 else 0.12
            attacker.face(victim.x, victim.y)
            victim.face(attacker.x, attacker.y)
            attacker.commit()
            victim.commit()

    elif scenario is Subcategory.LOOMING:
        for i in range(ticks):
            _jitter(rng, victim, (4.2, 4.0), 0.008)
            gap = math.dist((attacker.x, attacker.y), (victim.x, victim.y))
            if gap > 0.30:
                attacker.step_towards(victim.x, victim.y, 0.13)
            else:
                _jitter(rng, attacker, (attacker.x, attacker.y), 0.006)
            attacker.limb = 0.05
            attacker.face(victim.x, victim.y)
            victim.face(attacker.x, attacker.y)
            attacker.commit()
            victim.commit()

    elif scenario is Subcategory.FOLLOWING_STALKING:
        vx, vy = 2.0, 2.0
        waypoints = [(6.0, 2.5), (6.2, 5.8), (2.4, 6.0), (1.8, 2.6)]
        victim.x, victim.y = vx, vy
        attacker.x, attacker.y = vx - 1.25, vy - 0.15
        wp = 0
        for i in range(ticks):
            tx, ty = waypoints[wp]
            if math.dist((victim.x, victim.y), (tx, ty)) < 0.3:
                wp = (wp + 1) % len(waypoints)
                tx, ty = waypoints[wp]
            victim.face(tx, ty)
            victim.step_towards(tx, ty, 0.085)
            # chase the trail point behind the victim's motion so the
            # pursuit never stalls below walking speed
            trail_x = victim.x - 1.15 * math.cos(victim.heading)
            trail_y = victim.y - 1.15 * math.sin(victim.heading)
            attacker.step_towards(trail_x, trail_y, 0.095)
            attacker.face(victim.x, victim.y)
            attacker.limb = 0.05
            attacker.commit()
            victim.commit()

    elif scenario is Subcategory.BLOCKING:
        victim.x, victim.y = 1.2, 4.0
        attacker.x, attacker.y = 4.7, 3.1
        stopped = False
        for i in range(ticks):
            t = i * DT
            if t < 2.2:
                # attacker pre-positions ahead of the victim's path
                attacker.step_towards(4.45, 4.0, 0.16)
                victim.x += 0.105
            else:
                gap = math.dist((attacker.x, attacker.y), (victim.x, victim.y))
                if not stopped and gap > 0.62:
                    victim.x += 0.105
                else:
                    stopped = True
                    _jitter(rng, victim, (victim.x, victim.y), 0.003)
                # keep station slightly inside the victim's way
                attacker.step_towards(victim.x + 0.60, victim.y, 0.05)
            victim.heading = 0.0
            attacker.face(victim.x, victim.y)
            attacker.limb = 0.05
            attacker.commit()
            victim.commit()

    elif scenario is Subcategory.BENIGN_OTHER:
        attacker.x, attacker.y = 3.2, 4.0
        victim.x, victim.y = 5.0, 4.0
        gesture = 0.0
        for i in range(ticks):
            _jitter(rng, attacker, (3.2, 4.0), 0.012)
            _jitter(rng, victim, (5.0, 4.0), 0.012)
            # slow conversational gestures, never a strike
            gesture = max(0.0, gesture + rng.uniform(-0.05, 0.05))
            attacker.limb = min(0.3, gesture)
            victim.limb = 0.05
            attacker.face(victim.x, victim.y)
            victim.face(attacker.x, attacker.y)
            attacker.commit()
            victim.commit()
    else:
        raise InvalidScript(f"unknown scenario {scenario}")

    tracks = (attacker.track, victim.track)
    if script.attacker == 1:
        tracks = (victim.track, attacker.track)
    return Trajectory(dt=DT, tracks=tracks, attacker=script.attacker, victim=script.victim)


# --- rendering ----------------------------------------------------------------

FRAME_SIZE = 240
_BODY_RADIUS = 0.22
_COLORS = ("#c23b22", "#2b6cb0")


def render_frame(traj: Trajectory, tick: int, clip_uid: str = "") -> Image.Image:
    """Top-down schematic of one tick."""
    size = FRAME_SIZE
    scale = size / traj.bounds[0]
    img = Image.new("RGB", (size, size), "white")
    draw = ImageDraw.Draw(img)
    draw.rectangle([0, 0, size - 1, size - 1], outline="#888888")

    def to_px(x: float, y: float) -> Tuple[float, float]:
        return x * scale, size - y * scale

    for idx, track in enumerate(traj.tracks):
        color = _COLORS[idx % 2]
        x, y = track.pos(tick)
        h = track.headings[tick]
        px, py = to_px(x, y)
        r = _BODY_RADIUS * scale
        draw.ellipse([px - r, py - r, px + r, py + r], fill=color)
        # heading wedge
        wx, wy = to_px(x + math.cos(h) * 0.38, y + math.sin(h) * 0.38)
        lx, ly = to_px(x + math.cos(h + 2.5) * 0.16, y + math.sin(h + 2.5) * 0.16)
        rx, ry = to_px(x + math.cos(h - 2.5) * 0.16, y + math.sin(h - 2.5) * 0.16)
        draw.polygon([(wx, wy), (lx, ly), (rx, ry)], fill=color)
        if track.limb_ext[tick] > 0.05:
            tx, ty = to_px(*track.tip(tick))
            draw.line([px, py, tx, ty], fill=color, width=3)
            if track.held[tick]:
                draw.rectangle([tx - 4, ty - 4, tx + 4, ty + 4], fill="#333333")
            elif track.fist[tick]:
                draw.ellipse([tx - 3, ty - 3, tx + 3, ty + 3], fill="#000000")
    if clip_uid:
        tag = hashlib.sha256(clip_uid.encode()).digest()
        for k in range(4):
            img.putpixel((1 + k, 1), (tag[3 * k], tag[3 * k + 1], tag[3 * k + 2]))
    return img


@dataclass
class GeneratedClip:
    clip_id: str
    clip_dir: Path
    sidecar_path: Path
    trajectory: Trajectory
    duration: float
    scenario: Subcategory


def generate(script: BehaviorScript, out_dir: str, clip_id: str) -> GeneratedClip:
    """Enact, self-check, and render one scripted clip."""
    traj = enact(script)
    label, sub = oracle_classify(traj, (0.0, 10.0))
    if sub is not script.scenario or label is not parent_of(script.scenario):
        raise GenerationError(
            f"{clip_id}: oracle saw {label.value}/{sub.value}, "
            f"script wanted {script.scenario.value}"
        )
    clip_dir = Path(out_dir) / clip_id
    clip_dir.mkdir(parents=True, exist_ok=True)
    for tick in range(traj.ticks):
        frame = render_frame(traj, tick, clip_uid=clip_id)
        frame.save(clip_dir / f"f_{tick:05d}.png", format="PNG")
    (clip_dir / CLIP_META_NAME).write_text(
        json.dumps(
            {"clip_id": clip_id, "fps": FPS, "frame_count": traj.ticks}, sort_keys=True
        )
    )
    sidecar = clip_dir / SIDECAR_NAME
    sidecar.write_text(json.dumps(traj.to_json()))
    return GeneratedClip(
        clip_id=clip_id,
        clip_dir=clip_dir,
        sidecar_path=sidecar,
        trajectory=traj,
        duration=traj.duration,
        scenario=script.scenario,
    )


def load_sidecar(clip_path: str) -> Trajectory:
    path = Path(clip_path) / SIDECAR_NAME
    return Trajectory.from_json(json.loads(path.read_text()))


# --- corpus generation ----------------------------------------------------------

_ROOMS_BY_SCENARIO = {
    Subcategory.PUNCHING: (Room.COMMUNICATION, Room.WHACK_A_PIG, Room.SLING_SHOT),
    Subcategory.SLAPPING: (Room.COMMUNICATION, Room.WHACK_A_PIG, Room.SLING_SHOT),
    Subcategory.HITTING_WITH_OBJECT: (
        Room.COMMUNICATION,
        Room.WHACK_A_PIG,
        Room.SLING_SHOT,
    ),
    Subcategory.LOOMING: (Room.COMMUNICATION, Room.WHACK_A_PIG, Room.SLING_SHOT),
    Subcategory.FOLLOWING_STALKING: (
        Room.COMMUNICATION,
        Room.WHACK_A_PIG,
        Room.SLING_SHOT,
    ),
    Subcategory.BLOCKING: (Room.COMMUNICATION,),
    Subcategory.BENIGN_OTHER: tuple(Room),
}

_SLUGS = {
    Subcategory.PUNCHING: "punch",
    Subcategory.SLAPPING: "slap",
    Subcategory.HITTING_WITH_OBJECT: "object",
    Subcategory.LOOMING: "loom",
    Subcategory.FOLLOWING_STALKING: "follow",
    Subcategory.BLOCKING: "block",
    Subcategory.BENIGN_OTHER: "benign",
}


def gen_corpus(
    count_per_class: int, seed: int, out_dir: str
) -> Tuple[str, List[ClipRecord]]:
    """Generate clips, sidecars, and an ingest-ready manifest.

    Durations are drawn in [10.5, 13.9] s so every clip yields exactly one
    segment; room assignment keeps blocking in the communication room and
    lets only benign clips appear in the climbing room.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records: List[ClipRecord] = []
    for class_idx, scenario in enumerate(Subcategory):
        for i in range(count_per_class):
            clip_seed = seed * 1_000_003 + class_idx * 10_007 + i
            rng = random.Random(clip_seed)
            frame_count = rng.randint(105, 139)
            duration = frame_count / FPS
            clip_id = f"{_SLUGS[scenario]}-{i:03d}"
            script = BehaviorScript(
                scenario=scenario, duration=duration, seed=clip_seed
            )
            generated = generate(script, str(out), clip_id)
            records.append(
                ClipRecord(
                    clip_id=clip_id,
                    path=str(generated.clip_dir),
                    duration=generated.duration,
                    fps=FPS,
                    participant_count=2,
                    room=rng.choice(_ROOMS_BY_SCENARIO[scenario]),
                    truth=GroundTruth(label=parent_of(scenario), subcategory=scenario),
                )
            )
    manifest_path = out / "manifest.jsonl"
    from .media_ingest import write_manifest

    write_manifest(str(manifest_path), records)
    return str(manifest_path), records
