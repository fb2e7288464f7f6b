"""Deterministic synthetic tracking scenarios.

Generates ground truth, detections, embeddings, and optional flat-color PPM
frames for scripted scenes: objects follow piecewise-linear paths, disappear
during occlusion windows, and their detections suffer configurable box
jitter, pairwise merges, fragments, and background false positives.
Detection confidences follow per-regime Gaussians so scene-condition shifts
can be scripted. Appearance descriptors are per-object unit embeddings plus
noise; on the frames leading into an occlusion they can be corrupted by
blending toward the occluder's appearance (or a random one), modelling boxes
that mostly show the thing in front.

All randomness comes from a self-contained xoshiro256** generator seeded via
splitmix64, with a fixed draw order, so a seed reproduces files byte for
byte. Normal variates use the Box-Muller transform (one variate per two
uniforms; the sine branch is discarded).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import BBox, parse_kv_text
from .metrics import iou

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int):
    while True:
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield (z ^ (z >> 31)) & _MASK64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** with splitmix64 seeding; uniform takes the top 53 bits."""

    def __init__(self, seed: int):
        seeder = _splitmix64(seed & _MASK64)
        self._s = [next(seeder) for _ in range(4)]
        if not any(self._s):
            self._s[0] = 1

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def uniform(self) -> float:
        """Uniform in the open interval (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) * (2.0 ** -53)

    def normal(self, mu: float = 0.0, sd: float = 1.0) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return mu + sd * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def unit_vector(self, dim: int) -> np.ndarray:
        v = np.array([self.normal() for _ in range(dim)])
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            v[0] = 1.0
            norm = 1.0
        return v / norm


@dataclass(frozen=True)
class ObjectSpec:
    """Constant-size object moving linearly between (frame, cx, cy) waypoints."""

    waypoints: tuple[tuple[int, float, float], ...]
    w: float
    h: float


@dataclass(frozen=True)
class OcclusionEvent:
    """Object ``obj`` emits nothing during [start, end]; ``by`` names the occluder."""

    obj: int
    start: int
    end: int
    by: Optional[int] = None


@dataclass(frozen=True)
class ConfidenceRegime:
    """Confidences are N(mean, std) from ``start`` until the next regime begins."""

    start: int
    mean: float
    std: float


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 1
    n_frames: int = 100
    canvas_w: int = 640
    canvas_h: int = 480
    fp_rate: float = 0.0
    merge_prob: float = 0.0
    fragment_prob: float = 0.0
    jitter_std: float = 0.0
    embed_dim: int = 16
    embed_noise_std: float = 0.02
    corrupt_frames: int = 2
    corrupt_blend: float = 0.8
    objects: tuple[ObjectSpec, ...] = ()
    events: tuple[OcclusionEvent, ...] = ()
    regimes: tuple[ConfidenceRegime, ...] = (ConfidenceRegime(1, 30.0, 5.0),)


@dataclass
class GeneratedScenario:
    """Rows are (frame, id, box, confidence); embeddings are (frame, ordinal, vector)."""

    gt_rows: list[tuple[int, int, BBox, float]] = field(default_factory=list)
    det_rows: list[tuple[int, int, BBox, float]] = field(default_factory=list)
    embeddings: list[tuple[int, int, np.ndarray]] = field(default_factory=list)
    frames: Optional[dict[int, np.ndarray]] = None
    n_merges: int = 0
    n_fragments: int = 0
    n_false_positives: int = 0


def validate_scenario(spec: ScenarioSpec) -> list[str]:
    """One message per violated constraint; empty list means usable."""
    errors = []
    if spec.n_frames < 1:
        errors.append("n_frames must be >= 1")
    if spec.canvas_w < 8 or spec.canvas_h < 8:
        errors.append("canvas must be at least 8x8")
    for name in ("fp_rate",):
        if getattr(spec, name) < 0:
            errors.append(f"{name} must be >= 0")
    for name in ("merge_prob", "fragment_prob", "corrupt_blend"):
        if not 0.0 <= getattr(spec, name) <= 1.0:
            errors.append(f"{name} out of [0,1]")
    if spec.jitter_std < 0:
        errors.append("jitter_std must be >= 0")
    if spec.embed_dim < 1:
        errors.append("embed_dim must be >= 1")
    if spec.embed_noise_std < 0:
        errors.append("embed_noise_std must be >= 0")
    if spec.corrupt_frames < 0:
        errors.append("corrupt_frames must be >= 0")
    if not spec.objects:
        errors.append("at least one object is required")
    for k, obj in enumerate(spec.objects):
        if not obj.waypoints:
            errors.append(f"object.{k}.waypoints is empty")
            continue
        frames = [wp[0] for wp in obj.waypoints]
        if frames != sorted(frames):
            errors.append(f"object.{k}.waypoints frames must be ascending")
        if frames[0] < 1 or frames[-1] > spec.n_frames:
            errors.append(f"object.{k}.waypoints outside [1, {spec.n_frames}]")
        if obj.w <= 0 or obj.h <= 0:
            errors.append(f"object.{k} size must be positive")
    for k, ev in enumerate(spec.events):
        if not 0 <= ev.obj < len(spec.objects):
            errors.append(f"event.{k}.object out of range")
        if ev.start > ev.end or ev.start < 1 or ev.end > spec.n_frames:
            errors.append(f"event.{k} span outside [1, {spec.n_frames}]")
        if ev.by is not None and not 0 <= ev.by < len(spec.objects):
            errors.append(f"event.{k}.by out of range")
    if not spec.regimes:
        errors.append("at least one confidence regime is required")
    for k, reg in enumerate(spec.regimes):
        if reg.start < 1:
            errors.append(f"regime.{k}.start must be >= 1")
        if reg.std < 0:
            errors.append(f"regime.{k}.std must be >= 0")
    return errors


def _object_center(obj: ObjectSpec, frame: int) -> Optional[tuple[float, float]]:
    wps = obj.waypoints
    if frame < wps[0][0] or frame > wps[-1][0]:
        return None
    for (f0, x0, y0), (f1, x1, y1) in zip(wps, wps[1:]):
        if f0 <= frame <= f1:
            if f1 == f0:
                return (x1, y1)
            a = (frame - f0) / (f1 - f0)
            return (x0 + a * (x1 - x0), y0 + a * (y1 - y0))
    return (wps[-1][1], wps[-1][2])


def _clamped_box(spec: ScenarioSpec, obj: ObjectSpec, cx: float, cy: float) -> BBox:
    half_w, half_h = obj.w / 2.0, obj.h / 2.0
    cx = min(max(cx, half_w), spec.canvas_w - half_w)
    cy = min(max(cy, half_h), spec.canvas_h - half_h)
    return BBox(cx - half_w, cy - half_h, obj.w, obj.h)


def _active_regime(spec: ScenarioSpec, frame: int) -> ConfidenceRegime:
    regimes = sorted(spec.regimes, key=lambda r: r.start)
    active = regimes[0]
    for reg in regimes:
        if reg.start <= frame:
            active = reg
    return active


def _corrupting_event(spec: ScenarioSpec, obj_idx: int, frame: int) -> Optional[int]:
    """Index of the occlusion event whose lead-in window covers this frame."""
    if spec.corrupt_frames == 0:
        return None
    for k, ev in enumerate(spec.events):
        if ev.obj == obj_idx and ev.start - spec.corrupt_frames <= frame < ev.start:
            return k
    return None


def generate(spec: ScenarioSpec, with_frames: bool = False) -> GeneratedScenario:
    """Produce the scenario deterministically for the spec's seed."""
    problems = validate_scenario(spec)
    if problems:
        raise ValueError("invalid scenario: " + "; ".join(problems))
    rng = Xoshiro256StarStar(spec.seed)
    bases = [rng.unit_vector(spec.embed_dim) for _ in spec.objects]
    colors = [tuple(int(32 + rng.uniform() * 192) for _ in range(3))
              for _ in spec.objects]
    # Corruption target per event: the occluder's appearance when one is
    # named, otherwise a fixed random direction standing in for clutter.
    targets = [bases[ev.by] if ev.by is not None else rng.unit_vector(spec.embed_dim)
               for ev in spec.events]

    occluded: dict[int, set[int]] = {}
    for ev in spec.events:
        for f in range(ev.start, ev.end + 1):
            occluded.setdefault(ev.obj, set()).add(f)

    out = GeneratedScenario(frames={} if with_frames else None)
    for frame in range(1, spec.n_frames + 1):
        regime = _active_regime(spec, frame)
        visible: list[tuple[int, BBox]] = []
        for i, obj in enumerate(spec.objects):
            center = _object_center(obj, frame)
            if center is None or frame in occluded.get(i, ()):
                continue
            visible.append((i, _clamped_box(spec, obj, *center)))
        for i, box in visible:
            out.gt_rows.append((frame, i + 1, box, 1.0))

        # (box, confidence, descriptor) candidates, one per visible object.
        entries: list[tuple[BBox, float, np.ndarray]] = []
        for i, true_box in visible:
            dx = rng.normal(0.0, spec.jitter_std)
            dy = rng.normal(0.0, spec.jitter_std)
            dw = rng.normal(0.0, spec.jitter_std / 2.0)
            dh = rng.normal(0.0, spec.jitter_std / 2.0)
            w = max(true_box.w + dw, 2.0)
            h = max(true_box.h + dh, 2.0)
            box = BBox(true_box.cx + dx - w / 2.0, true_box.cy + dy - h / 2.0, w, h)
            conf = rng.normal(regime.mean, regime.std)
            noise = np.array([rng.normal(0.0, spec.embed_noise_std)
                              for _ in range(spec.embed_dim)])
            event = _corrupting_event(spec, i, frame)
            if event is None:
                vec = bases[i] + noise
            else:
                # Box about to be swallowed: its appearance is dominated by
                # whatever is in front.
                vec = ((1.0 - spec.corrupt_blend) * bases[i]
                       + spec.corrupt_blend * targets[event] + noise)
            norm = float(np.linalg.norm(vec))
            entries.append((box, conf, vec / norm if norm > 0 else bases[i]))

        if spec.merge_prob > 0 and len(visible) > 1:
            merged_away: set[int] = set()
            merged: list[tuple[BBox, float, np.ndarray]] = []
            for a in range(len(visible)):
                for b in range(a + 1, len(visible)):
                    if iou(visible[a][1], visible[b][1]) <= 0:
                        continue
                    u = rng.uniform()
                    if u >= spec.merge_prob or a in merged_away or b in merged_away:
                        continue
                    merged_away.update((a, b))
                    ba, ca, va = entries[a]
                    bb, cb, vb = entries[b]
                    x0 = min(ba.x, bb.x)
                    y0 = min(ba.y, bb.y)
                    x1 = max(ba.x + ba.w, bb.x + bb.w)
                    y1 = max(ba.y + ba.h, bb.y + bb.h)
                    blend = (va + vb) / 2.0
                    blend = blend / float(np.linalg.norm(blend))
                    merged.append((BBox(x0, y0, x1 - x0, y1 - y0), (ca + cb) / 2.0, blend))
                    out.n_merges += 1
            entries = [e for k, e in enumerate(entries) if k not in merged_away] + merged

        if spec.fragment_prob > 0:
            for k, (box, conf, vec) in enumerate(entries):
                if rng.uniform() < spec.fragment_prob:
                    fw = 0.3 + 0.4 * rng.uniform()
                    fh = 0.3 + 0.4 * rng.uniform()
                    ox = rng.uniform() * (1.0 - fw)
                    oy = rng.uniform() * (1.0 - fh)
                    entries[k] = (BBox(box.x + ox * box.w, box.y + oy * box.h,
                                       box.w * fw, box.h * fh), conf, vec)
                    out.n_fragments += 1

        n_fp = int(spec.fp_rate)
        if rng.uniform() < spec.fp_rate - n_fp:
            n_fp += 1
        for _ in range(n_fp):
            w = 20.0 + 60.0 * rng.uniform()
            h = 40.0 + 80.0 * rng.uniform()
            x = rng.uniform() * max(spec.canvas_w - w, 1.0)
            y = rng.uniform() * max(spec.canvas_h - h, 1.0)
            conf = rng.normal(regime.mean, regime.std)
            entries.append((BBox(x, y, w, h), conf, rng.unit_vector(spec.embed_dim)))
            out.n_false_positives += 1

        for ordinal, (box, conf, vec) in enumerate(entries):
            out.det_rows.append((frame, -1, box, conf))
            out.embeddings.append((frame, ordinal, vec))

        if with_frames:
            img = np.full((spec.canvas_h, spec.canvas_w, 3), 64, dtype=np.uint8)
            for i, box in visible:
                x0, y0 = int(box.x), int(box.y)
                x1, y1 = int(box.x + box.w), int(box.y + box.h)
                img[max(y0, 0):max(y1, 0), max(x0, 0):max(x1, 0)] = colors[i]
            out.frames[frame] = img

    return out


def regime_stats(det_rows, first_frame: int, last_frame: int) -> tuple[float, float]:
    """Mean and population std of detection confidences in [first, last]."""
    confs = [conf for frame, _, _, conf in det_rows if first_frame <= frame <= last_frame]
    if not confs:
        raise ValueError(f"no detections in frames [{first_frame}, {last_frame}]")
    mean = sum(confs) / len(confs)
    var = sum((c - mean) ** 2 for c in confs) / len(confs)
    return mean, math.sqrt(max(var, 0.0))


_SCALAR_FIELDS = {
    "seed": int, "n_frames": int, "canvas_w": int, "canvas_h": int,
    "fp_rate": float, "merge_prob": float, "fragment_prob": float,
    "jitter_std": float, "embed_dim": int, "embed_noise_std": float,
    "corrupt_frames": int, "corrupt_blend": float,
}


def _parse_waypoints(raw: str, key: str) -> tuple[tuple[int, float, float], ...]:
    points = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            frame_part, coords = part.split(":", 1)
            x_part, y_part = coords.split(",", 1)
            points.append((int(frame_part), float(x_part), float(y_part)))
        except ValueError:
            raise ValueError(f"{key}: expected 'frame:x,y; ...', got {part!r}") from None
    if not points:
        raise ValueError(f"{key}: no waypoints given")
    return tuple(points)


def parse_scenario(text: str) -> ScenarioSpec:
    """Build a spec from `key = value` text (see the bundled .scn files)."""
    mapping = parse_kv_text(text)
    scalars = {}
    groups: dict[str, dict[int, dict[str, str]]] = {"object": {}, "event": {}, "regime": {}}
    for key, raw in mapping.items():
        parts = key.split(".")
        if len(parts) == 1:
            if key not in _SCALAR_FIELDS:
                raise ValueError(f"unknown scenario key: {key}")
            try:
                scalars[key] = _SCALAR_FIELDS[key](raw)
            except ValueError:
                raise ValueError(f"{key}: cannot parse {raw!r}") from None
        elif len(parts) == 3 and parts[0] in groups:
            kind, index_part, attr = parts
            try:
                index = int(index_part)
            except ValueError:
                raise ValueError(f"{key}: index must be an integer") from None
            groups[kind].setdefault(index, {})[attr] = raw
        else:
            raise ValueError(f"unknown scenario key: {key}")

    def take(kind: str, index: int, attrs: dict[str, str], attr: str, conv, default=None):
        if attr not in attrs:
            if default is not None:
                return default
            raise ValueError(f"{kind}.{index}.{attr} is required")
        raw = attrs[attr]
        try:
            return conv(raw)
        except ValueError:
            raise ValueError(f"{kind}.{index}.{attr}: cannot parse {raw!r}") from None

    objects = []
    for index in sorted(groups["object"]):
        attrs = groups["object"][index]
        objects.append(ObjectSpec(
            waypoints=_parse_waypoints(attrs.get("waypoints", ""),
                                       f"object.{index}.waypoints"),
            w=take("object", index, attrs, "w", float),
            h=take("object", index, attrs, "h", float),
        ))
    events = []
    for index in sorted(groups["event"]):
        attrs = groups["event"][index]
        by = attrs.get("by")
        events.append(OcclusionEvent(
            obj=take("event", index, attrs, "object", int),
            start=take("event", index, attrs, "start", int),
            end=take("event", index, attrs, "end", int),
            by=int(by) if by is not None else None,
        ))
    regimes = []
    for index in sorted(groups["regime"]):
        attrs = groups["regime"][index]
        regimes.append(ConfidenceRegime(
            start=take("regime", index, attrs, "start", int),
            mean=take("regime", index, attrs, "mean", float),
            std=take("regime", index, attrs, "std", float),
        ))
    if regimes:
        scalars["regimes"] = tuple(regimes)
    return ScenarioSpec(objects=tuple(objects), events=tuple(events), **scalars)
