"""Per-frame tracking pipeline: filter, predict, associate, update, birth/death.

Each frame runs in a fixed order: (1) confidence-filter the detections,
(2) predict every live track's motion and shape, (3) build the shape-motion
affinities, (4) fuse appearance on gated-in pairs, (5) solve the assignment,
(6) update matched tracks, (7) age unmatched tracks and retire the stale
ones, (8) start tentative tracks from unmatched detections, (9) emit output
boxes. Processing is strictly sequential per sequence; independent sequences
can run in parallel with separate ``Tracker`` instances.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

from . import kalman, sadf
from .affinity import build_sm_matrix, fuse_appearance, gate_values
from .appearance import (AppearanceMemory, Scorer, decay_confidence,
                         maybe_store_history, score_descriptors)
from .association import associate
from .core import AppearanceDescriptor, BBox, Detection, TrackerConfig

TENTATIVE = "tentative"
CONFIRMED = "confirmed"

# frame, ordinal within the frame's raw detections -> descriptor
DescriptorSource = Callable[[int, int], AppearanceDescriptor]


@dataclass
class Track:
    """One tracked object: filters, appearance memory, and lifecycle counters."""

    id: int
    motion: kalman.KalmanState
    shape: kalman.KalmanState
    appearance: Optional[AppearanceMemory]
    last_box: BBox
    status: str = TENTATIVE
    hit_streak: int = 1
    misses: int = 0


@dataclass(frozen=True)
class FrameDiagnostics:
    births: int = 0
    deaths: int = 0
    n_tracks: int = 0
    n_raw: int = 0
    n_kept: int = 0
    total_pairs: int = 0
    gated_pairs: int = 0
    appearance_evals: int = 0
    tau_sa: Optional[float] = None
    tau_t: Optional[float] = None


@dataclass(frozen=True)
class FrameResult:
    """Confirmed-track boxes for one frame plus per-frame diagnostics."""

    frame: int
    tracks: tuple[tuple[int, BBox], ...]
    diagnostics: FrameDiagnostics = field(default_factory=FrameDiagnostics)


class Tracker:
    """Online tracker state for one sequence.

    ``descriptor_source`` supplies appearance descriptors lazily; it is only
    consulted for detections that survive filtering and that do not already
    carry a descriptor. With ``use_appearance=False`` the tracker runs on
    shape and motion alone.
    """

    def __init__(self, cfg: TrackerConfig | None = None,
                 scorer: Scorer = score_descriptors,
                 descriptor_source: Optional[DescriptorSource] = None,
                 use_appearance: bool = True):
        self.cfg = cfg if cfg is not None else TrackerConfig()
        self.scorer = scorer
        self.descriptor_source = descriptor_source
        self.use_appearance = use_appearance
        self.tracks: list[Track] = []
        self.sadf_state = sadf.SadfState()
        self._next_id = 1
        self._last_frame = 0
        self._frame_count = 0

    def _descriptor_for(self, frame: int, ordinal: int,
                        det: Detection) -> AppearanceDescriptor:
        if det.descriptor is not None:
            return det.descriptor
        if self.descriptor_source is None:
            raise ValueError(
                f"detection {ordinal} in frame {frame} has no descriptor and "
                f"no descriptor source is configured")
        return self.descriptor_source(frame, ordinal)

    def _apply_filter(self, frame: int,
                      detections: Sequence[Detection]) -> tuple[list[int], Optional[float], Optional[float]]:
        cfg = self.cfg
        if cfg.filter_mode == "none":
            return list(range(len(detections))), None, None
        if cfg.filter_mode == "const":
            tau_t = cfg.tau_const
            tau_sa = None
        else:
            self.sadf_state = sadf.observe_frame(
                self.sadf_state, (d.confidence for d in detections), self.sadf_state.t + 1)
            tau_sa = sadf.adaptive_cutoff(self.sadf_state, cfg)
            tau_t = sadf.threshold(self.sadf_state, cfg)
            self.sadf_state = replace(self.sadf_state, tau_t=tau_t)
        kept = [k for k, d in enumerate(detections) if d.confidence >= tau_t]
        return kept, tau_sa, tau_t

    def step(self, frame: int, detections: Sequence[Detection]) -> FrameResult:
        cfg = self.cfg
        if frame <= self._last_frame:
            raise ValueError(f"frames must strictly increase: got {frame} "
                             f"after {self._last_frame}")
        for det in detections:
            if det.frame != frame:
                raise ValueError(f"detection carries frame {det.frame}, stepping frame {frame}")
        self._last_frame = frame
        self._frame_count += 1

        kept_ordinals, tau_sa, tau_t = self._apply_filter(frame, detections)
        survivors = [detections[k] for k in kept_ordinals]
        descriptors: list[Optional[AppearanceDescriptor]] = [None] * len(survivors)
        if self.use_appearance:
            descriptors = [self._descriptor_for(frame, kept_ordinals[j], det)
                           for j, det in enumerate(survivors)]

        for track in self.tracks:
            scale = float(kalman.clamped_wh(track.shape)[1])
            process_std = cfg.process_noise * scale
            track.motion = kalman.predict(track.motion, process_std)
            track.shape = kalman.predict(track.shape, process_std)

        pred_pos = [kalman.position(t.motion) for t in self.tracks]
        pred_wh = [kalman.clamped_wh(t.shape) for t in self.tracks]
        boxes = [d.bbox for d in survivors]
        sm = build_sm_matrix(pred_pos, pred_wh, boxes, cfg)
        if self.use_appearance:
            memories = [t.appearance for t in self.tracks]
            final = fuse_appearance(sm, memories, descriptors, self.scorer,
                                    use_ham=cfg.use_ham)
        else:
            final = gate_values(sm)
        assignment = associate(final, cfg.tau_asc)

        matched_this_frame: set[int] = set()
        for ti, dj, affinity in assignment.matches:
            track = self.tracks[ti]
            det = survivors[dj]
            meas_std = cfg.measurement_noise * det.bbox.h
            track.motion = kalman.update(track.motion, det.bbox.center(), meas_std)
            track.shape = kalman.update(track.shape, (det.bbox.w, det.bbox.h), meas_std)
            track.last_box = det.bbox
            track.hit_streak += 1
            track.misses = 0
            if self.use_appearance:
                track.appearance = maybe_store_history(
                    track.appearance, descriptors[dj], affinity, frame, cfg)
            if track.status == TENTATIVE and track.hit_streak >= cfg.confirm_hits:
                track.status = CONFIRMED
            matched_this_frame.add(track.id)

        dead: list[Track] = []
        for ti in assignment.unmatched_tracks:
            track = self.tracks[ti]
            track.misses += 1
            track.hit_streak = 0
            if self.use_appearance and track.appearance is not None:
                track.appearance = decay_confidence(track.appearance, cfg.conf_decay)
            if track.status == TENTATIVE or track.misses > cfg.max_age:
                dead.append(track)
        if dead:
            gone = {t.id for t in dead}
            self.tracks = [t for t in self.tracks if t.id not in gone]

        births = 0
        for dj in assignment.unmatched_detections:
            det = survivors[dj]
            memory = None
            if self.use_appearance:
                memory = AppearanceMemory(recent=descriptors[dj], recent_conf=1.0)
            pos_std = cfg.measurement_noise * det.bbox.h
            track = Track(
                id=self._next_id,
                motion=kalman.init_motion(det.bbox, pos_std=pos_std),
                shape=kalman.init_shape(det.bbox, pos_std=pos_std),
                appearance=memory,
                last_box=det.bbox,
            )
            self._next_id += 1
            if track.hit_streak >= cfg.confirm_hits:
                track.status = CONFIRMED
            self.tracks.append(track)
            matched_this_frame.add(track.id)
            births += 1

        outputs = []
        startup = self._frame_count <= cfg.confirm_hits
        for track in self.tracks:
            if track.id in matched_this_frame:
                if track.status == CONFIRMED or startup:
                    outputs.append((track.id, track.last_box))
            elif cfg.emit_predicted and track.status == CONFIRMED:
                outputs.append((track.id, kalman.predicted_box(track.motion, track.shape)))
        outputs.sort(key=lambda item: item[0])

        diag = FrameDiagnostics(
            births=births,
            deaths=len(dead),
            n_tracks=len(self.tracks),
            n_raw=len(detections),
            n_kept=len(survivors),
            total_pairs=int(sm.values.size),
            gated_pairs=int(sm.gate_mask.sum()),
            appearance_evals=final.appearance_evals,
            tau_sa=tau_sa,
            tau_t=tau_t,
        )
        return FrameResult(frame=frame, tracks=tuple(outputs), diagnostics=diag)


def run_sequence(detections_by_frame: Mapping[int, Sequence[Detection]],
                 cfg: TrackerConfig | None = None,
                 scorer: Scorer = score_descriptors,
                 descriptor_source: Optional[DescriptorSource] = None,
                 use_appearance: bool = True,
                 n_frames: Optional[int] = None) -> list[FrameResult]:
    """Run a whole sequence frame by frame, including frames with no detections.

    Frames run from 1 through ``n_frames`` (default: the highest frame seen in
    the input). Equivalent to calling ``Tracker.step`` once per frame.
    """
    tracker = Tracker(cfg=cfg, scorer=scorer, descriptor_source=descriptor_source,
                      use_appearance=use_appearance)
    last = n_frames if n_frames is not None else (
        max(detections_by_frame) if detections_by_frame else 0)
    results = []
    for frame in range(1, last + 1):
        dets = list(detections_by_frame.get(frame, ()))
        results.append(tracker.step(frame, dets))
    return results
