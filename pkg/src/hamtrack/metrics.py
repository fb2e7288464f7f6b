"""Tracking quality metrics: MOTA with its error counts, and IDF1.

Both metrics compare per-frame (id, box) sets. MOTA follows the usual
event-counting scheme: last frame's pairings persist while they still
overlap, the remainder is matched optimally on IoU, and the errors are
unmatched hypotheses (FP), unmatched ground truth (FN), and identity changes
between a ground-truth object's consecutive matches (IDSw). IDF1 instead
matches whole trajectories, scoring identity consistency.
"""

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .association import hungarian_max
from .core import BBox

FrameBoxes = Mapping[int, Sequence[tuple[int, BBox]]]


@dataclass(frozen=True)
class EvalReport:
    gt_total: int
    fp: int
    fn: int
    idsw: int
    mota: float
    idtp: int
    idfp: int
    idfn: int
    idf1: float

    def summary_csv(self) -> str:
        """One line: MOTA,IDF1,IDSw,FP,FN,GT."""
        return (f"{self.mota:.3f},{self.idf1:.3f},{self.idsw},"
                f"{self.fp},{self.fn},{self.gt_total}")


def iou(a: BBox, b: BBox) -> float:
    """Intersection area over union area."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.w * a.h + b.w * b.h - inter)


@dataclass(frozen=True)
class ClearMotCounts:
    gt_total: int
    fp: int
    fn: int
    idsw: int
    mota: float


def clear_mot(gt_by_frame: FrameBoxes, hyp_by_frame: FrameBoxes,
              iou_threshold: float = 0.5) -> ClearMotCounts:
    """Count FP/FN/IDSw against ground truth and derive MOTA."""
    frames = sorted(set(gt_by_frame) | set(hyp_by_frame))
    last_match: dict[int, int] = {}
    gt_total = fp = fn = idsw = 0
    for frame in frames:
        gts = list(gt_by_frame.get(frame, ()))
        hyps = list(hyp_by_frame.get(frame, ()))
        gt_total += len(gts)
        hyp_index: dict[int, int] = {}
        for k, (hid, _) in enumerate(hyps):
            hyp_index.setdefault(hid, k)
        pairs: list[tuple[int, int]] = []
        used_h: set[int] = set()
        matched_g: set[int] = set()
        # Keep last frame's pairing wherever it still overlaps enough.
        for g, (gid, gbox) in enumerate(gts):
            hid = last_match.get(gid)
            if hid is None or hid not in hyp_index:
                continue
            k = hyp_index[hid]
            if k not in used_h and iou(gbox, hyps[k][1]) >= iou_threshold:
                pairs.append((g, k))
                used_h.add(k)
                matched_g.add(g)
        rest_g = [g for g in range(len(gts)) if g not in matched_g]
        rest_h = [k for k in range(len(hyps)) if k not in used_h]
        if rest_g and rest_h:
            grid = np.zeros((len(rest_g), len(rest_h)))
            for a, g in enumerate(rest_g):
                for b, k in enumerate(rest_h):
                    v = iou(gts[g][1], hyps[k][1])
                    if v >= iou_threshold:
                        grid[a, b] = v
            for a, b in hungarian_max(grid):
                if grid[a, b] >= iou_threshold:
                    pairs.append((rest_g[a], rest_h[b]))
        for g, k in pairs:
            gid = gts[g][0]
            hid = hyps[k][0]
            prev = last_match.get(gid)
            if prev is not None and prev != hid:
                idsw += 1
            last_match[gid] = hid
        fn += len(gts) - len(pairs)
        fp += len(hyps) - len(pairs)
    if gt_total == 0:
        raise ValueError("ground truth is empty; MOTA is undefined")
    mota = 1.0 - (fp + fn + idsw) / gt_total
    return ClearMotCounts(gt_total=gt_total, fp=fp, fn=fn, idsw=idsw, mota=mota)


@dataclass(frozen=True)
class IdentityScores:
    idtp: int
    idfp: int
    idfn: int
    idf1: float


def idf1(gt_by_frame: FrameBoxes, hyp_by_frame: FrameBoxes,
         iou_threshold: float = 0.5) -> IdentityScores:
    """Trajectory-level identity F1.

    Ground-truth and hypothesis trajectories are matched one-to-one so that
    the total number of overlapping frames (IoU at or above the threshold) is
    maximal; those frames are the identity true positives.
    """
    gt_traj: dict[int, dict[int, BBox]] = defaultdict(dict)
    hyp_traj: dict[int, dict[int, BBox]] = defaultdict(dict)
    for frame, items in gt_by_frame.items():
        for gid, box in items:
            gt_traj[gid][frame] = box
    for frame, items in hyp_by_frame.items():
        for hid, box in items:
            hyp_traj[hid][frame] = box
    gt_ids = sorted(gt_traj)
    hyp_ids = sorted(hyp_traj)
    gt_frames = sum(len(t) for t in gt_traj.values())
    hyp_frames = sum(len(t) for t in hyp_traj.values())
    idtp = 0
    if gt_ids and hyp_ids:
        overlap = np.zeros((len(gt_ids), len(hyp_ids)))
        for a, gid in enumerate(gt_ids):
            traj = gt_traj[gid]
            for b, hid in enumerate(hyp_ids):
                other = hyp_traj[hid]
                common = traj.keys() & other.keys()
                overlap[a, b] = sum(
                    1 for f in common if iou(traj[f], other[f]) >= iou_threshold)
        idtp = int(sum(overlap[a, b] for a, b in hungarian_max(overlap)))
    idfp = hyp_frames - idtp
    idfn = gt_frames - idtp
    denom = 2 * idtp + idfp + idfn
    score = (2 * idtp / denom) if denom else 1.0
    return IdentityScores(idtp=idtp, idfp=idfp, idfn=idfn, idf1=score)


def evaluate(gt_by_frame: FrameBoxes, hyp_by_frame: FrameBoxes,
             iou_threshold: float = 0.5) -> EvalReport:
    """Full report: MOTA counts plus identity scores at one IoU threshold."""
    cm = clear_mot(gt_by_frame, hyp_by_frame, iou_threshold)
    ids = idf1(gt_by_frame, hyp_by_frame, iou_threshold)
    return EvalReport(gt_total=cm.gt_total, fp=cm.fp, fn=cm.fn, idsw=cm.idsw,
                      mota=cm.mota, idtp=ids.idtp, idfp=ids.idfp,
                      idfn=ids.idfn, idf1=ids.idf1)
