"""Recall@IoU for tubelet generation and DET-style p_miss vs rate-of-false-
alarm scoring of final activity instances."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .geometry import temporal_iou
from .proposals import tubelet_spatial_iou


@dataclass(frozen=True)
class RecallCurve:
    thresholds: tuple  # ascending
    recall: tuple  # same length, non-increasing


@dataclass(frozen=True)
class DetCurve:
    activity: str
    points: tuple  # (rfa, p_miss) sorted by rfa ascending


@dataclass(frozen=True)
class AlignmentPolicy:
    temporal_iou_min: float = 0.2
    # "optimal": maximize match count, then total temporal IoU (Hungarian).
    # "greedy": system instances claim references in descending confidence.
    method: str = "optimal"

    def __post_init__(self):
        if not 0.0 < self.temporal_iou_min <= 1.0:
            raise InvalidInputError(f"temporal_iou_min out of (0,1]: {self.temporal_iou_min}")
        if self.method not in ("optimal", "greedy"):
            raise InvalidInputError(f"unknown alignment method: {self.method!r}")


@dataclass
class AlignmentResult:
    matches: list = field(default_factory=list)  # (system instance, reference, tiou)
    misses: list = field(default_factory=list)  # unmatched references
    false_alarms: list = field(default_factory=list)  # unmatched system instances


# ---------------------------------------------------------------------------
# tubelet recall


def tubelet_recall(tubelets, instances, thresholds):
    """Fraction of ground-truth instances covered by at least one tubelet with
    both mean spatial IoU and temporal IoU above each threshold."""
    if not instances:
        raise InvalidInputError("recall is undefined for empty ground truth")
    thresholds = sorted(thresholds)
    by_video = {}
    for t in tubelets:
        by_video.setdefault(t.video_id, []).append(t)

    coverage = []
    for inst in instances:
        best = 0.0
        for tub in by_video.get(inst.video_id, []):
            tiou = temporal_iou(tub.extent, inst.extent)
            if tiou <= best:
                continue
            siou = tubelet_spatial_iou(tub.boxes, inst.boxes)
            best = max(best, min(tiou, siou))
        coverage.append(best)

    recall = tuple(sum(1 for c in coverage if c > tau) / len(coverage) for tau in thresholds)
    return RecallCurve(tuple(thresholds), recall)


# ---------------------------------------------------------------------------
# instance alignment


def _align_group(system, reference, policy):
    """Align one (video, activity) bucket; returns (matches, misses, fas)."""
    tiou = np.zeros((len(system), len(reference)))
    for i, s in enumerate(system):
        for j, r in enumerate(reference):
            tiou[i, j] = temporal_iou(s.extent, r.extent)
    admissible = tiou >= policy.temporal_iou_min

    pairs = []
    if policy.method == "optimal" and system and reference:
        # Bonus larger than any achievable total IoU makes the assignment
        # lexicographic: match count first, total temporal IoU second.
        bonus = len(system) + len(reference) + 1.0
        weights = np.where(admissible, tiou + bonus, 0.0)
        rows, cols = linear_sum_assignment(weights, maximize=True)
        pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if admissible[i, j]]
    elif policy.method == "greedy":
        order = sorted(range(len(system)), key=lambda i: (-system[i].confidence, i))
        used = set()
        for i in order:
            best_j, best_t = None, 0.0
            for j in range(len(reference)):
                if j in used or not admissible[i, j]:
                    continue
                if tiou[i, j] > best_t:
                    best_t, best_j = tiou[i, j], j
            if best_j is not None:
                used.add(best_j)
                pairs.append((i, best_j))

    matched_sys = {i for i, _ in pairs}
    matched_ref = {j for _, j in pairs}
    matches = [(system[i], reference[j], float(tiou[i, j])) for i, j in pairs]
    misses = [r for j, r in enumerate(reference) if j not in matched_ref]
    fas = [s for i, s in enumerate(system) if i not in matched_sys]
    return matches, misses, fas


def align_instances(system, reference, policy=AlignmentPolicy()):
    """One-to-one alignment of system output against references, bucketed by
    (video, activity). Unmatched references are misses; unmatched system
    instances are false alarms."""
    buckets = {}
    for s in system:
        buckets.setdefault((s.video_id, s.activity), ([], []))[0].append(s)
    for r in reference:
        buckets.setdefault((r.video_id, r.activity), ([], []))[1].append(r)

    result = AlignmentResult()
    for key in sorted(buckets):
        sys_b, ref_b = buckets[key]
        m, mi, fa = _align_group(sys_b, ref_b, policy)
        result.matches.extend(m)
        result.misses.extend(mi)
        result.false_alarms.extend(fa)
    return result


# ---------------------------------------------------------------------------
# DET curves


def total_corpus_minutes(metas):
    minutes = sum(m.frame_count / m.frame_rate for m in metas.values()) / 60.0
    if minutes <= 0.0:
        raise InvalidInputError("total corpus duration must be positive")
    return minutes


def det_curve(system, references, metas, policy=AlignmentPolicy()):
    """Sweep the confidence threshold and emit one (rfa, p_miss) curve per
    activity class present in the references."""
    minutes = total_corpus_minutes(metas)
    classes = sorted({r.activity for r in references})
    if not classes:
        raise InvalidInputError("no reference instances")

    curves = {}
    for cls in classes:
        refs_c = [r for r in references if r.activity == cls]
        sys_c = sorted(
            (s for s in system if s.activity == cls),
            key=lambda s: (-s.confidence, s.video_id, s.extent.start),
        )
        points = []
        for theta in sorted({s.confidence for s in sys_c}, reverse=True):
            kept = [s for s in sys_c if s.confidence >= theta]
            res = align_instances(kept, refs_c, policy)
            points.append((len(res.false_alarms) / minutes, len(res.misses) / len(refs_c)))
        if not points:
            points = [(0.0, 1.0)]
        points.sort()
        # collapse duplicate rfa values and enforce monotonicity
        cleaned = []
        for rfa, p in points:
            if cleaned and cleaned[-1][0] == rfa:
                cleaned[-1] = (rfa, min(cleaned[-1][1], p))
            else:
                cleaned.append((rfa, p))
        running = 1.0
        mono = []
        for rfa, p in cleaned:
            running = min(running, p)
            mono.append((rfa, running))
        curves[cls] = DetCurve(cls, tuple(mono))
    return curves


def p_miss_at_rfa(curve, target_rfa=0.15):
    """p_miss at the largest swept rfa <= target, linearly interpolated when a
    bracketing point exists; 1.0 when the whole curve sits above the target."""
    points = sorted(curve.points)
    below = [p for p in points if p[0] <= target_rfa]
    if not below:
        return 1.0
    r0, p0 = below[-1]
    above = [p for p in points if p[0] > target_rfa]
    if not above or r0 == target_rfa:
        return p0
    r1, p1 = above[0]
    t = (target_rfa - r0) / (r1 - r0)
    return p0 + t * (p1 - p0)


def mean_p_miss(per_class, weights=None):
    """Mean p_miss over the classes present; per-class weights pluggable."""
    if not per_class:
        raise InvalidInputError("no per-class values")
    if weights is None:
        weights = {cls: 1.0 for cls in per_class}
    total_w = sum(weights.get(cls, 1.0) for cls in per_class)
    return sum(v * weights.get(cls, 1.0) for cls, v in per_class.items()) / total_w


# ---------------------------------------------------------------------------
# exports


def write_recall_csv(curve, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,recall\n")
        for tau, rec in zip(curve.thresholds, curve.recall):
            fh.write(f"{tau:.6f},{rec:.6f}\n")


def write_det_csv(curves, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("activity,rfa,p_miss\n")
        for cls in sorted(curves):
            for rfa, p in curves[cls].points:
                fh.write(f"{cls},{rfa:.6f},{p:.6f}\n")


def write_det_summary(curves, path, target_rfa=0.15, weights=None):
    per_class = {cls: p_miss_at_rfa(curves[cls], target_rfa) for cls in sorted(curves)}
    summary = {
        "target_rfa": target_rfa,
        "per_class_p_miss": per_class,
        "mean_p_miss": mean_p_miss(per_class, weights),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return summary
