"""Proposal labeling against ground truth, vehicle/person model routing, and
the pluggable scorer interface with two bundled scorers."""

import math
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .data_model import PERSON_ACTIVITIES, VEHICLE_ACTIVITIES
from .errors import InvalidInputError, ScoringError
from .geometry import temporal_iou

NON_ACTION = "non_action"


@dataclass(frozen=True)
class LabelPolicy:
    spatial_pos: float = 0.35
    temporal_pos: float = 0.5
    temporal_neg: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.temporal_neg < self.temporal_pos <= 1.0:
            raise InvalidInputError(
                f"need 0 <= temporal_neg < temporal_pos <= 1: {self.temporal_neg}/{self.temporal_pos}"
            )


@dataclass(frozen=True)
class ProposalLabel:
    kind: str  # "positive" | "negative" | "ignore"
    activity: Optional[str] = None  # set iff positive
    matched_instance: Optional[int] = None  # index into the instance list


@dataclass(frozen=True)
class ModelGroup:
    name: str
    activities: frozenset


VEHICLE_GROUP = ModelGroup("vehicle_related", frozenset(VEHICLE_ACTIVITIES))
PERSON_GROUP = ModelGroup("person_related", frozenset(PERSON_ACTIVITIES))
MODEL_GROUPS = {g.name: g for g in (VEHICLE_GROUP, PERSON_GROUP)}

_CLASS_TO_GROUP = {
    "car": VEHICLE_GROUP,
    "truck": VEHICLE_GROUP,
    "person": PERSON_GROUP,
    "bicycle": PERSON_GROUP,
}


def tubelet_spatial_iou(boxes_a, boxes_b):
    """Mean per-frame box IoU over the frames where both maps are defined;
    0 when the temporal supports are disjoint."""
    common = sorted(set(boxes_a) & set(boxes_b))
    if not common:
        return 0.0
    arr_a = np.array([[boxes_a[f].x1, boxes_a[f].y1, boxes_a[f].x2, boxes_a[f].y2] for f in common])
    arr_b = np.array([[boxes_b[f].x1, boxes_b[f].y1, boxes_b[f].x2, boxes_b[f].y2] for f in common])
    return float(kernels.paired_iou(arr_a, arr_b).mean())


def label_proposal(proposal, instances, policy=LabelPolicy()):
    """Assign positive/negative/ignore per the spatial/temporal overlap policy.

    Positive: some same-video instance clears both thresholds; the best match
    is the one with maximal temporal IoU, spatial IoU breaking ties.
    Negative: every instance's temporal IoU is below the negative bound.
    """
    best = None  # (tiou, siou, -index)
    best_idx = None
    max_tiou = 0.0
    for idx, inst in enumerate(instances):
        if inst.video_id != proposal.video_id:
            continue
        tiou = temporal_iou(proposal.window, inst.extent)
        max_tiou = max(max_tiou, tiou)
        if tiou < policy.temporal_pos:
            continue
        siou = tubelet_spatial_iou(proposal.boxes, inst.boxes)
        if siou < policy.spatial_pos:
            continue
        key = (tiou, siou, -idx)
        if best is None or key > best:
            best = key
            best_idx = idx
    if best_idx is not None:
        return ProposalLabel("positive", instances[best_idx].activity, best_idx)
    if max_tiou < policy.temporal_neg:
        return ProposalLabel("negative")
    return ProposalLabel("ignore")


def route(proposal) -> ModelGroup:
    """Map the proposal's object class to the scoring model group."""
    group = _CLASS_TO_GROUP.get(proposal.object_class)
    if group is None:
        raise InvalidInputError(f"cannot route object class {proposal.object_class!r}")
    return group


def score(proposal, group, scorer):
    """Invoke a scorer and validate its output: scores over the group's
    activities plus the non-action class, all within [0,1]."""
    try:
        scores = scorer.score(proposal, group)
    except ScoringError:
        raise
    except Exception as exc:
        raise ScoringError(str(exc), proposal_id=proposal.proposal_id)
    allowed = group.activities | {NON_ACTION}
    for key, value in scores.items():
        if key not in allowed:
            raise ScoringError(f"score key outside group: {key!r}", proposal.proposal_id)
        if not 0.0 <= value <= 1.0:
            raise ScoringError(f"score out of [0,1]: {key}={value}", proposal.proposal_id)
    return scores


# ---------------------------------------------------------------------------
# bundled scorers


class OracleScorer:
    """Ground-truth-backed scorer for end-to-end tests: a positive proposal
    gets its matched class at 1 - epsilon, optionally flipped to a random
    wrong class with probability `label_noise` (deterministic per proposal)."""

    concurrency_safe = True

    def __init__(self, instances, epsilon=0.0, label_noise=0.0, seed=0, policy=LabelPolicy()):
        if not 0.0 <= epsilon < 1.0:
            raise InvalidInputError(f"epsilon out of [0,1): {epsilon}")
        self.instances = list(instances)
        self.epsilon = epsilon
        self.label_noise = label_noise
        self.seed = seed
        self.policy = policy

    def _unit_draw(self, proposal, salt):
        token = f"{self.seed}:{salt}:{proposal.video_id}:{proposal.proposal_id}"
        return (zlib.crc32(token.encode()) & 0xFFFFFFFF) / 2**32

    def score(self, proposal, group):
        label = label_proposal(proposal, self.instances, self.policy)
        scores = {a: 0.0 for a in group.activities}
        if label.kind == "positive" and label.activity in group.activities:
            activity = label.activity
            if self.label_noise > 0.0 and self._unit_draw(proposal, "flip") < self.label_noise:
                others = sorted(group.activities - {activity})
                activity = others[int(self._unit_draw(proposal, "pick") * len(others)) % len(others)]
            scores[activity] = 1.0 - self.epsilon
            scores[NON_ACTION] = self.epsilon
        else:
            scores[NON_ACTION] = 1.0
        return scores


class HeuristicScorer:
    """Pixel-free smoke-test scorer: activity mass grows with the proposal's
    mean center displacement, so static proposals score non-action highest."""

    concurrency_safe = True

    def score(self, proposal, group):
        frames = sorted(proposal.boxes)
        disp = 0.0
        if len(frames) > 1:
            centers = [proposal.boxes[f].center for f in frames]
            total = sum(
                math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(centers, centers[1:])
            )
            disp = total / (len(frames) - 1)
        non_action = 1.0 / (1.0 + disp)
        per_activity = (1.0 - non_action) / len(group.activities)
        scores = {a: per_activity for a in group.activities}
        scores[NON_ACTION] = non_action
        return scores


def make_scorer(name, ground_truth=None, epsilon=0.0, label_noise=0.0, seed=0):
    if name == "oracle":
        if ground_truth is None:
            raise InvalidInputError("oracle scorer requires ground truth")
        return OracleScorer(ground_truth, epsilon=epsilon, label_noise=label_noise, seed=seed)
    if name == "heuristic":
        return HeuristicScorer()
    raise InvalidInputError(f"unknown scorer: {name!r}")
