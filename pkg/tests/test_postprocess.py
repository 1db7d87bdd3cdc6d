import math

import pytest
from conftest import make_proposal

from tubekit.errors import InvalidInputError
from tubekit.geometry import Box, Interval
from tubekit.postprocess import SoftNmsConfig, fuse, proposals_to_instances, soft_nms
from tubekit.proposals import NON_ACTION


def scored(window, s, pid, tubelet_id=0, activity="Riding", video_id="v0", object_class="person",
           boxes=None):
    return make_proposal(
        window,
        boxes=boxes,
        proposal_id=pid,
        tubelet_id=tubelet_id,
        video_id=video_id,
        object_class=object_class,
        scores={activity: s, NON_ACTION: 1.0 - s},
    )


class TestSoftNms:
    def test_single_proposal_unchanged(self):
        p = scored(Interval(0, 10), 0.7, 0)
        out = soft_nms([p], "Riding")
        assert len(out) == 1
        assert out[0].scores["Riding"] == 0.7

    def test_gaussian_closed_form(self):
        a = scored(Interval(0, 10), 0.9, 0)
        b = scored(Interval(0, 10), 0.8, 1)
        out = soft_nms([a, b], "Riding", SoftNmsConfig(method="gaussian", sigma=0.5))
        by_id = {p.proposal_id: p.scores["Riding"] for p in out}
        assert by_id[0] == 0.9
        assert by_id[1] == pytest.approx(0.8 * math.exp(-2.0), abs=1e-12)

    def test_zero_overlap_no_decay(self):
        a = scored(Interval(0, 10), 0.9, 0)
        b = scored(Interval(10, 20), 0.8, 1, boxes={f: Box(0, 0, 10, 10) for f in range(10, 20)})
        out = soft_nms([a, b], "Riding")
        assert {p.scores["Riding"] for p in out} == {0.9, 0.8}

    def test_linear_decay(self):
        a = scored(Interval(0, 10), 0.9, 0)
        b = scored(Interval(0, 10), 0.8, 1)
        out = soft_nms([a, b], "Riding", SoftNmsConfig(method="linear", linear_threshold=0.3))
        # tiou 1.0 decays the second score to 0.8 * (1 - 1.0) = 0, below the floor
        assert [p.proposal_id for p in out] == [0]

    def test_linear_below_threshold_untouched(self):
        a = scored(Interval(0, 10), 0.9, 0)
        b = scored(Interval(8, 20), 0.8, 1, boxes={f: Box(0, 0, 10, 10) for f in range(8, 20)})
        # tiou = 2/20 = 0.1 <= 0.3 threshold
        out = soft_nms([a, b], "Riding", SoftNmsConfig(method="linear", linear_threshold=0.3))
        assert {p.scores["Riding"] for p in out} == {0.9, 0.8}

    def test_sigma_to_zero_is_hard_nms(self):
        a = scored(Interval(0, 10), 0.9, 0)
        b = scored(Interval(2, 12), 0.8, 1, boxes={f: Box(0, 0, 10, 10) for f in range(2, 12)})
        out = soft_nms([a, b], "Riding", SoftNmsConfig(sigma=1e-12))
        assert [p.proposal_id for p in out] == [0]

    def test_never_increases_scores_and_sorted(self):
        props = [scored(Interval(2 * i, 2 * i + 10), 0.5 + 0.04 * i, i) for i in range(8)]
        out = soft_nms(props, "Riding")
        originals = {p.proposal_id: p.scores["Riding"] for p in props}
        final = [p.scores["Riding"] for p in out]
        assert final == sorted(final, reverse=True)
        for p in out:
            assert p.scores["Riding"] <= originals[p.proposal_id] + 1e-15

    def test_distinct_objects_not_suppressed(self):
        # same time span, disjoint boxes, different tubelets: no decay
        a = scored(Interval(0, 10), 0.9, 0, tubelet_id=0)
        b = scored(Interval(0, 10), 0.8, 1, tubelet_id=1,
                   boxes={f: Box(500, 500, 510, 510) for f in range(10)})
        out = soft_nms([a, b], "Riding")
        assert {p.scores["Riding"] for p in out} == {0.9, 0.8}

    def test_missing_score_rejected(self):
        p = make_proposal(Interval(0, 10), scores={NON_ACTION: 1.0})
        with pytest.raises(InvalidInputError):
            soft_nms([p], "Riding")


class TestFuse:
    def test_disjoint_singletons(self):
        v = [scored(Interval(0, 10), 0.9, 0, activity="Closing", object_class="car")]
        p = [scored(Interval(0, 10), 0.8, 1, tubelet_id=1, activity="Riding",
                    boxes={f: Box(300, 300, 310, 310) for f in range(10)})]
        fused = fuse(v, p)
        assert len(fused) == 2

    def test_one_empty(self):
        p = [scored(Interval(0, 10), 0.8, 0, activity="Riding")]
        fused = fuse([], p)
        assert len(fused) == 1
        assert fused[0].scores["Riding"] == 0.8

    def test_weights_scale_before_nms(self):
        v = [scored(Interval(0, 10), 0.9, 0, activity="Closing", object_class="car")]
        p = [scored(Interval(0, 10), 0.8, 1, tubelet_id=1, activity="Riding",
                    boxes={f: Box(300, 300, 310, 310) for f in range(10)})]
        fused = fuse(v, p, weights=(1.0, 0.5))
        by_id = {f.proposal_id: f for f in fused}
        assert by_id[0].scores["Closing"] == pytest.approx(0.9)
        assert by_id[1].scores["Riding"] == pytest.approx(0.4)

    def test_overlapping_activity_sets_rejected(self):
        a = [scored(Interval(0, 10), 0.9, 0, activity="Riding")]
        b = [scored(Interval(0, 10), 0.8, 1, activity="Riding")]
        with pytest.raises(InvalidInputError):
            fuse(a, b)

    def test_commutative_up_to_order(self):
        v = [scored(Interval(0, 10), 0.9, 0, activity="Closing", object_class="car")]
        p = [scored(Interval(0, 10), 0.8, 1, tubelet_id=1, activity="Riding",
                    boxes={f: Box(300, 300, 310, 310) for f in range(10)})]
        ab = {(f.proposal_id, tuple(sorted(f.scores.items()))) for f in fuse(v, p)}
        # swapping requires swapping weights too, which default equal
        ba = {(f.proposal_id, tuple(sorted(f.scores.items()))) for f in fuse(p, v)}
        assert ab == ba


class TestProposalsToInstances:
    def test_threshold_zero_keeps_all_scored_classes(self):
        p = scored(Interval(0, 10), 0.9, 0)
        out = proposals_to_instances([p], 0.0)
        assert len(out) == 1  # one activity class carries a score
        assert out[0].activity == "Riding"
        assert out[0].confidence == 0.9

    def test_threshold_one_filters_everything(self):
        p = scored(Interval(0, 10), 0.9, 0)
        assert proposals_to_instances([p], 1.0) == []

    def test_mixed_scores(self):
        a = scored(Interval(0, 10), 0.9, 0)
        b = scored(Interval(20, 30), 0.4, 1, boxes={f: Box(0, 0, 10, 10) for f in range(20, 30)})
        out = proposals_to_instances([a, b], 0.5)
        assert len(out) == 1
        assert out[0].extent == Interval(0, 10)

    def test_output_ordering_deterministic(self):
        props = [
            scored(Interval(0, 10), 0.5, 0, video_id="vb"),
            scored(Interval(0, 10), 0.5, 1, video_id="va"),
            scored(Interval(0, 10), 0.9, 2, video_id="vc"),
        ]
        out = proposals_to_instances(props, 0.1)
        assert [i.video_id for i in out] == ["vc", "va", "vb"]

    def test_instance_carries_window_and_boxes(self):
        boxes = {f: Box(f, 0, f + 10, 10) for f in range(5, 15)}
        p = scored(Interval(5, 15), 0.7, 0, boxes=boxes)
        (inst,) = proposals_to_instances([p], 0.1)
        assert inst.extent == Interval(5, 15)
        assert inst.boxes == boxes
