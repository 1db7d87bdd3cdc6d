import json

import pytest

from tubekit import linking
from tubekit.data_model import ACTIVITY_CLASSES, OBJECT_CLASSES
from tubekit.errors import InvalidInputError, SchemaError
from tubekit.synthgen import SceneConfig, SynthCorpus, generate, write_corpus


def small(seed=0, **kw):
    defaults = dict(seed=seed, video_count=2, frames_per_video=60, objects_per_video=(2, 3))
    defaults.update(kw)
    return SceneConfig(**defaults)


class TestConfigValidation:
    def test_unknown_activity_in_mix(self):
        with pytest.raises(SchemaError):
            SceneConfig(activity_mix={"Swimming": 1.0})

    def test_mix_must_sum_to_one(self):
        with pytest.raises(InvalidInputError):
            SceneConfig(activity_mix={"Riding": 0.5})

    def test_bad_object_range(self):
        with pytest.raises(InvalidInputError):
            SceneConfig(objects_per_video=(3, 2))

    def test_bad_dropout(self):
        with pytest.raises(InvalidInputError):
            SceneConfig(dropout_rate=1.5)


class TestGenerate:
    def test_noise_free_detections_equal_ground_truth(self):
        corpus = generate(small())
        gt_boxes = {}
        for inst in corpus.ground_truth:
            for f, b in inst.boxes.items():
                gt_boxes.setdefault((inst.video_id, f), []).append(b)
        assert len(corpus.detections) == sum(i.extent.length for i in corpus.ground_truth)
        for d in corpus.detections:
            assert d.box in gt_boxes[(d.video_id, d.frame)]

    def test_same_seed_byte_identical(self, tmp_path):
        a = write_corpus(generate(small(seed=9)), tmp_path / "a")
        b = write_corpus(generate(small(seed=9)), tmp_path / "b")
        for key in ("detections", "ground_truth", "video_meta", "manifest"):
            assert open(a[key], "rb").read() == open(b[key], "rb").read()

    def test_different_seed_differs(self):
        a = generate(small(seed=1))
        b = generate(small(seed=2))
        assert a.detections != b.detections

    def test_dropout_binomial_bound(self):
        cfg = SceneConfig(
            seed=3, video_count=10, frames_per_video=250, objects_per_video=(4, 4),
            dropout_rate=0.2,
        )
        corpus = generate(cfg)
        slots = sum(i.extent.length for i in corpus.ground_truth)
        assert slots == 10000
        dropped = slots - len(corpus.detections)
        assert abs(dropped - 2000) <= 150  # 3 sigma of Binomial(10000, 0.2)

    def test_instances_valid_and_classes_admitted(self):
        corpus = generate(small(seed=4, false_positive_rate=0.5, box_jitter_px=1.0))
        for inst in corpus.ground_truth:
            assert inst.activity in ACTIVITY_CLASSES
            assert set(inst.boxes) == set(inst.extent.frames())
        for d in corpus.detections:
            assert d.object_class in OBJECT_CLASSES
            assert 0.0 <= d.score <= 1.0

    def test_vehicle_activities_on_vehicle_tracks(self):
        corpus = generate(small(seed=5, activity_mix={"Closing": 0.5, "Riding": 0.5}))
        by_video_frame = {}
        for d in corpus.detections:
            by_video_frame.setdefault((d.video_id, d.frame), []).append(d)
        for inst in corpus.ground_truth:
            f = inst.extent.start
            matching = [
                d for d in by_video_frame[(inst.video_id, f)] if d.box == inst.boxes[f]
            ]
            assert len(matching) == 1
            cls = matching[0].object_class
            if inst.activity == "Closing":
                assert cls in ("car", "truck")
            else:
                assert cls == "bicycle"

    def test_noise_free_linkers_reconstruct_tracks(self):
        corpus = generate(small(seed=6))
        by_video = {}
        for d in corpus.detections:
            by_video.setdefault(d.video_id, []).append(d)
        for link in (linking.greedy_link, linking.track_link):
            tubes = []
            for v in sorted(by_video):
                if link is linking.track_link:
                    out, _ = link(by_video[v])
                else:
                    out, _ = link(by_video[v])
                tubes.extend(out)
            assert len(tubes) == len(corpus.ground_truth)
            gt_by_key = {
                (g.video_id, g.boxes[g.extent.start]): g for g in corpus.ground_truth
            }
            for t in tubes:
                g = gt_by_key[(t.video_id, t.boxes[t.extent.start])]
                assert t.extent == g.extent
                assert all(t.boxes[f] == g.boxes[f] for f in t.extent.frames())


class TestWriteCorpus:
    def test_manifest_records_rng_and_config(self, tmp_path):
        paths = write_corpus(generate(small(seed=7)), tmp_path / "c")
        manifest = json.loads(open(paths["manifest"]).read())
        assert "PCG64" in manifest["rng"]
        assert manifest["config"]["seed"] == 7
        assert manifest["counts"]["videos"] == 2
