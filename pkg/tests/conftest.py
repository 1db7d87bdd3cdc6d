import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tubekit.geometry import Box, Interval
from tubekit.linking import Tubelet
from tubekit.refinement import Proposal


def make_tubelet(boxes, tubelet_id=0, video_id="v0", object_class="person", scores=None, provenance=None):
    """Build a tubelet from a frame -> Box map; scores default to 0.9."""
    frames = sorted(boxes)
    extent = Interval(frames[0], frames[-1] + 1)
    if scores is None:
        scores = {f: 0.9 for f in frames}
    if provenance is None:
        provenance = {f: "detected" for f in frames}
    return Tubelet(tubelet_id, video_id, object_class, extent, dict(boxes), scores, provenance)


def make_proposal(window, boxes=None, proposal_id=0, tubelet_id=0, video_id="v0",
                  object_class="person", scores=None, sample_count=8):
    if boxes is None:
        boxes = {f: Box(0, 0, 10, 10) for f in window.frames()}
    rel = [k * window.length // sample_count for k in range(sample_count)]
    return Proposal(
        proposal_id=proposal_id,
        tubelet_id=tubelet_id,
        video_id=video_id,
        object_class=object_class,
        window=window,
        boxes=boxes,
        sampled_frames=[window.start + r for r in rel],
        scores=scores,
    )


@pytest.fixture
def frame_bounds():
    return Box(0, 0, 1280, 720)
