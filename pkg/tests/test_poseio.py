"""Keypoint parsing and the rasterize -> resize -> binarize pipeline."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skelwatch import poseio
from skelwatch.errors import ParseError, SchemaError, ValidationError


def make_frame(keypoints=None, frame_index=0, segment="seg"):
    kps = np.zeros((25, 3))
    if keypoints:
        for idx, (x, y, c) in keypoints.items():
            kps[idx] = [x, y, c]
    return poseio.KeypointFrame(frame_index, segment, kps)


def record_json(flat, frame=0, segment="seg"):
    return {"frame": frame, "segment": segment, "people": [{"pose_keypoints_2d": list(flat)}]}


class TestParsing:
    def test_flat_array_maps_to_keypoints(self):
        flat = np.arange(75.0)
        frame = poseio.parse_keypoint_record(record_json(flat, frame=3, segment="a"))
        assert frame.frame_index == 3
        assert frame.segment_id == "a"
        # keypoint 1 is the neck: values (x, y, c) = (3, 4, 5)
        assert tuple(frame.keypoints[poseio.NECK]) == (3.0, 4.0, 5.0)

    def test_no_people_yields_empty_marker(self):
        stats = poseio.ParseStats()
        frame = poseio.parse_keypoint_record(
            {"frame": 0, "segment": "s", "people": []}, stats
        )
        assert frame.is_empty
        assert stats.empty_frames == 1

    def test_two_people_takes_first_and_counts_warning(self):
        stats = poseio.ParseStats()
        rec = {
            "frame": 0,
            "segment": "s",
            "people": [
                {"pose_keypoints_2d": [1.0] * 75},
                {"pose_keypoints_2d": [2.0] * 75},
            ],
        }
        frame = poseio.parse_keypoint_record(rec, stats)
        assert np.all(frame.keypoints == 1.0)
        assert stats.multi_person_frames == 1

    def test_malformed_json_carries_context(self):
        with pytest.raises(ParseError, match="line 7"):
            poseio.parse_keypoint_record("{not json", context="line 7")

    def test_wrong_keypoint_count_is_schema_error(self):
        with pytest.raises(SchemaError, match="75"):
            poseio.parse_keypoint_record(record_json([0.0] * 30))

    def test_missing_field_is_schema_error(self):
        with pytest.raises(SchemaError, match="segment"):
            poseio.parse_keypoint_record({"frame": 0, "people": []})

    def test_stream_round_trip(self, tmp_path):
        path = tmp_path / "kp.jsonl"
        import json

        with open(path, "w") as fh:
            for i in range(3):
                fh.write(json.dumps(record_json(np.full(75, float(i)), frame=i)) + "\n")
        stats = poseio.ParseStats()
        frames = poseio.read_keypoint_stream(path, stats)
        assert [f.frame_index for f in frames] == [0, 1, 2]
        assert stats.frames == 3


class TestRasterize:
    def test_only_neck_confident_gives_blank_canvas(self):
        frame = make_frame({1: (320, 240, 1.0)})
        canvas = poseio.rasterize_neck_centered(frame, poseio.LimbTopology.default(), 8.0)
        assert canvas.shape == (480, 480)
        assert canvas.sum() == 0.0

    def test_horizontal_limb_translated_to_center(self):
        # neck at (320, 240), midhip 100 px to the right -> stroke on row 240
        frame = make_frame({1: (320, 240, 1.0), 8: (420, 240, 1.0)})
        canvas = poseio.rasterize_neck_centered(frame, poseio.LimbTopology.default(), 8.0)
        assert canvas[240, 240] == 1.0
        assert canvas[240, 340] == 1.0  # far endpoint, translated to x = 340
        assert canvas[240, 345] == 0.0  # past the endpoint cap
        assert canvas[250, 290] == 0.0  # off the stroke
        row_extent = np.nonzero(canvas[240])[0]
        assert row_extent.min() == 236 and row_extent.max() == 344

    def test_center_pixel_lit_whenever_neck_limb_drawable(self):
        rng = np.random.default_rng(0)
        topo = poseio.LimbTopology.default()
        for _ in range(20):
            nx, ny = rng.uniform(100, 500), rng.uniform(100, 380)
            frame = make_frame(
                {1: (nx, ny, 1.0), 2: (nx + rng.uniform(-80, 80), ny + rng.uniform(-80, 80), 1.0)}
            )
            canvas = poseio.rasterize_neck_centered(frame, topo, 6.0)
            assert canvas[240, 240] == 1.0

    def test_zero_confidence_endpoint_contributes_nothing(self):
        frame = make_frame({1: (320, 240, 1.0), 8: (420, 240, 0.0)})
        canvas = poseio.rasterize_neck_centered(frame, poseio.LimbTopology.default(), 8.0)
        assert canvas.sum() == 0.0

    def test_missing_neck_without_fallback_signals_skip(self):
        frame = make_frame({8: (100, 100, 1.0)})
        assert poseio.rasterize_neck_centered(frame, poseio.LimbTopology.default(), 8.0) is None

    def test_missing_neck_with_fallback_draws(self):
        frame = make_frame({0: (320, 200, 1.0), 15: (325, 195, 1.0)})
        canvas = poseio.rasterize_neck_centered(
            frame, poseio.LimbTopology.default(), 8.0, fallback_neck=(320.0, 240.0)
        )
        assert canvas is not None and canvas.sum() > 0

    def test_strokes_are_exactly_zero_or_one(self):
        frame = make_frame({1: (320, 240, 1.0), 8: (380, 300, 1.0), 2: (280, 250, 1.0)})
        canvas = poseio.rasterize_neck_centered(frame, poseio.LimbTopology.default(), 10.0)
        assert set(np.unique(canvas)) <= {0.0, 1.0}


class TestTopology:
    def test_default_has_24_edges_in_range(self):
        topo = poseio.LimbTopology.default()
        assert len(topo.edges) == 24

    def test_out_of_range_edge_rejected(self):
        with pytest.raises(ValidationError):
            poseio.LimbTopology(((0, 25),))

    def test_self_edge_rejected(self):
        with pytest.raises(ValidationError):
            poseio.LimbTopology(((3, 3),))

    def test_from_file(self, tmp_path):
        import json

        path = tmp_path / "limbs.json"
        path.write_text(json.dumps([[0, 1], [1, 2]]))
        topo = poseio.LimbTopology.from_file(path)
        assert topo.edges == ((0, 1), (1, 2))


class TestResizeBilinear:
    def test_constant_canvas_is_exact(self):
        for v in (0.0, 0.25, 1.0):
            out = poseio.resize_bilinear(np.full((480, 480), v), 28, 28)
            assert out.shape == (28, 28)
            assert np.array_equal(out, np.full((28, 28), v))

    def test_one_dimensional_half_pixel_anchor(self):
        # size 2 -> 4 along one axis with values (0, 1):
        # sample coords (-0.25, 0.25, 0.75, 1.25) clamp to [0, 1]
        img = np.array([[0.0], [1.0]])
        out = poseio.resize_bilinear(img, 4, 1)
        assert np.allclose(out[:, 0], [0.0, 0.25, 0.75, 1.0], atol=1e-15)

    def test_output_bounded_by_input_range(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0.2, 0.9, (40, 40))
        out = poseio.resize_bilinear(img, 28, 28)
        assert out.min() >= img.min() - 1e-12
        assert out.max() <= img.max() + 1e-12


class TestBinarize:
    def test_all_zero_stays_zero(self):
        out = poseio.binarize(np.zeros((28, 28)), 0.2)
        assert out.dtype == np.uint8
        assert out.sum() == 0

    def test_everything_above_threshold_is_one(self):
        out = poseio.binarize(np.full((28, 28), 0.3), 0.2)
        assert np.all(out == 1)

    def test_threshold_is_inclusive(self):
        out = poseio.binarize(np.array([[0.2, 0.19999]]), 0.2)
        assert out.tolist() == [[1, 0]]

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValidationError):
            poseio.binarize(np.zeros((2, 2)), 0.0)


def _connected_4(img: np.ndarray) -> bool:
    lit = set(zip(*np.nonzero(img)))
    if not lit:
        return False
    stack = [next(iter(lit))]
    seen = {stack[0]}
    while stack:
        y, x = stack.pop()
        for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nxt = (y + dy, x + dx)
            if nxt in lit and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(lit)


class TestPreprocessPipeline:
    def test_empty_frame_skips(self):
        frame = poseio.KeypointFrame(5, "seg", None)
        result = poseio.preprocess_frame(frame, poseio.PreprocessConfig())
        assert isinstance(result, poseio.FrameSkip)
        assert result.frame_index == 5

    def test_identical_frames_identical_images(self):
        frame = make_frame({1: (320, 240, 1.0), 8: (330, 330, 1.0), 2: (280, 245, 0.9)})
        cfg = poseio.PreprocessConfig()
        a = poseio.preprocess_frame(frame, cfg)
        b = poseio.preprocess_frame(frame, cfg)
        assert np.array_equal(a.pixels, b.pixels)

    def test_output_strictly_binary(self):
        frame = make_frame({1: (320, 240, 1.0), 8: (350, 340, 1.0)})
        img = poseio.preprocess_frame(frame, poseio.PreprocessConfig())
        assert img.pixels.dtype == np.uint8
        assert set(np.unique(img.pixels)) <= {0, 1}
        assert 0 <= img.pixels.sum() <= 784

    def test_default_stroke_keeps_long_limbs_connected(self):
        # straight limbs >= 120 px survive binarization as one 4-connected path
        rng = np.random.default_rng(2)
        cfg = poseio.PreprocessConfig()
        for _ in range(25):
            ang = rng.uniform(0, 2 * np.pi)
            length = rng.uniform(120, 220)
            x0, y0 = rng.uniform(200, 400), rng.uniform(150, 330)
            frame = make_frame(
                {
                    1: (x0, y0, 1.0),
                    8: (x0 + length * np.cos(ang), y0 + length * np.sin(ang), 1.0),
                }
            )
            img = poseio.preprocess_frame(frame, cfg)
            assert img.pixels.sum() > 0
            assert _connected_4(img.pixels)

    def test_neck_reuse_policy_within_segment(self):
        # the fallback neck only supplies the centering position; limbs whose
        # endpoints are confident still draw identically under a reused neck
        cfg = poseio.PreprocessConfig()
        hips = {8: (322.0, 340.0, 1.0), 9: (295.0, 343.0, 1.0)}
        good = make_frame({1: (320, 240, 1.0), **hips}, frame_index=0)
        neckless = make_frame(hips, frame_index=1)
        images, skips = poseio.preprocess_frames([good, neckless], cfg)
        assert len(images) == 2 and not skips
        only_hips = make_frame({1: (320, 240, 0.0), **hips}, frame_index=0)
        reference = poseio.preprocess_frame(only_hips, cfg, fallback_neck=(320.0, 240.0))
        assert np.array_equal(images[1].pixels, reference.pixels)
        assert images[1].pixels.sum() > 0

    def test_neckless_head_of_segment_is_skipped_and_recorded(self):
        cfg = poseio.PreprocessConfig()
        neckless = make_frame({8: (320, 340, 1.0)}, frame_index=0)
        images, skips = poseio.preprocess_frames([neckless], cfg)
        assert not images
        assert len(skips) == 1 and "neck" in skips[0].reason


# offsets kept exactly representable (multiples of 1/8 within +-2^17) so the
# translation is lossless at the float64 input encoding; the pipeline then has
# identical inputs relative to the neck and must produce identical bytes
coord = st.integers(-(2**17), 2**17).map(lambda n: n / 8.0)


class TestTranslationInvariance:
    @given(dx=coord, dy=coord)
    @settings(max_examples=25, deadline=None)
    def test_translating_all_keypoints_preserves_image(self, dx, dy):
        base = {
            1: (320.0, 240.0, 1.0),
            2: (280.5, 248.25, 0.8),
            3: (260.125, 300.0, 0.7),
            8: (322.25, 341.5, 0.9),
            9: (295.0, 344.0, 0.0),  # undetected: must not matter
        }
        cfg = poseio.PreprocessConfig()
        frame = make_frame(base)
        moved = make_frame({k: (x + dx, y + dy, c) for k, (x, y, c) in base.items()})
        img_a = poseio.preprocess_frame(frame, cfg)
        img_b = poseio.preprocess_frame(moved, cfg)
        assert np.array_equal(img_a.pixels, img_b.pixels)
