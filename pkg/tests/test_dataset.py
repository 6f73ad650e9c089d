"""Windowing identities, labeling rules, and dataset persistence."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skelwatch import dataset
from skelwatch.dataset import (
    AbnormalRange,
    LabeledWindow,
    SequentialSkeletonMap,
    WindowSpec,
    build_windows,
    label_windows,
    load_dataset,
    save_dataset,
)
from skelwatch.errors import FormatError, ValidationError
from skelwatch.poseio import SkeletonImage


def make_images(n, segment="seg", start=0, seed=0, h=28, w=28):
    rng = np.random.default_rng(seed)
    return [
        SkeletonImage(rng.integers(0, 2, (h, w)).astype(np.uint8), start + i, segment)
        for i in range(n)
    ]


class TestWindowSpec:
    def test_defaults(self):
        spec = WindowSpec()
        assert spec.length == 30 and spec.stride == 1

    def test_too_short_rejected(self):
        with pytest.raises(ValidationError):
            WindowSpec(length=1)

    def test_nonunit_stride_rejected(self):
        with pytest.raises(ValidationError):
            WindowSpec(length=30, stride=2)


class TestBuildWindows:
    def test_training_corpus_count(self):
        # 4618 consecutive frames at T=30 give exactly 4589 windows
        images = make_images(4618)
        windows = build_windows(images, WindowSpec(30))
        assert len(windows) == 4589

    def test_exactly_t_frames_give_one_window(self):
        assert len(build_windows(make_images(30), WindowSpec(30))) == 1

    def test_one_frame_short_gives_none(self):
        assert build_windows(make_images(29), WindowSpec(30)) == []

    def test_windows_never_cross_segments(self):
        images = make_images(40, "a") + make_images(40, "b")
        windows = build_windows(images, WindowSpec(30))
        assert len(windows) == 22
        assert all(len({f.segment_id for f in w.frames}) == 1 for w in windows)

    def test_windows_never_cross_frame_gaps(self):
        images = make_images(40, start=0) + make_images(40, start=50)
        windows = build_windows(images, WindowSpec(30))
        assert len(windows) == 22
        for w in windows:
            assert w.end_frame - w.start_frame + 1 == 30
            indices = [f.frame_index for f in w.frames]
            assert indices == list(range(w.start_frame, w.end_frame + 1))

    def test_adjacent_windows_share_all_but_one_frame(self):
        windows = build_windows(make_images(35), WindowSpec(30))
        for a, b in zip(windows, windows[1:]):
            b_ids = {id(f) for f in b.frames}
            shared = [f for f in a.frames if id(f) in b_ids]
            assert len(shared) == 29

    def test_unsorted_frames_rejected(self):
        images = make_images(5)
        images.reverse()
        with pytest.raises(ValidationError, match="sorted"):
            build_windows(images, WindowSpec(3))

    def test_interleaved_segments_rejected(self):
        images = make_images(3, "a") + make_images(3, "b") + make_images(3, "a", start=10)
        with pytest.raises(ValidationError, match="twice"):
            build_windows(images, WindowSpec(3))

    @given(
        runs=st.lists(st.integers(0, 90), min_size=1, max_size=5),
        t=st.integers(2, 40),
    )
    @settings(max_examples=60, deadline=None)
    def test_count_identity_over_random_runs(self, runs, t):
        images = []
        for seg, n in enumerate(runs):
            images.extend(make_images(n, segment=f"seg{seg}", h=2, w=2))
        windows = build_windows(images, WindowSpec(t))
        assert len(windows) == sum(max(0, n - t + 1) for n in runs)


class TestLabelWindows:
    def test_no_ranges_all_normal(self):
        windows = build_windows(make_images(40), WindowSpec(30))
        labeled = label_windows(windows, [])
        assert all(lw.label == dataset.LABEL_NORMAL for lw in labeled)

    def test_full_coverage_all_abnormal(self):
        windows = build_windows(make_images(40), WindowSpec(30))
        labeled = label_windows(windows, [AbnormalRange("seg", 0, 39)])
        assert all(lw.label == dataset.LABEL_ABNORMAL for lw in labeled)

    def test_end_frame_rule_brute_force(self):
        # frames 0..99, T=30, range [50, 59]: abnormal iff end frame in range
        windows = build_windows(make_images(100), WindowSpec(30))
        labeled = label_windows(windows, [AbnormalRange("seg", 50, 59)])
        abnormal_ends = {
            lw.window.end_frame for lw in labeled if lw.label == dataset.LABEL_ABNORMAL
        }
        expect = {e for e in range(29, 100) if 50 <= e <= 59}
        assert abnormal_ends == expect
        assert len(abnormal_ends) == 10

    def test_order_independent_under_range_permutation(self):
        windows = build_windows(make_images(60), WindowSpec(30))
        ranges = [AbnormalRange("seg", 5, 12), AbnormalRange("seg", 40, 45)]
        a = [lw.label for lw in label_windows(windows, ranges)]
        b = [lw.label for lw in label_windows(windows, ranges[::-1])]
        assert a == b

    def test_unknown_segment_rejected(self):
        windows = build_windows(make_images(30), WindowSpec(30))
        with pytest.raises(ValidationError, match="unknown segment"):
            label_windows(windows, [AbnormalRange("ghost", 0, 5)])


def windows_equal(a: SequentialSkeletonMap, b: SequentialSkeletonMap) -> bool:
    if (a.segment_id, a.start_frame, a.end_frame) != (b.segment_id, b.start_frame, b.end_frame):
        return False
    if len(a.frames) != len(b.frames):
        return False
    return all(
        np.array_equal(fa.pixels, fb.pixels)
        and fa.frame_index == fb.frame_index
        and fa.segment_id == fb.segment_id
        for fa, fb in zip(a.frames, b.frames)
    )


class TestPersistence:
    def test_unlabeled_round_trip(self, tmp_path):
        windows = build_windows(make_images(40, seed=3), WindowSpec(30))
        path = tmp_path / "data.ssmap"
        save_dataset(windows, path)
        loaded = load_dataset(path)
        assert len(loaded) == len(windows)
        assert all(windows_equal(a, b) for a, b in zip(windows, loaded))

    def test_labeled_round_trip(self, tmp_path):
        windows = build_windows(make_images(45, seed=4), WindowSpec(30))
        labeled = label_windows(windows, [AbnormalRange("seg", 35, 42)])
        path = tmp_path / "data.ssmap"
        save_dataset(labeled, path)
        loaded = load_dataset(path)
        assert all(isinstance(it, LabeledWindow) for it in loaded)
        assert [it.label for it in loaded] == [it.label for it in labeled]
        assert all(windows_equal(a.window, b.window) for a, b in zip(labeled, loaded))

    def test_single_frame_records_round_trip(self, tmp_path):
        images = make_images(12, seed=5)
        records = dataset.frames_to_records(images)
        path = tmp_path / "frames.ssmap"
        save_dataset(records, path)
        loaded = load_dataset(path)
        assert len(loaded) == 12
        assert all(w.length == 1 for w in loaded)
        assert all(
            np.array_equal(w.frames[0].pixels, img.pixels) for w, img in zip(loaded, images)
        )

    def test_empty_dataset_round_trip(self, tmp_path):
        path = tmp_path / "empty.ssmap"
        save_dataset([], path)
        assert load_dataset(path) == []

    def test_truncated_file_rejected_without_partial_data(self, tmp_path):
        windows = build_windows(make_images(35, seed=6), WindowSpec(30))
        path = tmp_path / "data.ssmap"
        save_dataset(windows, path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(FormatError):
            load_dataset(path)

    def test_single_bit_corruption_detected(self, tmp_path):
        windows = build_windows(make_images(33, seed=7), WindowSpec(30))
        path = tmp_path / "data.ssmap"
        save_dataset(windows, path)
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0x10
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="checksum"):
            load_dataset(path)

    def test_bad_magic_named_in_error(self, tmp_path):
        path = tmp_path / "data.ssmap"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 32)
        with pytest.raises(FormatError, match="magic"):
            load_dataset(path)

    def test_mixed_window_lengths_rejected(self, tmp_path):
        w30 = build_windows(make_images(30), WindowSpec(30))
        w5 = build_windows(make_images(5), WindowSpec(5))
        with pytest.raises(ValidationError):
            save_dataset(w30 + w5, tmp_path / "bad.ssmap")

    def test_no_temp_file_left_behind(self, tmp_path):
        windows = build_windows(make_images(31), WindowSpec(30))
        path = tmp_path / "data.ssmap"
        save_dataset(windows, path)
        leftovers = [p for p in tmp_path.iterdir() if p.name != "data.ssmap"]
        assert leftovers == []


class TestRangesIO:
    def test_round_trip(self, tmp_path):
        ranges = [AbnormalRange("a", 10, 20), AbnormalRange("b", 0, 5)]
        path = tmp_path / "ranges.json"
        dataset.save_ranges(ranges, path)
        loaded = dataset.load_ranges(path)
        assert loaded == ranges

    def test_reversed_range_rejected(self):
        with pytest.raises(ValidationError):
            AbnormalRange("a", 10, 5)

    def test_malformed_entry_rejected(self, tmp_path):
        path = tmp_path / "ranges.json"
        path.write_text('[{"segment": "a", "first": 1}]')
        with pytest.raises(ValidationError):
            dataset.load_ranges(path)
