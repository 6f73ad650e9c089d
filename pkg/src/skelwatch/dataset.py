"""Sliding-window assembly, labeling, and bit-exact dataset persistence.

File format ("SSMAPv01"): 8-byte magic, then a little-endian header
(T: u32, H: u16, W: u16, record count: u64, flags: u8 with bit0 = labeled),
then one record per window: length-prefixed segment id (u16 + utf8),
start frame (u64), optional label byte, and T bit-packed frames (row-major,
MSB first, ceil(H*W/8) bytes each). A CRC32 over every preceding byte
(magic included) trails the file.
"""

from __future__ import annotations

import io
import json
import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from skelwatch.errors import FormatError, ValidationError
from skelwatch.poseio import SkeletonImage

MAGIC = b"SSMAPv01"
LABEL_NORMAL = "normal"
LABEL_ABNORMAL = "abnormal"

_HEADER = struct.Struct("<IHHQB")


@dataclass
class WindowSpec:
    """Sliding-window geometry: length T at the fixed stride of 1 frame."""

    length: int = 30
    stride: int = 1

    def __post_init__(self):
        if self.length < 2:
            raise ValidationError(f"window length must be >= 2, got {self.length}")
        if self.stride != 1:
            raise ValidationError(f"window stride is fixed at 1, got {self.stride}")


@dataclass
class SequentialSkeletonMap:
    """T consecutive skeleton images from one segment."""

    frames: list
    segment_id: str
    start_frame: int
    end_frame: int

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1

    def as_array(self) -> np.ndarray:
        """Window pixels as float64 (T, H, W)."""
        return np.stack([f.pixels for f in self.frames]).astype(np.float64)


@dataclass
class LabeledWindow:
    window: SequentialSkeletonMap
    label: str

    def __post_init__(self):
        if self.label not in (LABEL_NORMAL, LABEL_ABNORMAL):
            raise ValidationError(f"unknown label {self.label!r}")


@dataclass
class AbnormalRange:
    """Inclusive frame range of one abnormal action within a segment."""

    segment_id: str
    first_frame: int
    last_frame: int

    def __post_init__(self):
        if self.first_frame > self.last_frame:
            raise ValidationError(
                f"abnormal range [{self.first_frame}, {self.last_frame}] is reversed"
            )

    def contains(self, frame_index: int) -> bool:
        return self.first_frame <= frame_index <= self.last_frame


def frames_to_records(images) -> list[SequentialSkeletonMap]:
    """Wrap bare skeleton images as single-frame records for persistence."""
    return [
        SequentialSkeletonMap([img], img.segment_id, img.frame_index, img.frame_index)
        for img in images
    ]


def build_windows(images, spec: WindowSpec) -> list[SequentialSkeletonMap]:
    """Emit stride-1 windows over each maximal run of consecutive frames.

    A run of N frames yields max(0, N - T + 1) windows; windows never cross
    segment boundaries or frame-index gaps. Input must be sorted by
    (segment_id, frame_index).
    """
    windows: list[SequentialSkeletonMap] = []
    t = spec.length
    run: list[SkeletonImage] = []
    seen_segments: set[str] = set()
    prev_segment = None

    def flush(run):
        for i in range(len(run) - t + 1):
            chunk = run[i : i + t]
            windows.append(
                SequentialSkeletonMap(
                    chunk,
                    chunk[0].segment_id,
                    chunk[0].frame_index,
                    chunk[-1].frame_index,
                )
            )

    for img in images:
        if img.segment_id != prev_segment:
            if img.segment_id in seen_segments:
                raise ValidationError(
                    f"images not sorted: segment {img.segment_id!r} appears twice"
                )
            seen_segments.add(img.segment_id)
            flush(run)
            run = [img]
            prev_segment = img.segment_id
            continue
        prev_index = run[-1].frame_index
        if img.frame_index < prev_index:
            raise ValidationError(
                f"images not sorted: frame {img.frame_index} after {prev_index} "
                f"in segment {img.segment_id!r}"
            )
        if img.frame_index == prev_index + 1:
            run.append(img)
        else:
            flush(run)
            run = [img]
    flush(run)
    return windows


def label_windows(windows, ranges) -> list[LabeledWindow]:
    """A window is abnormal iff its end frame lies inside a range of its segment."""
    known_segments = {w.segment_id for w in windows}
    by_segment: dict[str, list[AbnormalRange]] = {}
    for r in ranges:
        if r.segment_id not in known_segments:
            raise ValidationError(
                f"abnormal range references unknown segment {r.segment_id!r}"
            )
        by_segment.setdefault(r.segment_id, []).append(r)
    labeled = []
    for w in windows:
        abnormal = any(r.contains(w.end_frame) for r in by_segment.get(w.segment_id, ()))
        labeled.append(LabeledWindow(w, LABEL_ABNORMAL if abnormal else LABEL_NORMAL))
    return labeled


def load_ranges(path) -> list[AbnormalRange]:
    """Read the JSON list [{"segment": s, "first": int, "last": int}, ...]."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ValidationError("abnormal ranges file must hold a JSON list")
    try:
        return [AbnormalRange(str(r["segment"]), int(r["first"]), int(r["last"])) for r in raw]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed abnormal range entry: {exc}") from None


def save_ranges(ranges, path):
    payload = [
        {"segment": r.segment_id, "first": r.first_frame, "last": r.last_frame}
        for r in ranges
    ]
    _atomic_write(path, json.dumps(payload, indent=2).encode("utf-8"))


def _atomic_write(path, payload: bytes):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _pack_frame(pixels: np.ndarray) -> bytes:
    return np.packbits(pixels, axis=None).tobytes()


def _unpack_frame(raw: bytes, h: int, w: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=h * w)
    return bits.reshape(h, w)


def save_dataset(items, path, labeled: bool | None = None):
    """Persist windows (or labeled windows) to `path` atomically."""
    items = list(items)
    if labeled is None:
        labeled = bool(items) and isinstance(items[0], LabeledWindow)
    windows = [(it.window, it.label) if isinstance(it, LabeledWindow) else (it, None) for it in items]
    if labeled and any(label is None for _, label in windows):
        raise ValidationError("cannot mix labeled and unlabeled windows in one dataset")

    if windows:
        t = windows[0][0].length
        h, w = windows[0][0].frames[0].pixels.shape
    else:
        t, h, w = 1, 28, 28
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_HEADER.pack(t, h, w, len(windows), 1 if labeled else 0))
    for window, label in windows:
        if window.length != t or len(window.frames) != t:
            raise ValidationError(
                f"all windows in a dataset must share T={t}, got {window.length}"
            )
        seg = window.segment_id.encode("utf-8")
        buf.write(struct.pack("<H", len(seg)))
        buf.write(seg)
        buf.write(struct.pack("<Q", window.start_frame))
        if labeled:
            buf.write(b"\x01" if label == LABEL_ABNORMAL else b"\x00")
        for frame in window.frames:
            if frame.pixels.shape != (h, w):
                raise ValidationError(
                    f"frame shape {frame.pixels.shape} != dataset shape ({h}, {w})"
                )
            buf.write(_pack_frame(frame.pixels))
    payload = buf.getvalue()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    _atomic_write(path, payload + struct.pack("<I", crc))


def load_dataset(path):
    """Load a dataset file; returns windows or labeled windows per its flag."""
    with open(path, "rb") as fh:
        raw = fh.read()
    min_len = len(MAGIC) + _HEADER.size + 4
    if len(raw) < min_len:
        raise FormatError(f"dataset file truncated: {len(raw)} bytes < minimum {min_len}")
    if raw[: len(MAGIC)] != MAGIC:
        raise FormatError(f"bad dataset magic {raw[:8]!r}, expected {MAGIC!r}")
    (stored_crc,) = struct.unpack("<I", raw[-4:])
    actual_crc = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"dataset checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )
    t, h, w, count, flags = _HEADER.unpack_from(raw, len(MAGIC))
    labeled = bool(flags & 1)
    frame_bytes = (h * w + 7) // 8
    offset = len(MAGIC) + _HEADER.size
    end = len(raw) - 4
    items = []
    for _ in range(count):
        try:
            (seg_len,) = struct.unpack_from("<H", raw, offset)
            offset += 2
            segment = raw[offset : offset + seg_len].decode("utf-8")
            offset += seg_len
            (start,) = struct.unpack_from("<Q", raw, offset)
            offset += 8
            label = None
            if labeled:
                label = LABEL_ABNORMAL if raw[offset] else LABEL_NORMAL
                offset += 1
            frames = []
            for k in range(t):
                if offset + frame_bytes > end:
                    raise FormatError("dataset record extends past checksum trailer")
                pixels = _unpack_frame(raw[offset : offset + frame_bytes], h, w)
                offset += frame_bytes
                frames.append(SkeletonImage(pixels, start + k, segment))
        except struct.error:
            raise FormatError("dataset record truncated mid-field") from None
        window = SequentialSkeletonMap(frames, segment, start, start + t - 1)
        items.append(LabeledWindow(window, label) if labeled else window)
    if offset != end:
        raise FormatError(f"dataset has {end - offset} trailing bytes after {count} records")
    return items


def dataset_summary(path) -> dict:
    """Header-plus-content summary used by the CLI inspect subcommand."""
    items = load_dataset(path)
    labeled = bool(items) and isinstance(items[0], LabeledWindow)
    windows = [it.window if labeled else it for it in items]
    segments = sorted({w.segment_id for w in windows})
    summary = {
        "kind": "dataset",
        "records": len(windows),
        "window_length": windows[0].length if windows else None,
        "frame_shape": list(windows[0].frames[0].pixels.shape) if windows else None,
        "labeled": labeled,
        "segments": segments,
    }
    if labeled:
        summary["abnormal_records"] = sum(1 for it in items if it.label == LABEL_ABNORMAL)
    return summary
