"""File formats for detections, tracks, rasters, intrinsics, and results.

Everything a run consumes or produces goes through this module, so the exact
byte layouts are documented here and pinned by round-trip tests.

Text formats (UTF-8, one record per line, whitespace separated, ``#`` starts
a comment):

- detections::

      # detections v1 kernel_dim=<D>
      <sequence> <frame> <u> <v> <mean_depth> <category> <score> <k_0> ... <k_{D-1}>

  Floats are written with 9 significant digits (``%.9g``), which round-trips
  IEEE binary32 exactly — detections quantize to float32 on construction, so
  write → read is the identity.  Frames must be non-decreasing and the kernel
  length must match the header on every line.

- tracks::

      # tracks v1
      <sequence> <frame> <detection_index> <track_id>

  ``(frame, detection_index)`` pairs are unique, ``track_id >= 1``.

- intrinsics: ``key=value`` lines for fx, fy, cx, cy, width, height.

Binary raster container (little-endian):

    offset 0   magic  b"UPRS"
    offset 4   u16    version (currently 1)
    offset 6   u8     kind: 1 = panoptic, 2 = depth
    offset 7   u32    width
    offset 11  u32    height
    offset 15  payload, row-major, width*height*4 bytes
               kind 1: u32 per pixel = class_id * 2^16 + instance_id
                       (class 0xFFFF is VOID, instance 0 for stuff)
               kind 2: float32 per pixel, NaN marks invalid

Results documents are JSON with sorted keys.

All readers convert malformed input into typed errors carrying the file path
and, for text, the 1-based line number; they never leak bare exceptions from
the parsing layer.
"""

import json
import struct

import numpy as np

from .depthops import DepthMap
from .geometry import CameraIntrinsics
from .metrics import PanopticMap
from .tracker import Detection

MAGIC = b"UPRS"
VERSION = 1
KIND_PANOPTIC = 1
KIND_DEPTH = 2

_FLOAT = "%.9g"


class FormatError(ValueError):
    """Base class for every malformed-file error raised here."""


class ParseError(FormatError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = f"{path or '<stream>'}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}")


class DimMismatch(ParseError):
    """A record's kernel length disagrees with the file header."""


class BadMagic(FormatError):
    pass


class TruncatedPayload(FormatError):
    pass


class UnknownKind(FormatError):
    pass


# ------------------------------------------------------------- detections


def write_detections(path, sequence, frames, kernel_dim=None):
    """Write per-frame detection lists.

    frames: iterable of (frame_index, [Detection, ...]) in ascending frame
    order.  The kernel dimension is taken from the first detection unless
    given explicitly (needed for files with no records).
    """
    frames = [(int(f), list(dets)) for f, dets in frames]
    if kernel_dim is None:
        for _, dets in frames:
            if dets:
                kernel_dim = int(dets[0].kernel.size)
                break
        else:
            raise ValueError("kernel_dim is required when writing no records")
    seq = _token(sequence, "sequence id")
    lines = [f"# detections v1 kernel_dim={int(kernel_dim)}"]
    for frame, dets in frames:
        for det in dets:
            if det.kernel.size != kernel_dim:
                raise DimMismatch(
                    f"detection kernel has length {det.kernel.size}, header says {kernel_dim}",
                    path,
                )
            parts = [
                seq,
                str(frame),
                _FLOAT % det.center[0],
                _FLOAT % det.center[1],
                _FLOAT % det.mean_depth,
                str(int(det.category)),
                _FLOAT % det.score,
            ]
            parts.extend(_FLOAT % k for k in det.kernel)
            lines.append(" ".join(parts))
    _write_text(path, lines)


def read_detections(path):
    """Read a detection file; returns (sequence, kernel_dim, frames).

    frames is a list of (frame_index, [Detection, ...]) grouped in file
    order.  Frames must be non-decreasing; the sequence id must be constant
    within one file.
    """
    lines = _read_text(path)
    kernel_dim = _detections_header(lines, path)
    sequence = None
    frames = []
    last_frame = None
    for lineno, line in _records(lines):
        parts = line.split()
        if len(parts) != 7 + kernel_dim:
            if len(parts) >= 7:
                raise DimMismatch(
                    f"expected kernel length {kernel_dim}, found {len(parts) - 7}",
                    path,
                    lineno,
                )
            raise ParseError(f"expected {7 + kernel_dim} fields, found {len(parts)}", path, lineno)
        seq = parts[0]
        if sequence is None:
            sequence = seq
        elif seq != sequence:
            raise ParseError(f"mixed sequence ids {sequence!r} and {seq!r}", path, lineno)
        try:
            frame = int(parts[1])
            u, v = float(parts[2]), float(parts[3])
            mean_depth = float(parts[4])
            category = int(parts[5])
            score = float(parts[6])
            kernel = np.array([float(x) for x in parts[7:]], dtype=np.float32)
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        if last_frame is not None and frame < last_frame:
            raise ParseError(f"frame {frame} after frame {last_frame}", path, lineno)
        try:
            det = Detection((u, v), kernel, mean_depth, category, score)
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        if last_frame != frame:
            frames.append((frame, []))
            last_frame = frame
        frames[-1][1].append(det)
    return sequence, kernel_dim, frames


def _detections_header(lines, path):
    if not lines:
        raise ParseError("empty file, expected a header line", path, 1)
    head = lines[0].strip()
    prefix = "# detections v1 kernel_dim="
    if not head.startswith(prefix):
        raise ParseError(f"bad header {head!r}", path, 1)
    try:
        kernel_dim = int(head[len(prefix) :])
    except ValueError:
        raise ParseError(f"bad kernel_dim in header {head!r}", path, 1) from None
    if kernel_dim < 1:
        raise ParseError("kernel_dim must be >= 1", path, 1)
    return kernel_dim


# ------------------------------------------------------------------ tracks


def write_tracks(path, sequence, records):
    """records: iterable of (frame, detection_index, track_id)."""
    seq = _token(sequence, "sequence id")
    lines = ["# tracks v1"]
    seen = set()
    for frame, det_index, track_id in records:
        key = (int(frame), int(det_index))
        if key in seen:
            raise ValueError(f"duplicate (frame, detection) pair {key}")
        seen.add(key)
        if int(track_id) < 1:
            raise ValueError(f"track_id must be >= 1, got {track_id}")
        lines.append(f"{seq} {int(frame)} {int(det_index)} {int(track_id)}")
    _write_text(path, lines)


def read_tracks(path):
    """Returns (sequence, [(frame, detection_index, track_id), ...])."""
    lines = _read_text(path)
    if not lines or lines[0].strip() != "# tracks v1":
        raise ParseError("missing '# tracks v1' header", path, 1)
    sequence = None
    records = []
    seen = set()
    for lineno, line in _records(lines):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, found {len(parts)}", path, lineno)
        seq = parts[0]
        if sequence is None:
            sequence = seq
        elif seq != sequence:
            raise ParseError(f"mixed sequence ids {sequence!r} and {seq!r}", path, lineno)
        try:
            frame, det_index, track_id = (int(x) for x in parts[1:])
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
        if track_id < 1:
            raise ParseError(f"track_id must be >= 1, got {track_id}", path, lineno)
        key = (frame, det_index)
        if key in seen:
            raise ParseError(f"duplicate (frame, detection) pair {key}", path, lineno)
        seen.add(key)
        records.append((frame, det_index, track_id))
    return sequence, records


# ----------------------------------------------------------------- rasters


def write_raster(path, raster):
    """Serialize a PanopticMap or DepthMap (type decides the kind byte)."""
    if isinstance(raster, PanopticMap):
        kind = KIND_PANOPTIC
        payload = (
            (raster.semantic.astype(np.uint32) << np.uint32(16))
            | raster.instance.astype(np.uint32)
        ).astype("<u4")
    elif isinstance(raster, DepthMap):
        kind = KIND_DEPTH
        values = np.where(raster.valid, raster.values, np.nan)
        payload = values.astype("<f4")
    else:
        raise TypeError(f"cannot serialize {type(raster).__name__} as a raster")
    h, w = payload.shape
    header = MAGIC + struct.pack("<HBII", VERSION, kind, w, h)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes(order="C"))


def read_raster(path, normalized=False):
    """Read a raster container; returns PanopticMap or DepthMap by kind."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise BadMagic(f"{path}: expected magic {MAGIC!r}, found {blob[:4]!r}")
    if len(blob) < 15:
        raise TruncatedPayload(f"{path}: header truncated at {len(blob)} bytes")
    version, kind, w, h = struct.unpack("<HBII", blob[4:15])
    if version != VERSION:
        raise UnknownKind(f"{path}: unsupported version {version}")
    payload = blob[15:]
    expected = w * h * 4
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: payload is {len(payload)} bytes, {w}x{h} needs {expected}"
        )
    if kind == KIND_PANOPTIC:
        pixels = np.frombuffer(payload, dtype="<u4").reshape(h, w)
        return PanopticMap(
            (pixels >> np.uint32(16)).astype(np.uint16),
            (pixels & np.uint32(0xFFFF)).astype(np.uint16),
        )
    if kind == KIND_DEPTH:
        values = np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float64)
        try:
            return DepthMap(values, normalized=normalized)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    raise UnknownKind(f"{path}: unknown raster kind {kind}")


# -------------------------------------------------------------- intrinsics


_INTRINSIC_FIELDS = ("fx", "fy", "cx", "cy", "width", "height")


def write_intrinsics(path, intrinsics: CameraIntrinsics):
    lines = [
        f"fx={_FLOAT % intrinsics.fx}",
        f"fy={_FLOAT % intrinsics.fy}",
        f"cx={_FLOAT % intrinsics.cx}",
        f"cy={_FLOAT % intrinsics.cy}",
        f"width={int(intrinsics.width)}",
        f"height={int(intrinsics.height)}",
    ]
    _write_text(path, lines)


def read_intrinsics(path) -> CameraIntrinsics:
    values = {}
    for lineno, line in _records(_read_text(path)):
        if "=" not in line:
            raise ParseError(f"expected key=value, found {line!r}", path, lineno)
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _INTRINSIC_FIELDS:
            raise ParseError(f"unknown intrinsic {key!r}", path, lineno)
        if key in values:
            raise ParseError(f"duplicate intrinsic {key!r}", path, lineno)
        try:
            values[key] = float(raw)
        except ValueError:
            raise ParseError(f"bad number {raw!r} for {key}", path, lineno) from None
    missing = [f for f in _INTRINSIC_FIELDS if f not in values]
    if missing:
        raise ParseError(f"missing intrinsics: {', '.join(missing)}", path)
    try:
        return CameraIntrinsics(
            fx=values["fx"],
            fy=values["fy"],
            cx=values["cx"],
            cy=values["cy"],
            width=int(values["width"]),
            height=int(values["height"]),
        )
    except ValueError as exc:
        raise ParseError(str(exc), path) from None


# ----------------------------------------------------------------- results


def write_results(path, document: dict):
    """JSON with sorted keys and a trailing newline (stable bytes)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_results(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path, exc.lineno) from None


# ----------------------------------------------------------------- helpers


def _token(value, what):
    value = str(value)
    if not value or any(ch.isspace() for ch in value):
        raise ValueError(f"{what} must be a non-empty token without whitespace: {value!r}")
    return value


def _write_text(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_text(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read().splitlines()


def _records(lines):
    """Yield (1-based line number, stripped line) skipping blanks/comments."""
    for i, line in enumerate(lines, start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        yield i, body
