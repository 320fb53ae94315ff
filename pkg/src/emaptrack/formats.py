"""Readers and writers for detections, odometry, depth rasters, track tables and manifests.

Text files are UTF-8 with ``\\n`` line endings and ``.`` decimals.

Odometry rows (``frame,timestamp_s,forward_speed_mps,yaw_rate_radps``)
describe the motion over the interval ending at that row's frame.  A
positive ``yaw_rate_radps`` is the rotation that shifts image content
towards +u (to the right), i.e. a left turn of a forward-facing camera;
convert right-handed z-up vehicle yaw rates without a sign change, and
negate them if your odometry uses a z-down (NED-style) body frame.

Depth rasters are binary PGM (P5, maxval 65535) holding millimetres,
with 0 meaning "no measurement".
"""

from __future__ import annotations

import math
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .association import Detection
from .errors import InputError, ParseError
from .geometry import CameraModel, EgoMotionSample
from .tracker import FrameBundle, TrackRow

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

DETECTION_HEADER = ["frame", "class", "left", "top", "right", "bottom", "score"]
ODOMETRY_HEADER = ["frame", "timestamp_s", "forward_speed_mps", "yaw_rate_radps"]
TRACK_HEADER = ["frame", "id", "class", "left", "top", "right", "bottom", "score", "extrapolated"]
KITTI_IGNORED_TYPES = {"DontCare"}


def _lines(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read().splitlines()


def _float(text, path, lineno, what):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"bad {what} {text!r}", path, lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite {what} {text!r}", path, lineno)
    return v


def _int(text, path, lineno, what):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"bad {what} {text!r}", path, lineno) from None


def _check_box(box, path, lineno):
    l, t, r, b = box
    if r < l or b < t:
        raise ParseError(f"negative-size box (left={l}, top={t}, right={r}, bottom={b})", path, lineno)


def _is_csv(lines) -> bool:
    for ln in lines:
        if ln.strip():
            return "," in ln
    return False


# -- detections ----------------------------------------------------------------


def parse_detections(path, classes: Optional[Iterable[str]] = None) -> Dict[int, List[Detection]]:
    """Per-frame detections from a KITTI label file or a minimal CSV (auto-detected).

    The CSV may carry an extra ``depth`` column (metres) after ``score``.
    """
    lines = _lines(path)
    keep = set(classes) if classes else None
    out: Dict[int, List[Detection]] = defaultdict(list)
    if _is_csv(lines):
        rows = _parse_detection_csv(lines, path)
    else:
        rows = _parse_kitti(lines, path, with_ids=False)
    for lineno, frame, _tid, label, box, score, depth in rows:
        if keep is not None and label not in keep:
            continue
        try:
            out[frame].append(Detection(frame, box, score, label, depth))
        except ValueError as exc:
            raise ParseError(str(exc), path, lineno) from None
    return dict(out)


def _parse_detection_csv(lines, path):
    header_seen = False
    for lineno, ln in enumerate(lines, 1):
        if not ln.strip():
            continue
        cells = [c.strip() for c in ln.split(",")]
        if not header_seen:
            if cells[: len(DETECTION_HEADER)] != DETECTION_HEADER:
                raise ParseError(f"expected header {','.join(DETECTION_HEADER)}", path, lineno)
            has_depth = len(cells) > len(DETECTION_HEADER) and cells[len(DETECTION_HEADER)] == "depth"
            header_seen = True
            continue
        if len(cells) < 7:
            raise ParseError(f"expected at least 7 fields, got {len(cells)}", path, lineno)
        frame = _int(cells[0], path, lineno, "frame")
        box = tuple(_float(c, path, lineno, "corner") for c in cells[2:6])
        _check_box(box, path, lineno)
        score = _float(cells[6], path, lineno, "score")
        depth = None
        if has_depth and len(cells) > 7 and cells[7] != "":
            depth = _float(cells[7], path, lineno, "depth")
        yield lineno, frame, None, cells[1], box, score, depth


def _parse_kitti(lines, path, with_ids):
    for lineno, ln in enumerate(lines, 1):
        parts = ln.split()
        if not parts:
            continue
        if len(parts) < 10:
            raise ParseError(f"expected at least 10 fields, got {len(parts)}", path, lineno)
        label = parts[2]
        if label in KITTI_IGNORED_TYPES:
            continue
        frame = _int(parts[0], path, lineno, "frame")
        tid = _int(parts[1], path, lineno, "track id")
        box = tuple(_float(c, path, lineno, "corner") for c in parts[6:10])
        _check_box(box, path, lineno)
        score = _float(parts[17], path, lineno, "score") if len(parts) >= 18 else 1.0
        yield lineno, frame, tid, label, box, score, None


# -- odometry --------------------------------------------------------------------


def parse_odometry(path, dt_default: float = 0.1) -> Dict[int, EgoMotionSample]:
    """Per-frame ego-motion; dt comes from consecutive timestamps."""
    lines = _lines(path)
    out: Dict[int, EgoMotionSample] = {}
    prev_t = None
    header_seen = False
    for lineno, ln in enumerate(lines, 1):
        if not ln.strip():
            continue
        cells = [c.strip() for c in ln.split(",")]
        if not header_seen:
            if cells != ODOMETRY_HEADER:
                raise ParseError(f"expected header {','.join(ODOMETRY_HEADER)}", path, lineno)
            header_seen = True
            continue
        if len(cells) != 4:
            raise ParseError(f"expected 4 fields, got {len(cells)}", path, lineno)
        frame = _int(cells[0], path, lineno, "frame")
        t = _float(cells[1], path, lineno, "timestamp")
        speed = _float(cells[2], path, lineno, "forward speed")
        yaw = _float(cells[3], path, lineno, "yaw rate")
        if prev_t is None:
            dt = dt_default
        else:
            dt = t - prev_t
            if not dt > 0:
                raise ParseError(f"timestamps not strictly increasing ({prev_t} -> {t})", path, lineno)
        if frame in out:
            raise ParseError(f"duplicate frame {frame}", path, lineno)
        out[frame] = EgoMotionSample(speed, yaw, dt)
        prev_t = t
    return out


def write_odometry(path, samples: Sequence[EgoMotionSample], t0: float = 0.0):
    """Rows for frames 0..n-1; frame 0 sits at ``t0``."""
    t = t0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(ODOMETRY_HEADER) + "\n")
        for k, s in enumerate(samples):
            if k > 0:
                t += s.dt
            fh.write(f"{k},{t:.9f},{s.d_dot:.9f},{s.psi_dot:.9f}\n")


# -- depth rasters -----------------------------------------------------------------


def depth_path(directory, frame: int) -> Path:
    return Path(directory) / f"{frame:06d}.pgm"


def read_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("truncated PGM header", path)
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    if tokens[0] != b"P5":
        raise ParseError(f"not a binary PGM (magic {tokens[0]!r})", path)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError("malformed PGM header", path) from None
    if maxval != 65535:
        raise ParseError(f"expected maxval 65535, got {maxval}", path)
    raster = data[pos:]
    if len(raster) != width * height * 2:
        raise ParseError(f"raster holds {len(raster)} bytes, expected {width * height * 2}", path)
    return np.frombuffer(raster, dtype=">u2").reshape(height, width)


def parse_depth(directory, frame: int, cam: Optional[CameraModel] = None) -> np.ndarray:
    """Depth raster of ``frame`` in metres (0 marks invalid pixels)."""
    path = depth_path(directory, frame)
    if not path.is_file():
        raise InputError(f"depth image not found: {path}")
    raw = read_pgm16(path)
    if cam is not None and raw.shape != (cam.height, cam.width):
        raise ParseError(f"depth image is {raw.shape[1]}x{raw.shape[0]}, camera is {cam.width}x{cam.height}", path)
    return raw.astype(float) / 1000.0


def write_depth(directory, frame: int, meters: np.ndarray) -> Path:
    mm = np.rint(np.nan_to_num(np.asarray(meters, dtype=float), nan=0.0) * 1000.0)
    mm = np.clip(mm, 0, 65535).astype(">u2")
    h, w = mm.shape
    path = depth_path(directory, frame)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{w} {h}\n65535\n".encode("ascii") + mm.tobytes())
    return path


# -- track tables --------------------------------------------------------------------


def write_tracks(path, rows: Iterable[TrackRow]):
    rows = sorted(rows, key=lambda r: (r.frame, r.id))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRACK_HEADER) + "\n")
        for r in rows:
            l, t, rr, b = r.box
            fh.write(f"{r.frame},{r.id},{r.label},{l:.2f},{t:.2f},{rr:.2f},{b:.2f},{r.score:.4f},{int(r.extrapolated)}\n")


def parse_tracks(path, classes: Optional[Iterable[str]] = None) -> List[TrackRow]:
    """Track table (our CSV) or KITTI tracking labels, auto-detected."""
    lines = _lines(path)
    keep = set(classes) if classes else None
    rows: List[TrackRow] = []
    if _is_csv(lines):
        header_seen = False
        for lineno, ln in enumerate(lines, 1):
            if not ln.strip():
                continue
            cells = [c.strip() for c in ln.split(",")]
            if not header_seen:
                if cells[:8] != TRACK_HEADER[:8]:
                    raise ParseError(f"expected header {','.join(TRACK_HEADER)}", path, lineno)
                header_seen = True
                continue
            if len(cells) < 8:
                raise ParseError(f"expected at least 8 fields, got {len(cells)}", path, lineno)
            box = tuple(_float(c, path, lineno, "corner") for c in cells[3:7])
            _check_box(box, path, lineno)
            extra = len(cells) > 8 and cells[8] not in ("", "0")
            rows.append(TrackRow(_int(cells[0], path, lineno, "frame"), _int(cells[1], path, lineno, "id"),
                                 cells[2], box, _float(cells[7], path, lineno, "score"), extra))
    else:
        for lineno, frame, tid, label, box, score, _ in _parse_kitti(lines, path, with_ids=True):
            if tid < 0:
                continue
            rows.append(TrackRow(frame, tid, label, box, score, False))
    if keep is not None:
        rows = [r for r in rows if r.label in keep]
    return sorted(rows, key=lambda r: (r.frame, r.id))


def write_detections(path, per_frame: Sequence[Sequence[Detection]], with_depth: bool = True):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        header = DETECTION_HEADER + (["depth"] if with_depth else [])
        fh.write(",".join(header) + "\n")
        for dets in per_frame:
            for d in dets:
                l, t, r, b = d.box
                line = f"{d.frame},{d.label},{l:.4f},{t:.4f},{r:.4f},{b:.4f},{d.score:.4f}"
                if with_depth:
                    line += "," + ("" if d.depth is None else f"{d.depth:.4f}")
                fh.write(line + "\n")


# -- manifests -------------------------------------------------------------------------


@dataclass
class SequenceManifest:
    path: Path
    camera: CameraModel
    detections: Path
    name: str = ""
    odometry: Optional[Path] = None
    depth_dir: Optional[Path] = None
    ground_truth: Optional[Path] = None
    classes: List[str] = field(default_factory=list)
    dt_default: float = 0.1
    max_range: float = 100.0


def load_manifest(path) -> SequenceManifest:
    """Read a TOML manifest; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"manifest not found: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"invalid TOML: {exc}", path) from None
    base = path.parent

    def rel(key):
        v = doc.get("sequence", {}).get(key)
        return None if v in (None, "") else (base / v)

    try:
        c = doc["camera"]
        cam = CameraModel(float(c["f"]), float(c["cx"]), float(c["cy"]), int(c["width"]), int(c["height"]))
    except KeyError as exc:
        raise InputError(f"{path}: camera section lacks {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid camera: {exc}") from None
    seq = doc.get("sequence", {})
    det = rel("detections")
    if det is None:
        raise InputError(f"{path}: sequence.detections is required")
    m = SequenceManifest(
        path=path,
        camera=cam,
        detections=det,
        name=str(seq.get("name", path.stem)),
        odometry=rel("odometry"),
        depth_dir=rel("depth_dir"),
        ground_truth=rel("ground_truth"),
        classes=list(seq.get("classes", [])),
        dt_default=float(seq.get("dt_default", 0.1)),
        max_range=float(seq.get("max_range", 100.0)),
    )
    if not m.detections.is_file():
        raise InputError(f"detections file not found: {m.detections}")
    return m


def write_manifest(path, cam: CameraModel, name: str, detections: str, odometry: Optional[str] = None,
                   depth_dir: Optional[str] = None, ground_truth: Optional[str] = None,
                   classes: Sequence[str] = (), dt_default: float = 0.1):
    lines = [
        "[camera]",
        f"f = {cam.f!r}",
        f"cx = {cam.cx!r}",
        f"cy = {cam.cy!r}",
        f"width = {cam.width}",
        f"height = {cam.height}",
        "",
        "[sequence]",
        f'name = "{name}"',
        f'detections = "{detections}"',
    ]
    if odometry:
        lines.append(f'odometry = "{odometry}"')
    if depth_dir:
        lines.append(f'depth_dir = "{depth_dir}"')
    if ground_truth:
        lines.append(f'ground_truth = "{ground_truth}"')
    if classes:
        lines.append("classes = [" + ", ".join(f'"{c}"' for c in classes) + "]")
    lines.append(f"dt_default = {dt_default!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class ManifestFrames:
    """Re-iterable FrameBundle sequence; depth rasters are read lazily per frame."""

    def __init__(self, m: SequenceManifest, dets, odo, indices):
        self.manifest = m
        self._dets = dets
        self._odo = odo
        self._range = range(min(indices), max(indices) + 1) if indices else range(0)

    def __len__(self):
        return len(self._range)

    def __iter__(self):
        m = self.manifest
        for k in self._range:
            depth = None
            if m.depth_dir is not None and depth_path(m.depth_dir, k).is_file():
                depth = parse_depth(m.depth_dir, k, m.camera)
            yield FrameBundle(k, self._dets.get(k, []), self._odo.get(k), depth)


def load_frames(m: SequenceManifest, need_odometry: bool) -> ManifestFrames:
    """One FrameBundle per frame index covered by any of the manifest's files.

    Raises InputError naming the odometry file when it is needed but absent.
    """
    dets = parse_detections(m.detections, m.classes or None)
    odo: Dict[int, EgoMotionSample] = {}
    if m.odometry is not None and m.odometry.is_file():
        odo = parse_odometry(m.odometry, m.dt_default)
    elif need_odometry:
        if m.odometry is None:
            raise InputError(f"{m.path}: this mode needs an odometry file but the manifest names none")
        raise InputError(f"odometry file not found: {m.odometry}")
    gt_frames = set()
    if m.ground_truth is not None and m.ground_truth.is_file():
        gt_frames = {r.frame for r in parse_tracks(m.ground_truth, m.classes or None)}
    return ManifestFrames(m, dets, odo, set(dets) | set(odo) | gt_frames)
