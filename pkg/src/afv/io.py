"""File formats: PNG frame directories, Middlebury ``.flo``, raw BGR video,
CSV tables, the ``key = value`` config file and key-value reports.

Every writer goes through :func:`atomic_write` (temp file + rename), so a
reader never sees a half-written artifact.
"""
from __future__ import annotations

import configparser
import csv
import io as _io
import os
import re
import struct
import tempfile
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .core import FrameSequence, dequantize, quantize
from .encoding import NormalizationConfig
from .errors import FormatError, FrameIOError, ValidationError
from .farneback import FlowParams
from .gate import GateParams
from .metrics import PredictionRecord, canonical_dataset

FRAME_PATTERN = "frame_%06d.png"
FLO_MAGIC = 202021.25
FLO_PATTERN = "flow_%06d.flo"


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- frame sequences ------------------------------------------------------

def _pattern_regex(pattern: str) -> re.Pattern:
    m = re.search(r"%0?(\d*)d", pattern)
    if m is None:
        raise ValidationError(f"frame pattern {pattern!r} has no %d field")
    head, tail = pattern[:m.start()], pattern[m.end():]
    return re.compile("^" + re.escape(head) + r"(\d+)" + re.escape(tail) + "$")


def save_frames(video: FrameSequence, directory, pattern: str = FRAME_PATTERN) -> list[Path]:
    """Write 8-bit PNGs. Colour frames are stored in RGB order on disk."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(video.frames):
        if video.channels == 3 and video.channel_order == "bgr":
            frame = frame[..., ::-1]
        buf = _io.BytesIO()
        # compress_level fixed so identical pixels give identical bytes
        Image.fromarray(quantize(frame)).save(buf, format="PNG", compress_level=6)
        p = directory / (pattern % i)
        atomic_write(p, buf.getvalue())
        paths.append(p)
    return paths


def list_frame_files(directory, pattern: str = FRAME_PATTERN) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FrameIOError(f"frame directory {directory} does not exist")
    rx = _pattern_regex(pattern)
    found = {}
    for p in directory.iterdir():
        m = rx.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise FrameIOError(f"no frames matching {pattern!r} in {directory}")
    for i in range(max(found) + 1):
        if i not in found:
            raise FrameIOError(f"frame {i} missing from {directory} ({pattern % i})")
    return [found[i] for i in range(len(found))]


def load_frames(directory, pattern: str = FRAME_PATTERN, frame_rate: float = 25.0,
                channel_order: str = "rgb") -> FrameSequence:
    """Read a numbered PNG sequence; gaps and size changes are errors.

    With ``channel_order="bgr"`` colour frames are returned in BGR order,
    which is how encoded motion videos are held in memory.
    """
    arrays = []
    for p in list_frame_files(directory, pattern):
        try:
            with Image.open(p) as im:
                if im.mode not in ("L", "RGB"):
                    im = im.convert("RGB" if im.mode in ("RGBA", "P") else "L")
                a = np.asarray(im)
        except OSError as exc:
            raise FrameIOError(f"cannot decode {p}: {exc}") from exc
        if arrays and a.shape != arrays[0].shape:
            raise FormatError(f"{p.name} has shape {a.shape}, expected {arrays[0].shape}")
        arrays.append(a)
    data = np.stack(arrays)
    if data.ndim == 4 and channel_order == "bgr":
        data = data[..., ::-1]
    return FrameSequence(dequantize(data), frame_rate=frame_rate,
                         channel_order=channel_order if data.ndim == 4 else "rgb")


def save_raw_video(video: FrameSequence, path) -> None:
    """uint8 ``.npy`` of shape (T, H, W[, 3]); colour stored as BGR."""
    frames = video.frames
    if video.channels == 3 and video.channel_order == "rgb":
        frames = frames[..., ::-1]
    buf = _io.BytesIO()
    np.save(buf, np.ascontiguousarray(quantize(frames)), allow_pickle=False)
    atomic_write(path, buf.getvalue())


def load_raw_video(path, frame_rate: float = 25.0) -> FrameSequence:
    data = np.load(path, allow_pickle=False)
    if data.dtype != np.uint8:
        raise FormatError(f"{path}: raw video must be uint8, got {data.dtype}")
    return FrameSequence(dequantize(data), frame_rate=frame_rate, channel_order="bgr")


# -- Middlebury .flo ------------------------------------------------------

def flo_bytes(flow: np.ndarray) -> bytes:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValidationError(f"flow must have shape (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    header = struct.pack("<fii", FLO_MAGIC, w, h)
    return header + np.ascontiguousarray(flow, dtype="<f4").tobytes()


def write_flo(path, flow: np.ndarray) -> None:
    atomic_write(path, flo_bytes(flow))


def read_flo(path) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FrameIOError(f"cannot read {path}: {exc}") from exc
    if len(raw) < 12:
        raise FormatError(f"{path}: header truncated ({len(raw)} of 12 bytes)")
    magic, w, h = struct.unpack("<fii", raw[:12])
    if magic != FLO_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FLO_MAGIC}")
    if w <= 0 or h <= 0:
        raise FormatError(f"{path}: invalid size {w}x{h}")
    expected = 12 + 8 * w * h
    if len(raw) != expected:
        raise FormatError(f"{path}: payload size mismatch, expected {expected} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f4", offset=12).reshape(h, w, 2).astype(np.float32)


def write_flow_dir(directory, flows) -> list[Path]:
    directory = Path(directory)
    paths = []
    for i, f in enumerate(flows):
        p = directory / (FLO_PATTERN % i)
        write_flo(p, f)
        paths.append(p)
    return paths


def read_flow_dir(directory) -> list[np.ndarray]:
    return [read_flo(p) for p in list_frame_files(directory, FLO_PATTERN)]


# -- CSV tables -----------------------------------------------------------

def _read_csv(path, required: list[str]):
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise FrameIOError(f"cannot read {path}: {exc}") from exc
    reader = csv.DictReader(_io.StringIO(text))
    cols = [c.strip() for c in (reader.fieldnames or [])]
    missing = [c for c in required if c not in cols]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    reader.fieldnames = cols
    # line 1 is the header
    return [(i + 2, {k: (v or "").strip() for k, v in row.items() if k is not None})
            for i, row in enumerate(reader)]


def _int(value: str, what: str, path, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ValidationError(f"{path}:{line}: {what} must be an integer, got {value!r}") from None


_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


def _bool(value: str, what: str, path, line: int) -> bool:
    v = value.lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ValidationError(f"{path}:{line}: {what} must be boolean, got {value!r}")


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    class_label: int
    frame_count: int
    resolution: tuple[int, int]  # (width, height)
    source_path: Path
    split: str = "train"


def read_manifest(path) -> list[ManifestEntry]:
    """CSV with ``video_id,class_label,frame_count,resolution,source_path[,split]``.

    ``resolution`` is ``WxH``; relative source paths resolve against the
    manifest's directory.
    """
    rows = _read_csv(path, ["video_id", "class_label", "frame_count", "resolution", "source_path"])
    base = Path(path).parent
    seen = set()
    out = []
    for line, row in rows:
        vid = row["video_id"]
        if not vid:
            raise ValidationError(f"{path}:{line}: empty video_id")
        if vid in seen:
            raise ValidationError(f"{path}:{line}: duplicate video_id {vid!r}")
        seen.add(vid)
        label = _int(row["class_label"], "class_label", path, line)
        count = _int(row["frame_count"], "frame_count", path, line)
        if label < 0 or count < 0:
            raise ValidationError(f"{path}:{line}: class_label and frame_count must be >= 0")
        m = re.fullmatch(r"(\d+)[xX](\d+)", row["resolution"])
        if not m:
            raise ValidationError(f"{path}:{line}: resolution must look like 320x240")
        src = Path(row["source_path"])
        if not src.is_absolute():
            src = base / src
        split = row.get("split") or "train"
        out.append(ManifestEntry(vid, label, count, (int(m.group(1)), int(m.group(2))), src, split))
    if not out:
        raise ValidationError(f"{path}: manifest is empty")
    return out


def write_manifest(path, entries) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["video_id", "class_label", "frame_count", "resolution", "source_path", "split"])
    for e in entries:
        w.writerow([e.video_id, e.class_label, e.frame_count, f"{e.resolution[0]}x{e.resolution[1]}",
                    str(e.source_path), e.split])
    atomic_write(path, buf.getvalue().encode())


def read_predictions(path) -> list[PredictionRecord]:
    rows = _read_csv(path, ["video_id", "dataset", "true_label", "predicted_label"])
    out = []
    for line, row in rows:
        try:
            ds = canonical_dataset(row["dataset"])
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line}: {exc}") from None
        out.append(PredictionRecord(
            row["video_id"], ds,
            _int(row["true_label"], "true_label", path, line),
            _int(row["predicted_label"], "predicted_label", path, line),
        ))
    if not out:
        raise ValidationError(f"{path}: no prediction rows")
    return out


@dataclass(frozen=True)
class ResponseRow:
    participant: str
    condition: str
    trial: int
    true_label: int | None
    response: int | None
    correct: bool
    rt_ms: float | None = None
    group: str | None = None


def read_responses(path) -> list[ResponseRow]:
    """Long-format trial log; ``rt_ms`` and ``group`` are optional columns."""
    rows = _read_csv(path, ["participant", "condition", "trial", "correct"])
    out = []
    for line, row in rows:
        if not row["participant"] or not row["condition"]:
            raise ValidationError(f"{path}:{line}: participant and condition are required")
        rt = row.get("rt_ms") or ""
        try:
            rt_val = float(rt) if rt else None
        except ValueError:
            raise ValidationError(f"{path}:{line}: rt_ms must be numeric, got {rt!r}") from None
        tl = row.get("true_label") or ""
        rp = row.get("response") or ""
        out.append(ResponseRow(
            row["participant"], row["condition"],
            _int(row["trial"], "trial", path, line),
            _int(tl, "true_label", path, line) if tl else None,
            _int(rp, "response", path, line) if rp else None,
            _bool(row["correct"], "correct", path, line),
            rt_val,
            row.get("group") or None,
        ))
    if not out:
        raise ValidationError(f"{path}: no response rows")
    return out


# -- reports --------------------------------------------------------------

def format_kv(items: dict) -> str:
    """Stable ``key = value`` lines, one per item, in insertion order."""
    lines = []
    for k, v in items.items():
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise FormatError(f"not a key = value line: {line!r}")
        out[k.strip()] = v.strip()
    return out


# -- configuration --------------------------------------------------------

@dataclass(frozen=True)
class DotConfig:
    count: int = 500
    lifetime: int = 8
    radius: int = 0
    seed: int = 0


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    interpolation: str = "bilinear"

    def __post_init__(self):
        if self.interpolation not in ("bilinear", "nearest"):
            raise ValidationError(f"noise interpolation must be bilinear or nearest, got {self.interpolation!r}")


@dataclass(frozen=True)
class IOConfig:
    input: str = ""
    output: str = ""
    frame_pattern: str = FRAME_PATTERN


@dataclass(frozen=True)
class PipelineConfig:
    flow: FlowParams = field(default_factory=FlowParams)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    gate: GateParams = field(default_factory=GateParams)
    dots: DotConfig = field(default_factory=DotConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    io: IOConfig = field(default_factory=IOConfig)
    workers: int = 1
    provenance: str = ""


# config key -> dataclass field where the names differ
_RENAMES = {("gate", "lambda"): "lam"}
_SECTIONS = ("flow", "normalization", "gate", "dots", "noise", "io")


def _coerce(cls, section: str, key: str, value: str):
    name = _RENAMES.get((section, key), key)
    names = {f.name: f for f in fields(cls)}
    if name not in names:
        raise ValidationError(f"unknown config key [{section}] {key}")
    default = getattr(cls(), name)
    try:
        if isinstance(default, bool):
            return name, value.lower() in _TRUE
        if isinstance(default, int):
            return name, int(value)
        if isinstance(default, float):
            return name, float(value)
    except ValueError:
        raise ValidationError(f"[{section}] {key}: cannot parse {value!r}") from None
    return name, value


def parse_config(text: str) -> PipelineConfig:
    """Parse the sectioned ``key = value`` config. Unknown keys are errors.

    ``[provenance]`` accepts free-form keys, which are kept verbatim.
    """
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from None
    cfg = PipelineConfig()
    provenance = []
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "provenance":
            provenance.extend(f"{k}: {v}" for k, v in items.items())
            continue
        if section == "run":
            for k, v in items.items():
                if k != "workers":
                    raise ValidationError(f"unknown config key [run] {k}")
                cfg = replace(cfg, workers=int(v))
            continue
        if section not in _SECTIONS:
            raise ValidationError(f"unknown config section [{section}]")
        current = getattr(cfg, section)
        kwargs = dict(_coerce(type(current), section, k, v) for k, v in items.items())
        cfg = replace(cfg, **{section: replace(current, **kwargs)})
    return replace(cfg, provenance="\n".join(provenance))


def load_config(path) -> PipelineConfig:
    try:
        return parse_config(Path(path).read_text())
    except OSError as exc:
        raise FrameIOError(f"cannot read config {path}: {exc}") from exc


def dump_config(cfg: PipelineConfig) -> str:
    """Canonical text form; also what the run manifest hashes."""
    out = []
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        out.append(f"[{section}]")
        back = {v: k[1] for k, v in _RENAMES.items() if k[0] == section}
        for f in fields(obj):
            out.append(f"{back.get(f.name, f.name)} = {getattr(obj, f.name)!r}".replace("'", ""))
        out.append("")
    out.append("[run]")
    out.append(f"workers = {cfg.workers}")
    out.append("")
    if cfg.provenance:
        out.append("[provenance]")
        for line in cfg.provenance.splitlines():
            k, _, v = line.partition(": ")
            out.append(f"{k} = {v}")
        out.append("")
    return "\n".join(out)
