"""File formats: raster images, landmark tables, manifests, matrices, models.

Formats (all documented in the README):

* images: portable graymap (P2/P5, 8- or 16-bit) parsed natively, plus PNG
  through Pillow; intensities normalize to [0, 1] by the format maximum.
* landmarks: whitespace-separated ``name x y`` rows, ``#`` comments.
* manifest: JSON with a ``subjects`` list of id/image/landmarks/label
  entries; paths resolve relative to the manifest file.
* feature matrix: CSV with ``# key=value`` metadata lines, then a header
  row of feature identifiers; floats serialized with ``repr`` so reading
  reproduces values bit-exactly.
* model: versioned JSON with every field needed for prediction.
"""

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .classifier import TrainedModel
from .errors import IngestionError, InvalidInputError
from .features import MixWeights
from .landmarks import LandmarkSet
from .records import LABELS, SubjectRecord, UNLABELED
from .registration import ImageGray
from .stats import SelectionResult

__all__ = [
    "read_image",
    "write_pgm",
    "write_png",
    "read_landmarks",
    "write_landmarks",
    "load_subject",
    "load_manifest",
    "write_manifest",
    "write_feature_matrix",
    "read_feature_matrix",
    "FeatureFile",
    "save_model",
    "load_model",
]

MODEL_SCHEMA = 1


def _read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()

    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise IngestionError(f"{path}: truncated PGM header")
        chunk = data[pos]
        if chunk in b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        if chunk in b" \t\r\n":
            pos += 1
            continue
        end = pos
        while end < len(data) and data[end] not in b" \t\r\n":
            end += 1
        tokens.append(data[pos:end])
        pos = end
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise IngestionError(f"{path}: malformed PGM header") from exc
    if maxval <= 0 or maxval > 65535:
        raise IngestionError(f"{path}: unsupported PGM maxval {maxval}")

    if magic == b"P2":
        values = np.array(data[pos:].split(), dtype=np.float64)
        if values.size != width * height:
            raise IngestionError(f"{path}: P2 pixel count mismatch")
        pixels = values.reshape(height, width)
    elif magic == b"P5":
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        need = width * height * dtype.itemsize
        raw = data[pos : pos + need]
        if len(raw) != need:
            raise IngestionError(f"{path}: P5 pixel data truncated")
        pixels = np.frombuffer(raw, dtype=dtype).reshape(height, width)
        pixels = pixels.astype(np.float64)
    else:
        raise IngestionError(f"{path}: not a PGM file (magic {magic!r})")
    return pixels / maxval


def read_image(path) -> np.ndarray:
    """Grayscale image as float64 in [0, 1]."""
    if not os.path.exists(path):
        raise IngestionError(f"image file not found: {path}")
    if str(path).lower().endswith(".pgm"):
        return _read_pgm(path)
    try:
        with Image.open(path) as img:
            if img.mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(img, dtype=np.float64)
                return arr / 65535.0
            return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    except IngestionError:
        raise
    except Exception as exc:
        raise IngestionError(f"unreadable image {path}: {exc}") from exc


def write_pgm(path, intensities, bit_depth: int = 16) -> None:
    """Write [0, 1] intensities as binary PGM (P5)."""
    arr = np.asarray(intensities, dtype=np.float64)
    if bit_depth == 8:
        maxval, dtype = 255, np.uint8
    elif bit_depth == 16:
        maxval, dtype = 65535, np.dtype(">u2")
    else:
        raise InvalidInputError(f"unsupported PGM bit depth {bit_depth}")
    quantized = np.rint(np.clip(arr, 0.0, 1.0) * maxval).astype(dtype)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantized.tobytes())


def write_png(path, intensities) -> None:
    """Write [0, 1] intensities as 8-bit grayscale PNG."""
    arr = np.rint(np.clip(np.asarray(intensities), 0.0, 1.0) * 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def read_landmarks(path) -> LandmarkSet:
    if not os.path.exists(path):
        raise IngestionError(f"landmark file not found: {path}")
    positions = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 3:
                raise IngestionError(
                    f"{path}:{lineno}: expected 'name x y', got {text!r}"
                )
            name, xs, ys = parts
            try:
                positions[name] = (float(xs), float(ys))
            except ValueError as exc:
                raise IngestionError(
                    f"{path}:{lineno}: non-numeric coordinate for {name}"
                ) from exc
    return LandmarkSet(positions)


def write_landmarks(path, landmarks: LandmarkSet) -> None:
    lines = ["# landmark x y"]
    for name, (x, y) in landmarks.positions.items():
        lines.append(f"{name} {x!r} {y!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_subject(image_path, landmark_path, label=UNLABELED, subject_id=None):
    """Read one image/landmark pair into a validated record."""
    pixels = read_image(image_path)
    landmarks = read_landmarks(landmark_path)
    if subject_id is None:
        subject_id = os.path.splitext(os.path.basename(image_path))[0]
    return SubjectRecord(
        id=subject_id,
        image=ImageGray.from_array(pixels),
        landmarks=landmarks,
        label=label,
    )


def load_manifest(path):
    """All subjects of a manifest, in file order."""
    if not os.path.exists(path):
        raise IngestionError(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if "subjects" not in raw or not isinstance(raw["subjects"], list):
        raise IngestionError(f"{path}: manifest needs a 'subjects' list")
    root = os.path.dirname(os.path.abspath(path))
    records = []
    seen = set()
    for entry in raw["subjects"]:
        for key in ("id", "image", "landmarks", "label"):
            if key not in entry:
                raise IngestionError(f"{path}: subject entry missing {key!r}")
        if entry["label"] not in LABELS:
            raise IngestionError(
                f"{path}: subject {entry['id']}: bad label {entry['label']!r}"
            )
        if entry["id"] in seen:
            raise IngestionError(f"{path}: duplicate subject id {entry['id']!r}")
        seen.add(entry["id"])
        records.append(
            load_subject(
                os.path.join(root, entry["image"]),
                os.path.join(root, entry["landmarks"]),
                label=entry["label"],
                subject_id=entry["id"],
            )
        )
    return records


def write_manifest(path, entries) -> None:
    """Write manifest entries: (id, image_relpath, landmark_relpath, label)."""
    payload = {
        "subjects": [
            {"id": sid, "image": img, "landmarks": lmk, "label": label}
            for sid, img, lmk, label in entries
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class FeatureFile:
    """Parsed feature matrix with its generation metadata."""

    ids: list
    labels: list
    names: list
    matrix: np.ndarray
    metadata: dict


def write_feature_matrix(path, ids, labels, names, matrix, metadata=None) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    lines = []
    for key, value in sorted((metadata or {}).items()):
        lines.append(f"# {key}={value}")
    lines.append("id,label," + ",".join(names))
    for sid, label, row in zip(ids, labels, matrix):
        lines.append(f"{sid},{label}," + ",".join(repr(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_feature_matrix(path) -> FeatureFile:
    if not os.path.exists(path):
        raise IngestionError(f"feature matrix not found: {path}")
    metadata = {}
    header = None
    ids = []
    labels = []
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    metadata[key.strip()] = value.strip()
                continue
            parts = line.split(",")
            if header is None:
                if parts[:2] != ["id", "label"]:
                    raise IngestionError(f"{path}: header must start with id,label")
                header = parts[2:]
                continue
            ids.append(parts[0])
            labels.append(parts[1])
            try:
                rows.append([float(v) for v in parts[2:]])
            except ValueError as exc:
                raise IngestionError(f"{path}: bad float in row {parts[0]}") from exc
    if header is None:
        raise IngestionError(f"{path}: no header row")
    matrix = np.array(rows, dtype=np.float64)
    if matrix.size and matrix.shape[1] != len(header):
        raise IngestionError(f"{path}: ragged rows")
    return FeatureFile(
        ids=ids, labels=labels, names=header, matrix=matrix, metadata=metadata
    )


def save_model(path, model: TrainedModel) -> None:
    if model.selection is None or model.weights is None:
        raise InvalidInputError("model is missing selection or weights metadata")
    payload = {
        "schema": MODEL_SCHEMA,
        "window": model.window,
        "k": int(model.selection.k),
        "mix_alpha": model.weights.mix_alpha,
        "mix_beta": model.weights.mix_beta,
        "selected_indices": [int(i) for i in model.selection.selected_indices],
        "c_mean": [float(v) for v in model.c_mean],
        "d_opt": model.d_opt,
        "dist_norm_maxima": [float(v) for v in model.dist_norm_maxima],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    if not os.path.exists(path):
        raise IngestionError(f"model file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if raw.get("schema") != MODEL_SCHEMA:
        raise IngestionError(
            f"{path}: unsupported model schema {raw.get('schema')!r}"
        )
    selection = SelectionResult(
        p_values=None,
        selected_indices=np.array(raw["selected_indices"], dtype=np.int64),
        k=int(raw["k"]),
    )
    return TrainedModel(
        c_mean=np.array(raw["c_mean"], dtype=np.float64),
        d_opt=float(raw["d_opt"]),
        selection=selection,
        weights=MixWeights(
            mix_alpha=float(raw["mix_alpha"]), mix_beta=float(raw["mix_beta"])
        ),
        dist_norm_maxima=np.array(raw["dist_norm_maxima"], dtype=np.float64),
        window=int(raw["window"]),
    )
