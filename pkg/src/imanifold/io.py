"""File formats: binary PGM images, numeric CSV matrices and JSON sidecars."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .embed import LatentManifold
from .errors import ManifoldError
from .sampling import SampleGrid

CSV_FORMAT = "%.17g"


class FormatError(ManifoldError):
    """A file does not follow the expected layout."""


def to_pixels(image) -> np.ndarray:
    """Quantize intensities in ``[0, 1]`` to bytes by ``round(255 v)``."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise FormatError(f"images must be 2-D, got shape {img.shape}")
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, image) -> None:
    px = to_pixels(image)
    h, w = px.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(px.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM and return intensities ``pixel / 255``."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported")
    body = data[pos + 1:pos + 1 + w * h]
    if len(body) != w * h:
        raise FormatError(f"{path}: expected {w * h} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w) / 255.0


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_matrix_csv(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    np.savetxt(path, M, fmt=CSV_FORMAT, delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_labeled_matrix_csv(path, M, labels) -> None:
    """Square matrix with a header row and a leading label column."""
    M = np.asarray(M, dtype=float)
    labels = [str(x) for x in labels]
    if M.shape != (len(labels), len(labels)):
        raise FormatError(f"{len(labels)} labels for a matrix of shape {M.shape}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + labels)
        for name, row in zip(labels, M):
            w.writerow([name] + [CSV_FORMAT % v for v in row])


def read_labeled_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    M = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return M, labels


def write_rows_csv(path, header, rows) -> None:
    """Tabular CSV with a header; floats are written at full precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([CSV_FORMAT % v if isinstance(v, float) else v for v in r])


def _sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def write_latent(path, m: LatentManifold) -> None:
    """Latent points as CSV (one row per node) plus a JSON sidecar."""
    write_matrix_csv(path, m.points)
    meta = dict(m.provenance)
    meta["stress"] = None if np.isnan(m.stress) else float(m.stress)
    write_json(_sidecar(path), meta)


def read_latent(path, grid: SampleGrid | None = None) -> LatentManifold:
    meta = read_json(_sidecar(path)) if _sidecar(path).exists() else {}
    stress = meta.pop("stress", None)
    return LatentManifold(read_matrix_csv(path), grid, float("nan") if stress is None else stress, meta)


def write_grid(path, grid: SampleGrid) -> None:
    write_json(path, grid.to_dict())


def read_grid(path) -> SampleGrid:
    return SampleGrid.from_dict(read_json(path))


def write_image_set(directory, images) -> list[str]:
    """Write ``images`` as ``NNNNN.pgm`` plus ``images.json`` listing them in node order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = [f"{i:05d}.pgm" for i in range(len(images))]
    for name, img in zip(names, images):
        write_pgm(directory / name, img)
    write_json(directory / "images.json", {"files": names})
    return names


def read_image_set(directory) -> np.ndarray:
    directory = Path(directory)
    names = read_json(directory / "images.json")["files"]
    return np.stack([read_pgm(directory / n) for n in names])
