"""File formats: edge lists, IDX images/labels, PGM, basis cache, chain CSVs."""

import csv
import gzip
import struct

import numpy as np

from .graph import Graph
from .spectral import SpectralBasis

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

_BASIS_MAGIC = b"TGBASIS1"
_TAG_BYTES = 24


class IdxFormatError(ValueError):
    """Malformed IDX file; ``offset`` is the byte position of the problem."""

    def __init__(self, path, offset, message):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = str(path)
        self.offset = offset


# -- edge lists --------------------------------------------------------------


def write_edgelist(g, path):
    """One ``u v`` line per edge, 1-based."""
    with open(path, "w") as fh:
        for u, v in g.edges:
            fh.write(f"{u + 1} {v + 1}\n")


def read_edgelist(path, n=None):
    """Read a 1-based ``u v`` edge list. ``n`` defaults to the largest id seen.

    Blank lines and ``#`` comments are skipped. Loops and repeated edges are
    rejected.
    """
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
            u, v = int(parts[0]), int(parts[1])
            if u < 1 or v < 1:
                raise ValueError(f"{path}:{lineno}: vertex ids are 1-based")
            pairs.append((u - 1, v - 1))
    top = max((max(p) for p in pairs), default=-1) + 1
    if n is None:
        n = top
    elif top > n:
        raise ValueError(f"{path}: vertex id {top} exceeds n={n}")
    return Graph.from_edges(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))


# -- IDX ---------------------------------------------------------------------


def _open(path):
    return gzip.open(path, "rb") if str(path).endswith(".gz") else open(path, "rb")


def _read_idx(path, magic, ndim):
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise IdxFormatError(path, len(raw), "file too short for magic number")
    (got,) = struct.unpack(">I", raw[:4])
    if got != magic:
        raise IdxFormatError(path, 0, f"bad magic 0x{got:08x}, expected 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(path, len(raw), "truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) < header + size:
        raise IdxFormatError(path, len(raw), f"truncated data: need {header + size} bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path):
    """Read an IDX image file and its label file.

    Returns
    -------
    X : ndarray of shape (count, rows * cols)
        Pixel intensities in [0, 255] as float64, one image per row.
    labels : ndarray of shape (count,)
    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise IdxFormatError(labels_path, 4, f"{len(labels)} labels for {len(images)} images")
    return images.reshape(len(images), -1).astype(np.float64), labels.astype(np.int64)


def write_idx_images(images, path):
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(labels, path):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">2I", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


# -- PGM ---------------------------------------------------------------------


def write_pgm(values, path):
    """Binary greyscale PGM (P5, maxval 255); ``v`` maps to ``round(255 v)``."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("values must be a 2-D (rows, cols) array")
    if not np.all((values >= 0) & (values <= 1)):
        raise ValueError("values must lie in [0, 1]")
    pixels = np.rint(255 * values).astype(np.uint8)
    rows, cols = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows = int(tokens[1]), int(tokens[2])
    return np.frombuffer(raw[pos + 1 :], dtype=np.uint8).reshape(rows, cols)


# -- spectral basis cache ------------------------------------------------------


def save_basis(basis, path):
    """Binary cache: header, eigenvalues (f8 LE), eigenvectors column-major (f8 LE).

    Header: 8-byte magic, ``n`` and ``m`` as u8 LE, a 24-byte NUL-padded
    source tag, then three u8 LE shape fields (zero when unused).
    """
    tag = basis.source.encode("ascii")
    if len(tag) > _TAG_BYTES:
        raise ValueError("source tag too long")
    dims = list(basis.dims) + [0] * (3 - len(basis.dims))
    with open(path, "wb") as fh:
        fh.write(_BASIS_MAGIC)
        fh.write(struct.pack("<2Q", basis.n, basis.m))
        fh.write(tag.ljust(_TAG_BYTES, b"\0"))
        fh.write(struct.pack("<3Q", *dims))
        fh.write(basis.eigenvalues.astype("<f8").tobytes())
        fh.write(np.asfortranarray(basis.eigenvectors).astype("<f8").tobytes(order="F"))


def load_basis(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _BASIS_MAGIC:
        raise ValueError(f"{path}: not a basis cache file")
    n, m = struct.unpack("<2Q", raw[8:24])
    tag = raw[24 : 24 + _TAG_BYTES].rstrip(b"\0").decode("ascii")
    off = 24 + _TAG_BYTES
    dims = tuple(d for d in struct.unpack("<3Q", raw[off : off + 24]) if d)
    off += 24
    need = off + 8 * (m + n * m)
    if len(raw) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(raw)}")
    vals = np.frombuffer(raw, dtype="<f8", count=m, offset=off)
    vecs = np.frombuffer(raw, dtype="<f8", count=n * m, offset=off + 8 * m)
    return SpectralBasis(vals, vecs.reshape((n, m), order="F"), tag, dims)


# -- chain output ---------------------------------------------------------------


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "k", "c", "accepted", "micros_per_iter"])
        for i in range(trace.n_iter):
            w.writerow(
                [i + 1, int(trace.k[i]), repr(float(trace.c[i])), int(trace.accepted[i]),
                 int(trace.micros[i])]
            )


def write_summary_csv(summary, path):
    """Per-vertex posterior summary; vertex ids written 1-based."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex", "mean", "lo", "hi", "hard_label"])
        for i in range(len(summary.mean)):
            w.writerow(
                [i + 1, repr(float(summary.mean[i])), repr(float(summary.lower[i])),
                 repr(float(summary.upper[i])), int(summary.hard[i])]
            )


def write_khist_csv(summary, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "count"])
        for k, c in zip(summary.k_values, summary.k_counts):
            w.writerow([int(k), int(c)])


def write_rows_csv(header, rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
