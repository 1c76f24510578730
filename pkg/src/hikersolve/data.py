"""Point-set ingestion, synthetic generators, and file formats.

The binary format is a fixed little-endian layout (magic ``PTS1``, u64 n,
u64 d, then n*d float64 row-major) so loading is O(1) parsing plus one
read; CSV is supported for interoperability. Vectors (weights, right-hand
sides, labels) reuse the same format with d = 1.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"PTS1"
_HEADER = struct.Struct("<4sQQ")

SHAPES = ("uniform_cube", "sphere_surface", "gaussian_mixture")

# gaussian_mixture geometry: component std and the minimum center
# separation (12 sigma) that keeps nearest-center purity effectively 1
_MIX_STD = 0.5
_MIX_SEP = 6.0
_MIX_BOX = 10.0


class PointFormatError(ValueError):
    """Malformed points file (bad magic, truncation, or bad CSV cell)."""


@dataclass(frozen=True)
class PointSet:
    coords: np.ndarray  # (n, d) float64

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2:
            raise ValueError("coords must be 2-D")
        if coords.shape[0] < 1 or coords.shape[1] < 1:
            raise ValueError("point set needs n >= 1 and d >= 1")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        coords = coords.copy()
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def d(self):
        return self.coords.shape[1]


def _rng(seed, *stream):
    # independent deterministic stream per (seed, purpose); keyed seeding
    # rather than sequential draws so results do not depend on call order
    return np.random.default_rng([int(seed), *map(int, stream)])


def mixture_centers(d, k_clusters, seed):
    """Cluster centers used by the gaussian_mixture generator.

    Sampled uniformly in a box with rejection until all pairwise distances
    reach 12x the component std, so nearest-center assignment recovers the
    components. Exposed so tests can reconstruct the ground truth.
    """
    rng = _rng(seed, 2, 0)
    centers = np.empty((k_clusters, d))
    count = 0
    while count < k_clusters:
        cand = rng.uniform(0.0, _MIX_BOX, size=d)
        if count == 0 or np.min(
            np.linalg.norm(centers[:count] - cand, axis=1)
        ) >= _MIX_SEP:
            centers[count] = cand
            count += 1
    return centers


def generate(shape, n, seed, d=3, k_clusters=4):
    """Deterministic synthetic point sets.

    shape is one of ``uniform_cube`` (uniform in [0,1)^d),
    ``sphere_surface`` (unit vectors in R^d), ``gaussian_mixture``
    (k well-separated isotropic gaussian blobs).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    if shape == "uniform_cube":
        coords = _rng(seed, 0, 0).random((n, d))
    elif shape == "sphere_surface":
        rng = _rng(seed, 1, 0)
        coords = rng.standard_normal((n, d))
        norms = np.linalg.norm(coords, axis=1)
        while np.any(norms == 0.0):  # astronomically unlikely, but exact
            bad = norms == 0.0
            coords[bad] = rng.standard_normal((int(bad.sum()), d))
            norms = np.linalg.norm(coords, axis=1)
        coords /= norms[:, None]
    elif shape == "gaussian_mixture":
        if k_clusters < 1:
            raise ValueError("k_clusters must be >= 1")
        centers = mixture_centers(d, k_clusters, seed)
        rng = _rng(seed, 2, 1)
        which = rng.integers(k_clusters, size=n)
        coords = centers[which] + _MIX_STD * rng.standard_normal((n, d))
    else:
        raise ValueError(f"unknown shape {shape!r}")
    return PointSet(coords)


def normalize_unit_box(ps):
    """Rescale each dimension onto [0, 1]; degenerate dimensions map to 0."""
    lo = ps.coords.min(axis=0)
    span = ps.coords.max(axis=0) - lo
    span[span == 0.0] = 1.0
    return PointSet((ps.coords - lo) / span)


def save_points(ps, path, format="binary"):
    if format == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, ps.n, ps.d))
            fh.write(np.ascontiguousarray(ps.coords, dtype="<f8").tobytes())
    elif format == "csv":
        with open(path, "w") as fh:
            for row in ps.coords:
                fh.write(",".join(format_float(v) for v in row))
                fh.write("\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def format_float(v):
    # 17 significant digits reproduce float64 exactly
    return f"{v:.17g}"


def load_points(path, format="binary"):
    if format == "binary":
        return _load_binary(path)
    if format == "csv":
        return _load_csv(path)
    raise ValueError(f"unknown format {format!r}")


def _load_binary(path):
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise PointFormatError(
                f"{path}: truncated header ({len(header)} of {_HEADER.size} bytes)"
            )
        magic, n, d = _HEADER.unpack(header)
        if magic != MAGIC:
            raise PointFormatError(f"{path}: bad magic {magic!r} at byte 0")
        payload = fh.read(8 * n * d)
        if len(payload) < 8 * n * d:
            raise PointFormatError(
                f"{path}: truncated payload at byte {_HEADER.size + len(payload)}"
                f" (expected {8 * n * d} payload bytes)"
            )
    coords = np.frombuffer(payload, dtype="<f8").reshape(n, d)
    return PointSet(coords.astype(np.float64))


def _load_csv(path):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise PointFormatError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(cells)}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                raise PointFormatError(
                    f"{path}: line {lineno}: non-numeric cell {bad.strip()!r}"
                ) from None
    if not rows:
        raise PointFormatError(f"{path}: no data rows")
    return PointSet(np.array(rows, dtype=np.float64))


def _is_float(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def save_vector(values, path):
    """Store a 1-D vector as a PTS1 file with d = 1."""
    values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    save_points(PointSet(values), path)


def load_vector(path):
    ps = load_points(path)
    if ps.d != 1:
        raise PointFormatError(f"{path}: expected a d=1 vector file, got d={ps.d}")
    return ps.coords[:, 0].copy()
