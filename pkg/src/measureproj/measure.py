"""Core measure types: weighted point clouds and gridded densities on the unit cube.

All measures live on [0,1]^d with d in {1, 2, 3}. A ``DiscreteMeasure`` is a
finite sum of weighted Dirac atoms; a ``GridDensity`` is a rectangle-rule
quadrature of a density (per-cell masses at cell midpoints). Both are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ValidationError(ValueError):
    """Bad user input: wrong shapes, masses, file formats, dimensions."""


class DegenerateTargetError(ValidationError):
    """Target has no mass anywhere."""


MASS_TOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Point:
    """A single location in the closed unit cube, d in {1, 2, 3}."""

    coords: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.coords)
        if len(c) not in (1, 2, 3):
            raise ValidationError(f"dimension must be 1, 2 or 3, got {len(c)}")
        if not all(np.isfinite(c)):
            raise ValidationError("point coordinates must be finite")
        if any(v < 0.0 or v > 1.0 for v in c):
            raise ValidationError(f"point {c} outside the unit cube")
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        return len(self.coords)


class DiscreteMeasure:
    """Weighted atoms sum(w_i * delta_{p_i}); possibly signed, possibly empty.

    When ``probability=True`` the weights must be nonnegative and sum to 1
    within 1e-12. Signed measures (for total-variation arithmetic) pass
    ``probability=False``.
    """

    __slots__ = ("points", "weights", "probability")

    def __init__(self, points, weights, probability: bool = True):
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 1 if pts.ndim < 2 else pts.shape[-1])
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValidationError("points must be an (N, d) array")
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise ValidationError(
                f"{len(pts)} points but {len(w)} weights")
        if pts.size and pts.shape[1] not in (1, 2, 3):
            raise ValidationError(f"dimension must be 1, 2 or 3, got {pts.shape[1]}")
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValidationError("points must be finite")
        if pts.size and (pts.min() < -1e-12 or pts.max() > 1 + 1e-12):
            raise ValidationError("points must lie in the unit cube")
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        if probability:
            if pts.size == 0:
                raise ValidationError("probability measure needs at least one atom")
            if w.min() < 0:
                raise ValidationError("probability weights must be nonnegative")
            if abs(w.sum() - 1.0) > MASS_TOL:
                raise ValidationError(
                    f"probability weights sum to {w.sum()!r}, not 1")
        self.points = _freeze(np.clip(pts, 0.0, 1.0) if pts.size else pts)
        self.weights = _freeze(w)
        self.probability = bool(probability)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.points.shape[1] if self.points.size else 0

    @classmethod
    def from_point_list(cls, pts: list, weights, probability: bool = True):
        arr = np.array([p.coords if isinstance(p, Point) else p for p in pts], dtype=float)
        return cls(arr, weights, probability=probability)

    def __repr__(self):
        return f"DiscreteMeasure(n={self.n}, d={self.dim}, probability={self.probability})"


class GridDensity:
    """Rectangle-rule target: per-cell masses pi_j with quadrature weights w_j.

    Cell centers sit at (j + 0.5)/n_a along each axis. The quadrature weights
    are uniform, w_j = 1/prod(dims), and the normalization sum_j w_j pi_j = 1
    must hold within 1e-12.
    """

    __slots__ = ("dims", "masses", "quad_weights")

    def __init__(self, masses):
        m = np.asarray(masses, dtype=float)
        if m.ndim not in (1, 2, 3):
            raise ValidationError(f"grid dimension must be 1, 2 or 3, got {m.ndim}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("masses must be finite")
        if m.min() < 0:
            raise ValidationError("masses must be nonnegative")
        w = 1.0 / m.size
        total = float(m.sum() * w)
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(
                f"quadrature total is {total!r}; masses must satisfy sum w_j pi_j = 1")
        self.dims = m.shape
        self.masses = _freeze(m)
        self.quad_weights = _freeze(np.full(m.shape, w))

    @property
    def dim(self) -> int:
        return len(self.dims)

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.dims[axis]
        return (np.arange(n) + 0.5) / n

    def cell_centers(self) -> np.ndarray:
        """All cell centers as an (n_cells, d) array in C order of the mass grid."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)

    def atoms(self):
        """Quadrature atoms (centers, masses w_j pi_j). Masses sum to 1."""
        return self.cell_centers(), (self.quad_weights * self.masses).reshape(-1)

    def as_discrete(self) -> DiscreteMeasure:
        pts, w = self.atoms()
        keep = w > 0
        return DiscreteMeasure(pts[keep], w[keep], probability=True)

    def __repr__(self):
        return f"GridDensity(dims={self.dims})"


def from_image(pixels, invert: bool = False) -> GridDensity:
    """Turn a grayscale raster (values in [0,1]) into a normalized GridDensity.

    Row r, column c of the image maps to the cell at x = (c + 0.5)/width,
    y = 1 - (r + 0.5)/height, so the picture is upright in the unit square.
    With ``invert`` set, mass is 1 - pixel (dark is mass).
    """
    px = np.asarray(pixels, dtype=float)
    if px.ndim != 2:
        raise ValidationError("expected a 2-D grayscale array")
    if not np.all(np.isfinite(px)) or px.min() < 0 or px.max() > 1:
        raise ValidationError("pixel values must lie in [0, 1]")
    vals = 1.0 - px if invert else px
    # image rows run top to bottom; axis 1 of the mass grid runs bottom to top
    masses = vals[::-1].T.copy()
    total = masses.mean()
    if total <= 0:
        raise DegenerateTargetError("degenerate target: image has no mass")
    return GridDensity(masses / total)


def uniform_npoint(points) -> DiscreteMeasure:
    """Uniform N-point measure: every atom gets weight 1/N."""
    if isinstance(points, DiscreteMeasure):
        points = points.points
    if len(points) == 0:
        raise ValidationError("need at least one point")
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], Point):
        points = [p.coords for p in points]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    return DiscreteMeasure(pts, np.full(n, 1.0 / n), probability=True)


def tv_norm(mu: DiscreteMeasure) -> float:
    """Total variation sum |w_i|; the zero (empty) measure has norm 0."""
    if mu.n == 0:
        return 0.0
    return float(np.abs(mu.weights).sum())


def load_grayscale(path) -> np.ndarray:
    """Read an 8-bit binary PGM (P5) or grayscale PNG as floats in [0, 1].

    Color input is rejected with an explicit error.
    """
    path = str(path)
    if path.lower().endswith(".pgm"):
        return _read_pgm(path)
    if path.lower().endswith(".png"):
        return _read_png(path)
    raise ValidationError(f"unsupported image format: {path} (want .pgm or .png)")


def _read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValidationError(f"{path}: not a binary P5 PGM")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed PGM header") from exc
    if maxval <= 0 or maxval > 255:
        raise ValidationError(f"{path}: only 8-bit PGM supported (maxval={maxval})")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if raster.size != width * height:
        raise ValidationError(f"{path}: truncated raster")
    return raster.reshape(height, width).astype(float) / maxval


def _read_png(path: str) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as img:
        if img.mode in ("L", "I", "I;16", "1"):
            arr = np.asarray(img.convert("L"), dtype=float)
        else:
            raise ValidationError(
                f"{path}: color input rejected (mode {img.mode}); supply a grayscale image")
    return arr / 255.0
