"""Voxel field containers, view geometry, interpolation, and discrete operators.

Conventions used throughout the package:

* Scalar fields live on an ``nx * ny * nz`` cell grid; ``y`` is vertical.
  The center of cell ``(i, j, k)`` sits at ``((i+0.5)*dx, (j+0.5)*dx,
  (k+0.5)*dx)`` in world units. ``dx`` defaults to 1, i.e. voxel units.
* Velocity is stored staggered (MAC): the x-component on x-faces, shaped
  ``(nx+1, ny, nz)``, and likewise for y and z. Face velocities are in
  voxels per frame.
* Images are single-channel float arrays in ``[0, 1]``, row 0 at the top.
* View angles rotate about the vertical axis; 0 degrees is the front view.

All containers are immutable values once constructed and every operation
here is a pure function, so everything in this module is safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FieldError(ValueError):
    """Raised for malformed fields, images, or incompatible dimensions."""


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise FieldError(f"{name} contains NaN or Inf")


@dataclass(frozen=True)
class ScalarField3:
    """Cell-centered scalar voxel grid (e.g. smoke density).

    ``values`` has shape ``(nx, ny, nz)`` indexed ``[i, j, k]``. With
    ``clamp_nonneg=True`` negative entries are clamped to zero on
    construction, which is how density fields are built.
    """

    values: np.ndarray
    dx: float = 1.0
    clamp_nonneg: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or min(v.shape) < 1:
            raise FieldError(f"scalar field needs a 3D array, got shape {v.shape}")
        _check_finite("scalar field", v)
        if self.dx <= 0:
            raise FieldError(f"dx must be positive, got {self.dx}")
        if self.clamp_nonneg:
            v = np.maximum(v, 0.0)
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def nz(self) -> int:
        return self.values.shape[2]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape

    @staticmethod
    def zeros(nx: int, ny: int, nz: int, dx: float = 1.0) -> "ScalarField3":
        return ScalarField3(np.zeros((nx, ny, nz)), dx=dx)


@dataclass(frozen=True)
class VelocityField3:
    """MAC-staggered velocity on an ``nx * ny * nz`` cell grid.

    ``u`` holds x-face values shaped ``(nx+1, ny, nz)``, ``v`` y-face
    values ``(nx, ny+1, nz)``, ``w`` z-face values ``(nx, ny, nz+1)``.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    dx: float = 1.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        w = np.asarray(self.w, dtype=np.float64)
        nx, ny, nz = u.shape[0] - 1, v.shape[1] - 1, w.shape[2] - 1
        if u.shape != (nx + 1, ny, nz) or v.shape != (nx, ny + 1, nz) or w.shape != (nx, ny, nz + 1):
            raise FieldError(
                f"inconsistent MAC shapes u{u.shape} v{v.shape} w{w.shape}"
            )
        for name, arr in (("u", u), ("v", v), ("w", w)):
            _check_finite(f"velocity {name}", arr)
        u, v, w = u.copy(), v.copy(), w.copy()
        for arr in (u, v, w):
            arr.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.u.shape[0] - 1, self.v.shape[1] - 1, self.w.shape[2] - 1)

    @staticmethod
    def zeros(nx: int, ny: int, nz: int, dx: float = 1.0) -> "VelocityField3":
        return VelocityField3(
            np.zeros((nx + 1, ny, nz)),
            np.zeros((nx, ny + 1, nz)),
            np.zeros((nx, ny, nz + 1)),
            dx=dx,
        )

    def hull_faces_zero(self, tol: float = 0.0) -> bool:
        """True when all domain-boundary faces are (near) zero."""
        edges = [
            self.u[0], self.u[-1],
            self.v[:, 0], self.v[:, -1],
            self.w[:, :, 0], self.w[:, :, -1],
        ]
        return all(np.max(np.abs(e)) <= tol for e in edges)


@dataclass(frozen=True)
class ViewAngle:
    """Rotation about the vertical axis, degrees, normalized to [0, 360)."""

    degrees: float

    def __post_init__(self):
        d = float(self.degrees) % 360.0
        object.__setattr__(self, "degrees", d)

    @property
    def radians(self) -> float:
        return float(np.deg2rad(self.degrees))


@dataclass(frozen=True)
class Image:
    """Single-channel float image, values clamped to [0, 1], row 0 on top."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 2 or min(p.shape) < 1:
            raise FieldError(f"image needs a 2D array, got shape {p.shape}")
        _check_finite("image", p)
        p = np.clip(p, 0.0, 1.0)
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @staticmethod
    def zeros(height: int, width: int) -> "Image":
        return Image(np.zeros((height, width)))


# ---------------------------------------------------------------------------
# Trilinear interpolation
# ---------------------------------------------------------------------------

def _gather_trilinear(values: np.ndarray, s: np.ndarray, zero_outside: bool) -> np.ndarray:
    """Trilinear interpolation of ``values`` at index-space points ``s`` (N,3).

    ``zero_outside=False`` clamps out-of-range points to the boundary value;
    ``zero_outside=True`` interpolates against implicit zero ghost cells so
    samples fade to zero past the outermost cell centers.
    """
    nx, ny, nz = values.shape
    dims = np.array([nx, ny, nz], dtype=np.float64)
    if zero_outside:
        i0 = np.floor(s).astype(np.int64)
        t = s - i0
    else:
        sc = np.clip(s, 0.0, dims - 1.0)
        i0 = np.floor(sc).astype(np.int64)
        i0 = np.minimum(i0, (dims - 1.0).astype(np.int64))
        t = sc - i0

    out = np.zeros(s.shape[0], dtype=np.float64)
    for di in (0, 1):
        wx = t[:, 0] if di else 1.0 - t[:, 0]
        ix = i0[:, 0] + di
        for dj in (0, 1):
            wy = t[:, 1] if dj else 1.0 - t[:, 1]
            iy = i0[:, 1] + dj
            for dk in (0, 1):
                wz = t[:, 2] if dk else 1.0 - t[:, 2]
                iz = i0[:, 2] + dk
                w = wx * wy * wz
                if zero_outside:
                    inside = (
                        (ix >= 0) & (ix < nx)
                        & (iy >= 0) & (iy < ny)
                        & (iz >= 0) & (iz < nz)
                    )
                    vals = values[
                        np.clip(ix, 0, nx - 1),
                        np.clip(iy, 0, ny - 1),
                        np.clip(iz, 0, nz - 1),
                    ]
                    out += np.where(inside, w * vals, 0.0)
                else:
                    out += w * values[
                        np.clip(ix, 0, nx - 1),
                        np.clip(iy, 0, ny - 1),
                        np.clip(iz, 0, nz - 1),
                    ]
    return out


def sample_index_space(
    values: np.ndarray, pts: np.ndarray, zero_outside: bool = False
) -> np.ndarray:
    """Vectorized trilinear sampling at index-space points ``pts`` (..., 3)."""
    pts = np.asarray(pts, dtype=np.float64)
    flat = pts.reshape(-1, 3)
    out = _gather_trilinear(values, flat, zero_outside)
    return out.reshape(pts.shape[:-1])


def scatter_index_space(
    shape: tuple[int, int, int],
    pts: np.ndarray,
    weights: np.ndarray,
    zero_outside: bool = False,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Transpose of trilinear gathering: scatter-add ``weights`` at ``pts``.

    Returns an array of ``shape`` such that for any field F,
    ``sum(scatter * F) == sum(weights * gather(F, pts))`` with the matching
    ``zero_outside`` mode. Deterministic: accumulation uses ``np.add.at``
    in corner-major order. Accumulates into ``out`` when given.
    """
    nx, ny, nz = shape
    dims = np.array([nx, ny, nz], dtype=np.float64)
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if zero_outside:
        i0 = np.floor(pts).astype(np.int64)
        t = pts - i0
    else:
        sc = np.clip(pts, 0.0, dims - 1.0)
        i0 = np.floor(sc).astype(np.int64)
        i0 = np.minimum(i0, (dims - 1.0).astype(np.int64))
        t = sc - i0
    if out is None:
        out = np.zeros(shape, dtype=np.float64)
    for di in (0, 1):
        wx = t[:, 0] if di else 1.0 - t[:, 0]
        ix = i0[:, 0] + di
        for dj in (0, 1):
            wy = t[:, 1] if dj else 1.0 - t[:, 1]
            iy = i0[:, 1] + dj
            for dk in (0, 1):
                wz = t[:, 2] if dk else 1.0 - t[:, 2]
                iz = i0[:, 2] + dk
                ww = weights * wx * wy * wz
                if zero_outside:
                    inside = (
                        (ix >= 0) & (ix < nx)
                        & (iy >= 0) & (iy < ny)
                        & (iz >= 0) & (iz < nz)
                    )
                    np.add.at(
                        out,
                        (ix[inside], iy[inside], iz[inside]),
                        ww[inside],
                    )
                else:
                    np.add.at(
                        out,
                        (np.clip(ix, 0, nx - 1), np.clip(iy, 0, ny - 1), np.clip(iz, 0, nz - 1)),
                        ww,
                    )
    return out


def sample_gradient_index_space(values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Derivative of clamped trilinear sampling with respect to the point.

    Returns an array shaped like ``pts``: d(sample)/d(s) per axis. Outside
    the clamp region the derivative is zero (the sample is constant there).
    """
    nx, ny, nz = values.shape
    dims = np.array([nx, ny, nz], dtype=np.float64)
    pts = np.asarray(pts, dtype=np.float64)
    flat = pts.reshape(-1, 3)
    inside = (flat > 0.0) & (flat < dims - 1.0)
    sc = np.clip(flat, 0.0, dims - 1.0)
    i0 = np.floor(sc).astype(np.int64)
    i0 = np.minimum(i0, (dims - 1.0).astype(np.int64))
    t = sc - i0
    grad = np.zeros_like(flat)
    wts = [(1.0 - t, -1.0), (t, 1.0)]
    for di in (0, 1):
        ix = np.clip(i0[:, 0] + di, 0, nx - 1)
        for dj in (0, 1):
            iy = np.clip(i0[:, 1] + dj, 0, ny - 1)
            for dk in (0, 1):
                iz = np.clip(i0[:, 2] + dk, 0, nz - 1)
                v = values[ix, iy, iz]
                wx, sx = wts[di][0][:, 0], wts[di][1]
                wy, sy = wts[dj][0][:, 1], wts[dj][1]
                wz, sz = wts[dk][0][:, 2], wts[dk][1]
                grad[:, 0] += sx * wy * wz * v
                grad[:, 1] += wx * sy * wz * v
                grad[:, 2] += wx * wy * sz * v
    grad *= inside
    return grad.reshape(pts.shape)


def trilinear_sample(field: ScalarField3, p) -> float:
    """Trilinear interpolation at world position ``p`` (3 floats).

    Positions outside the domain clamp to the boundary value, so this never
    faults. Exact at cell centers and linear in the field values.
    """
    p = np.asarray(p, dtype=np.float64)
    s = p / field.dx - 0.5
    return float(sample_index_space(field.values, s[None, :])[0])


def cell_center_positions(nx: int, ny: int, nz: int, dx: float = 1.0) -> np.ndarray:
    """World positions of all cell centers, shaped (nx, ny, nz, 3)."""
    xs = (np.arange(nx) + 0.5) * dx
    ys = (np.arange(ny) + 0.5) * dx
    zs = (np.arange(nz) + 0.5) * dx
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    return np.stack([gx, gy, gz], axis=-1)


# ---------------------------------------------------------------------------
# Discrete differential operators
# ---------------------------------------------------------------------------

def divergence(vel: VelocityField3) -> ScalarField3:
    """Per-cell MAC divergence ((u_{i+1/2}-u_{i-1/2}) + ...) / dx."""
    d = (
        np.diff(vel.u, axis=0)
        + np.diff(vel.v, axis=1)
        + np.diff(vel.w, axis=2)
    ) / vel.dx
    return ScalarField3(d, dx=vel.dx)


def grad_magnitude_sq(vel: VelocityField3) -> float:
    """Sum of squared forward differences of every component along every axis.

    This is the discrete ``|grad u|^2`` smoothness measure used by the
    velocity regularizer; differences are divided by dx.
    """
    total = 0.0
    inv_dx2 = 1.0 / (vel.dx * vel.dx)
    for comp in (vel.u, vel.v, vel.w):
        for axis in range(3):
            d = np.diff(comp, axis=axis)
            total += float(np.sum(d * d)) * inv_dx2
    return total


def resample(fld: ScalarField3, dims: tuple[int, int, int]) -> ScalarField3:
    """Trilinear resampling of a scalar field onto new cell dimensions."""
    mx, my, mz = dims
    if min(dims) < 1:
        raise FieldError(f"resample target dims must be >= 1, got {dims}")
    nx, ny, nz = fld.dims
    sx = (np.arange(mx) + 0.5) * (nx / mx) - 0.5
    sy = (np.arange(my) + 0.5) * (ny / my) - 0.5
    sz = (np.arange(mz) + 0.5) * (nz / mz) - 0.5
    gx, gy, gz = np.meshgrid(sx, sy, sz, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1)
    vals = sample_index_space(fld.values, pts)
    return ScalarField3(vals, dx=fld.dx * nx / mx, clamp_nonneg=fld.clamp_nonneg)


def rotate_field(fld: ScalarField3, degrees: float) -> ScalarField3:
    """Rotate a field about the vertical axis through the volume center.

    The rotation is chosen so that rendering the rotated field at angle a
    matches rendering the original at angle ``a + degrees``. Samples that
    fall outside the source domain are treated as zero.
    """
    nx, ny, nz = fld.dims
    theta = np.deg2rad(degrees)
    c, s = np.cos(theta), np.sin(theta)
    ctr = np.array([nx / 2.0, ny / 2.0, nz / 2.0])
    pos = cell_center_positions(nx, ny, nz, dx=1.0) - ctr
    # rotation about y by +theta applied to the sampling position
    px = c * pos[..., 0] + s * pos[..., 2]
    pz = -s * pos[..., 0] + c * pos[..., 2]
    pts = np.stack([px + ctr[0], pos[..., 1] + ctr[1], pz + ctr[2]], axis=-1)
    vals = sample_index_space(fld.values, pts - 0.5, zero_outside=True)
    return ScalarField3(vals, dx=fld.dx, clamp_nonneg=fld.clamp_nonneg)


# ---------------------------------------------------------------------------
# Image resampling
# ---------------------------------------------------------------------------

def downsample2(img: Image) -> Image:
    """2x2 box-average downsampling. Requires even dimensions."""
    h, w = img.pixels.shape
    if h % 2 or w % 2:
        raise FieldError(f"downsample2 needs even dims, got {h}x{w}")
    p = img.pixels
    out = 0.25 * (p[0::2, 0::2] + p[1::2, 0::2] + p[0::2, 1::2] + p[1::2, 1::2])
    return Image(out)


def upsample2(img: Image) -> Image:
    """Nearest-neighbor 2x replication."""
    return Image(np.repeat(np.repeat(img.pixels, 2, axis=0), 2, axis=1))


def low_pass(img: Image) -> Image:
    """Round-trip ``upsample2(downsample2(img))``: same dims, high frequencies gone."""
    return upsample2(downsample2(img))
