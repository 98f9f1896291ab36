"""
SE(3) Geometry Module
=====================

Rigid transforms and the pinhole camera model used by every other stage.

Key Features:
- Rotations stored as 3x3 matrices, translations in meters, all float64
- Poses are immutable and validated on construction
- Composition re-orthonormalizes (polar decomposition) when drift > 1e-9
"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import polar
from scipy.spatial.transform import Rotation

from pipeline_errors import DimensionMismatch, InvalidPose, NonPositiveDepth

ORTHONORMAL_TOL = 1e-9
MIN_DEPTH = 1e-9

ArrayLike = Union[np.ndarray, Sequence[float]]


def _frozen(array: ArrayLike, shape: Tuple[int, ...]) -> np.ndarray:
    out = np.array(array, dtype=np.float64)
    if out.shape != shape:
        raise DimensionMismatch(f"expected shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


def orthonormality_error(rotation: np.ndarray) -> float:
    """Largest elementwise deviation of R^T R from identity"""
    return float(np.max(np.abs(rotation.T @ rotation - np.eye(3))))


def closest_rotation(matrix: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (polar decomposition)"""
    unitary, _ = polar(np.asarray(matrix, dtype=np.float64))
    if np.linalg.det(unitary) < 0:
        raise InvalidPose("matrix is closer to a reflection than to a rotation")
    return unitary


def rotation_about(axis: ArrayLike, angle: float) -> np.ndarray:
    """Rotation matrix for a right-handed rotation of `angle` radians about `axis`"""
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise InvalidPose("rotation axis must be non-zero")
    return Rotation.from_rotvec(axis / norm * angle).as_matrix()


@dataclass(frozen=True, eq=False)
class Pose3:
    """
    Rigid transform in SE(3): p -> rotation @ p + translation
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = _frozen(self.rotation, (3, 3))
        translation = _frozen(self.translation, (3,))
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise InvalidPose("pose contains non-finite values")
        if orthonormality_error(rotation) > ORTHONORMAL_TOL:
            raise InvalidPose("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise InvalidPose("rotation determinant is not +1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    # -------------------------------------------------------------------------
    # Constructors
    # -------------------------------------------------------------------------
    @classmethod
    def identity(cls) -> "Pose3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> "Pose3":
        return cls(np.eye(3), np.array([x, y, z], dtype=np.float64))

    @classmethod
    def from_axis_angle(cls, axis: ArrayLike, angle: float,
                        translation: ArrayLike = (0.0, 0.0, 0.0)) -> "Pose3":
        return cls(rotation_about(axis, angle), np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> "Pose3":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise DimensionMismatch(f"expected a 4x4 matrix, got {matrix.shape}")
        return cls(matrix[:3, :3], matrix[:3, 3])

    @classmethod
    def from_row(cls, row: ArrayLike) -> "Pose3":
        """Build from the 12-value log layout: r00..r22 row-major, then tx, ty, tz"""
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (12,):
            raise DimensionMismatch(f"pose row must have 12 values, got {row.shape}")
        return cls(row[:9].reshape(3, 3), row[9:])

    # -------------------------------------------------------------------------
    # Views
    # -------------------------------------------------------------------------
    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def to_row(self) -> np.ndarray:
        return np.concatenate([self.rotation.reshape(9), self.translation])

    # -------------------------------------------------------------------------
    # Group operations
    # -------------------------------------------------------------------------
    def compose(self, other: "Pose3") -> "Pose3":
        return compose(self, other)

    def inverse(self) -> "Pose3":
        return inverse(self)

    def apply(self, points: ArrayLike) -> np.ndarray:
        return apply(self, points)

    def __matmul__(self, other: "Pose3") -> "Pose3":
        return compose(self, other)

    def allclose(self, other: "Pose3", atol: float = 1e-12) -> bool:
        return (np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
                and np.allclose(self.translation, other.translation, rtol=0.0, atol=atol))


def compose(a: Pose3, b: Pose3) -> Pose3:
    """a . b as homogeneous-transform composition"""
    rotation = a.rotation @ b.rotation
    if orthonormality_error(rotation) > ORTHONORMAL_TOL:
        rotation = closest_rotation(rotation)
    return Pose3(rotation, a.rotation @ b.translation + a.translation)


def inverse(t: Pose3) -> Pose3:
    return Pose3(t.rotation.T, -(t.rotation.T @ t.translation))


def apply(t: Pose3, points: ArrayLike) -> np.ndarray:
    """R p + t for one point (3,) or a stack of points (N, 3)"""
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != 3:
        raise DimensionMismatch(f"points must have 3 coordinates, got {points.shape}")
    return points @ t.rotation.T + t.translation


def stack_poses(poses: Iterable[Pose3]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack poses into (N, 3, 3) rotations and (N, 3) translations"""
    poses = list(poses)
    rotations = np.stack([p.rotation for p in poses]) if poses else np.zeros((0, 3, 3))
    translations = np.stack([p.translation for p in poses]) if poses else np.zeros((0, 3))
    return rotations, translations


def rows_to_arrays(rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split (N, 12) pose rows into (N, 3, 3) rotations and (N, 3) translations"""
    rows = np.asarray(rows, dtype=np.float64)
    return rows[:, :9].reshape(-1, 3, 3), rows[:, 9:12]


def reorthonormalize_rows(rows: np.ndarray) -> np.ndarray:
    """Project the rotation block of every 12-value pose row back onto SO(3)"""
    out = np.array(rows, dtype=np.float64)
    for i in range(out.shape[0]):
        rotation = out[i, :9].reshape(3, 3)
        if orthonormality_error(rotation) > ORTHONORMAL_TOL:
            out[i, :9] = closest_rotation(rotation).reshape(9)
    return out


# -----------------------------------------------------------------------------
# Camera
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CameraModel:
    """
    Pinhole camera without distortion

    Attributes:
        intrinsics: 3x3 matrix [[fx, 0, cx], [0, fy, cy], [0, 0, 1]] in pixels
        extrinsics: Pose3 mapping base-frame points into the camera frame
        width, height: image size in pixels
    """

    intrinsics: np.ndarray
    extrinsics: Pose3
    width: int
    height: int

    def __post_init__(self):
        intrinsics = _frozen(self.intrinsics, (3, 3))
        object.__setattr__(self, "intrinsics", intrinsics)
        if not (intrinsics[0, 0] > 0 and intrinsics[1, 1] > 0):
            raise InvalidPose("focal lengths must be positive")
        if not (0 <= intrinsics[0, 2] < self.width and 0 <= intrinsics[1, 2] < self.height):
            raise InvalidPose("principal point must lie inside the image")

    @classmethod
    def from_params(cls, fx: float, fy: float, cx: float, cy: float,
                    width: int, height: int,
                    extrinsics: Pose3 = None) -> "CameraModel":
        intrinsics = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
        return cls(intrinsics, extrinsics or Pose3.identity(), int(width), int(height))

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])

    def with_extrinsics(self, extrinsics: Pose3) -> "CameraModel":
        return CameraModel(self.intrinsics, extrinsics, self.width, self.height)

    def project(self, p_base: ArrayLike) -> np.ndarray:
        return project(self, p_base)

    def in_image(self, pixels: ArrayLike) -> np.ndarray:
        pixels = np.asarray(pixels, dtype=np.float64)
        return ((pixels[..., 0] >= 0) & (pixels[..., 0] < self.width)
                & (pixels[..., 1] >= 0) & (pixels[..., 1] < self.height))


def look_at(eye: ArrayLike, target: ArrayLike, up: ArrayLike) -> Pose3:
    """
    Extrinsics (base -> camera) of a camera at `eye` looking at `target`

    Camera convention: z forward, x right, y down in the image; `up` is the
    base-frame direction that should appear towards the top of the image.
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    up = np.asarray(up, dtype=np.float64)
    down = -(up - np.dot(up, forward) * forward)
    norm = np.linalg.norm(down)
    if norm < 1e-12:
        raise InvalidPose("up vector is parallel to the viewing direction")
    down /= norm
    right = np.cross(down, forward)
    cam_to_base = np.column_stack([right, down, forward])
    return Pose3(cam_to_base.T, -(cam_to_base.T @ eye))


def project(cam: CameraModel, p_base: ArrayLike) -> np.ndarray:
    """
    Pixel coordinates (u, v) of base-frame point(s)

    Raises:
        NonPositiveDepth: a point lies on or behind the camera plane
    """
    p_cam = apply(cam.extrinsics, p_base)
    depth = p_cam[..., 2]
    if np.any(depth <= MIN_DEPTH):
        raise NonPositiveDepth("point is behind or on the camera plane",
                               depth=float(np.min(depth)))
    uvw = p_cam @ cam.intrinsics.T
    return uvw[..., :2] / uvw[..., 2:3]


def project_homogeneous(cam: CameraModel, p_h: ArrayLike) -> np.ndarray:
    """Project a homogeneous base-frame point (x, y, z, w) with w != 0"""
    p_h = np.asarray(p_h, dtype=np.float64)
    if p_h.shape[-1] != 4:
        raise DimensionMismatch("homogeneous points must have 4 coordinates")
    return project(cam, p_h[..., :3] / p_h[..., 3:4])
