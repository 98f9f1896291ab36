"""
Kinematics Module
=================

Purpose: Forward kinematics for the serial arm, keypoint projection into
the camera, and the prompt/overlay geometry used to hide embodiment
appearance (black mask plus a red line from gripper to forearm).

Key Features:
- Arm chain loaded from an INI file (per-joint axis, offset, limits)
- fk returns forearm, wrist and gripper keypoints in the base frame
- robot_prompt / hand_prompt build segmentation prompts in pixels
- apply_overlay rasterizes the red line with an integer (Bresenham) walk
- PNG export through Pillow
"""

import configparser
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from log_ingest_processor import HUMAN, ROBOT
from pipeline_errors import (
    ConfigError,
    DegenerateBox,
    DimensionMismatch,
    JointLimitViolation,
    ini_key_line,
)
from se3_geometry import CameraModel, Pose3, compose, project, rotation_about

KEYPOINT_NAMES = ('forearm', 'wrist', 'gripper')
JOINT_COUNT = 6
LIMIT_TOL = 1e-9
LINE_RADIUS_PX = 2
RED = (255, 0, 0)
DEFAULT_ARM_INI = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'config', 'arm_default.ini')


# -----------------------------------------------------------------------------
# Arm model
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class JointSpec:
    name: str
    axis: np.ndarray
    offset: Pose3
    limits: Tuple[float, float]


@dataclass(frozen=True, eq=False)
class ArmModel:
    """
    Six revolute joints plus a gripper jaw joint

    frame_j = frame_{j-1} . offset_j . rot(axis_j, q_j), frame_0 = base;
    the tool frame (index 7) is frame_6 . tool. Keypoints are frame origins.
    """

    joints: Tuple[JointSpec, ...]
    gripper_limits: Tuple[float, float]
    tool: Pose3
    keypoint_frames: Dict[str, int]
    base: Pose3 = Pose3.identity()

    def __post_init__(self):
        if len(self.joints) != JOINT_COUNT:
            raise DimensionMismatch(f"arm needs {JOINT_COUNT} revolute joints, got {len(self.joints)}")
        if sorted(self.keypoint_frames) != sorted(KEYPOINT_NAMES):
            raise DimensionMismatch(f"keypoints must be exactly {KEYPOINT_NAMES}")
        for name, index in self.keypoint_frames.items():
            if not 0 <= index <= JOINT_COUNT + 1:
                raise DimensionMismatch(f"keypoint {name} attached to unknown frame {index}")

    @property
    def dof(self) -> int:
        return JOINT_COUNT + 1

    @property
    def link_transforms(self) -> List[Pose3]:
        return [j.offset for j in self.joints] + [self.tool]

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints] + [self.gripper_limits[0]])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints] + [self.gripper_limits[1]])

    def with_base(self, base: Pose3) -> "ArmModel":
        return ArmModel(self.joints, self.gripper_limits, self.tool, dict(self.keypoint_frames), base)

    def clip(self, q: Sequence[float]) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=np.float64), self.lower_limits, self.upper_limits)

    def check_limits(self, q: Sequence[float]) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.dof,):
            raise DimensionMismatch(f"q must have {self.dof} entries, got {q.shape}")
        low = q < self.lower_limits - LIMIT_TOL
        high = q > self.upper_limits + LIMIT_TOL
        if np.any(low | high):
            index = int(np.argmax(low | high))
            name = self.joints[index].name if index < JOINT_COUNT else 'gripper'
            raise JointLimitViolation(
                f"{name} = {q[index]:.6f} outside [{self.lower_limits[index]}, {self.upper_limits[index]}]",
                joint=name)
        return q

    def frames(self, q: Sequence[float]) -> List[Pose3]:
        """Base-frame poses of frames 0..7 (base, joint frames, tool)"""
        q = self.check_limits(q)
        out = [self.base]
        current = self.base
        for joint, angle in zip(self.joints, q[:JOINT_COUNT]):
            current = compose(compose(current, joint.offset), Pose3.from_axis_angle(joint.axis, angle))
            out.append(current)
        out.append(compose(current, self.tool))
        return out

    def eef_pose(self, q: Sequence[float]) -> Pose3:
        return self.frames(q)[-1]

    # -------------------------------------------------------------------------
    # Loading
    # -------------------------------------------------------------------------
    @classmethod
    def from_ini(cls, path: str) -> "ArmModel":
        """
        Load an arm chain from INI

        Raises:
            ConfigError: missing section/key or unparsable value (with file/line)
        """
        parser = configparser.ConfigParser()
        try:
            with open(path) as f:
                text = f.read()
            parser.read_string(text, source=path)
        except FileNotFoundError:
            raise ConfigError("arm config not found", file=path)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse arm config: {e}", file=path,
                              line=getattr(e, 'lineno', None))

        def vector(section, key, size):
            try:
                raw = parser.get(section, key)
            except (configparser.NoSectionError, configparser.NoOptionError):
                raise ConfigError(f"missing [{section}] {key}", file=path)
            try:
                values = [float(v) for v in raw.replace(',', ' ').split()]
            except ValueError:
                values = []
            if len(values) not in (size if isinstance(size, tuple) else (size,)):
                raise ConfigError(f"[{section}] {key} = {raw!r} is not a {size}-vector",
                                  file=path, line=ini_key_line(text, section, key))
            return np.array(values)

        joints = []
        for j in range(1, JOINT_COUNT + 1):
            section = f'joint{j}'
            offset = vector(section, 'offset', (3, 6))
            rotation = np.eye(3)
            if offset.size == 6 and np.linalg.norm(offset[3:]) > 0:
                rotation = rotation_about(offset[3:], np.linalg.norm(offset[3:]))
            limits = vector(section, 'limits', 2)
            if limits[0] > limits[1]:
                raise ConfigError(f"[{section}] limits are reversed", file=path,
                                  line=ini_key_line(text, section, 'limits'))
            joints.append(JointSpec(section, vector(section, 'axis', 3),
                                    Pose3(rotation, offset[:3]), (float(limits[0]), float(limits[1]))))
        gripper = vector('gripper', 'limits', 2)
        tool = vector('tool', 'offset', 3)
        try:
            keypoints = {name: parser.getint('keypoints', name) for name in KEYPOINT_NAMES}
        except (configparser.Error, ValueError) as e:
            raise ConfigError(f"bad [keypoints] section: {e}", file=path)
        try:
            return cls(tuple(joints), (float(gripper[0]), float(gripper[1])),
                       Pose3.from_translation(*tool), keypoints)
        except DimensionMismatch as e:
            raise ConfigError(e.message, file=path)

    @classmethod
    def default(cls) -> "ArmModel":
        return cls.from_ini(DEFAULT_ARM_INI)


def fk(arm: ArmModel, q: Sequence[float]) -> Dict[str, np.ndarray]:
    """
    Keypoint positions in the base frame

    Args:
        arm: arm chain
        q: 7 joint values (6 revolute, radians, then gripper)

    Returns:
        {'forearm', 'wrist', 'gripper'} -> 3-vectors

    Raises:
        JointLimitViolation: any joint outside its limits
    """
    frames = arm.frames(q)
    return {name: frames[arm.keypoint_frames[name]].translation.copy() for name in KEYPOINT_NAMES}


# -----------------------------------------------------------------------------
# Prompts
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class MaskPrompt:
    """Segmentation prompt in pixel coordinates"""

    keypoints_px: np.ndarray
    line_segment_px: np.ndarray
    embodiment: str
    partially_out_of_view: bool = False

    def __post_init__(self):
        object.__setattr__(self, "keypoints_px", np.asarray(self.keypoints_px, dtype=np.float64).reshape(-1, 2))
        object.__setattr__(self, "line_segment_px", np.asarray(self.line_segment_px, dtype=np.float64).reshape(2, 2))

    def to_dict(self) -> Dict:
        return {'keypoints_px': self.keypoints_px.tolist(),
                'line_segment_px': self.line_segment_px.tolist(),
                'embodiment': self.embodiment,
                'partially_out_of_view': self.partially_out_of_view}

    @classmethod
    def from_dict(cls, data: Dict) -> "MaskPrompt":
        return cls(data['keypoints_px'], data['line_segment_px'], data['embodiment'],
                   bool(data.get('partially_out_of_view', False)))


def robot_prompt(arm: ArmModel, q: Sequence[float], cam: CameraModel) -> MaskPrompt:
    """
    Project the arm keypoints and draw the line gripper -> forearm

    Raises:
        NonPositiveDepth: a keypoint is behind the camera
    """
    points = fk(arm, q)
    pixels = project(cam, np.stack([points[name] for name in KEYPOINT_NAMES]))
    segment = np.stack([pixels[2], pixels[0]])
    return MaskPrompt(pixels, segment, ROBOT, not bool(np.all(cam.in_image(pixels))))


def hand_prompt(contour_bbox_px: Sequence[float], hand_px: Optional[Sequence[float]] = None,
                image_size: Optional[Tuple[int, int]] = None) -> MaskPrompt:
    """
    Prompt from the hand contour's bounding box

    Args:
        contour_bbox_px: (u_min, v_min, u_max, v_max); v grows downwards
        hand_px: projected hand position (defaults to the box center)
        image_size: (width, height) used for the out-of-view flag

    Returns:
        MaskPrompt with segment (bottom-right corner, top-left corner)

    Raises:
        DegenerateBox: zero or negative width/height
    """
    box = np.asarray(contour_bbox_px, dtype=np.float64)
    if box.shape != (4,) or not np.all(np.isfinite(box)):
        raise DegenerateBox("bounding box must be 4 finite numbers")
    u0, v0, u1, v1 = box
    if u1 <= u0 or v1 <= v0:
        raise DegenerateBox(f"box ({u0}, {v0})-({u1}, {v1}) has no area")
    hand = np.array([(u0 + u1) / 2.0, (v0 + v1) / 2.0]) if hand_px is None else np.asarray(hand_px, dtype=np.float64)
    outside = False
    if image_size is not None:
        width, height = image_size
        outside = bool(u0 < 0 or v0 < 0 or u1 >= width or v1 >= height)
    return MaskPrompt(hand[None, :], [[u1, v1], [u0, v0]], HUMAN, outside)


# -----------------------------------------------------------------------------
# Overlay rasterization
# -----------------------------------------------------------------------------
def line_pixels(start: Sequence[float], end: Sequence[float]) -> np.ndarray:
    """Integer (Bresenham) walk between the rounded endpoints, as (N, 2) [u, v]"""
    u0, v0 = (int(np.round(c)) for c in start)
    u1, v1 = (int(np.round(c)) for c in end)
    du, dv = abs(u1 - u0), -abs(v1 - v0)
    su = 1 if u0 < u1 else -1
    sv = 1 if v0 < v1 else -1
    err = du + dv
    out = []
    while True:
        out.append((u0, v0))
        if u0 == u1 and v0 == v1:
            break
        e2 = 2 * err
        if e2 >= dv:
            err += dv
            u0 += su
        if e2 <= du:
            err += du
            v0 += sv
    return np.array(out, dtype=np.int64)


def line_mask(shape: Tuple[int, int], segment: np.ndarray, radius: int = LINE_RADIUS_PX) -> np.ndarray:
    """Pixels within Chebyshev distance `radius` of the walked line"""
    height, width = shape
    out = np.zeros((height, width), dtype=bool)
    for u, v in line_pixels(segment[0], segment[1]):
        v_lo, v_hi = max(v - radius, 0), min(v + radius + 1, height)
        u_lo, u_hi = max(u - radius, 0), min(u + radius + 1, width)
        if v_lo < v_hi and u_lo < u_hi:
            out[v_lo:v_hi, u_lo:u_hi] = True
    return out


def apply_overlay(mask: np.ndarray, line: Sequence[Sequence[float]], image: np.ndarray,
                  radius: int = LINE_RADIUS_PX) -> np.ndarray:
    """
    Black out `mask` and draw a pure red line of half-width `radius`

    Args:
        mask: (H, W) boolean raster
        line: ((u0, v0), (u1, v1)) in pixels
        image: (H, W, 3) uint8 raster (left untouched)

    Returns:
        new (H, W, 3) uint8 raster

    Raises:
        DimensionMismatch: mask and image sizes differ
    """
    mask = np.asarray(mask, dtype=bool)
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or mask.shape != image.shape[:2]:
        raise DimensionMismatch(f"mask {mask.shape} does not match image {image.shape}")
    out = image.astype(np.uint8, copy=True)
    out[mask] = 0
    out[line_mask(mask.shape, np.asarray(line, dtype=np.float64), radius)] = RED
    return out


def blank_frame(cam: CameraModel, gray: int = 128) -> np.ndarray:
    return np.full((cam.height, cam.width, 3), gray, dtype=np.uint8)


def save_png(image: np.ndarray, path: str) -> str:
    """Write an (H, W, 3) uint8 raster as PNG"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path, format='PNG')
    return path


def load_png(path: str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert('RGB'), dtype=np.uint8)
