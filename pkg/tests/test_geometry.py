import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from pipeline_errors import InvalidPose, NonPositiveDepth
from se3_geometry import (
    CameraModel,
    Pose3,
    apply,
    compose,
    inverse,
    look_at,
    project,
    project_homogeneous,
)


def random_pose(rng):
    rotation = Rotation.random(None, int(rng.integers(1 << 31))).as_matrix()
    return Pose3(rotation, rng.normal(size=3))


def test_identity_composition_returns_other_pose():
    t = Pose3.from_axis_angle([0, 0, 1], 0.3, [1.0, 2.0, 3.0])
    assert compose(Pose3.identity(), t).allclose(t)


def test_pose_times_inverse_is_identity():
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = random_pose(rng)
        assert compose(t, inverse(t)).allclose(Pose3.identity(), atol=1e-12)
        assert compose(inverse(t), t).allclose(Pose3.identity(), atol=1e-12)


def test_translations_compose_additively():
    out = compose(Pose3.from_translation(1, 0, 0), Pose3.from_translation(0, 2, 0))
    assert out.allclose(Pose3.from_translation(1, 2, 0))


def test_apply_examples():
    assert np.allclose(apply(Pose3.identity(), [1, 2, 3]), [1, 2, 3])
    assert np.allclose(apply(Pose3.from_translation(1, 0, 0), [0, 0, 1]), [1, 0, 1])
    rz = Pose3.from_axis_angle([0, 0, 1], np.pi / 2)
    assert np.allclose(apply(rz, [1, 0, 0]), [0, 1, 0], atol=1e-12)


def test_construction_rejects_non_rotation():
    with pytest.raises(InvalidPose):
        Pose3(np.diag([1.0, 1.0, 2.0]), np.zeros(3))
    with pytest.raises(InvalidPose):
        Pose3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_compose_matches_homogeneous_matrices():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = random_pose(rng), random_pose(rng)
        assert np.allclose(compose(a, b).matrix(), a.matrix() @ b.matrix(), atol=1e-12)


def test_apply_distributes_over_compose():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a, b = random_pose(rng), random_pose(rng)
        p = rng.normal(size=3)
        assert np.allclose(apply(compose(a, b), p), apply(a, apply(b, p)), atol=1e-10)


def test_gauge_transform_cancels_in_relative_pose():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g, a, b = random_pose(rng), random_pose(rng), random_pose(rng)
        left = compose(inverse(compose(g, a)), compose(g, b))
        assert left.allclose(compose(inverse(a), b), atol=1e-10)


def test_row_layout_round_trip():
    t = Pose3.from_axis_angle([1, 1, 0], 0.7, [0.1, -0.2, 0.3])
    assert Pose3.from_row(t.to_row()).allclose(t, atol=0.0)


def test_principal_point_on_optical_axis():
    cam = CameraModel.from_params(500, 500, 320, 240, 640, 480)
    assert np.allclose(project(cam, [0.0, 0.0, 2.5]), [320, 240])


def test_manual_perspective_example():
    cam = CameraModel.from_params(100, 100, 50, 50, 100, 100)
    assert np.allclose(project(cam, [0.1, 0.0, 1.0]), [60, 50])


def test_zero_depth_raises():
    cam = CameraModel.from_params(100, 100, 50, 50, 100, 100)
    with pytest.raises(NonPositiveDepth):
        project(cam, [0.1, 0.0, 0.0])
    with pytest.raises(NonPositiveDepth):
        project(cam, [0.1, 0.0, -1.0])


def test_homogeneous_scaling_invariance():
    rng = np.random.default_rng(4)
    cam = CameraModel.from_params(400, 410, 300, 200, 640, 480,
                                  look_at([0, 0, 1.0], [0.2, 0.1, 0.0], [1, 0, 0]))
    for _ in range(20):
        p = np.array([rng.uniform(-0.2, 0.4), rng.uniform(-0.2, 0.3), 0.0])
        w = rng.uniform(0.1, 10.0)
        assert np.allclose(project_homogeneous(cam, np.append(p * w, w)), project(cam, p), atol=1e-9)


def test_projection_matches_brute_force_oracle():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        extrinsics = random_pose(rng)
        fx, fy = rng.uniform(100, 900, size=2)
        cam = CameraModel.from_params(fx, fy, 320, 240, 640, 480, extrinsics)
        p_cam = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 3.0)])
        p_base = np.linalg.solve(extrinsics.matrix(), np.append(p_cam, 1.0))[:3]
        expected = np.array([fx * p_cam[0] / p_cam[2] + 320, fy * p_cam[1] / p_cam[2] + 240])
        assert np.allclose(project(cam, p_base), expected, atol=1e-6)


def test_look_at_puts_target_on_principal_point():
    cam = CameraModel.from_params(500, 500, 320, 240, 640, 480,
                                  look_at([0.525, 0.0, 0.9], [0.525, 0.0, 0.0], [1.0, 0.0, 0.0]))
    assert np.allclose(project(cam, [0.525, 0.0, 0.0]), [320, 240])
    # +x of the table appears towards the top of the image
    assert project(cam, [0.6, 0.0, 0.0])[1] < 240
