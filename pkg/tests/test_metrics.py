import numpy as np
import pytest

from drpose.geometry import Pose, crp_to_rotation
from drpose.metrics import pose_error, rotation_error, translation_error

from oracles import dcm_from_axis_angle, random_unit


def haar(rng):
    """Uniformly random rotation via a normalised Gaussian quaternion."""
    w, x, y, z = rng.normal(size=4)
    n = np.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


@pytest.fixture(scope="module")
def pairs():
    rng = np.random.default_rng(77)
    return [(haar(rng), haar(rng), haar(rng)) for _ in range(1000)]


def test_constructed_angles():
    Rz90 = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])
    assert rotation_error(np.eye(3), np.eye(3)) == 0.0
    assert abs(rotation_error(np.eye(3), Rz90) - 90.0) <= 1e-9
    assert abs(rotation_error(np.eye(3), np.diag([1.0, -1, -1])) - 180.0) <= 1e-9
    assert abs(rotation_error(Rz90, Rz90 @ Rz90 @ Rz90) - 180.0) <= 1e-9


def test_identical_generic_rotations_give_zero(pairs):
    for R, _, _ in pairs[:100]:
        assert rotation_error(R, R) == 0.0


def test_symmetry(pairs):
    for R, S, _ in pairs:
        assert rotation_error(R, S) == rotation_error(S, R)


def test_left_invariance(pairs):
    for R, S, Q in pairs:
        assert rotation_error(Q @ R, Q @ S) == pytest.approx(rotation_error(R, S), abs=1e-9)


def test_range(pairs):
    errs = np.array([rotation_error(R, S) for R, S, _ in pairs])
    assert np.all((errs >= 0) & (errs <= 180))


def test_small_angle_matches_norm():
    rng = np.random.default_rng(3)
    for _ in range(200):
        R = haar(rng)
        w = rng.uniform(1e-4, 0.1) * random_unit(rng)
        R_hat = R @ dcm_from_axis_angle(w, np.linalg.norm(w)).T
        assert rotation_error(R, R_hat) == pytest.approx(np.degrees(np.linalg.norm(w)), rel=0.01)


def test_clamping_never_nans():
    # slightly non-orthonormal inputs push the trace outside [-1, 3]
    assert rotation_error(np.eye(3) * (1 + 1e-15), np.eye(3)) == 0.0
    assert rotation_error(np.diag([1.0, -1, -1]) * (1 + 1e-12), np.eye(3)) == 180.0
    assert np.isfinite(rotation_error(np.eye(3), 1.0000001 * np.diag([-1.0, -1, 1])))


def test_pose_error():
    truth = Pose([0, 0, 0], [0, 0, 10])
    est = Pose.from_rotation(crp_to_rotation([0, 0, np.tan(np.radians(1))]), [0, 3, 14])
    err = pose_error(truth, est)
    assert err.translation_error == pytest.approx(5.0)
    assert err.rotation_error == pytest.approx(2.0)
    assert translation_error([1, 2, 3], [1, 2, 3]) == 0.0
