"""Attitude and pose algebra on Gibbs vectors (classical Rodrigues parameters).

Rotation matrices follow the direction-cosine convention of the Gibbs vector:
``q = tan(theta/2) * e`` maps to

    R = ((1 - q.q) I + 2 q q^T - 2 [q x]) / (1 + q.q)

which is the Cayley transform ``(I + [q x])^-1 (I - [q x])``.  A pose is the
6-vector ``[q, t]`` and a 3D point ``a`` maps to ``R a + t`` in the camera frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearSingularRotation

#: trace(R) must exceed -1 by this much before a Gibbs vector is extracted
SINGULAR_TRACE_MARGIN = 1e-6


def _frozen(x, shape) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Pose:
    """Relative pose: Gibbs vector ``q`` and translation ``t`` (both 3-vectors)."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q, (3,))
        t = _frozen(self.t, (3,))
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, p) -> "Pose":
        p = np.asarray(p, dtype=float).reshape(6)
        return cls(p[:3], p[3:])

    @classmethod
    def from_rotation(cls, R, t) -> "Pose":
        return cls(rotation_to_crp(R), t)

    @property
    def rotation(self) -> np.ndarray:
        return crp_to_rotation(self.q)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.t])

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return np.array_equal(self.q, other.q) and np.array_equal(self.t, other.t)

    def __hash__(self):
        return hash((self.q.tobytes(), self.t.tobytes()))


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def crp_to_rotation(q) -> np.ndarray:
    """Rotation matrix of a Gibbs vector, closed form."""
    q = np.asarray(q, dtype=float).reshape(3)
    qq = q @ q
    R = (1.0 - qq) * np.eye(3) + 2.0 * np.outer(q, q) - 2.0 * skew(q)
    return R / (1.0 + qq)


def cayley_rotation(q) -> np.ndarray:
    """Same map as :func:`crp_to_rotation`, evaluated as ``(I + [q x])^-1 (I - [q x])``."""
    Q = skew(q)
    I = np.eye(3)
    return np.linalg.solve(I + Q, I - Q)


def rotation_to_crp(R) -> np.ndarray:
    """Gibbs vector of a rotation matrix.

    Raises
    ------
    NearSingularRotation
        If ``trace(R) <= -1 + 1e-6``, i.e. the rotation angle is at or near pi
        where the Gibbs vector diverges.
    """
    R = np.asarray(R, dtype=float).reshape(3, 3)
    denom = 1.0 + np.trace(R)
    if denom <= SINGULAR_TRACE_MARGIN:
        raise NearSingularRotation(
            f"trace(R) = {denom - 1.0:.12g}: rotation angle too close to pi for a Gibbs vector")
    return np.array([R[1, 2] - R[2, 1],
                     R[2, 0] - R[0, 2],
                     R[0, 1] - R[1, 0]]) / denom


def rotation_angle(q) -> float:
    """Rotation angle (radians) encoded by a Gibbs vector."""
    return 2.0 * np.arctan(np.linalg.norm(q))


def pose_difference(ref: Pose, other: Pose) -> np.ndarray:
    """6-vector ``[dq, dt]`` with ``dq = crp(R_ref^T R_other)`` and ``dt = t_ref - t_other``."""
    dR = ref.rotation.T @ other.rotation
    dq = rotation_to_crp(dR)
    dt = ref.t - other.t
    return np.concatenate([dq, dt])


def retract(base: Pose, delta) -> Pose:
    """Exact inverse of :func:`pose_difference`.

    Returns the pose ``other`` such that ``pose_difference(base, other) == delta``
    (to rounding): ``R_other = R_base R(dq)`` and ``t_other = t_base - dt``.
    """
    delta = np.asarray(delta, dtype=float).reshape(6)
    R = base.rotation @ crp_to_rotation(delta[:3])
    return Pose(rotation_to_crp(R), base.t - delta[3:])


def apply_pose_delta(base: Pose, delta) -> Pose:
    """Additive update of the raw ``[q, t]`` vector.

    Exact for translation; for rotation it agrees with composition only to first
    order about ``q = 0``.
    """
    p = base.vector() + np.asarray(delta, dtype=float).reshape(6)
    if not np.all(np.isfinite(p[:3])):
        raise NearSingularRotation("updated Gibbs vector is not finite")
    return Pose.from_vector(p)


def is_rotation(R, tol: float = 1e-10) -> bool:
    R = np.asarray(R, dtype=float)
    return (R.shape == (3, 3)
            and np.max(np.abs(R.T @ R - np.eye(3))) <= tol
            and abs(np.linalg.det(R) - 1.0) <= tol)
