"""Pose error metrics: Euclidean translation error and alignment angle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose


@dataclass(frozen=True)
class PoseError:
    translation_error: float
    rotation_error: float   # degrees


def translation_error(t, t_hat) -> float:
    return float(np.linalg.norm(np.asarray(t, dtype=float) - np.asarray(t_hat, dtype=float)))


def rotation_error(R, R_hat) -> float:
    """Angle in degrees of the rotation taking ``R`` onto ``R_hat``.

    ``arccos((tr(R^T R_hat) - 1) / 2)`` with the argument clamped to [-1, 1].
    For rotations ``tr(R^T R_hat) = 3 - |R - R_hat|_F^2 / 2``; evaluating the
    trace that way makes identical inputs give exactly zero and keeps the
    result exactly symmetric in its arguments.
    """
    diff = np.asarray(R, dtype=float) - np.asarray(R_hat, dtype=float)
    c = min(1.0, max(-1.0, 1.0 - 0.25 * float(np.sum(diff * diff))))
    return float(np.degrees(np.arccos(c)))


def pose_error(truth: Pose, estimate: Pose) -> PoseError:
    return PoseError(translation_error(truth.t, estimate.t),
                     rotation_error(truth.rotation, estimate.rotation))
