"""Pinhole keypoint renderer: the black-box forward model ``x = f(p)``.

A renderer is any callable ``renderer(model, pose, camera) -> FeatureObservation``
that is safe to call concurrently.  :func:`render` projects the model keypoints
through a calibrated pinhole camera; the solver only ever sees its output, so a
ray-traced renderer plus feature tracker could take its place unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BehindCamera, InsufficientFeatures
from .geometry import Pose

DEPTH_EPSILON = 1e-9
MIN_TRACKED_FEATURES = 4


def _readonly(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    x0: float
    y0: float
    width: int
    height: int
    gamma: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (int(self.width) > 0 and int(self.height) > 0):
            raise ValueError("image dimensions must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, self.gamma, self.x0],
                         [0.0, self.fy, self.y0],
                         [0.0, 0.0, 1.0]])

    @classmethod
    def default(cls) -> "CameraIntrinsics":
        """640x480, fx = fy = 500, no skew, centred principal point."""
        return cls(fx=500.0, fy=500.0, x0=320.0, y0=240.0, width=640, height=480)


@dataclass(frozen=True)
class TargetModel:
    """Identified 3D keypoints in the object frame, sorted by id."""

    ids: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(ids) != len(pts):
            raise ValueError("ids and points differ in length")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("keypoint ids must be unique")
        if len(ids) < 3:
            raise ValueError("a target model needs at least three keypoints")
        if not np.all(np.isfinite(pts)):
            raise ValueError("keypoints must be finite")
        order = np.argsort(ids, kind="stable")
        object.__setattr__(self, "ids", _readonly(ids[order]))
        object.__setattr__(self, "points", _readonly(pts[order]))

    def __len__(self):
        return len(self.ids)


@dataclass(frozen=True)
class FeatureObservation:
    """Per-keypoint pixel coordinates ``uv`` (k x 2) and visibility flags."""

    ids: np.ndarray
    uv: np.ndarray
    visible: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        uv = np.asarray(self.uv, dtype=float).reshape(-1, 2)
        visible = np.asarray(self.visible, dtype=bool).reshape(-1)
        if not (len(ids) == len(uv) == len(visible)):
            raise ValueError("ids, uv and visible differ in length")
        if not np.all(np.isfinite(uv[visible])):
            raise ValueError("visible entries must have finite coordinates")
        object.__setattr__(self, "ids", _readonly(ids))
        object.__setattr__(self, "uv", _readonly(uv))
        object.__setattr__(self, "visible", _readonly(visible))

    @property
    def visible_ids(self) -> np.ndarray:
        return self.ids[self.visible]

    def vector(self, ids) -> np.ndarray:
        """Stacked ``(u, v)`` of the given ids, in the order given."""
        index = {int(i): k for k, i in enumerate(self.ids)}
        rows = [index[int(i)] for i in ids]
        if not np.all(self.visible[rows]):
            raise KeyError("requested an invisible feature")
        return self.uv[rows].reshape(-1).copy()


Renderer = Callable[[TargetModel, Pose, CameraIntrinsics], FeatureObservation]


def _project(points: np.ndarray, pose: Pose, camera: CameraIntrinsics):
    b = points @ pose.rotation.T + pose.t
    depth = b[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        xn = b[:, 0] / depth
        yn = b[:, 1] / depth
    u = camera.fx * xn + camera.gamma * yn + camera.x0
    v = camera.fy * yn + camera.y0
    return u, v, depth


def project_point(a, pose: Pose, camera: CameraIntrinsics) -> tuple[float, float, float]:
    """Project one object-frame point; returns ``(u, v, depth)``.

    Raises
    ------
    BehindCamera
        If the camera-frame depth is not above ``DEPTH_EPSILON``.
    """
    u, v, s = _project(np.asarray(a, dtype=float).reshape(1, 3), pose, camera)
    if not s[0] > DEPTH_EPSILON:
        raise BehindCamera(f"point depth {s[0]:.6g} is not in front of the camera")
    return float(u[0]), float(v[0]), float(s[0])


def render(model: TargetModel, pose: Pose, camera: CameraIntrinsics) -> FeatureObservation:
    u, v, depth = _project(model.points, pose, camera)
    front = depth > DEPTH_EPSILON
    uv = np.column_stack([u, v])
    uv[~front] = np.nan
    visible = (front
               & (uv[:, 0] >= 0) & (uv[:, 0] < camera.width)
               & (uv[:, 1] >= 0) & (uv[:, 1] < camera.height))
    return FeatureObservation(model.ids, uv, visible)


def corrupt(obs: FeatureObservation, noise_sigma: float = 0.0, outlier_fraction: float = 0.0,
            dropout_fraction: float = 0.0, seed: int = 0,
            image_size: tuple[int, int] | None = None) -> FeatureObservation:
    """Simulate detector/matcher imperfections on an observation.

    Gaussian noise of ``noise_sigma`` pixels per axis is added to every visible
    entry; then ``round(outlier_fraction * n_visible)`` visible entries are
    replaced by points uniform over ``image_size = (width, height)``; finally
    ``round(dropout_fraction * n_visible)`` visible entries are marked invisible.
    Deterministic for a given seed.
    """
    for name, frac in (("outlier_fraction", outlier_fraction), ("dropout_fraction", dropout_fraction)):
        if not 0.0 <= frac <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")

    rng = np.random.default_rng(seed)
    uv = obs.uv.copy()
    visible = obs.visible.copy()
    vis_rows = np.flatnonzero(visible)
    n_vis = len(vis_rows)

    if noise_sigma > 0:
        uv[vis_rows] += rng.normal(0.0, noise_sigma, size=(n_vis, 2))

    n_out = int(round(outlier_fraction * n_vis))
    if n_out:
        if image_size is None:
            raise ValueError("image_size is required to draw outliers")
        rows = rng.choice(vis_rows, size=n_out, replace=False)
        uv[rows] = rng.uniform((0.0, 0.0), image_size, size=(n_out, 2))

    n_drop = int(round(dropout_fraction * n_vis))
    if n_drop:
        rows = rng.choice(vis_rows, size=n_drop, replace=False)
        visible[rows] = False

    return FeatureObservation(obs.ids, uv, visible)


def common_features(ref: FeatureObservation, others: Sequence[FeatureObservation],
                    min_features: int = MIN_TRACKED_FEATURES):
    """Intersect visible ids across ``ref`` and every observation in ``others``.

    Returns ``(ids, ref_vector, [other_vectors])`` with ids ascending and each
    vector the stacked ``(u, v)`` of those ids.

    Raises
    ------
    InsufficientFeatures
        If fewer than ``min_features`` ids survive the intersection.
    """
    common = set(ref.visible_ids.tolist())
    for obs in others:
        common &= set(obs.visible_ids.tolist())
    if len(common) < min_features:
        raise InsufficientFeatures(
            f"only {len(common)} features tracked in all views (need {min_features})")
    ids = np.array(sorted(common), dtype=np.int64)
    return ids, ref.vector(ids), [obs.vector(ids) for obs in others]
