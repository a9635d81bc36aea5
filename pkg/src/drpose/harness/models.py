"""Synthetic target models and the model/camera file formats.

Model file (YAML)::

    keypoints:
      - {id: 0, x: -1.0, y: -1.0, z: -1.0}
      - ...

Camera file (YAML), all in pixels::

    fx: 500.0
    fy: 500.0
    gamma: 0.0
    x0: 320.0
    y0: 240.0
    width: 640
    height: 480
"""
from __future__ import annotations

import itertools
import re
from pathlib import Path

import numpy as np
import yaml

from ..errors import DegenerateModel, ParseError, ValidationError
from ..rendering import CameraIntrinsics, TargetModel

COPLANARITY_EIGENVALUE = 1e-6
MAX_MODEL_ATTEMPTS = 10

_ASYMMETRIC12 = np.array([
    [0.90, -0.35, 0.20],
    [-0.60, 0.75, -0.45],
    [0.15, 0.95, 0.70],
    [-0.85, -0.80, 0.35],
    [0.55, 0.40, -0.90],
    [-0.25, -0.15, 0.95],
    [0.70, -0.90, -0.55],
    [-0.95, 0.20, 0.05],
    [0.30, -0.55, 0.60],
    [-0.40, 0.50, 0.85],
    [0.05, 0.65, -0.75],
    [0.80, 0.10, -0.20],
])

_RANDOM_SPEC = re.compile(r"^random\{\s*(\d+)\s*(?:,\s*(-?\d+)\s*)?\}$")
CAMERA_FIELDS = ("fx", "fy", "gamma", "x0", "y0", "width", "height")


def smallest_pca_eigenvalue(points) -> float:
    pts = np.asarray(points, dtype=float)
    centred = pts - pts.mean(axis=0)
    return float(np.linalg.eigvalsh(centred.T @ centred / len(pts))[0])


def cube8() -> TargetModel:
    pts = np.array(list(itertools.product((-1.0, 1.0), repeat=3)))
    return TargetModel(np.arange(8), pts)


def asymmetric12() -> TargetModel:
    return TargetModel(np.arange(12), _ASYMMETRIC12)


def random_model(n: int, seed: int = 0) -> TargetModel:
    """``n`` points uniform in the unit cube centred at the origin, never coplanar."""
    if n < 4:
        raise ValueError("random models need at least 4 points")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_MODEL_ATTEMPTS):
        pts = rng.uniform(-0.5, 0.5, size=(n, 3))
        if smallest_pca_eigenvalue(pts) >= COPLANARITY_EIGENVALUE:
            return TargetModel(np.arange(n), pts)
    raise DegenerateModel(f"random model stayed coplanar after {MAX_MODEL_ATTEMPTS} attempts")


def generate_model(spec) -> TargetModel:
    """Build a model from ``"cube8"``, ``"asymmetric12"``, ``"random{n,seed}"``
    or a mapping ``{"generator": "random", "n": n, "seed": seed}``."""
    if isinstance(spec, dict):
        gen = spec.get("generator")
        if gen == "random":
            return random_model(int(spec["n"]), int(spec.get("seed", 0)))
        spec = gen
    if spec == "cube8":
        return cube8()
    if spec == "asymmetric12":
        return asymmetric12()
    m = _RANDOM_SPEC.match(str(spec).strip())
    if m:
        return random_model(int(m.group(1)), int(m.group(2) or 0))
    raise ValidationError(f"unknown model generator {spec!r} (cube8 | asymmetric12 | random{{n,seed}})")


def model_to_dict(model: TargetModel) -> dict:
    return {"keypoints": [{"id": int(i), "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
                          for i, p in zip(model.ids, model.points)]}


def save_model(model: TargetModel, path) -> None:
    Path(path).write_text(yaml.safe_dump(model_to_dict(model), sort_keys=False))


def _load_yaml(path):
    try:
        return yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc


def model_from_dict(data, source="model") -> TargetModel:
    if not isinstance(data, dict) or set(data) != {"keypoints"}:
        raise ParseError(f"{source}: expected a single 'keypoints' list")
    ids, pts = [], []
    for n, kp in enumerate(data["keypoints"] or []):
        if not isinstance(kp, dict) or set(kp) != {"id", "x", "y", "z"}:
            raise ParseError(f"{source}: keypoints[{n}] must have exactly id, x, y, z")
        ids.append(int(kp["id"]))
        pts.append([float(kp["x"]), float(kp["y"]), float(kp["z"])])
    try:
        return TargetModel(ids, np.array(pts).reshape(-1, 3))
    except ValueError as exc:
        raise ValidationError(f"{source}: {exc}") from exc


def load_model(path) -> TargetModel:
    return model_from_dict(_load_yaml(path), str(path))


def camera_from_dict(data, source="camera") -> CameraIntrinsics:
    if not isinstance(data, dict):
        raise ParseError(f"{source}: expected a mapping")
    unknown = set(data) - set(CAMERA_FIELDS)
    if unknown:
        raise ParseError(f"{source}: unknown field(s) {sorted(unknown)}")
    missing = set(CAMERA_FIELDS) - {"gamma"} - set(data)
    if missing:
        raise ParseError(f"{source}: missing field(s) {sorted(missing)}")
    try:
        return CameraIntrinsics(fx=float(data["fx"]), fy=float(data["fy"]),
                                x0=float(data["x0"]), y0=float(data["y0"]),
                                width=int(data["width"]), height=int(data["height"]),
                                gamma=float(data.get("gamma", 0.0)))
    except ValueError as exc:
        raise ValidationError(f"{source}: {exc}") from exc


def load_camera(path) -> CameraIntrinsics:
    return camera_from_dict(_load_yaml(path), str(path))
