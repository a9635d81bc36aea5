"""Random pose perturbations about a reference pose.

Rotation axes are drawn uniformly (by area) from a spherical cap around the
camera boresight; rotation angles follow the Haar marginal ``(1 - cos theta)``
restricted to ``[0, theta_max]``; translations are i.i.d. uniform per axis in a
box around the reference translation.

Random streams
--------------
Every draw comes from a PCG64 generator seeded by
``SeedSequence(seed, spawn_key=keys)``.  The solver passes
``keys = (iteration, reinit)`` and :func:`sample_batch` appends the resample
attempt, so every batch has its own platform-stable stream derived from the
single config seed.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBatch
from .geometry import Pose, crp_to_rotation, pose_difference, rotation_to_crp

log = logging.getLogger(__name__)

MAX_RESAMPLE_ATTEMPTS = 5
RANK_TOLERANCE = 1e-12
_BISECTION_RTOL = 1e-12


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class SamplerConfig:
    """Perturbation-sampling knobs.

    ``theta_max`` and ``cap_half_angle`` are in radians; ``translation_half_widths``
    are in scene length units along the camera axes.
    """

    theta_max: float
    translation_half_widths: tuple[float, float, float]
    n_samples: int = 24
    cap_half_angle: float = np.pi / 2
    seed: int = 0
    conservative_scale: float = 0.5

    def __post_init__(self):
        hw = tuple(float(h) for h in np.asarray(self.translation_half_widths, dtype=float).reshape(3))
        object.__setattr__(self, "translation_half_widths", hw)
        if self.n_samples < 12:
            raise ValueError("n_samples must be at least 12 (twice the pose dimension)")
        if not 0.0 < self.theta_max < np.pi / 2:
            raise ValueError("theta_max must lie in (0, pi/2)")
        if not 0.0 < self.cap_half_angle <= np.pi:
            raise ValueError("cap_half_angle must lie in (0, pi]")
        if not all(h > 0 and np.isfinite(h) for h in hw):
            raise ValueError("translation half-widths must be positive")
        if not 0.0 < self.conservative_scale < 1.0:
            raise ValueError("conservative_scale must lie in (0, 1)")


@dataclass(frozen=True)
class PerturbationBatch:
    deltas: np.ndarray                  # (N_s, 6): pose_difference(reference, pose_i)
    poses: tuple[Pose, ...] = field(repr=False)
    singular_values: np.ndarray = field(repr=False)
    attempts: int = 1

    @property
    def B(self) -> np.ndarray:
        return self.deltas.T

    @property
    def condition(self) -> float:
        return float(self.singular_values[0] / self.singular_values[-1])

    def __len__(self):
        return len(self.poses)


def shrink(config: SamplerConfig) -> SamplerConfig:
    """Conservative re-initialization: scale the sampling radii down."""
    s = config.conservative_scale
    return dataclasses.replace(
        config,
        theta_max=config.theta_max * s,
        translation_half_widths=tuple(h * s for h in config.translation_half_widths),
    )


def _theta_minus_sin(theta):
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-2
    t2 = theta * theta
    series = theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)))
    return np.where(small, series, theta - np.sin(theta))


def angle_cdf(theta, theta_max: float):
    """CDF of the rotation angle under density proportional to ``1 - cos`` on ``[0, theta_max]``."""
    theta = np.clip(theta, 0.0, theta_max)
    return _theta_minus_sin(theta) / _theta_minus_sin(theta_max)


def sample_angle(theta_max: float, rng: np.random.Generator, size=None):
    """Inverse-CDF draw of rotation angles; bisection to a relative width of 1e-12."""
    if not 0.0 < theta_max <= np.pi:
        raise ValueError("theta_max must lie in (0, pi]")
    target = rng.uniform(size=size) * _theta_minus_sin(theta_max)
    lo = np.zeros_like(target)
    hi = np.full_like(target, theta_max)
    while np.max(hi - lo) > _BISECTION_RTOL * theta_max:
        mid = 0.5 * (lo + hi)
        below = _theta_minus_sin(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    return float(out) if size is None else out


def _basis_from_axis(axis: np.ndarray) -> np.ndarray:
    """Rotation whose third column is ``axis``."""
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(helper, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return np.column_stack([e1, e2, axis])


def sample_axis_in_cap(reference_axis, cap_half_angle: float, rng: np.random.Generator, size=None):
    """Unit vectors uniform by area over the cap of half-angle ``cap_half_angle`` around ``reference_axis``."""
    axis = np.asarray(reference_axis, dtype=float).reshape(3)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise ValueError("reference_axis must be a unit vector")
    n = 1 if size is None else int(size)
    # 1 - cos(alpha) is uniform on [0, 1 - cos(cap)] for area-uniform caps
    one_minus_cos = rng.uniform(size=n) * 2.0 * np.sin(0.5 * cap_half_angle) ** 2
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    cos_a = 1.0 - one_minus_cos
    sin_a = np.sqrt(np.clip(one_minus_cos * (2.0 - one_minus_cos), 0.0, None))
    local = np.column_stack([sin_a * np.cos(phi), sin_a * np.sin(phi), cos_a])
    out = local @ _basis_from_axis(axis).T
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out[0] if size is None else out


def sample_rotation(theta_max: float, reference_axis, cap_half_angle: float,
                    rng: np.random.Generator, size=None):
    """Gibbs vector(s) ``tan(theta/2) * e`` with Haar-marginal angle and cap-uniform axis."""
    theta = sample_angle(theta_max, rng, size=size)
    axes = sample_axis_in_cap(reference_axis, cap_half_angle, rng, size=size)
    return np.tan(0.5 * np.asarray(theta))[..., None] * axes


def sample_batch(reference: Pose, config: SamplerConfig, stream: tuple[int, ...] = ()) -> PerturbationBatch:
    """Draw ``config.n_samples`` perturbed poses around ``reference``.

    Pose ``i`` has ``R_i = R_ref R(q_i)`` and ``t_i = t_ref + u_i``; the stored
    delta is ``pose_difference(reference, pose_i)``.  Up to five draws are made
    until every delta is nonzero and ``B`` has rank 6.

    Raises
    ------
    DegenerateBatch
        If no draw reaches full rank.
    """
    R_ref = reference.rotation
    boresight = R_ref.T @ np.array([0.0, 0.0, 1.0])
    boresight /= np.linalg.norm(boresight)
    hw = np.asarray(config.translation_half_widths)
    n = config.n_samples

    for attempt in range(MAX_RESAMPLE_ATTEMPTS):
        rng = make_rng(config.seed, *stream, attempt)
        qs = sample_rotation(config.theta_max, boresight, config.cap_half_angle, rng, size=n)
        shifts = rng.uniform(-hw, hw, size=(n, 3))
        poses = tuple(Pose(rotation_to_crp(R_ref @ crp_to_rotation(q)), reference.t + u)
                      for q, u in zip(qs, shifts))
        deltas = np.array([pose_difference(reference, p) for p in poses])
        deltas.setflags(write=False)
        sv = np.linalg.svd(deltas, compute_uv=False)
        nonzero = np.all(np.any(deltas != 0.0, axis=1))
        if nonzero and sv[-1] > RANK_TOLERANCE * sv[0]:
            return PerturbationBatch(deltas, poses, sv, attempt + 1)
        log.debug("batch %s attempt %d rank-deficient (sv=%s)", stream, attempt, sv)
    raise DegenerateBatch(f"perturbation batch not rank 6 after {MAX_RESAMPLE_ATTEMPTS} attempts")
