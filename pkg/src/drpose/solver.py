"""Pose estimation loop: learned Jacobian plus Levenberg-Marquardt.

Each outer iteration renders the current guess, matches its features to the
reference observation, samples a perturbation batch around the guess, renders
every sample, relearns the Jacobian from scratch and takes a damped step

    dp = (J^T J + lambda diag(J^T J))^-1 J^T (x_ref - h(p))

Steps are accepted only if they strictly lower the feature cost.

The step lives in the coordinates of :func:`~drpose.geometry.pose_difference`
("reference minus sample"), so a step ``dp`` moves the guess to the pose ``p'``
with ``pose_difference(p, p') = -dp``; see :func:`~drpose.geometry.retract`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    DegenerateBatch,
    Degenerate,
    DimensionMismatch,
    InitialGuessInfeasible,
    InsufficientFeatures,
    NearSingularRotation,
    RankDeficientBatch,
    SingularNormalEquations,
)
from .geometry import Pose, retract
from .jacobian import build_feature_deltas, learn_jacobian
from .metrics import rotation_error, translation_error
from .rendering import CameraIntrinsics, FeatureObservation, Renderer, TargetModel, common_features
from .sampling import SamplerConfig, sample_batch, shrink

log = logging.getLogger(__name__)

MAX_REJECTIONS = 10


@dataclass(frozen=True)
class LMConfig:
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    epsilon: float = 1e-6
    max_iterations: int = 20
    max_reinits: int = 5

    def __post_init__(self):
        # lambda0 = 0 is allowed here (pure Gauss-Newton); scenario files require > 0
        if not self.lambda0 >= 0:
            raise ValueError("lambda0 must be non-negative")
        if not self.lambda_up > 1:
            raise ValueError("lambda_up > 1")
        if not 0 < self.lambda_down < 1:
            raise ValueError("0 < lambda_down < 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.max_reinits < 0:
            raise ValueError("max_reinits must be non-negative")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    pose: Pose
    cost: float
    step_norm: float
    lam: float
    cond_B: float
    k_features: int
    rot_err_deg: float = float("nan")
    trans_err: float = float("nan")


@dataclass
class SolveResult:
    pose: Pose
    converged: bool
    reason: str                     # "converged" | "max_iterations" | "degenerate"
    records: list[IterationRecord] = field(default_factory=list)
    reinits: int = 0
    final_cost: float = float("nan")    # feature cost at ``pose``


def cost(ref, current) -> float:
    """Squared Euclidean norm of ``ref - current`` (pixels squared)."""
    ref = np.asarray(ref, dtype=float).reshape(-1)
    current = np.asarray(current, dtype=float).reshape(-1)
    if ref.shape != current.shape:
        raise DimensionMismatch(f"feature vectors differ in length: {ref.size} vs {current.size}")
    r = ref - current
    return float(r @ r)


def lm_step(J, residual, lam: float) -> np.ndarray:
    """Solve ``(J^T J + lam diag(J^T J)) dp = J^T residual``.

    Raises
    ------
    SingularNormalEquations
        If a diagonal entry of ``J^T J`` vanishes (an unobservable pose
        direction) or the damped matrix cannot be solved.
    """
    J = np.asarray(J, dtype=float)
    residual = np.asarray(residual, dtype=float).reshape(-1)
    if J.ndim != 2 or J.shape[0] != residual.size:
        raise DimensionMismatch(f"J is {J.shape}, residual has {residual.size} entries")
    JtJ = J.T @ J
    diag = np.diag(JtJ)
    if np.any(diag <= 0.0):
        raise SingularNormalEquations("J^T J has a zero diagonal entry")
    A = JtJ + lam * np.diag(diag)
    try:
        dp = np.linalg.solve(A, J.T @ residual)
    except np.linalg.LinAlgError as exc:
        raise SingularNormalEquations(str(exc)) from exc
    if not np.all(np.isfinite(dp)):
        raise SingularNormalEquations("non-finite step")
    return dp


def _restricted_cost(ref_vec, ids, obs: FeatureObservation) -> float:
    """Cost of ``obs`` against the reference on a fixed id set; inf if any id is lost."""
    try:
        return cost(ref_vec, obs.vector(ids))
    except KeyError:
        return float("inf")


def estimate_pose(renderer: Renderer, model: TargetModel, camera: CameraIntrinsics,
                  ref_obs: FeatureObservation, initial_guess: Pose,
                  sampler: SamplerConfig, lm: LMConfig,
                  ground_truth: Optional[Pose] = None,
                  map_fn: Callable = map) -> SolveResult:
    """Estimate the pose at which ``ref_obs`` was observed.

    ``map_fn`` renders the perturbation batch; pass an executor's ``map`` to
    render samples concurrently.  ``ground_truth`` only fills diagnostic error
    fields.  A ``Degenerate`` error carries the partial ``SolveResult`` in its
    ``result`` attribute.

    Raises
    ------
    InitialGuessInfeasible
        Fewer than four features shared between the initial render and ``ref_obs``.
    Degenerate
        Re-initialization budget exhausted, or no full-rank batch could be drawn.
    """
    state = {"pose": initial_guess, "reinits": 0}
    records: list[IterationRecord] = []
    try:
        return _solve(renderer, model, camera, ref_obs, sampler, lm, ground_truth, map_fn, state, records)
    except Degenerate as exc:
        exc.result = SolveResult(state["pose"], False, "degenerate", records, state["reinits"])
        raise


def _solve(renderer, model, camera, ref_obs, sampler, lm, ground_truth, map_fn, state, records):
    pose = state["pose"]
    lam = lm.lambda0
    cfg = sampler
    reinits = 0

    def render_at(p):
        return renderer(model, p, camera)

    for it in range(1, lm.max_iterations + 1):
        obs_cur = render_at(pose)
        try:
            ids_full, ref_full, (cur_full,) = common_features(ref_obs, [obs_cur])
        except InsufficientFeatures as exc:
            if it == 1:
                raise InitialGuessInfeasible(str(exc)) from exc
            raise Degenerate(f"iteration {it}: {exc}") from exc
        cost_cur = cost(ref_full, cur_full)

        attempt = 0
        while True:
            try:
                batch = sample_batch(pose, cfg, stream=(it, attempt))
            except DegenerateBatch as exc:
                raise Degenerate(str(exc)) from exc
            sample_obs = list(map_fn(render_at, batch.poses))
            try:
                ids, x_ref, vecs = common_features(ref_obs, [obs_cur] + sample_obs)
                break
            except InsufficientFeatures as exc:
                if reinits >= lm.max_reinits:
                    raise Degenerate(f"re-initialization budget spent: {exc}") from exc
                reinits += 1
                state["reinits"] = reinits
                attempt += 1
                cfg = shrink(cfg)
                log.info("iteration %d: %s; shrinking samples to theta_max=%.3g", it, exc, cfg.theta_max)

        h = vecs[0]
        E = build_feature_deltas(h, vecs[1:])
        try:
            jac = learn_jacobian(E, batch.B)
        except RankDeficientBatch as exc:
            raise Degenerate(str(exc)) from exc
        log.debug("iteration %d: cond(B)=%.4g, k=%d, cost=%.6g", it, jac.condition, len(ids), cost_cur)
        residual = x_ref - h

        converged = False
        for _ in range(MAX_REJECTIONS):
            try:
                dp = lm_step(jac.J, residual, lam)
            except SingularNormalEquations as exc:
                raise Degenerate(str(exc)) from exc
            lam_used = lam
            step_norm = float(np.linalg.norm(dp))
            if step_norm < lm.epsilon:
                converged = True
                break
            try:
                candidate = retract(pose, -dp)
                cost_new = _restricted_cost(ref_full, ids_full, render_at(candidate))
            except NearSingularRotation:
                cost_new = float("inf")
            if cost_new < cost_cur:
                lam *= lm.lambda_down
                break
            lam *= lm.lambda_up
            candidate = None
        else:
            log.debug("iteration %d stalled after %d rejections", it, MAX_REJECTIONS)

        rec = IterationRecord(it, pose, cost_cur, step_norm, lam_used, jac.condition, len(ids))
        if ground_truth is not None:
            rec = IterationRecord(it, pose, cost_cur, step_norm, lam_used, jac.condition, len(ids),
                                  rotation_error(ground_truth.rotation, pose.rotation),
                                  translation_error(ground_truth.t, pose.t))
        records.append(rec)

        if converged:
            return SolveResult(pose, True, "converged", records, reinits, cost_cur)
        final_cost = cost_cur
        if candidate is not None:
            pose = candidate
            state["pose"] = pose
            final_cost = cost_new

    return SolveResult(pose, False, "max_iterations", records, reinits, final_cost)
