"""6-DoF pose estimation from 2D features by online learning of the rendering
Jacobian and Levenberg-Marquardt refinement."""
from .geometry import Pose, apply_pose_delta, crp_to_rotation, pose_difference, retract, rotation_to_crp, skew
from .jacobian import LearnedJacobian, build_feature_deltas, learn_jacobian
from .metrics import PoseError, pose_error, rotation_error, translation_error
from .rendering import (
    CameraIntrinsics,
    FeatureObservation,
    TargetModel,
    common_features,
    corrupt,
    project_point,
    render,
)
from .sampling import PerturbationBatch, SamplerConfig, sample_batch, shrink
from .solver import IterationRecord, LMConfig, SolveResult, cost, estimate_pose, lm_step

__version__ = "0.1.0"
