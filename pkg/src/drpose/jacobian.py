"""Online learning of the local rendering Jacobian from a perturbation batch.

Given pose deltas ``B`` (6 x N_s) and feature deltas ``E`` (m x N_s), both
taken as "reference minus sample", the Jacobian solves ``J B = E`` in the
least-squares sense, ``J = E B^T (B B^T)^-1``.  The solve goes through an SVD
of ``B^T`` rather than forming ``(B B^T)^-1``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, RankDeficientBatch

log = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LearnedJacobian:
    J: np.ndarray           # (m, 6), pixels per unit pose parameter
    residual: float         # ||J B - E||_F
    condition: float        # cond(B)

    @property
    def n_features(self) -> int:
        return self.J.shape[0] // 2


def build_feature_deltas(ref_features, sample_features: Sequence) -> np.ndarray:
    """Matrix ``E`` whose column ``i`` is ``ref_features - sample_features[i]``."""
    ref = np.asarray(ref_features, dtype=float).reshape(-1)
    if len(sample_features) == 0:
        raise DimensionMismatch("no sample features given")
    cols = []
    for i, s in enumerate(sample_features):
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.shape != ref.shape:
            raise DimensionMismatch(f"sample {i} has {s.size} coordinates, reference has {ref.size}")
        cols.append(ref - s)
    return np.column_stack(cols)


def learn_jacobian(E, B) -> LearnedJacobian:
    """Least-squares fit of ``J`` in ``J B = E``.

    Raises
    ------
    RankDeficientBatch
        If the smallest singular value of ``B`` is below 1e-12 of the largest.
    DimensionMismatch
        If ``E`` and ``B`` disagree in column count or ``B`` is not 6 x N.
    """
    E = np.asarray(E, dtype=float)
    B = np.asarray(B, dtype=float)
    if E.ndim != 2 or B.ndim != 2 or B.shape[0] != 6:
        raise DimensionMismatch(f"expected E (m x N) and B (6 x N), got {E.shape} and {B.shape}")
    if E.shape[1] != B.shape[1]:
        raise DimensionMismatch(f"E has {E.shape[1]} columns, B has {B.shape[1]}")

    U, s, Vt = np.linalg.svd(B.T, full_matrices=False)
    if s[-1] < RANK_TOLERANCE * s[0] or s[0] == 0.0:
        raise RankDeficientBatch(f"B is rank deficient (singular values {s})")
    cond = float(s[0] / s[-1])
    # B^T J^T = E^T  =>  J^T = V diag(1/s) U^T E^T
    J = ((Vt.T / s) @ (U.T @ E.T)).T
    residual = float(np.linalg.norm(J @ B - E))
    log.debug("learned J (%dx6), cond(B)=%.3g, residual=%.3g", J.shape[0], cond, residual)
    return LearnedJacobian(J, residual, cond)
