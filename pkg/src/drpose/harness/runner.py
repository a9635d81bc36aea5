"""Run scenarios and write plot-ready per-iteration CSV files.

``iterations.csv`` columns, in order::

    iter, cost, step_norm, lambda, cond_B, k_features, rot_err_deg, trans_err,
    q1, q2, q3, t1, t2, t3

Reals are written with 17 significant digits so the file parses back to the
exact in-memory records.  ``cost`` is in px^2, ``rot_err_deg`` in degrees,
``trans_err`` and ``t*`` in scene length units.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import Degenerate, InitialGuessInfeasible
from ..geometry import Pose
from ..metrics import PoseError, pose_error
from ..rendering import corrupt, render
from ..solver import IterationRecord, SolveResult, estimate_pose
from .config import Scenario

log = logging.getLogger(__name__)

CSV_COLUMNS = ("iter", "cost", "step_norm", "lambda", "cond_B", "k_features",
               "rot_err_deg", "trans_err", "q1", "q2", "q3", "t1", "t2", "t3")

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_DEGENERATE = 3
EXIT_CONFIG = 4


@dataclass
class RunSummary:
    name: str
    error: Optional[PoseError]
    iterations: int
    converged: bool
    reason: str
    records: list[IterationRecord] = field(default_factory=list)
    wall_time: float = 0.0
    initial_cost: float = float("nan")
    final_cost: float = float("nan")
    reinits: int = 0
    pose: Optional[Pose] = None
    exit_code: int = EXIT_OK

    def line(self) -> str:
        """Single machine-parsable JSON line."""
        err = self.error
        return json.dumps({
            "name": self.name,
            "converged": self.converged,
            "reason": self.reason,
            "iterations": self.iterations,
            "rot_err_deg": None if err is None else err.rotation_error,
            "trans_err": None if err is None else err.translation_error,
            "initial_cost": _json_float(self.initial_cost),
            "final_cost": _json_float(self.final_cost),
            "reinits": self.reinits,
            "exit_code": self.exit_code,
            "wall_time_s": round(self.wall_time, 6),
        })

    def human(self) -> str:
        lines = [f"scenario     : {self.name}",
                 f"result       : {self.reason} after {self.iterations} iteration(s)"]
        if self.error is not None:
            lines.append(f"rotation err : {self.error.rotation_error:.6g} deg")
            lines.append(f"transl. err  : {self.error.translation_error:.6g}")
        lines.append(f"cost         : {self.initial_cost:.6g} -> {self.final_cost:.6g} px^2")
        lines.append(f"re-inits     : {self.reinits}")
        lines.append(f"wall time    : {self.wall_time:.3f} s")
        return "\n".join(lines)


def _json_float(x):
    return None if not np.isfinite(x) else x


def _fmt(x) -> str:
    return format(float(x), ".17g")


def record_to_row(r: IterationRecord) -> list[str]:
    return ([str(r.iteration), _fmt(r.cost), _fmt(r.step_norm), _fmt(r.lam), _fmt(r.cond_B),
             str(r.k_features), _fmt(r.rot_err_deg), _fmt(r.trans_err)]
            + [_fmt(v) for v in r.pose.q] + [_fmt(v) for v in r.pose.t])


def write_iterations_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(record_to_row(r))


def read_iterations_csv(path) -> list[IterationRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        for row in reader:
            v = [float(x) for x in row]
            out.append(IterationRecord(
                iteration=int(row[0]), pose=Pose(v[8:11], v[11:14]), cost=v[1], step_norm=v[2],
                lam=v[3], cond_B=v[4], k_features=int(row[5]), rot_err_deg=v[6], trans_err=v[7]))
    return out


def reference_observation(scenario: Scenario):
    c = scenario.corruption
    clean = render(scenario.model, scenario.ground_truth, scenario.camera)
    return corrupt(clean, noise_sigma=c.noise_sigma, outlier_fraction=c.outlier_fraction,
                   dropout_fraction=c.dropout_fraction, seed=c.seed,
                   image_size=(scenario.camera.width, scenario.camera.height))


def solve_scenario(scenario: Scenario) -> SolveResult:
    return estimate_pose(render, scenario.model, scenario.camera, reference_observation(scenario),
                         scenario.initial_pose(), scenario.sampler, scenario.lm,
                         ground_truth=scenario.ground_truth)


def run(scenario: Scenario, output_dir=None) -> RunSummary:
    """Solve one scenario; write ``iterations.csv`` into ``output_dir`` if given.

    Solver failures do not raise: the summary carries ``reason`` and the exit
    code (2 infeasible initial guess, 3 degenerate).
    """
    start = time.perf_counter()
    try:
        result = solve_scenario(scenario)
        code = EXIT_OK
    except InitialGuessInfeasible as exc:
        log.error("%s: initial guess infeasible: %s", scenario.name, exc)
        result = SolveResult(scenario.initial_pose(), False, "infeasible", [])
        code = EXIT_INFEASIBLE
    except Degenerate as exc:
        log.error("%s: degenerate: %s", scenario.name, exc)
        result = exc.result
        code = EXIT_DEGENERATE
    wall = time.perf_counter() - start

    records = result.records
    summary = RunSummary(
        name=scenario.name,
        error=pose_error(scenario.ground_truth, result.pose),
        iterations=len(records),
        converged=result.converged,
        reason=result.reason,
        records=records,
        wall_time=wall,
        initial_cost=records[0].cost if records else float("nan"),
        final_cost=result.final_cost,
        reinits=result.reinits,
        pose=result.pose,
        exit_code=code,
    )
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_iterations_csv(records, out / "iterations.csv")
    return summary


def _run_trial(args):
    scenario, index, output_dir = args
    trial = scenario.for_trial(index)
    out = None if output_dir is None else Path(output_dir) / f"trial_{index:03d}"
    return run(trial, out)


def aggregate(summaries) -> dict:
    """Median and worst-case terminal errors over the trials that produced an estimate."""
    ok = [s for s in summaries if s.exit_code != EXIT_INFEASIBLE]
    rot = np.array([s.error.rotation_error for s in ok])
    trans = np.array([s.error.translation_error for s in ok])
    return {
        "trials": len(summaries),
        "converged": sum(s.converged for s in summaries),
        "infeasible": sum(s.exit_code == EXIT_INFEASIBLE for s in summaries),
        "degenerate": sum(s.exit_code == EXIT_DEGENERATE for s in summaries),
        "median_rot_err_deg": float(np.median(rot)) if len(rot) else None,
        "worst_rot_err_deg": float(np.max(rot)) if len(rot) else None,
        "median_trans_err": float(np.median(trans)) if len(trans) else None,
        "worst_trans_err": float(np.max(trans)) if len(trans) else None,
        "median_iterations": float(np.median([s.iterations for s in summaries])),
    }


def run_batch(scenario: Scenario, n_seeds: int, output_dir=None, workers: int = 1):
    """Run ``n_seeds`` trials with seeds derived from the scenario's master seed.

    Writes ``trial_NNN/iterations.csv`` per trial and ``batch_summary.csv``.
    Results do not depend on ``workers``.
    """
    jobs = [(scenario, i, output_dir) for i in range(n_seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_trial, jobs))
    else:
        summaries = [_run_trial(j) for j in jobs]
    agg = aggregate(summaries)
    if output_dir is not None:
        with open(Path(output_dir) / "batch_summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "converged", "reason", "iterations", "rot_err_deg", "trans_err",
                        "initial_cost", "final_cost", "exit_code"])
            for i, s in enumerate(summaries):
                w.writerow([i, int(s.converged), s.reason, s.iterations, _fmt(s.error.rotation_error),
                            _fmt(s.error.translation_error), _fmt(s.initial_cost), _fmt(s.final_cost),
                            s.exit_code])
    return summaries, agg
