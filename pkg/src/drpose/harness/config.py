"""Scenario files.

A scenario is a YAML mapping; units are explicit and unknown keys are errors::

    name: cube8-noiseless            # optional label
    seed: 0                          # master seed, used by batch mode
    model: cube8                     # cube8 | asymmetric12 | "random{n,seed}" | {file: path}
    camera:                          # optional; default 640x480, fx=fy=500, centred
      fx: 500.0                      # pixels
      fy: 500.0
      gamma: 0.0
      x0: 320.0
      y0: 240.0
      width: 640
      height: 480
    ground_truth:
      q: [0.1, -0.2, 0.15]           # Gibbs vector
      t: [0.2, -0.1, 10.0]           # scene length units
    initial_guess:
      offset:                        # or  pose: {q: [...], t: [...]}
        rotation_deg: 5.0            # about a random axis
        translation_fraction: 0.02   # fraction of |t_truth|, random direction
        seed: 7
    corruption:                      # optional; all default to zero
      noise_sigma: 0.0               # pixels
      outlier_fraction: 0.0
      dropout_fraction: 0.0
      seed: 0
    sampler:
      theta_max: 0.01                # radians
      translation_half_widths: [0.01, 0.01, 0.01]   # length units
      n_samples: 24
      cap_half_angle: 1.5707963      # radians
      conservative_scale: 0.5
      seed: 0
    lm:                              # optional; defaults shown
      lambda0: 1.0e-3
      lambda_up: 10.0
      lambda_down: 0.1
      epsilon: 1.0e-6
      max_iterations: 20
      max_reinits: 5

``camera`` may also be ``{file: path}`` pointing at a camera file.  Relative
paths resolve against the scenario file's directory.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from ..errors import ConfigError, ParseError, ValidationError
from ..geometry import Pose, crp_to_rotation
from ..rendering import CameraIntrinsics, TargetModel
from ..sampling import SamplerConfig, make_rng
from ..solver import LMConfig
from .models import generate_model, load_camera, load_model


@dataclass(frozen=True)
class OffsetSpec:
    rotation_deg: float
    translation_fraction: float
    seed: int = 0

    def apply(self, truth: Pose) -> Pose:
        """Rotate ``truth`` by ``rotation_deg`` about a random axis and shift it
        by ``translation_fraction * |t|`` in a random direction."""
        rng = make_rng(self.seed)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        dq = np.tan(0.5 * np.radians(self.rotation_deg)) * axis
        R = truth.rotation @ crp_to_rotation(dq)
        t = truth.t + self.translation_fraction * np.linalg.norm(truth.t) * direction
        return Pose.from_rotation(R, t)


@dataclass(frozen=True)
class Corruption:
    noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    dropout_fraction: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class Scenario:
    model: TargetModel
    camera: CameraIntrinsics
    ground_truth: Pose
    initial_guess: object           # Pose or OffsetSpec
    sampler: SamplerConfig
    lm: LMConfig
    corruption: Corruption = Corruption()
    seed: int = 0
    name: str = "scenario"
    model_label: str = ""

    def initial_pose(self) -> Pose:
        if isinstance(self.initial_guess, OffsetSpec):
            return self.initial_guess.apply(self.ground_truth)
        return self.initial_guess

    def for_trial(self, index: int) -> "Scenario":
        """Copy with offset, corruption and sampler seeds derived from ``(seed, index)``."""
        offset_seed, noise_seed, sampler_seed = (
            np.random.SeedSequence(self.seed, spawn_key=(index,)).generate_state(3).tolist())
        guess = self.initial_guess
        if isinstance(guess, OffsetSpec):
            guess = dataclasses.replace(guess, seed=offset_seed)
        return dataclasses.replace(
            self,
            initial_guess=guess,
            corruption=dataclasses.replace(self.corruption, seed=noise_seed),
            sampler=dataclasses.replace(self.sampler, seed=sampler_seed),
            name=f"{self.name}-trial{index:03d}",
        )


def _key_lines(node, path=()):
    """Map key paths to 1-based line numbers from a composed YAML node tree."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = path + (str(k.value),)
            out[p] = k.start_mark.line + 1
            out.update(_key_lines(v, p))
    return out


class _Reader:
    """Pulls typed fields out of one mapping and rejects leftovers."""

    def __init__(self, data, path, lines, source):
        self.path = path
        self.lines = lines
        self.source = source
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ParseError(f"{self._where(path)}: expected a mapping")
        self.data = dict(data)

    def _where(self, path):
        dotted = ".".join(path) or "<root>"
        line = self.lines.get(path)
        return f"{self.source}:{line}: {dotted}" if line else f"{self.source}: {dotted}"

    def has(self, key):
        return key in self.data

    def get(self, key, kind, default=dataclasses.MISSING):
        p = self.path + (key,)
        if key not in self.data:
            if default is dataclasses.MISSING:
                raise ParseError(f"{self._where(self.path)}: missing required field '{key}'")
            return default
        value = self.data.pop(key)
        try:
            if kind == "vec3":
                arr = np.array(value, dtype=float)
                if arr.shape != (3,):
                    raise ValueError("expected 3 numbers")
                return arr
            if kind is int and (isinstance(value, bool) or float(value) != int(value)):
                raise ValueError("expected an integer")
            if kind is float and isinstance(value, bool):
                raise ValueError("expected a number")
            return kind(value)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{self._where(p)}: {exc}") from exc

    def sub(self, key, required=True):
        if key not in self.data:
            if required:
                raise ParseError(f"{self._where(self.path)}: missing required section '{key}'")
            return _Reader({}, self.path + (key,), self.lines, self.source)
        return _Reader(self.data.pop(key), self.path + (key,), self.lines, self.source)

    def finish(self):
        for key in self.data:
            raise ParseError(f"{self._where(self.path + (str(key),))}: unknown field '{key}'")


def _validated(section: str, build):
    try:
        return build()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ValidationError(f"{section}: {exc}") from exc


def _pose(r: _Reader) -> Pose:
    q = r.get("q", "vec3")
    t = r.get("t", "vec3")
    r.finish()
    return _validated(".".join(r.path), lambda: Pose(q, t))


def scenario_from_dict(data, lines=None, source="<scenario>", base_dir: Optional[Path] = None) -> Scenario:
    lines = lines or {}
    base_dir = Path(base_dir or ".")
    root = _Reader(data, (), lines, source)

    name = root.get("name", str, "scenario")
    seed = root.get("seed", int, 0)

    if root.has("model") and isinstance(root.data["model"], dict) and "file" in root.data["model"]:
        m = root.sub("model")
        path = base_dir / m.get("file", str)
        m.finish()
        model, label = load_model(path), str(path)
    else:
        spec = root.get("model", lambda v: v)
        if isinstance(spec, dict):
            m = _Reader(spec, ("model",), lines, source)
            spec = {"generator": m.get("generator", str), "n": m.get("n", int), "seed": m.get("seed", int, 0)}
            m.finish()
        model = generate_model(spec)
        label = spec if isinstance(spec, str) else f"random{{{spec['n']},{spec['seed']}}}"

    if root.has("camera"):
        c = root.sub("camera")
        if c.has("file"):
            path = base_dir / c.get("file", str)
            c.finish()
            camera = load_camera(path)
        else:
            kw = dict(fx=c.get("fx", float), fy=c.get("fy", float), x0=c.get("x0", float),
                      y0=c.get("y0", float), width=c.get("width", int), height=c.get("height", int),
                      gamma=c.get("gamma", float, 0.0))
            c.finish()
            camera = _validated("camera", lambda: CameraIntrinsics(**kw))
    else:
        camera = CameraIntrinsics.default()

    truth = _pose(root.sub("ground_truth"))

    g = root.sub("initial_guess")
    if g.has("pose") == g.has("offset"):
        raise ParseError(f"{g._where(g.path)}: give exactly one of 'pose' or 'offset'")
    if g.has("pose"):
        guess = _pose(g.sub("pose"))
    else:
        o = g.sub("offset")
        rot = o.get("rotation_deg", float)
        frac = o.get("translation_fraction", float)
        oseed = o.get("seed", int, 0)
        o.finish()
        if not (0 <= rot < 180):
            raise ValidationError("initial_guess.offset: 0 <= rotation_deg < 180")
        if frac < 0:
            raise ValidationError("initial_guess.offset: translation_fraction >= 0")
        guess = OffsetSpec(rot, frac, oseed)
    g.finish()

    c = root.sub("corruption", required=False)
    corruption = Corruption(c.get("noise_sigma", float, 0.0), c.get("outlier_fraction", float, 0.0),
                            c.get("dropout_fraction", float, 0.0), c.get("seed", int, 0))
    c.finish()
    if corruption.noise_sigma < 0:
        raise ValidationError("corruption: noise_sigma >= 0")
    for field_name in ("outlier_fraction", "dropout_fraction"):
        if not 0 <= getattr(corruption, field_name) <= 1:
            raise ValidationError(f"corruption: 0 <= {field_name} <= 1")

    s = root.sub("sampler")
    sampler_kw = dict(
        theta_max=s.get("theta_max", float),
        translation_half_widths=tuple(s.get("translation_half_widths", "vec3")),
        n_samples=s.get("n_samples", int, 24),
        cap_half_angle=s.get("cap_half_angle", float, np.pi / 2),
        conservative_scale=s.get("conservative_scale", float, 0.5),
        seed=s.get("seed", int, 0),
    )
    s.finish()
    sampler = _validated("sampler", lambda: SamplerConfig(**sampler_kw))

    r = root.sub("lm", required=False)
    defaults = LMConfig()
    lm_kw = dict(
        lambda0=r.get("lambda0", float, defaults.lambda0),
        lambda_up=r.get("lambda_up", float, defaults.lambda_up),
        lambda_down=r.get("lambda_down", float, defaults.lambda_down),
        epsilon=r.get("epsilon", float, defaults.epsilon),
        max_iterations=r.get("max_iterations", int, defaults.max_iterations),
        max_reinits=r.get("max_reinits", int, defaults.max_reinits),
    )
    r.finish()
    if not lm_kw["lambda0"] > 0:
        raise ValidationError("lm: lambda0 > 0")
    lm = _validated("lm", lambda: LMConfig(**lm_kw))

    root.finish()
    return Scenario(model=model, camera=camera, ground_truth=truth, initial_guess=guess,
                    sampler=sampler, lm=lm, corruption=corruption, seed=seed, name=name,
                    model_label=label)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file.

    Raises
    ------
    ParseError
        Malformed YAML, unknown or missing keys, wrong value types; the message
        carries ``file:line: dotted.key`` context.
    ValidationError
        A well-formed value violates an invariant (e.g. ``lambda_up > 1``).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return scenario_from_dict(data, _key_lines(node), str(path), path.parent)
