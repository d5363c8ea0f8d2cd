"""Run configuration: a JSON document validated against a strict schema.

Unknown keys are rejected. Validation errors are reported with the line of
the offending key in the source text.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Annotated, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InputError

Vec3 = Tuple[float, float, float]
Positive = Annotated[float, Field(gt=0)]

STAGES = ("forward", "fit", "extract", "reconstruct", "continue")


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridBlock(Strict):
    n: Tuple[int, int, int]
    lower: Vec3
    upper: Vec3

    @model_validator(mode="after")
    def _check(self):
        if min(self.n) < 2:
            raise ValueError("grid needs at least 2 voxels per axis")
        if any(u <= l for l, u in zip(self.lower, self.upper)):
            raise ValueError("grid upper corner must exceed the lower corner")
        return self


class Ball(Strict):
    shape: Literal["ball"]
    radius: Positive
    center: Vec3 = (0.0, 0.0, 0.0)


class Box(Strict):
    shape: Literal["box"]
    lower: Vec3
    upper: Vec3


class Cylinder(Strict):
    shape: Literal["cylinder"]
    axis: Literal[0, 1, 2]
    radius: Positive
    half_length: Positive
    center: Vec3 = (0.0, 0.0, 0.0)
    square: bool = False


Shape = Annotated[Union[Ball, Box, Cylinder], Field(discriminator="shape")]


class GeometryBlock(Strict):
    grid: GridBlock
    R: Positive
    omega: Shape
    inclusion: Optional[Shape] = None


class Constant(Strict):
    profile: Literal["constant"]
    value: float


class Gaussian(Strict):
    profile: Literal["gaussian"]
    amplitude: float = 1.0
    center: Vec3 = (0.0, 0.0, 0.0)
    width: Positive


class Polynomial(Strict):
    """``c0 + c . x``: an affine profile."""

    profile: Literal["affine"]
    c0: float
    c: Vec3 = (0.0, 0.0, 0.0)


class Indicator(Strict):
    profile: Literal["indicator"]
    value: float
    region: Shape


class Sum(Strict):
    profile: Literal["sum"]
    terms: List["Profile"]


Profile = Annotated[Union[Constant, Gaussian, Polynomial, Indicator, Sum],
                    Field(discriminator="profile")]
Sum.model_rebuild()


class InclusionDensity(Strict):
    rho0: Profile
    varrho: float


class MediumBlock(Strict):
    rho: Optional[Profile] = None
    inclusion_density: Optional[InclusionDensity] = None
    f: Profile
    g: Profile
    iota: Optional[Vec3] = None

    @model_validator(mode="after")
    def _one_density(self):
        if (self.rho is None) == (self.inclusion_density is None):
            raise ValueError("give exactly one of 'rho' and 'inclusion_density'")
        return self


class MeshBlock(Strict):
    n_theta: int = Field(26, ge=2)
    n_phi: Optional[int] = Field(None, ge=2)


class SweepBlock(Strict):
    kappas: Optional[List[Positive]] = None
    lo: Positive = 0.02
    hi: Positive = 0.2
    count: int = Field(12, ge=2)
    method: Literal["auto", "dense", "neumann"] = "auto"

    @model_validator(mode="after")
    def _check(self):
        ks = self.kappas
        if ks is not None and any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("kappas must be strictly increasing")
        if ks is None and not self.hi > self.lo:
            raise ValueError("sweep needs hi > lo")
        return self


class FitBlock(Strict):
    powers_u: List[int] = [-1, 0, 1, 2, 3, 4, 5, 6, 7]
    powers_lap: List[int] = [0, 1, 2, 3, 4, 5, 6, 7]


class MomentsBlock(Strict):
    m_max: int = Field(12, ge=0)


class ReconstructBlock(Strict):
    rel_reg: Positive = 1e-8
    density: Literal["none", "constant", "inclusion"] = "none"


class ContinuationBlock(Strict):
    inner_radius: Positive
    degree: int = Field(25, ge=1)
    kappa: Positive = 1.0
    gamma: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.gamma == 0:
            raise ValueError("gamma must be nonzero")
        return self


class Tolerances(Strict):
    moment_relative: Positive = 1e-2
    neumann_dense: Positive = 1e-8
    slope_window: Tuple[float, float] = (3.6, 4.4)
    continuation_relative: Positive = 1e-4


class RunConfig(Strict):
    geometry: GeometryBlock
    medium: MediumBlock
    mesh: MeshBlock = MeshBlock()
    sweep: SweepBlock = SweepBlock()
    fit: FitBlock = FitBlock()
    moments: MomentsBlock = MomentsBlock()
    reconstruct: ReconstructBlock = ReconstructBlock()
    continuation: Optional[ContinuationBlock] = None
    pipeline: List[Literal["forward", "fit", "extract", "reconstruct", "continue"]] = []
    output: str = "out"
    tolerances: Tolerances = Tolerances()

    @model_validator(mode="after")
    def _check(self):
        order = [STAGES.index(s) for s in self.pipeline]
        if order != sorted(set(order)):
            raise ValueError("pipeline stages must be distinct and in the order "
                             + ", ".join(STAGES))
        if "continue" in self.pipeline and self.continuation is None:
            raise ValueError("the 'continue' stage needs a 'continuation' block")
        if self.continuation is not None and not self.continuation.inner_radius < self.geometry.R:
            raise ValueError("continuation inner_radius must be smaller than R")
        return self


class ConfigError(InputError):
    """Invalid configuration; ``lines`` maps each message to a source line."""

    def __init__(self, messages: list):
        self.messages = messages
        super().__init__("\n".join(messages))


def _locate(text: str, path: tuple) -> Optional[int]:
    """Best-effort line number of the key at ``path`` in the JSON text."""
    pos, line = 0, None
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def parse_config(text: str, source: str = "<config>") -> tuple[RunConfig, str]:
    """Validate ``text`` and return the config with its content hash."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{source}:{exc.lineno}: {exc.msg}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError([f"{source}:1: configuration must be a JSON object"])
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = tuple(err["loc"])
            line = _locate(text, loc) or 1
            where = ".".join(str(p) for p in loc) or "<root>"
            msgs.append(f"{source}:{line}: {where}: {err['msg']}")
        raise ConfigError(msgs) from None
    return cfg, config_hash(raw)


def load_config(path) -> tuple[RunConfig, str]:
    with open(path) as fh:
        return parse_config(fh.read(), str(path))
