"""Pydantic request/response models for the compute service.

Complex numbers travel as [re, im] pairs.  The metric spec record matches the
on-disk format: {"builtin": {"name", "n", "params"}} or {"dsl": {"n", "expr"}}.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..jets import FinslerPoint
from ..metrics import FinslerMetric, metric_from_spec

ComplexPair = list[float]


def to_pair(x: complex) -> ComplexPair:
    return [float(np.real(x)), float(np.imag(x))]


def pairs(vec) -> list[ComplexPair]:
    return [to_pair(x) for x in vec]


def nested_pairs(arr: np.ndarray):
    if arr.ndim == 1:
        return pairs(arr)
    return [nested_pairs(a) for a in arr]


def from_pairs(items) -> np.ndarray:
    return np.array([complex(a, b) for a, b in items])


class PointModel(BaseModel):
    z: list[ComplexPair]
    v: list[ComplexPair]

    def build(self) -> FinslerPoint:
        return FinslerPoint(from_pairs(self.z), from_pairs(self.v))

    @staticmethod
    def dump(p: FinslerPoint) -> dict:
        return {"z": pairs(p.z), "v": pairs(p.v)}


class BuiltinSpec(BaseModel):
    name: str
    n: int = Field(ge=1)
    params: dict = Field(default_factory=dict)


class DslSpec(BaseModel):
    n: int = Field(ge=1)
    expr: str


class MetricSpec(BaseModel):
    builtin: Optional[BuiltinSpec] = None
    dsl: Optional[DslSpec] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.builtin is None) == (self.dsl is None):
            raise ValueError("metric spec needs exactly one of 'builtin' or 'dsl'")
        return self

    def build(self) -> FinslerMetric:
        return metric_from_spec(self.model_dump(exclude_none=True))


class SampleSpec(BaseModel):
    points: Optional[list[PointModel]] = None
    count: int = Field(default=50, ge=1, le=10000)
    seed: int = 0
    z_radius: Optional[float] = None


class PointRequest(BaseModel):
    metric: MetricSpec
    point: PointModel
    path: Literal["auto", "analytic", "jets"] = "auto"


class JetRequest(PointRequest):
    order: int = Field(default=4, ge=1, le=4)


class ClassifyRequest(BaseModel):
    metric: MetricSpec
    samples: SampleSpec = Field(default_factory=SampleSpec)
    tol: Optional[float] = None
    path: Literal["auto", "analytic", "jets"] = "auto"


class CurvatureRequest(PointRequest):
    draws: int = Field(default=20, ge=1, le=1000)
    seed: int = 0
    constant_c: Optional[float] = None


class HolcurvRequest(BaseModel):
    metric: MetricSpec
    grid: Optional[int] = Field(default=None, ge=2, le=100)
    z_max: float = 0.9
    samples: Optional[SampleSpec] = None
    path: Literal["auto", "analytic", "jets"] = "auto"


class FlagcurvRequest(PointRequest):
    draws: int = Field(default=20, ge=1, le=1000)
    seed: int = 0
    directions: Optional[list[list[ComplexPair]]] = None


class GeodesicRequest(BaseModel):
    metric: MetricSpec
    start: PointModel
    T: float = 1.0
    tol: float = 1e-9
    samples: int = Field(default=65, ge=2, le=100000)
    fixed_step_count: Optional[int] = None


class ExpmapRequest(BaseModel):
    metric: MetricSpec
    z: list[ComplexPair]
    v: list[ComplexPair]
    tol: float = 1e-9


class CurveSpec(BaseModel):
    kind: Literal["line", "geodesic"] = "line"
    z: list[ComplexPair]
    v: list[ComplexPair]
    t0: float = 0.0
    t1: float = 1.0


class LengthRequest(BaseModel):
    metric: MetricSpec
    curve: CurveSpec
    tol: float = 1e-10


class BumpSpec(BaseModel):
    direction: list[ComplexPair]
    profile: Literal["sin", "poly"] = "sin"
    scale: float = 1.0


class VariationRequest(BaseModel):
    metric: MetricSpec
    order: Literal[1, 2]
    base: CurveSpec
    bump: BumpSpec
    family: Literal["bump", "stretch"] = "bump"
    reparametrize: bool = False
    h: Optional[float] = None


class VerifyRequest(BaseModel):
    metric: MetricSpec
    seed: int = 0
    points: int = Field(default=50, ge=2, le=1000)
    draws: int = Field(default=20, ge=1, le=1000)


class EstimateCRequest(BaseModel):
    metric: MetricSpec
    samples: SampleSpec = Field(default_factory=SampleSpec)
    path: Literal["auto", "analytic", "jets"] = "auto"
