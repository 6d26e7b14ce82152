"""FastAPI service exposing the complex Finsler engine.

Every endpoint returns the versioned report envelope

    {"schema": 1, "command": ..., "config": {...}, "report": {...}, "meta": {...}}

where everything outside "meta" is a deterministic function of the request
(seeds included), so identical configurations produce identical reports.
Domain and degeneracy failures map to HTTP 409, malformed requests to 422.
"""

from __future__ import annotations

import datetime
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import __version__
from ..curvature import (
    PointCurvature,
    bianchi_residuals,
    constant_curvature_residuals,
    curvature_symmetry_residuals,
    estimate_constant_curvature,
    flag_curvature,
    holomorphic_curvature,
    tau_contraction_residual,
)
from ..errors import (
    DegenerateMetricError,
    DomainError,
    DslError,
    EngineError,
    InvalidCurveError,
    NotAMetricError,
    SingularEvaluationError,
    StiffnessError,
)
from ..geodesics import (
    bump_variation,
    constant_speed_reparametrization,
    curve_length,
    exp_map,
    first_variation_check,
    geodesic_curve,
    integrate_geodesic,
    line_curve,
    second_variation_check,
    stretch_variation,
)
from ..jets import FinslerPoint, WirtingerIndex
from ..metrics import levi_data
from ..sampling import SampleConfig, explicit_points, sample_points
from ..torsion import kahler_classify, torsion_components
from ..verify import verify_metric
from .models import (
    ClassifyRequest,
    CurvatureRequest,
    EstimateCRequest,
    ExpmapRequest,
    FlagcurvRequest,
    GeodesicRequest,
    HolcurvRequest,
    JetRequest,
    LengthRequest,
    PointModel,
    PointRequest,
    VariationRequest,
    VerifyRequest,
    from_pairs,
    nested_pairs,
    pairs,
    to_pair,
)

app = FastAPI(title="cfinsler", version=__version__)

_USAGE_ERRORS = (ValueError, DslError, NotAMetricError)
_DOMAIN_ERRORS = (
    DomainError,
    DegenerateMetricError,
    SingularEvaluationError,
    InvalidCurveError,
    StiffnessError,
)


@app.exception_handler(EngineError)
async def engine_error_handler(_request: Request, exc: EngineError):
    status = 409 if isinstance(exc, _DOMAIN_ERRORS) else 422
    return JSONResponse(status_code=status,
                        content={"error": str(exc), "kind": type(exc).__name__})


@app.exception_handler(ValueError)
async def value_error_handler(_request: Request, exc: ValueError):
    return JSONResponse(status_code=422,
                        content={"error": str(exc), "kind": "ValueError"})


def _envelope(command: str, config: dict, report: dict, t0: float) -> dict:
    return {
        "schema": 1,
        "command": command,
        "config": config,
        "report": report,
        "meta": {
            "engine_version": __version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "runtime_s": round(time.time() - t0, 6),
        },
    }


def _resolve_samples(m, spec) -> list[FinslerPoint]:
    if spec.points is not None:
        return [pm.build() for pm in spec.points]
    return sample_points(m, SampleConfig(count=spec.count, seed=spec.seed,
                                         z_radius=spec.z_radius))


@app.get("/healthz")
def healthz():
    return {"status": "ok", "version": __version__}


@app.post("/v1/jet")
def jet(req: JetRequest):
    t0 = time.time()
    m = req.metric.build()
    mj = m.evaluate(req.point.build(), order=req.order, path=req.path)
    entries = []
    for i, exps in enumerate(mj.space.exponents[: len(mj.table)]):
        idx = WirtingerIndex.from_flat(exps)
        entries.append({
            "dz": list(idx.dz), "dzbar": list(idx.dzbar),
            "dv": list(idx.dv), "dvbar": list(idx.dvbar),
            "value": to_pair(mj.table[i]),
        })
    report = {"point": PointModel.dump(mj.point), "order": mj.order,
              "G": mj.G, "entries": entries,
              "conjugation_residual": mj.conjugation_residual()}
    return _envelope("jet", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/levi")
def levi(req: PointRequest):
    t0 = time.time()
    m = req.metric.build()
    ld = levi_data(m.evaluate(req.point.build(), path=req.path))
    report = {
        "matrix": nested_pairs(ld.matrix),
        "inverse": nested_pairs(ld.inverse),
        "min_eigenvalue": ld.min_eigenvalue,
        "strongly_pseudoconvex": ld.strongly_pseudoconvex,
    }
    return _envelope("levi", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/connection")
def connection(req: PointRequest):
    t0 = time.time()
    from ..connection import ChernFinsler

    m = req.metric.build()
    cf = ChernFinsler.from_metric(m, req.point.build(), req.path)
    cd = cf.connection_data
    report = {
        "gamma_semicolon": nested_pairs(cd.gamma_semicolon),
        "gamma_mixed": nested_pairs(cd.gamma_mixed),
        "gamma_vertical": nested_pairs(cd.gamma_vertical),
        "eqdvt_residual": cd.eqdvt_residual,
        "frame_residuals": cf.frame_residuals(),
    }
    return _envelope("connection", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/torsion")
def torsion(req: PointRequest):
    t0 = time.time()
    from ..connection import ChernFinsler

    m = req.metric.build()
    cf = ChernFinsler.from_metric(m, req.point.build(), req.path)
    td = torsion_components(cf.connection_data, cf.delta_derivatives)
    report = {
        "theta_horizontal": nested_pairs(td.theta_horizontal),
        "theta_mixed": nested_pairs(td.theta_mixed),
        "tau_zzbar": nested_pairs(td.tau_zzbar),
        "tau_zpsibar": nested_pairs(td.tau_zpsibar),
        "theta_dot_residual": td.theta_dot_residual,
    }
    return _envelope("torsion", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/classify")
def classify(req: ClassifyRequest):
    t0 = time.time()
    m = req.metric.build()
    pts = _resolve_samples(m, req.samples)
    report = kahler_classify(m, pts, tol=req.tol, path=req.path).to_dict()
    report["seed"] = req.samples.seed
    return _envelope("classify", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/curvature")
def curvature(req: CurvatureRequest):
    t0 = time.time()
    m = req.metric.build()
    p = req.point.build()
    pc = PointCurvature.at(m, p, req.path)
    report = {
        "r_hh": nested_pairs(pc.blocks.r_hh),
        "r_vh": nested_pairs(pc.blocks.r_vh),
        "r_hv": nested_pairs(pc.blocks.r_hv),
        "r_vv": nested_pairs(pc.blocks.r_vv),
        "symmetry": curvature_symmetry_residuals(m, p, draws=req.draws,
                                                 seed=req.seed, pc=pc),
        "tau_contraction": tau_contraction_residual(m, p, pc=pc, breakdown=True),
        "bianchi": bianchi_residuals(m, p, pc=pc),
        "holomorphic_curvature": holomorphic_curvature(m, p, pc=pc),
    }
    c = req.constant_c if req.constant_c is not None else m.constant_curvature
    if c is not None:
        report["constant_curvature"] = {
            "c": c,
            "residuals": constant_curvature_residuals(m, p, c, draws=req.draws,
                                                      seed=req.seed, pc=pc),
        }
    return _envelope("curvature", req.model_dump(exclude_none=True), report, t0)


def _holcurv_grid(m, k: int, z_max: float) -> list[FinslerPoint]:
    n = m.n
    e_dir = np.ones(n) / np.sqrt(n)
    pts = []
    for j in range(k):
        r = z_max * j / (k - 1)
        for l in range(k):
            z = r * np.exp(2j * np.pi * l / k) * e_dir
            v = np.exp(2j * np.pi * j / k) * 10.0 ** (l / max(k - 1, 1) - 0.5) * e_dir
            pts.append(FinslerPoint(z, v))
    return pts


@app.post("/v1/holcurv")
def holcurv(req: HolcurvRequest):
    t0 = time.time()
    m = req.metric.build()
    if req.grid is not None:
        pts = _holcurv_grid(m, req.grid, req.z_max)
    elif req.samples is not None:
        pts = _resolve_samples(m, req.samples)
    else:
        pts = _holcurv_grid(m, 10, req.z_max)

    workers = int(os.environ.get("CFINSLER_THREADS", "1"))

    def one(p):
        return holomorphic_curvature(m, p, path=req.path)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(one, pts))
    else:
        vals = [one(p) for p in pts]
    arr = np.asarray(vals)
    report = {
        "values": [{"z": pairs(p.z), "v": pairs(p.v), "kf": float(val)}
                   for p, val in zip(pts, arr)],
        "stats": {"min": float(arr.min()), "max": float(arr.max()),
                  "mean": float(arr.mean()), "spread": float(arr.max() - arr.min())},
    }
    return _envelope("holcurv", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/flagcurv")
def flagcurv(req: FlagcurvRequest):
    t0 = time.time()
    m = req.metric.build()
    p = req.point.build()
    pc = PointCurvature.at(m, p, req.path)
    if req.directions is not None:
        hs = [from_pairs(d) for d in req.directions]
    else:
        rng = np.random.default_rng(req.seed)
        hs = [(rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)) / np.sqrt(2)
              for _ in range(req.draws)]
    draws = [{"H": pairs(h), "value": flag_curvature(m, p, h, pc=pc)} for h in hs]
    vals = [d["value"] for d in draws]
    report = {"point": PointModel.dump(p), "draws": draws,
              "max": max(vals), "min": min(vals),
              "chi_value": flag_curvature(m, p, p.v, pc=pc)}
    return _envelope("flagcurv", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/geodesic")
def geodesic(req: GeodesicRequest, format: str = "json"):
    t0 = time.time()
    m = req.metric.build()
    start = req.start.build()
    path = integrate_geodesic(m, start, start.v, req.T, tol=req.tol,
                              samples=req.samples,
                              fixed_step_count=req.fixed_step_count)
    if format == "csv":
        return PlainTextResponse(path.to_csv(), media_type="text/csv")
    report = path.to_dict()
    report["endpoint"] = pairs(path.endpoint())
    return _envelope("geodesic", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/expmap")
def expmap(req: ExpmapRequest):
    t0 = time.time()
    m = req.metric.build()
    z = from_pairs(req.z)
    v = from_pairs(req.v)
    if np.linalg.norm(v) <= 1e-12:
        endpoint = z  # exp_p(0) = p
    else:
        endpoint = exp_map(m, FinslerPoint(z, v), v, tol=req.tol)
    return _envelope("expmap", req.model_dump(exclude_none=True), {"endpoint": pairs(endpoint)}, t0)


def _build_base_curve(m, spec):
    z = from_pairs(spec.z)
    v = from_pairs(spec.v)
    if spec.kind == "line":
        return line_curve(z, v)
    f0 = m.F(z, v)
    return geodesic_curve(m, FinslerPoint(z, v / f0), v / f0, max(spec.t0, 0.0), spec.t1)


@app.post("/v1/length")
def length(req: LengthRequest):
    t0 = time.time()
    m = req.metric.build()
    curve = _build_base_curve(m, req.curve)
    val = curve_length(m, curve, req.curve.t0, req.curve.t1, tol=req.tol)
    return _envelope("length", req.model_dump(exclude_none=True), {"value": val}, t0)


@app.post("/v1/variation")
def variation(req: VariationRequest):
    t0 = time.time()
    m = req.metric.build()
    base = _build_base_curve(m, req.base)
    a, b = req.base.t0, req.base.t1
    if req.reparametrize:
        base, _ = constant_speed_reparametrization(m, base, a, b)
    if req.family == "stretch":
        spec = stretch_variation(base, a, b)
    else:
        d = req.bump.scale * from_pairs(req.bump.direction)
        spec = bump_variation(base, a, b, d, profile=req.bump.profile)
    if req.order == 1:
        res = first_variation_check(m, spec, **({"h": req.h} if req.h else {}))
    else:
        res = second_variation_check(m, spec, **({"h": req.h} if req.h else {}))
    report = {"order": req.order, "formula": res.formula, "numeric": res.numeric,
              "residual": res.residual, "diagnostics": res.diagnostics}
    return _envelope("variation", req.model_dump(exclude_none=True), report, t0)


@app.post("/v1/verify")
def verify(req: VerifyRequest):
    t0 = time.time()
    m = req.metric.build()
    rep = verify_metric(m, seed=req.seed, points=req.points, draws=req.draws)
    return _envelope("verify", req.model_dump(exclude_none=True), rep.to_dict(), t0)


@app.post("/v1/estimate-c")
def estimate_c(req: EstimateCRequest):
    t0 = time.time()
    m = req.metric.build()
    pts = _resolve_samples(m, req.samples)
    report = estimate_constant_curvature(m, pts, path=req.path)
    report["seed"] = req.samples.seed
    return _envelope("estimate-c", req.model_dump(exclude_none=True), report, t0)
