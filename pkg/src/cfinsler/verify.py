"""Full invariant suite: every identity the engine claims, run per metric.

Each check produces a named residual with its tolerance; `verify` passes only
if every applicable check does.  Tolerances follow the two-path split:
analytic-provider metrics are held to tighter bounds than jet-path metrics.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .connection import HorizontalVector, fiber_products, radial_fields
from .curvature import (
    PointCurvature,
    bianchi_residuals,
    constant_curvature_residuals,
    curvature_symmetry_residuals,
    flag_curvature,
    holomorphic_curvature,
    holomorphic_curvature_tensor_route,
    tau_contraction_residual,
)
from .geodesics import (
    Curve,
    bump_variation,
    constant_speed_reparametrization,
    curve_length,
    exp_map,
    first_variation_check,
    geodesic_curve,
    integrate_geodesic,
    line_curve,
    second_variation_check,
)
from .jets import FinslerPoint
from .metrics import FinslerMetric, homogeneity_residuals
from .sampling import SampleConfig, sample_points
from .torsion import kahler_classify, torsion_components


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    samples: int
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "samples": self.samples,
            "details": self.details,
        }


@dataclass
class VerifyReport:
    metric_spec: dict
    seed: int
    checks: list[CheckResult]
    runtime_s: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric_spec,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def _family(m: FinslerMetric) -> str:
    return m.spec.get("builtin", {}).get("name", "dsl")


def _zeta_set():
    return (2.0, 1j, 0.3 + 0.4j)


def verify_metric(m: FinslerMetric, seed: int = 0, points: int = 50,
                  draws: int = 20, heavy_points: int = 12) -> VerifyReport:
    t_start = time.time()
    checks: list[CheckResult] = []
    rng = np.random.default_rng(seed)
    analytic = m.is_analytic
    builtin = "builtin" in m.spec
    family = _family(m)
    is_disk = family == "poincare_ball" and m.n == 1
    pts = sample_points(m, SampleConfig(count=points, seed=seed))

    def add(name, residual, tol, samples, **details):
        checks.append(CheckResult(name, float(residual), tol, bool(residual < tol),
                                  samples, details))

    # -- pointwise suite ---------------------------------------------------------
    homog_tol = 1e-12 if analytic else (1e-9 if builtin else 1e-6)
    pointwise_tol = 1e-8 if analytic else 1e-6

    r_homog = r_conj = r_frame_dg = r_frame_dga = r_eqdvt = r_comm = 0.0
    r_radial = r_symm_chi = r_theta_dot = r_block = r_tau = 0.0
    r_tquat = r_tcin = r_kf_imag = r_kf_routes = 0.0
    r_tsei = r_dhtheta = 0.0
    min_eig = np.inf
    pcs = []
    for p in pts:
        pc = PointCurvature.at(m, p)
        pcs.append(pc)
        r_homog = max(r_homog, max(homogeneity_residuals(pc.mj).values()))
        r_conj = max(r_conj, pc.mj.conjugation_residual())
        fr = pc.cf.frame_residuals()
        r_frame_dg = max(r_frame_dg, fr["delta_G"])
        r_frame_dga = max(r_frame_dga, fr["deltabar_G_a"])
        r_eqdvt = max(r_eqdvt, fr["eqdvt"])
        r_comm = max(r_comm, fr["delta_commutation"])
        min_eig = min(min_eig, pc.cf.levi.min_eigenvalue)

        chi, _iota = radial_fields(p)
        herm, _ = fiber_products(pc.mj, chi, chi)
        r_radial = max(r_radial, abs(herm - pc.G) / (1.0 + abs(pc.G)))
        H = HorizontalVector(p, (rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)))
        _, sym = fiber_products(pc.mj, H, chi)
        r_symm_chi = max(r_symm_chi, abs(sym) / (1.0 + abs(pc.G)))

        td = torsion_components(pc.cf.connection_data, pc.cf.delta_derivatives)
        r_theta_dot = max(r_theta_dot, td.theta_dot_residual)
        r_block = max(r_block, pc.blocks.symmetry_residual())
        r_tau = max(r_tau, tau_contraction_residual(m, p, pc=pc))

        sym_res = curvature_symmetry_residuals(m, p, draws=6, seed=seed, pc=pc)
        r_tquat = max(r_tquat, sym_res["eqtquat"])
        r_tcin = max(r_tcin, sym_res["eqtcin"])
        r_tsei = max(r_tsei, sym_res["eqtsei"])
        r_dhtheta = max(r_dhtheta, sym_res["dhtheta"])

        kf = holomorphic_curvature(m, p, pc=pc)
        r_kf_routes = max(
            r_kf_routes,
            abs(kf - holomorphic_curvature_tensor_route(pc)) / (1.0 + abs(kf)),
        )

    add("homogeneity", r_homog, homog_tol, points)
    add("table_conjugation_symmetry", r_conj, 1e-9, points)
    add("levi_positive_definite", 0.0 if min_eig > 1e-10 else 1.0, 0.5, points,
        min_eigenvalue=float(min_eig))
    add("frame_delta_G", r_frame_dg, 1e-9, points)
    add("frame_deltabar_G_a", r_frame_dga, 1e-9, points)
    add("eqdvt_two_routes", r_eqdvt, 1e-9, points)
    add("delta_commutation", r_comm, 1e-8, points)
    add("radial_isometry", r_radial, 1e-9, points)
    add("symmetric_product_chi", r_symm_chi, 1e-9, points)
    add("theta_dot_vanishes", r_theta_dot, 1e-9, points)
    add("curvature_block_symmetry", r_block, 1e-10, points)
    add("tau_contraction", r_tau, 1e-8 if analytic else 1e-6, points)
    add("eqtquat", r_tquat, 1e-9, points)
    add("eqtcin", r_tcin, 1e-9, points)
    # the pair-swap symmetry is conditional on the horizontal derivative of
    # theta vanishing; it only gates metrics whose hypothesis holds
    tsei_applies = r_dhtheta < 1e-8
    checks.append(CheckResult("eqtsei_conditional", r_tsei, 1e-8,
                              bool(r_tsei < 1e-8 or not tsei_applies), points,
                              {"dhtheta_residual": r_dhtheta,
                               "hypothesis_holds": tsei_applies}))
    add("kf_route_consistency", r_kf_routes, 1e-9, points)

    # rescaling and projective invariance on a subset
    sub = pts[: min(20, len(pts))]
    r_resc = r_kf_inv = 0.0
    for p in sub:
        mj = m.evaluate(p)
        arr = mj.arrays()
        kf0 = holomorphic_curvature(m, p)
        for zeta in _zeta_set():
            p2 = FinslerPoint(p.z, zeta * p.v)
            mj2 = m.evaluate(p2)
            arr2 = mj2.arrays()
            ga = np.abs(arr2["G_a"] - np.conj(zeta) * arr["G_a"]).max()
            lv = np.abs(arr2["levi"] - arr["levi"]).max()
            scale = 1.0 + max(np.abs(arr2["G_a"]).max(), np.abs(arr["levi"]).max())
            r_resc = max(r_resc, ga / scale, lv / scale)
            kf2 = holomorphic_curvature(m, p2)
            r_kf_inv = max(r_kf_inv, abs(kf2 - kf0) / (1.0 + abs(kf0)))
    add("rescaling_invariance", r_resc, 1e-9, len(sub))
    add("kf_projective_invariance", r_kf_inv, 1e-8, len(sub))

    if analytic:
        r_dual = 0.0
        for p in pts[: min(10, len(pts))]:
            ta = m.evaluate(p, path="analytic").table
            tj = m.evaluate(p, path="jets").table
            r_dual = max(r_dual, np.abs(ta - tj).max() / (1.0 + np.abs(ta).max()))
        add("dual_path_agreement", r_dual, 1e-8, min(10, len(pts)))

    if m.hermitian:
        r_fiber3 = 0.0
        for pc in pcs[: min(20, len(pcs))]:
            arr = pc.mj.arrays()
            scale = 1.0 + np.abs(arr["levi"]).max()
            r_fiber3 = max(r_fiber3, np.abs(arr["G_abc"]).max() / scale,
                           np.abs(arr["G_abbar_c"]).max() / scale)
        add("hermitian_fiber_derivatives", r_fiber3, 1e-10, min(20, len(pcs)))
    elif m.hermitian is False:
        probe = FinslerPoint(np.zeros(m.n), np.ones(m.n))
        arr = m.evaluate(probe).arrays()
        r_probe = np.abs(arr["G_abbar_c"]).max() / (1.0 + np.abs(arr["levi"]).max())
        checks.append(CheckResult("non_hermitian_detected", float(r_probe), 1e-2,
                                  bool(r_probe > 1e-2), 1,
                                  {"meaning": "residual must EXCEED tolerance"}))

    report = kahler_classify(m, pts, path="auto")
    chain_ok = (not report.strongly_kahler or report.kahler) and (
        not report.kahler or report.weakly_kahler
    )
    checks.append(CheckResult("kahler_implication_chain", 0.0 if chain_ok else 1.0, 0.5,
                              chain_ok, points, report.to_dict()["verdicts"]))

    r_bianchi = 0.0
    for p in pts[: min(heavy_points, len(pts))]:
        r_bianchi = max(r_bianchi, max(bianchi_residuals(m, p).values()))
    add("bianchi_dtheta_dtau", r_bianchi, 1e-6, min(heavy_points, len(pts)))

    # -- constant-curvature suite -------------------------------------------------
    if m.constant_curvature is not None:
        c = m.constant_curvature
        r_cc = 0.0
        r_flag_sign = -np.inf
        r_flag_dec = 0.0
        cc_pts = pts[: min(20, len(pts))]
        for p in cc_pts:
            pc = PointCurvature.at(m, p)
            r_cc = max(r_cc, max(constant_curvature_residuals(
                m, p, c, draws=draws, seed=seed, pc=pc).values()))
            for _ in range(5):
                H = rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)
                val = flag_curvature(m, p, H, pc=pc)
                if c <= 0:
                    r_flag_sign = max(r_flag_sign, val)
                # decomposition: flag(zeta chi + H_perp) == flag(H_perp); zeta
                # real, since the flag form is real-quadratic in the pole part
                levi = pc.arrays["levi"]
                chi = p.v
                hp = H - (np.einsum("ab,a,b->", levi, H, np.conj(chi))
                          / np.einsum("ab,a,b->", levi, chi, np.conj(chi))) * chi
                if np.linalg.norm(hp) > 1e-6:
                    zeta = float(rng.standard_normal())
                    f1 = flag_curvature(m, p, zeta * chi + hp, pc=pc)
                    f2 = flag_curvature(m, p, hp, pc=pc)
                    r_flag_dec = max(r_flag_dec, abs(f1 - f2) / (1.0 + abs(f2)))
        add("constant_curvature_identities", r_cc, 1e-6, len(cc_pts), c=c)
        if c <= 0:
            add("flag_curvature_sign", r_flag_sign, 1e-8, len(cc_pts) * 5,
                meaning="max flag value over draws; must be <= 1e-8")
        add("flag_curvature_decomposition", r_flag_dec, 1e-7, len(cc_pts) * 5)

    # -- geodesic suite --------------------------------------------------------------
    gp = _generic_start(m, rng)
    horizon = 0.5 if m.domain_radius is not None else 1.0

    r_speed = 0.0
    for _ in range(3):
        v = rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)
        path = integrate_geodesic(m, gp, v, horizon, tol=1e-9)
        r_speed = max(r_speed, path.meta["speed_drift"] / path.meta["unit_speed_factor"])
    add("geodesic_speed_conservation", r_speed, 1e-8, 3)

    v0 = rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)
    f0 = m.F(gp.z, v0)
    base = geodesic_curve(m, gp, v0 / f0, 0.0, horizon, tol=1e-12)
    r_crit = 0.0
    for _ in range(5):
        d = rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)
        spec = bump_variation(base, 0.0, horizon, 0.3 * d, profile="sin")
        res = first_variation_check(m, spec)
        r_crit = max(r_crit, abs(res.numeric))
    add("geodesic_criticality", r_crit, 1e-5, 5)

    path = integrate_geodesic(m, gp, v0, horizon, tol=1e-11)
    mid_sig, mid_dot = path.state(horizon / 2)
    tail = integrate_geodesic(m, FinslerPoint(mid_sig, mid_dot), mid_dot,
                              horizon / 2, tol=1e-11)
    r_mid = np.abs(tail.endpoint() - path.endpoint()).max()
    add("geodesic_midpoint_uniqueness", r_mid, 1e-6, 1)

    if is_disk:
        origin = FinslerPoint([0.0], [1.0])
        r_exp = 0.0
        for t in (0.5, 1.0, 2.0):
            for theta in (0.0, math.pi / 3, math.pi / 2):
                target = math.tanh(t) * np.exp(1j * theta)
                got = exp_map(m, origin, [t * np.exp(1j * theta)])[0]
                r_exp = max(r_exp, abs(got - target))
        add("disk_exp_exactness", r_exp, 1e-6, 9)

        L = curve_length(m, line_curve([0.0], [0.5]), 0.0, 1.0, tol=1e-12)
        add("disk_length_oracle", abs(L - math.atanh(0.5)), 1e-8, 1)

        errs = []
        for steps in (40, 80):
            pth = integrate_geodesic(m, origin, [1.0], 1.0, fixed_step_count=steps)
            errs.append(abs(pth.endpoint()[0] - math.tanh(1.0)))
        ratio = errs[0] / errs[1]
        checks.append(CheckResult("rk4_convergence_order", float(ratio), 24.0,
                                  bool(10.0 <= ratio <= 24.0), 2,
                                  {"meaning": "error ratio for halved step; ~16 expected"}))

    # -- variation suite ----------------------------------------------------------------
    raw = _nongeodesic_curve(m, rng)
    const_base, _speed = constant_speed_reparametrization(m, raw, 0.0, 1.0)
    d = rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)
    spec = bump_variation(const_base, 0.0, 1.0, 0.2 * d, profile="poly")
    res = first_variation_check(m, spec)
    add("first_variation_agreement", res.residual, 1e-4, 1, **{
        k: v for k, v in res.diagnostics.items() if isinstance(v, (int, float, bool))})

    d2 = rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)
    spec2 = bump_variation(base, 0.0, horizon, 0.3 * d2, profile="sin")
    res2 = second_variation_check(m, spec2)
    add("second_variation_agreement", res2.residual, 1e-3, 1,
        formula=res2.formula, numeric=res2.numeric)

    if family == "euclidean" and m.n >= 2:
        flat_base = line_curve(np.zeros(m.n), np.eye(m.n)[0])
        e2 = np.zeros(m.n)
        e2[1] = 1.0
        flat_spec = bump_variation(flat_base, 0.0, 1.0, e2, profile="sin")
        flat = second_variation_check(m, flat_spec)
        add("second_variation_flat_oracle", abs(flat.formula - math.pi**2 / 2), 1e-4, 1,
            formula=flat.formula, numeric=flat.numeric)

    return VerifyReport(m.spec, seed, checks, time.time() - t_start)


def _generic_start(m: FinslerMetric, rng) -> FinslerPoint:
    if m.domain_radius is not None:
        z = 0.1 * (rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n))
        z *= m.domain_radius / max(1.0, 4 * np.linalg.norm(z))
    else:
        z = 0.3 * (rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n))
    v = rng.standard_normal(m.n) + 1j * rng.standard_normal(m.n)
    v /= np.abs(v).min() * 4  # keep components away from the axes
    return FinslerPoint(z, v)


def _nongeodesic_curve(m: FinslerMetric, rng) -> Curve:
    """A bounded closed-form curve with non-vanishing tangent, generic enough
    to be non-geodesic for every built-in family."""
    n = m.n
    radii = 0.15 + 0.1 * rng.random(n)
    phases = 2.0 * math.pi * rng.random(n)
    signs = np.where(rng.random(n) > 0.5, 1.0, -1.0)

    def position(t):
        return radii * np.exp(1j * (signs * t + phases))

    def velocity(t):
        return 1j * signs * radii * np.exp(1j * (signs * t + phases))

    return Curve(position, velocity)
