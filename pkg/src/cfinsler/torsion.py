"""Torsion components of the Chern-Finsler connection and Kähler classification.

The (2,0)-torsion theta splits into a horizontal part (dz wedge dz) and a
mixed part (psi wedge dz); the (1,1)-torsion tau has a dz wedge dzbar part
and a dz wedge psibar part.  The three Kähler notions are the vanishing of
the horizontal part, of its contraction with the radial field chi, and of
that contraction paired against chi:

    strongly Kähler   Gamma^a_{m;n} == Gamma^a_{n;m}
    Kähler            Gamma^a_{m;n} v^m == Gamma^a_{n;m} v^m
    weakly Kähler     G_a (Gamma^a_{m;n} - Gamma^a_{n;m}) v^m == 0

and the mixed part vanishes iff the metric comes from a hermitian metric
(G_{b tbar c} == 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .connection import (
    ChernFinsler,
    ConnectionData,
    DeltaDerivatives,
    HorizontalVector,
    VerticalVector,
)
from .errors import DegenerateMetricError
from .jets import FinslerPoint
from .metrics import FinslerMetric


@dataclass(frozen=True)
class TorsionData:
    theta_horizontal: np.ndarray  # [a, s, nu] = (Gamma^a_{nu;s} - Gamma^a_{s;nu}) / 2
    theta_mixed: np.ndarray       # [a, nu, g] = Gamma^a_{nu g}  (psi^g wedge dz^nu part)
    tau_zzbar: np.ndarray         # [a, m, nu] = -delta_nubar(Gamma^a_{;m})
    tau_zpsibar: np.ndarray       # [a, m, b]  = -Gamma^a_{bbar;m}
    theta_dot_residual: float     # assembled vertical (2,0)-torsion, must vanish


def torsion_components(c: ConnectionData, d: DeltaDerivatives) -> TorsionData:
    gm = c.gamma_mixed
    theta_h = 0.5 * (gm.transpose(0, 2, 1) - gm)  # [a, s, nu]
    # vertical (2,0)-torsion: dz^m^dz^nu, psi^b^dz^m and psi^b^psi^g parts;
    # each vanishes identically (delta-commutation, the two Gamma routes, and
    # the symmetry of Gamma^a_{bc}), so the assembled max is a self-test.
    dgh = d.delta_gamma_h
    scale = 1.0 + max(np.abs(dgh).max(), np.abs(c.gamma_vertical).max())
    dzdz = 0.5 * np.abs(dgh - dgh.transpose(0, 2, 1)).max() / scale
    # the psi^b wedge dz^m part is dot-d_b(Gamma^a_{;m}) minus the definition
    # route for Gamma^a_{b;m}, i.e. the eqdvt gap (already scale-invariant)
    psidz = c.eqdvt_residual
    psipsi = 0.5 * np.abs(c.gamma_vertical - c.gamma_vertical.transpose(0, 2, 1)).max() / scale
    theta_dot = float(max(dzdz, psidz, psipsi))
    return TorsionData(
        theta_horizontal=theta_h,
        theta_mixed=c.gamma_vertical.transpose(0, 2, 1).copy(),  # [a, nu, g]
        tau_zzbar=-d.delta_gamma_a,
        tau_zpsibar=-d.gamma_bar.transpose(0, 2, 1).copy(),  # [a, m, b]
        theta_dot_residual=theta_dot,
    )


def torsion_at(m: FinslerMetric, p: FinslerPoint, path: str = "auto") -> TorsionData:
    cf = ChernFinsler.from_metric(m, p, path)
    return torsion_components(cf.connection_data, cf.delta_derivatives)


def theta_contract(t: TorsionData, H, K) -> HorizontalVector:
    """theta(H, K) for frame vectors; horizontal part for two horizontal
    arguments, mixed part when one argument is vertical."""
    if isinstance(H, HorizontalVector) and isinstance(K, HorizontalVector):
        comps = 2.0 * np.einsum("asn,s,n->a", t.theta_horizontal, H.comps, K.comps)
        return HorizontalVector(H.point, comps)
    if isinstance(H, HorizontalVector) and isinstance(K, VerticalVector):
        comps = -np.einsum("ang,n,g->a", t.theta_mixed, H.comps, K.comps)
        return HorizontalVector(H.point, comps)
    if isinstance(H, VerticalVector) and isinstance(K, HorizontalVector):
        comps = np.einsum("ang,n,g->a", t.theta_mixed, K.comps, H.comps)
        return HorizontalVector(H.point, comps)
    return HorizontalVector(H.point, np.zeros(H.point.n, dtype=complex))


# -- classification ------------------------------------------------------------------


@dataclass(frozen=True)
class KahlerReport:
    residual_strong: float
    residual_kahler: float
    residual_weak: float
    residual_hermitian: float
    tolerance: float
    strongly_kahler: bool
    kahler: bool
    weakly_kahler: bool
    hermitian: bool
    samples_used: int
    samples_excluded: int
    worst_offenders: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "residuals": {
                "strong": self.residual_strong,
                "kahler": self.residual_kahler,
                "weak": self.residual_weak,
                "hermitian": self.residual_hermitian,
            },
            "verdicts": {
                "strongly_kahler": self.strongly_kahler,
                "kahler": self.kahler,
                "weakly_kahler": self.weakly_kahler,
                "hermitian": self.hermitian,
            },
            "tolerance": self.tolerance,
            "samples_used": self.samples_used,
            "samples_excluded": self.samples_excluded,
            "worst_offenders": self.worst_offenders,
        }


def kahler_classify(m: FinslerMetric, samples: list[FinslerPoint],
                    tol: float | None = None, path: str = "auto") -> KahlerReport:
    """Sample-based three-level Kähler classification plus hermitian detection.

    Residuals are scale-invariant maxima over the sample set; a sample with a
    degenerate Levi matrix is excluded and counted.
    """
    if tol is None:
        tol = 1e-8 if m.is_analytic else 1e-6
    res = {"strong": 0.0, "kahler": 0.0, "weak": 0.0, "hermitian": 0.0}
    worst = {}
    used = excluded = 0
    for i, p in enumerate(samples):
        try:
            cf = ChernFinsler.from_metric(m, p, path)
        except DegenerateMetricError:
            excluded += 1
            continue
        used += 1
        cd = cf.connection_data
        gm = cd.gamma_mixed
        v = p.v
        scale = 1.0 + np.abs(gm).max()
        diff = gm - gm.transpose(0, 2, 1)  # [a, m, nu] - [a, nu, m]
        r_strong = np.abs(diff).max() / scale
        contracted = np.einsum("amn,m->an", diff, v)
        scale_k = 1.0 + np.einsum("amn,m->an", np.abs(gm), np.abs(v)).max()
        r_kahler = np.abs(contracted).max() / scale_k
        g_a = cf.mj.arrays()["G_a"]
        weak = np.einsum("a,an->n", g_a, contracted)
        scale_w = 1.0 + (np.abs(g_a) @ np.einsum("amn,m->an", np.abs(gm), np.abs(v))).max()
        r_weak = np.abs(weak).max() / scale_w
        g3 = cf.mj.arrays()["G_abbar_c"]
        r_herm = np.abs(g3).max() / (1.0 + np.abs(cf.levi.matrix).max())
        for key, val in (("strong", r_strong), ("kahler", r_kahler),
                         ("weak", r_weak), ("hermitian", r_herm)):
            if val > res[key]:
                res[key] = float(val)
                worst[key] = {
                    "sample": i,
                    "z": [[c.real, c.imag] for c in p.z],
                    "v": [[c.real, c.imag] for c in p.v],
                    "residual": float(val),
                }
    if used == 0:
        raise DegenerateMetricError("all classification samples were degenerate")
    return KahlerReport(
        residual_strong=res["strong"],
        residual_kahler=res["kahler"],
        residual_weak=res["weak"],
        residual_hermitian=res["hermitian"],
        tolerance=tol,
        strongly_kahler=res["strong"] < tol,
        kahler=res["kahler"] < tol,
        weakly_kahler=res["weak"] < tol,
        hermitian=res["hermitian"] < tol,
        samples_used=used,
        samples_excluded=excluded,
        worst_offenders=worst,
    )
