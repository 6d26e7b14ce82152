"""Chern-Finsler connection coefficients and their horizontal derivatives.

Everything at a point is carried as a local Wirtinger expansion (a jet in
the 4n formal directions z, zbar, v, vbar), assembled from the order-4
metric table.  Differentiating a coefficient is an index shift, so the
delta-derivatives needed by the curvature blocks come out of the same
algebra with no nested finite differences.

Coefficient conventions (arrays are indexed [upper, lower..., semicolon...]):

    gamma1[a][m]        Gamma^a_{;m}     = G^{tbar a} G_{tbar;m}
    mixed[a][b][m]      Gamma^a_{b;m}    = dot-d_b Gamma^a_{;m}
                        (definition route: G^{tbar a} delta_m(G_{b tbar}))
    vertical[a][b][c]   Gamma^a_{bc}     = G^{tbar a} G_{b tbar c}
    gamma_bar[a][g][m]  Gamma^a_{gbar;m} = dot-d_gbar Gamma^a_{;m}

and the horizontal frame is delta_m = d_m - Gamma^s_{;m} dot-d_s.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateMetricError
from .jets import (
    FinslerPoint,
    TaylorJet,
    WirtingerIndex,
    d_v,
    d_vbar,
    d_z,
    d_zbar,
    jet_constant,
    wirtinger_conj,
)
from .metrics import EPS_PD, FinslerMetric, MetricJet, levi_data


# -- frame vectors -------------------------------------------------------------


@dataclass(frozen=True)
class HorizontalVector:
    """Components in the horizontal frame delta_mu at a base point."""

    point: FinslerPoint
    comps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "comps", np.asarray(self.comps, dtype=complex).reshape(-1))
        if self.comps.shape[0] != self.point.n:
            raise ValueError("component count does not match the point dimension")


@dataclass(frozen=True)
class VerticalVector:
    """Components in the vertical frame dot-d_alpha at a base point."""

    point: FinslerPoint
    comps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "comps", np.asarray(self.comps, dtype=complex).reshape(-1))
        if self.comps.shape[0] != self.point.n:
            raise ValueError("component count does not match the point dimension")


def radial_fields(p: FinslerPoint) -> tuple[HorizontalVector, VerticalVector]:
    """The horizontal and vertical radial fields; both have components v."""
    return HorizontalVector(p, p.v.copy()), VerticalVector(p, p.v.copy())


def _same_point(a, b):
    if a.point.n != b.point.n or not (
        np.allclose(a.point.z, b.point.z) and np.allclose(a.point.v, b.point.v)
    ):
        raise ValueError("vectors are attached to different base points")


def fiber_products(mj: MetricJet, H, K) -> tuple[complex, complex]:
    """Hermitian product <H,K> = G_{a bbar} H^a conj(K^b) and symmetric
    product <<H,K>> = G_{ab} H^a K^b of two frame vectors at mj.point."""
    _same_point(H, K)
    a = mj.arrays()
    herm = complex(np.einsum("ab,a,b->", a["levi"], H.comps, np.conj(K.comps)))
    symm = complex(np.einsum("ab,a,b->", a["G_ab"], H.comps, K.comps))
    return herm, symm


# -- spec data records ----------------------------------------------------------


@dataclass(frozen=True)
class ConnectionData:
    gamma_semicolon: np.ndarray  # [a, m]       Gamma^a_{;m}
    gamma_mixed: np.ndarray      # [a, b, m]    Gamma^a_{b;m}  (definition route)
    gamma_vertical: np.ndarray   # [a, b, c]    Gamma^a_{bc}
    eqdvt_residual: float        # definition route vs dot-d_b(Gamma^a_{;m})


@dataclass(frozen=True)
class DeltaDerivatives:
    delta_gamma_h: np.ndarray      # [a, m, nu]      delta_nu  (Gamma^a_{;m})
    delta_gamma_a: np.ndarray      # [a, m, nu]      delta_nubar (Gamma^a_{;m})
    delta_mixed_a: np.ndarray      # [a, b, m, nu]   delta_nubar (Gamma^a_{b;m})
    delta_vert_a: np.ndarray       # [a, b, c, nu]   delta_nubar (Gamma^a_{bc})
    gamma_bar: np.ndarray          # [a, g, m]       Gamma^a_{gbar;m}
    dot_vert_a: np.ndarray         # [a, b, c, g]    dot-d_gbar (Gamma^a_{bc})
    dot_mixed_a: np.ndarray        # [a, b, m, g]    dot-d_gbar (Gamma^a_{b;m})


# -- the coefficient algebra ------------------------------------------------------


class ChernFinsler:
    """Connection data of a strongly pseudoconvex metric at one point.

    Jets are built lazily; orders are what the order-4 metric table affords:
    Levi matrix and Gamma^a_{;m} to order 2, everything below to order 1.
    """

    def __init__(self, mj: MetricJet):
        if mj.order < 3:
            raise ValueError("connection data needs a metric jet of order >= 3")
        self.mj = mj
        self.n = mj.n
        self.levi = levi_data(mj)
        if not self.levi.strongly_pseudoconvex:
            raise DegenerateMetricError(
                f"Levi matrix not positive definite (min eigenvalue {self.levi.min_eigenvalue:.3e})"
            )

    @classmethod
    def from_metric(cls, m: FinslerMetric, p: FinslerPoint, path: str = "auto") -> "ChernFinsler":
        return cls(m.evaluate(p, order=4, path=path))

    # -- base jets --------------------------------------------------------------

    def _w(self, **kw) -> WirtingerIndex:
        return WirtingerIndex.make(self.n, **kw)

    @cached_property
    def _g_jets(self):
        order = min(2, self.mj.order - 2)
        return [
            [self.mj.field(self._w(dv=[a], dvbar=[b]), order) for b in range(self.n)]
            for a in range(self.n)
        ]

    @cached_property
    def _ginv_jets(self):
        """Jets of G^{bbar a}: Neumann-series inverse around the numeric Levi
        inverse, ginv = (I + M + M^2 + ...) g0inv with M = -g0inv (g - g0)."""
        n = self.n
        g = self._g_jets
        order = g[0][0].order
        g0inv = self.levi.inverse  # g0inv[b, a] realizes G^{bbar a} at the point
        zero = jet_constant(self.mj.space, order, 0.0)

        def matmul(A, B):  # entries of A, B may be jets or complex numbers
            return [
                [sum((A[i][a] * B[a][j] for a in range(n)), zero) for j in range(n)]
                for i in range(n)
            ]

        e = [[g[a][b] - g[a][b].value for b in range(n)] for a in range(n)]
        m1 = matmul([[-g0inv[i, j] for j in range(n)] for i in range(n)], e)
        acc = [[jet_constant(self.mj.space, order, 1.0 if i == j else 0.0)
                for j in range(n)] for i in range(n)]
        power = m1
        for _ in range(order):
            acc = [[acc[i][j] + power[i][j] for j in range(n)] for i in range(n)]
            power = matmul(power, m1)
        return matmul(acc, [[g0inv[i, j] for j in range(n)] for i in range(n)])

    @cached_property
    def gamma1(self):
        """Jets (order 2) of Gamma^a_{;m} = G^{tbar a} G_{tbar;m}."""
        n = self.n
        order = min(2, self.mj.order - 2)
        gtz = [
            [self.mj.field(self._w(dvbar=[t], dz=[m]), order) for m in range(n)]
            for t in range(n)
        ]
        ginv = self._ginv_jets
        return [
            [
                sum((ginv[t][a] * gtz[t][m] for t in range(n)),
                    jet_constant(self.mj.space, order, 0.0))
                for m in range(n)
            ]
            for a in range(n)
        ]

    @cached_property
    def gamma1_conj(self):
        return [[wirtinger_conj(j) for j in row] for row in self.gamma1]

    @cached_property
    def mixed(self):
        """Jets (order 1) of Gamma^a_{b;m} via the dot-derivative route."""
        return [
            [[d_v(self.gamma1[a][m], b) for m in range(self.n)] for b in range(self.n)]
            for a in range(self.n)
        ]

    @cached_property
    def mixed_def(self):
        """Jets (order 1) of Gamma^a_{b;m} via the definition route
        G^{tbar a} (G_{b tbar;m} - G_{b tbar c} Gamma^c_{;m})."""
        n = self.n
        ginv = self._ginv_jets
        out = []
        for a in range(n):
            rows = []
            for b in range(n):
                cols = []
                for m in range(n):
                    acc = jet_constant(self.mj.space, 1, 0.0)
                    for t in range(n):
                        dm = self.mj.field(self._w(dv=[b], dvbar=[t], dz=[m]), 1)
                        for c in range(n):
                            g3 = self.mj.field(self._w(dv=[b, c], dvbar=[t]), 1)
                            dm = dm - g3 * self.gamma1[c][m]
                        acc = acc + ginv[t][a] * dm
                    cols.append(acc)
                rows.append(cols)
            out.append(rows)
        return out

    @cached_property
    def vertical(self):
        """Jets (order 1) of Gamma^a_{bc} = G^{tbar a} G_{b tbar c}."""
        n = self.n
        ginv = self._ginv_jets
        return [
            [
                [
                    sum((ginv[t][a] * self.mj.field(self._w(dv=[b, c], dvbar=[t]), 1)
                         for t in range(n)),
                        jet_constant(self.mj.space, 1, 0.0))
                    for c in range(n)
                ]
                for b in range(n)
            ]
            for a in range(n)
        ]

    @cached_property
    def gamma_bar(self):
        """Jets (order 1) of Gamma^a_{gbar;m} = dot-d_gbar Gamma^a_{;m}."""
        return [
            [[d_vbar(self.gamma1[a][m], g) for m in range(self.n)] for g in range(self.n)]
            for a in range(self.n)
        ]

    # -- horizontal derivatives ---------------------------------------------------

    def delta(self, mu: int, X: TaylorJet) -> TaylorJet:
        """delta_mu X = d_z X - Gamma^s_{;mu} dot-d_s X (order drops by one)."""
        out = d_z(X, mu)
        for s in range(self.n):
            out = out - self.gamma1[s][mu] * d_v(X, s)
        return out

    def delta_bar(self, nu: int, X: TaylorJet) -> TaylorJet:
        out = d_zbar(X, nu)
        for s in range(self.n):
            out = out - self.gamma1_conj[s][nu] * d_vbar(X, s)
        return out

    # -- dense coefficient records --------------------------------------------------

    def _values(self, jets_nested, shape):
        out = np.empty(shape, dtype=complex)
        for idx in np.ndindex(shape):
            node = jets_nested
            for i in idx:
                node = node[i]
            out[idx] = node.value
        return out

    @cached_property
    def connection_data(self) -> ConnectionData:
        n = self.n
        g1 = self._values(self.gamma1, (n, n))
        mixed_def = self._values(self.mixed_def, (n, n, n))
        mixed_dot = self._values(self.mixed, (n, n, n))
        vert = self._values(self.vertical, (n, n, n))
        scale = 1.0 + max(np.abs(mixed_def).max(), np.abs(mixed_dot).max())
        return ConnectionData(
            gamma_semicolon=g1,
            gamma_mixed=mixed_def,
            gamma_vertical=vert,
            eqdvt_residual=float(np.abs(mixed_def - mixed_dot).max() / scale),
        )

    @cached_property
    def delta_derivatives(self) -> DeltaDerivatives:
        n = self.n
        dgh = np.empty((n, n, n), dtype=complex)
        dga = np.empty((n, n, n), dtype=complex)
        for a in range(n):
            for m in range(n):
                for nu in range(n):
                    dgh[a, m, nu] = self.delta(nu, self.gamma1[a][m]).value
                    dga[a, m, nu] = self.delta_bar(nu, self.gamma1[a][m]).value
        dmix = np.empty((n, n, n, n), dtype=complex)
        dotmix = np.empty((n, n, n, n), dtype=complex)
        for a in range(n):
            for b in range(n):
                for m in range(n):
                    for nu in range(n):
                        dmix[a, b, m, nu] = self.delta_bar(nu, self.mixed[a][b][m]).value
                        dotmix[a, b, m, nu] = d_vbar(self.mixed[a][b][m], nu).value
        dvert = np.empty((n, n, n, n), dtype=complex)
        dotvert = np.empty((n, n, n, n), dtype=complex)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for nu in range(n):
                        dvert[a, b, c, nu] = self.delta_bar(nu, self.vertical[a][b][c]).value
                        dotvert[a, b, c, nu] = d_vbar(self.vertical[a][b][c], nu).value
        return DeltaDerivatives(
            delta_gamma_h=dgh,
            delta_gamma_a=dga,
            delta_mixed_a=dmix,
            delta_vert_a=dvert,
            gamma_bar=self._values(self.gamma_bar, (n, n, n)),
            dot_vert_a=dotvert,
            dot_mixed_a=dotmix,
        )

    # -- the Lemma-level identity residuals (scale-invariant) -------------------------

    def frame_residuals(self) -> dict[str, float]:
        """delta_mu(G) = 0, delta_mubar(G_alpha) = 0, the delta-commutation
        identity and the two-route agreement for Gamma^a_{b;m}."""
        n = self.n
        gfield = self.mj.field(self._w(), order=1)
        r_dg = max(abs(self.delta(m, gfield).value) for m in range(n))
        s_dg = 1.0 + max(
            abs(self.mj.entry(self._w(dz=[m]))) for m in range(n)
        )
        r_dga = 0.0
        s_dga = 1.0
        for a in range(n):
            ga = self.mj.field(self._w(dv=[a]), order=1)
            for m in range(n):
                r_dga = max(r_dga, abs(self.delta_bar(m, ga).value))
                s_dga = max(s_dga, abs(self.mj.entry(self._w(dv=[a], dzbar=[m]))))
        dgh = self.delta_derivatives.delta_gamma_h
        r_comm = np.abs(dgh - dgh.transpose(0, 2, 1)).max()
        s_comm = 1.0 + np.abs(dgh).max()
        return {
            "delta_G": r_dg / s_dg,
            "deltabar_G_a": r_dga / s_dga,
            "delta_commutation": float(r_comm / s_comm),
            "eqdvt": self.connection_data.eqdvt_residual,
        }


def connection_coefficients(mj: MetricJet) -> ConnectionData:
    return ChernFinsler(mj).connection_data


def delta_coefficients(m: FinslerMetric, p: FinslerPoint) -> DeltaDerivatives:
    return ChernFinsler.from_metric(m, p).delta_derivatives
