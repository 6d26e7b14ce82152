"""Finsler metric abstraction, built-in families, and homogeneity checks.

A metric is evaluated into a :class:`MetricJet`: the full table of Wirtinger
derivatives of G = F^2 at one point of the slit bundle, up to total order 4.
Two evaluation paths exist: closed-form analytic tables (euclidean, the
n = 1 hyperbolic disk) and order-4 truncated jets for everything else.  The
analytic tables double as golden oracles for the jet path.

Residuals everywhere in this package are reported in scale-invariant form:
each one is divided by (1 + magnitude of the largest term entering the
identity), so they are comparable across points with very different |v|.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dsl
from .errors import DegenerateMetricError, DomainError, NotAMetricError
from .jets import (
    MAX_ORDER,
    FinslerPoint,
    TaylorJet,
    WirtingerIndex,
    jet_abs2,
    jet_pow,
    jet_space,
    seed_point_jets,
    wirtinger_table,
)

EPS_PD = 1e-10

BUILTIN_NAMES = ("euclidean", "hermitian_field", "poincare_ball", "lp_finsler")


# -- index bookkeeping ----------------------------------------------------------


class _Indices:
    """Gather arrays into the Wirtinger table for the common derivative families."""

    _cache: dict[int, "_Indices"] = {}

    def __new__(cls, n: int):
        if n not in cls._cache:
            cls._cache[n] = super().__new__(cls)
            cls._cache[n]._build(n)
        return cls._cache[n]

    def _build(self, n: int):
        self.n = n
        space = jet_space(4 * n)
        self.space = space

        def at(*slots):
            e = [0] * (4 * n)
            for s in slots:
                e[s] += 1
            return space.index_of[tuple(e)]

        z, zb, v, vb = 0, n, 2 * n, 3 * n
        self.G_a = np.array([at(v + a) for a in range(n)])
        self.G_abar = np.array([at(vb + a) for a in range(n)])
        self.G_z = np.array([at(z + m) for m in range(n)])
        self.levi = np.array([[at(v + a, vb + b) for b in range(n)] for a in range(n)])
        self.G_ab = np.array([[at(v + a, v + b) for b in range(n)] for a in range(n)])
        self.G_abc = np.array(
            [[[at(v + a, v + b, v + c) for c in range(n)] for b in range(n)] for a in range(n)]
        )
        self.G_abbar_c = np.array(
            [[[at(v + a, vb + b, v + c) for c in range(n)] for b in range(n)] for a in range(n)]
        )
        self.G_bbar_z = np.array([[at(vb + b, z + m) for m in range(n)] for b in range(n)])


# -- metric jet -------------------------------------------------------------------


@dataclass(frozen=True)
class MetricJet:
    """All Wirtinger derivatives of G at a point, total order <= ``order``."""

    point: FinslerPoint
    order: int
    table: np.ndarray

    @property
    def n(self) -> int:
        return self.point.n

    @property
    def space(self):
        return jet_space(4 * self.n)

    def entry(self, idx: WirtingerIndex) -> complex:
        return complex(self.table[self.space.index_of[idx.flat()]])

    def field(self, idx: WirtingerIndex, order: Optional[int] = None) -> TaylorJet:
        """Local expansion (Wirtinger-table jet) of the derivative D^idx G."""
        avail = self.order - idx.order
        if avail < 0:
            raise ValueError(f"index order {idx.order} exceeds table order {self.order}")
        want = avail if order is None else min(order, avail)
        jet = TaylorJet(self.space, self.order, self.table)
        n = self.n
        for block, offset in ((idx.dz, 0), (idx.dzbar, n), (idx.dv, 2 * n), (idx.dvbar, 3 * n)):
            for pos, count in enumerate(block):
                for _ in range(count):
                    jet = jet.derive(offset + pos)
        return jet.truncate(want)

    # dense views used by the identity checks

    @property
    def G(self) -> float:
        return float(self.table[0].real)

    @property
    def levi_matrix(self) -> np.ndarray:
        return self.table[_Indices(self.n).levi]

    def arrays(self):
        """Dense views of the common derivative families (those the table order affords)."""
        ix = _Indices(self.n)
        t = self.table
        out = {}
        if self.order >= 1:
            out.update(G_a=t[ix.G_a], G_abar=t[ix.G_abar], G_z=t[ix.G_z])
        if self.order >= 2:
            out.update(levi=t[ix.levi], G_ab=t[ix.G_ab])
        if self.order >= 3:
            out.update(G_abc=t[ix.G_abc], G_abbar_c=t[ix.G_abbar_c], G_bbar_z=t[ix.G_bbar_z])
        return out

    def conjugation_residual(self) -> float:
        """Max deviation from table(conj I) == conj(table(I)); zero for real G."""
        perm = self.space.conj_permutation()[: len(self.table)]
        dev = np.abs(self.table - np.conj(self.table[perm])).max()
        return float(dev / (1.0 + np.abs(self.table).max()))


# -- Levi data ---------------------------------------------------------------------


@dataclass(frozen=True)
class LeviData:
    matrix: np.ndarray
    inverse: np.ndarray
    min_eigenvalue: float
    strongly_pseudoconvex: bool


def levi_data(mj: MetricJet, eps_pd: float = EPS_PD) -> LeviData:
    if mj.order < 2:
        raise ValueError("Levi data needs a metric jet of order >= 2")
    g = mj.table[_Indices(mj.n).levi]
    herm = 0.5 * (g + g.conj().T)
    det = np.linalg.det(g)
    if abs(det) < 1e-14:
        raise DegenerateMetricError(f"Levi matrix is singular (|det| = {abs(det):.3e})")
    inv = np.linalg.inv(g)
    min_eig = float(np.linalg.eigvalsh(herm).min())
    return LeviData(g, inv, min_eig, min_eig > eps_pd)


# -- homogeneity identity suite -----------------------------------------------------


def _rel(residual, *terms) -> float:
    scale = 1.0
    for t in terms:
        scale = max(scale, float(np.max(np.abs(t))) if np.size(t) else 0.0)
    return float(np.max(np.abs(residual)) / scale) if np.size(residual) else 0.0


def homogeneity_residuals(mj: MetricJet) -> dict[str, float]:
    """Scale-invariant residuals of the (1,1)-homogeneity identities of G."""
    a = mj.arrays()
    v = mj.point.v
    vb = np.conj(v)
    G = mj.table[0]

    lhs1 = a["levi"] @ vb
    lhs2 = a["G_ab"] @ v
    lhs3 = a["G_a"] @ v
    lhs4 = v @ (a["levi"] @ vb)
    lhs5 = np.einsum("abg,g->ab", a["G_abc"], v)
    lhs6 = np.einsum("abg,g->ab", a["G_abbar_c"], v)
    ginv = np.linalg.inv(a["levi"])
    lhs7 = ginv @ a["G_a"]
    lhs8 = np.einsum("bm,ba,a->m", a["G_bbar_z"], ginv, a["G_a"])

    return {
        "g_abar_vbar": _rel(lhs1 - a["G_a"], lhs1, a["G_a"]),
        "g_ab_v": _rel(lhs2, np.abs(a["G_ab"]) @ np.abs(v)),
        "g_a_v": _rel(lhs3 - G, lhs3, G),
        "g_levi_vv": _rel(lhs4 - G, lhs4, G),
        "g_abc_v": _rel(lhs5 + a["G_ab"], lhs5, a["G_ab"]),
        "g_abbar_c_v": _rel(lhs6, np.einsum("abg,g->ab", np.abs(a["G_abbar_c"]), np.abs(v))),
        "ginv_g_a": _rel(lhs7 - vb, lhs7, vb),
        "g_bbar_mu": _rel(lhs8 - a["G_z"], lhs8, a["G_z"]),
    }


# -- the metric object ---------------------------------------------------------------


@dataclass(frozen=True)
class FinslerMetric:
    """A strongly pseudoconvex complex Finsler metric G(z, v) = F^2."""

    n: int
    name: str
    jet_evaluator: Callable[[FinslerPoint, int], TaylorJet]
    analytic_table: Optional[Callable[[FinslerPoint, int], np.ndarray]] = None
    domain_radius: Optional[float] = None
    constant_curvature: Optional[float] = None  # c, where K_F == 2c when known
    hermitian: Optional[bool] = None
    spec: dict = dataclasses.field(default_factory=dict)

    @property
    def is_analytic(self) -> bool:
        return self.analytic_table is not None

    def jets_only(self) -> "FinslerMetric":
        """Copy that always evaluates through the jet path (for cross-validation)."""
        return dataclasses.replace(self, analytic_table=None)

    def evaluate(self, p: FinslerPoint, order: int = MAX_ORDER, path: str = "auto") -> MetricJet:
        if p.n != self.n:
            raise ValueError(f"point dimension {p.n} != metric dimension {self.n}")
        if path not in ("auto", "analytic", "jets"):
            raise ValueError(f"unknown evaluation path {path!r}")
        if path == "analytic" and self.analytic_table is None:
            raise ValueError(f"metric {self.name!r} has no analytic derivative provider")
        use_analytic = self.analytic_table is not None and path != "jets"
        if use_analytic:
            table = np.asarray(self.analytic_table(p, order), dtype=complex)
        else:
            table = wirtinger_table(self.jet_evaluator(p, order))
        g = complex(table[0])
        if abs(g.imag) > 1e-9 * (1.0 + abs(g)):
            raise NotAMetricError(f"{self.name}: G = {g} is not real at z={p.z}, v={p.v}")
        if g.real <= 0.0:
            raise NotAMetricError(f"{self.name}: G = {g.real:.3e} <= 0 at z={p.z}, v={p.v}")
        return MetricJet(p, order, table)

    def G(self, z, v) -> float:
        """Scalar value of G at (z, v)."""
        mj = self.evaluate(FinslerPoint(z, v), order=1)
        return mj.G

    def F(self, z, v) -> float:
        return math.sqrt(self.G(z, v))


def evaluate_metric_jet(m: FinslerMetric, p: FinslerPoint, order: int = MAX_ORDER,
                        path: str = "auto") -> MetricJet:
    return m.evaluate(p, order, path)


# -- built-in families -----------------------------------------------------------------


def _check_inside_ball(p: FinslerPoint):
    r2 = float(np.sum(np.abs(p.z) ** 2))
    if r2 >= 1.0 - 1e-12:
        raise DomainError(f"|z| = {math.sqrt(r2):.6f} >= 1: outside the unit ball", where=p.z)


def _euclid_provider(n: int):
    ix = _Indices(n)

    def provider(p: FinslerPoint, order: int) -> np.ndarray:
        out = np.zeros(ix.space.sizes[order], dtype=complex)
        out[0] = np.sum(np.abs(p.v) ** 2)
        if order >= 1:
            out[ix.G_a] = np.conj(p.v)
            out[ix.G_abar] = p.v
        if order >= 2:
            out[np.diag(ix.levi)] = 1.0
        return out

    return provider


def _disk_P(a: int, b: int, z: complex) -> complex:
    """d_zbar^b d_z^a of (1 - z zbar)^(-2), z/zbar independent (Wirtinger)."""
    zb = np.conj(z)
    u = z * zb
    out = 0.0 + 0.0j
    for j in range(max(0, b - a), b + 1):
        c = (
            math.comb(b, j)
            * (math.factorial(a) // math.factorial(a - b + j))
            * (math.factorial(a + 1 + j) // math.factorial(a + 1))
        )
        out += c * zb ** (a - b + j) * z**j * (1.0 - u) ** (-(a + 2 + j))
    return math.factorial(a + 1) * out


def _disk_provider():
    space = jet_space(4)

    def provider(p: FinslerPoint, order: int) -> np.ndarray:
        _check_inside_ball(p)
        z, v = p.z[0], p.v[0]
        fiber = {(0, 0): v * np.conj(v), (1, 0): np.conj(v), (0, 1): v, (1, 1): 1.0 + 0j}
        out = np.zeros(space.sizes[order], dtype=complex)
        for i, e in enumerate(space.exponents[: space.sizes[order]]):
            key = (int(e[2]), int(e[3]))
            if key in fiber:
                out[i] = fiber[key] * _disk_P(int(e[0]), int(e[1]), z)
        return out

    return provider


def _euclid_jets(n: int):
    def evaluator(p: FinslerPoint, order: int) -> TaylorJet:
        _, vs = seed_point_jets(p, order)
        out = jet_abs2(vs[0])
        for a in range(1, n):
            out = out + jet_abs2(vs[a])
        return out

    return evaluator


def _ball_jets(n: int):
    def evaluator(p: FinslerPoint, order: int) -> TaylorJet:
        _check_inside_ball(p)
        zs, vs = seed_point_jets(p, order)
        s = jet_abs2(zs[0])
        q = jet_abs2(vs[0])
        ip = vs[0] * zs[0].conj()
        for a in range(1, n):
            s = s + jet_abs2(zs[a])
            q = q + jet_abs2(vs[a])
            ip = ip + vs[a] * zs[a].conj()
        one_minus = 1.0 - s
        return ((one_minus * q) + jet_abs2(ip)) / jet_pow(one_minus, 2)

    return evaluator


def _lp_jets(n: int, p_exp: float):
    def evaluator(p: FinslerPoint, order: int) -> TaylorJet:
        _, vs = seed_point_jets(p, order)
        s = jet_pow(jet_abs2(vs[0]), p_exp / 2.0)
        for a in range(1, n):
            s = s + jet_pow(jet_abs2(vs[a]), p_exp / 2.0)
        return jet_pow(s, 2.0 / p_exp)

    return evaluator


def _hermitian_field_jets(n: int, trees):
    def evaluator(p: FinslerPoint, order: int) -> TaylorJet:
        zjets, vjets = seed_point_jets(p, order)
        out = None
        for a in range(n):
            for b in range(n):
                g_ab = dsl.evaluate_tree(trees[a][b], zjets, vjets)
                term = g_ab * vjets[a] * vjets[b].conj()
                out = term if out is None else out + term
        return out

    return evaluator


def builtin_metric(name: str, n: int, params: Optional[dict] = None) -> FinslerMetric:
    """Construct a built-in metric family member.

    euclidean(n)                  G = sum |v_a|^2
    poincare_ball(n)              G = [(1-|z|^2)|v|^2 + |<v,z>|^2] / (1-|z|^2)^2
    lp_finsler(n, p)              G = (sum |v_a|^p)^(2/p), p > 1  (p = 2 is euclidean)
    hermitian_field(n, g)         G = sum g_ab(z) v_a conj(v_b), g a matrix of
                                  base-variable expressions (default: identity)
    """
    params = dict(params or {})
    if n < 1:
        raise ValueError("dimension must be >= 1")
    record = {"builtin": {"name": name, "n": n, "params": params}}

    if name == "euclidean":
        return FinslerMetric(
            n, "euclidean", _euclid_jets(n), analytic_table=_euclid_provider(n),
            constant_curvature=0.0, hermitian=True, spec=record,
        )
    if name == "poincare_ball":
        return FinslerMetric(
            n, "poincare_ball",
            _ball_jets(n),
            analytic_table=_disk_provider() if n == 1 else None,
            domain_radius=1.0, constant_curvature=-2.0, hermitian=True, spec=record,
        )
    if name == "lp_finsler":
        p_exp = float(params.get("p", 4))
        if p_exp <= 1.0:
            raise ValueError(f"lp_finsler requires p > 1, got {p_exp} (strong pseudoconvexity fails)")
        record["builtin"]["params"]["p"] = p_exp
        return FinslerMetric(
            n, "lp_finsler", _lp_jets(n, p_exp),
            constant_curvature=0.0 if p_exp == 2.0 else None,
            hermitian=(p_exp == 2.0), spec=record,
        )
    if name == "hermitian_field":
        g = params.get("g")
        if g is None:
            g = [["1" if a == b else "0" for b in range(n)] for a in range(n)]
        if len(g) != n or any(len(row) != n for row in g):
            raise ValueError(f"hermitian_field needs an {n}x{n} matrix of expressions")
        trees = [[dsl.parse_metric(entry, n) for entry in row] for row in g]
        for row in trees:
            for tree in row:
                fiber_vars = [vv for vv in dsl.used_variables(tree) if vv[0] == "v"]
                if fiber_vars:
                    raise ValueError(
                        "hermitian_field entries must depend on base variables only, "
                        f"found {fiber_vars}"
                    )
        record["builtin"]["params"]["g"] = g
        return FinslerMetric(
            n, "hermitian_field", _hermitian_field_jets(n, trees),
            hermitian=True, spec=record,
        )
    raise ValueError(f"unknown builtin metric {name!r}; choose from {BUILTIN_NAMES}")


def dsl_metric(expr: str, n: int) -> FinslerMetric:
    tree = dsl.parse_metric(expr, n)
    record = {"dsl": {"n": n, "expr": dsl.format_expr(tree)}}

    def evaluator(p: FinslerPoint, order: int) -> TaylorJet:
        return dsl.evaluate_expr_jet(tree, p, order)

    return FinslerMetric(n, "dsl", evaluator, spec=record)


def metric_from_spec(record: dict) -> FinslerMetric:
    """Deserialize the metric spec record: {"builtin": {...}} or {"dsl": {...}}."""
    if "builtin" in record:
        b = record["builtin"]
        return builtin_metric(b["name"], int(b["n"]), b.get("params"))
    if "dsl" in record:
        d = record["dsl"]
        return dsl_metric(d["expr"], int(d["n"]))
    raise ValueError(f"metric spec must contain 'builtin' or 'dsl', got {sorted(record)}")
