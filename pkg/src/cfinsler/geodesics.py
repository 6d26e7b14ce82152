"""Geodesic integration, exponential map, curve length, variation checks.

The geodesic system is sigma''^a + Gamma^a_{;m}(sigma, sigma') sigma'^m = 0,
with the connection coefficient evaluated at the point (sigma, sigma') of the
slit bundle.  Integration is done in unit-speed normalization (initial
velocity scaled to F = 1, time scaled back), with an adaptive embedded
Runge-Kutta 4(5) pair; a fixed-step classical RK4 is available for
convergence-order checks.

First and second variation formulas are evaluated from the curvature and
torsion layers; their comparison against numeric s-derivatives of the length
functional is the integration test of the whole engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .connection import ChernFinsler
from .curvature import PointCurvature
from .errors import DomainError, InvalidCurveError, StiffnessError
from .jets import FinslerPoint
from .metrics import FinslerMetric, levi_data

_BOUNDARY_PAD = 1e-6


# -- local connection values (cheap, low-order evaluations) ----------------------


def connection_gamma1_values(m: FinslerMetric, z, v) -> np.ndarray:
    """Gamma^a_{;m} = G^{tbar a} G_{tbar;m} from an order-2 metric table."""
    mj = m.evaluate(FinslerPoint(z, v), order=2)
    n = m.n
    space = mj.space

    def at(*slots):
        e = [0] * (4 * n)
        for s in slots:
            e[s] += 1
        return mj.table[space.index_of[tuple(e)]]

    gtz = np.array([[at(3 * n + t, mu) for mu in range(n)] for t in range(n)])
    ginv = levi_data(mj).inverse
    return np.einsum("ta,tm->am", ginv, gtz)


def connection_mixed_values(m: FinslerMetric, z, v) -> np.ndarray:
    """Gamma^a_{b;m} from an order-3 metric table (dot-derivative route)."""
    from .jets import d_v  # local import keeps module load light

    mj = m.evaluate(FinslerPoint(z, v), order=3)
    cfb = _Gamma1Fields(mj)
    n = m.n
    out = np.empty((n, n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            for mm in range(n):
                out[a, b, mm] = d_v(cfb.gamma1[a][mm], b).value
    return out


class _Gamma1Fields:
    """Order-1 jets of Gamma^a_{;m} out of an order-3 metric table."""

    def __init__(self, mj):
        from .jets import WirtingerIndex, jet_constant

        n = mj.n
        ld = levi_data(mj)
        g0inv = ld.inverse
        order = 1
        g = [[mj.field(WirtingerIndex.make(n, dv=[a], dvbar=[b]), order) for b in range(n)]
             for a in range(n)]
        zero = jet_constant(mj.space, order, 0.0)
        e = [[g[a][b] - g[a][b].value for b in range(n)] for a in range(n)]
        # first-order Neumann inverse: ginv = g0inv - g0inv e g0inv
        ginv = [
            [
                sum((-g0inv[i, a] * (e[a][b] * g0inv[b, j]) for a in range(n) for b in range(n)),
                    zero) + g0inv[i, j]
                for j in range(n)
            ]
            for i in range(n)
        ]
        gtz = [[mj.field(WirtingerIndex.make(n, dvbar=[t], dz=[mu]), order) for mu in range(n)]
               for t in range(n)]
        self.gamma1 = [
            [sum((ginv[t][a] * gtz[t][mu] for t in range(n)), zero) for mu in range(n)]
            for a in range(n)
        ]


def geodesic_rhs(m: FinslerMetric, sigma, sigma_dot) -> tuple[np.ndarray, np.ndarray]:
    """State derivative (sigma', -Gamma^a_{;m}(sigma, sigma') sigma'^m)."""
    gamma = connection_gamma1_values(m, sigma, sigma_dot)
    acc = -np.einsum("am,m->a", gamma, np.asarray(sigma_dot, dtype=complex))
    return np.asarray(sigma_dot, dtype=complex), acc


# -- integrated paths --------------------------------------------------------------


@dataclass
class GeodesicPath:
    times: np.ndarray          # increasing sample times in the caller's parameter
    sigma: np.ndarray          # (m, n) positions
    sigma_dot: np.ndarray      # (m, n) velocities
    speed: np.ndarray          # F(sigma_dot) per sample
    meta: dict = dataclass_field(default_factory=dict)
    _dense: Optional[Callable[[float], np.ndarray]] = None  # t -> stacked (sigma, sigma_dot)

    @property
    def n(self) -> int:
        return self.sigma.shape[1]

    def state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if self._dense is None:
            raise ValueError("path has no dense output")
        y = self._dense(t)
        return y[: self.n], y[self.n :]

    def endpoint(self) -> np.ndarray:
        return self.sigma[-1]

    def to_dict(self) -> dict:
        def c2(a):
            return [[x.real, x.imag] for x in a]

        return {
            "times": self.times.tolist(),
            "sigma": [c2(row) for row in self.sigma],
            "sigma_dot": [c2(row) for row in self.sigma_dot],
            "speed": self.speed.tolist(),
            "meta": self.meta,
        }

    def to_csv(self) -> str:
        n = self.n
        cols = ["t"]
        for a in range(n):
            cols += [f"re_sigma{a + 1}", f"im_sigma{a + 1}"]
        for a in range(n):
            cols += [f"re_dsigma{a + 1}", f"im_dsigma{a + 1}"]
        cols.append("F")
        lines = [",".join(cols)]
        for i, t in enumerate(self.times):
            row = [f"{t:.17g}"]
            for a in range(n):
                row += [f"{self.sigma[i, a].real:.17g}", f"{self.sigma[i, a].imag:.17g}"]
            for a in range(n):
                row += [f"{self.sigma_dot[i, a].real:.17g}", f"{self.sigma_dot[i, a].imag:.17g}"]
            row.append(f"{self.speed[i]:.17g}")
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def _pack(sigma, sigma_dot):
    return np.concatenate([sigma.real, sigma.imag, sigma_dot.real, sigma_dot.imag])


def _unpack(y, n):
    return y[:n] + 1j * y[n : 2 * n], y[2 * n : 3 * n] + 1j * y[3 * n :]


def integrate_geodesic(m: FinslerMetric, p: FinslerPoint, v, T: float,
                       tol: float = 1e-9, samples: int = 65,
                       fixed_step_count: Optional[int] = None,
                       check_weakly_kahler: bool = True) -> GeodesicPath:
    """Integrate the geodesic from (p, v) for parameter time T.

    The velocity is normalized to unit F-speed internally and the returned
    path is reported in the caller's parametrization, so sigma_dot(0) = v.
    On metrics bounded by the unit ball the integration stops at
    |sigma| = 1 - 1e-6 and the path is flagged instead of erroring.
    """
    v = np.asarray(v, dtype=complex).reshape(-1)
    n = m.n
    f0 = m.F(p.z, v)
    if not f0 > 0.0:
        raise InvalidCurveError("initial velocity has F(v) = 0")
    w = v / f0
    tau_end = T * f0

    def rhs(_tau, y):
        sig, den = _unpack(y, n)
        _, acc = geodesic_rhs(m, sig, den)
        return _pack(den, acc)

    meta = {"tol": tol, "unit_speed_factor": f0, "boundary_hit": False}

    if check_weakly_kahler:
        try:
            cf = ChernFinsler.from_metric(m, FinslerPoint(p.z, w))
            gm = cf.connection_data.gamma_mixed
            g_a = cf.mj.arrays()["G_a"]
            diff = gm - gm.transpose(0, 2, 1)
            weak = np.einsum("a,amn,m->n", g_a, diff, w)
            res = float(np.abs(weak).max() / (1.0 + np.abs(gm).max() * (1 + np.abs(g_a).max())))
            meta["weakly_kahler_residual"] = res
            # the length-critical notion of geodesic needs weak kaehlerity;
            # otherwise the same ODE is integrated but only describes
            # autoparallels of the connection
            meta["autoparallel_only"] = res > 1e-6
        except Exception:
            meta["weakly_kahler_residual"] = None
            meta["autoparallel_only"] = None

    y0 = _pack(p.z.astype(complex), w)

    if fixed_step_count is not None:
        ts = np.linspace(0.0, tau_end, fixed_step_count + 1)
        h = ts[1] - ts[0]
        ys = [y0]
        y = y0
        for tcur in ts[:-1]:
            k1 = rhs(tcur, y)
            k2 = rhs(tcur + h / 2, y + h / 2 * k1)
            k3 = rhs(tcur + h / 2, y + h / 2 * k2)
            k4 = rhs(tcur + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            ys.append(y)
        ys = np.asarray(ys)
        meta.update(method="rk4_fixed", steps=fixed_step_count)
        times = ts / f0
        sig = ys[:, :n] + 1j * ys[:, n : 2 * n]
        sdot = f0 * (ys[:, 2 * n : 3 * n] + 1j * ys[:, 3 * n :])
        speed = np.array([m.F(sig[i], sdot[i]) for i in range(len(times))])
        return GeodesicPath(times, sig, sdot, speed, meta)

    events = []
    if m.domain_radius is not None:
        r_stop = (m.domain_radius - _BOUNDARY_PAD) ** 2

        def boundary(_tau, y):
            sig, _ = _unpack(y, n)
            return r_stop - float(np.sum(np.abs(sig) ** 2))

        boundary.terminal = True
        boundary.direction = -1.0
        events.append(boundary)

    sol = solve_ivp(rhs, (0.0, tau_end), y0, method="RK45", rtol=tol,
                    atol=tol * 1e-2, dense_output=True, events=events or None)
    if sol.status == -1:
        raise StiffnessError(f"integration failed: {sol.message}")
    if sol.status == 1:
        meta["boundary_hit"] = True
    reached_tau = sol.t[-1]
    meta.update(method="rk45_adaptive", steps=len(sol.t) - 1, reached_time=reached_tau / f0)

    taus = np.linspace(0.0, reached_tau, samples)
    ys = sol.sol(taus).T
    times = taus / f0
    sig = ys[:, :n] + 1j * ys[:, n : 2 * n]
    sdot = f0 * (ys[:, 2 * n : 3 * n] + 1j * ys[:, 3 * n :])
    speed = np.array([m.F(sig[i], sdot[i]) for i in range(samples)])
    meta["speed_drift"] = float(np.abs(speed - f0).max())

    def dense(t):
        y = sol.sol(t * f0)
        sig_t, w_t = _unpack(y, n)
        return np.concatenate([sig_t, f0 * w_t])

    return GeodesicPath(times, sig, sdot, speed, meta, _dense=dense)


def exp_map(m: FinslerMetric, p: FinslerPoint, v, tol: float = 1e-9) -> np.ndarray:
    """Endpoint of the unit-speed geodesic from p along v, run for time F(v)."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if np.linalg.norm(v) <= p.eps_v:
        return p.z.copy()
    path = integrate_geodesic(m, p, v, 1.0, tol=tol, check_weakly_kahler=False)
    if path.meta["boundary_hit"]:
        raise DomainError("geodesic left the metric domain before time F(v)",
                          where=path.endpoint())
    return path.endpoint()


# -- curves and length ----------------------------------------------------------------


def _richardson(f, t, h):
    def d(step):
        return (f(t + step) - f(t - step)) / (2.0 * step)

    return (4.0 * d(h / 2) - d(h)) / 3.0


@dataclass
class Curve:
    """Parametrized curve t -> C^n with optional analytic velocity."""

    position: Callable[[float], np.ndarray]
    velocity: Optional[Callable[[float], np.ndarray]] = None
    diff_step: float = 1e-3

    def vel(self, t: float) -> np.ndarray:
        if self.velocity is not None:
            return self.velocity(t)
        return _richardson(self.position, t, self.diff_step)

    def acc(self, t: float, h: Optional[float] = None) -> np.ndarray:
        return _richardson(self.vel, t, h or self.diff_step)


def line_curve(p0, direction) -> Curve:
    p0 = np.asarray(p0, dtype=complex).reshape(-1)
    d = np.asarray(direction, dtype=complex).reshape(-1)
    return Curve(lambda t: p0 + t * d, lambda _t: d)


def geodesic_curve(m: FinslerMetric, p: FinslerPoint, v, a: float, b: float,
                   tol: float = 1e-12, margin: float = 0.05) -> Curve:
    """Geodesic through (p, v) at t = 0 as a dense Curve on [a - margin, b + margin]."""
    if a < 0:
        raise ValueError("geodesic bases start at t = 0")
    fwd = integrate_geodesic(m, p, v, b + margin, tol=tol, check_weakly_kahler=False)
    bwd = integrate_geodesic(m, p, -np.asarray(v, dtype=complex), margin, tol=tol,
                             check_weakly_kahler=False)
    n = m.n

    def state(t):
        if t >= 0.0:
            return fwd.state(t)
        sig, sdot = bwd.state(-t)
        return sig, -sdot

    return Curve(lambda t: state(t)[0], lambda t: state(t)[1])


def constant_speed_reparametrization(m: FinslerMetric, curve: Curve, a: float, b: float,
                                     tol: float = 1e-12) -> tuple[Curve, float]:
    """Reparametrize a regular curve so that F(sigma_dot) is constant.

    Solves du/dt = c / F(gamma(u), gamma'(u)) with c = L / (b - a); the
    returned curve traces the same image on [a, b] with speed exactly c.
    First-variation bases need this, since the variation formula assumes a
    constant-speed base curve.
    """
    total = curve_length(m, curve, a, b, tol=max(tol, 1e-12))
    c = total / (b - a)
    margin = 0.1 * (b - a)

    def du(_t, u):
        return c / m.F(curve.position(u[0]), curve.vel(u[0]))

    fwd = solve_ivp(du, (a, b + margin), [a], rtol=tol, atol=tol, dense_output=True)
    bwd = solve_ivp(du, (a, a - margin), [a], rtol=tol, atol=tol, dense_output=True)
    if fwd.status != 0 or bwd.status != 0:
        raise InvalidCurveError("arc-length reparametrization failed")

    def param(t):
        sol = fwd if t >= a else bwd
        return float(sol.sol(t)[0])

    def position(t):
        return curve.position(param(t))

    def velocity(t):
        u = param(t)
        gv = curve.vel(u)
        return gv * (c / m.F(curve.position(u), gv))

    return Curve(position, velocity), c


def curve_length(m: FinslerMetric, curve: Curve, a: float, b: float,
                 tol: float = 1e-10) -> float:
    """Adaptive quadrature of F(sigma_dot) over [a, b]."""

    def integrand(t):
        sdot = curve.vel(t)
        if np.linalg.norm(sdot) <= 1e-12:
            raise InvalidCurveError(f"curve tangent vanishes at t = {t}")
        return m.F(curve.position(t), sdot)

    val, _err = quad(integrand, a, b, epsabs=tol, epsrel=tol, limit=200)
    return float(val)


# -- variations -------------------------------------------------------------------------


@dataclass
class VariationSpec:
    """Two-parameter family Sigma(s, t) around a base curve on [a, b]."""

    sigma: Callable[[float, float], np.ndarray]
    a: float
    b: float
    fixed: bool
    dsigma_dt: Optional[Callable[[float, float], np.ndarray]] = None
    label: str = "custom"

    def curve_at(self, s: float) -> Curve:
        if self.dsigma_dt is not None:
            return Curve(lambda t: self.sigma(s, t), lambda t: self.dsigma_dt(s, t))
        return Curve(lambda t: self.sigma(s, t), diff_step=1e-4 * max(1.0, self.b - self.a))


def bump_variation(base: Curve, a: float, b: float, direction,
                   profile: str = "sin") -> VariationSpec:
    """Endpoint-fixed variation Sigma(s,t) = base(t) + s phi(t) d."""
    d = np.asarray(direction, dtype=complex).reshape(-1)
    span = b - a
    if profile == "sin":
        phi = lambda t: math.sin(math.pi * (t - a) / span)
        dphi = lambda t: math.pi / span * math.cos(math.pi * (t - a) / span)
    elif profile == "poly":
        phi = lambda t: 4.0 * (t - a) * (b - t) / span**2
        dphi = lambda t: 4.0 * (a + b - 2.0 * t) / span**2
    else:
        raise ValueError(f"unknown bump profile {profile!r}")
    return VariationSpec(
        sigma=lambda s, t: base.position(t) + s * phi(t) * d,
        a=a, b=b, fixed=True,
        dsigma_dt=lambda s, t: base.vel(t) + s * dphi(t) * d,
        label=f"bump_{profile}",
    )


def stretch_variation(base: Curve, a: float, b: float) -> VariationSpec:
    """Endpoint-moving family Sigma(s,t) = (1+s) base(t)."""
    return VariationSpec(
        sigma=lambda s, t: (1.0 + s) * base.position(t),
        a=a, b=b, fixed=False,
        dsigma_dt=lambda s, t: (1.0 + s) * base.vel(t),
        label="stretch",
    )


def grid_variation(s_values, t_values, samples, fixed: bool) -> VariationSpec:
    """Variation given on a sampled (s, t) grid; cubic-spline interpolated."""
    from scipy.interpolate import RectBivariateSpline

    samples = np.asarray(samples, dtype=complex)  # (ns, nt, n)
    n = samples.shape[2]
    splines = []
    for comp in range(n):
        sp_re = RectBivariateSpline(s_values, t_values, samples[:, :, comp].real, kx=3, ky=3)
        sp_im = RectBivariateSpline(s_values, t_values, samples[:, :, comp].imag, kx=3, ky=3)
        splines.append((sp_re, sp_im))

    def sigma(s, t):
        return np.array([sr(s, t)[0, 0] + 1j * si(s, t)[0, 0] for sr, si in splines])

    def dsigma_dt(s, t):
        return np.array(
            [sr(s, t, dy=1)[0, 0] + 1j * si(s, t, dy=1)[0, 0] for sr, si in splines]
        )

    return VariationSpec(sigma=sigma, a=float(t_values[0]), b=float(t_values[-1]),
                         fixed=fixed, dsigma_dt=dsigma_dt, label="grid")


@dataclass(frozen=True)
class VariationResult:
    formula: float
    numeric: float
    residual: float
    diagnostics: dict


def _gl_nodes(a: float, b: float, count: int):
    x, w = np.polynomial.legendre.leggauss(count)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def _u_field(spec: VariationSpec, h: float):
    def u(t):
        def f(s):
            return spec.sigma(s, t)

        return _richardson(f, 0.0, h)

    return u


def _levi_at(m: FinslerMetric, z, v):
    return m.evaluate(FinslerPoint(z, v), order=2).levi_matrix


def first_variation_check(m: FinslerMetric, spec: VariationSpec, h: float = 1e-4,
                          nodes: int = 48, quad_tol: float = 1e-11) -> VariationResult:
    """Compare the first variation formula

        dl/ds(0) = (1/c0) [ Re<U^H, T^H> ]_a^b
                   - (1/c0) Re int { <U^H, W> + <<U^H, W>> } dt,
        W = covariant acceleration sigma'' + Gamma(sigma') sigma',

    against the central-difference derivative of the length functional.
    The symmetric-product term is the fiber-motion contribution the
    horizontal frame does not see: d/dt of <U,T> along the lifted curve
    exceeds its delta-frame derivative by <<U, W>>.  It vanishes
    identically for metrics coming from a hermitian metric (G_{ab} == 0)
    and on geodesic bases (W == 0), hence never contributes in those
    cases; without it the formula fails against the numeric derivative
    on non-hermitian metrics along non-geodesic bases.  The formula
    assumes the metric is weakly Kähler and the base has constant speed;
    both hypothesis residuals are reported in the diagnostics.
    """
    a, b = spec.a, spec.b
    base = spec.curve_at(0.0)
    u = _u_field(spec, h)

    speeds = [m.F(base.position(t), base.vel(t)) for t in np.linspace(a, b, 9)]
    c0 = float(np.mean(speeds))
    speed_drift = float(np.max(np.abs(np.array(speeds) - c0)))

    def herm(z, v, A, B):
        return complex(np.einsum("ab,a,b->", _levi_at(m, z, v), A, np.conj(B)))

    def boundary(t):
        return herm(base.position(t), base.vel(t), u(t), base.vel(t)).real

    ts, ws = _gl_nodes(a, b, nodes)
    integral = 0.0
    symmetric_part = 0.0
    for t, wq in zip(ts, ws):
        z, vel = base.position(t), base.vel(t)
        acc = base.acc(t)
        gamma = connection_gamma1_values(m, z, vel)
        nabla_t = acc + np.einsum("am,m->a", gamma, vel)
        integral += wq * herm(z, vel, u(t), nabla_t).real
        g_ab = m.evaluate(FinslerPoint(z, vel), order=2).arrays()["G_ab"]
        symmetric_part += wq * np.einsum("ab,a,b->", g_ab, u(t), nabla_t).real

    formula = (boundary(b) - boundary(a) - integral - symmetric_part) / c0

    def length_at(s):
        return curve_length(m, spec.curve_at(s), a, b, tol=quad_tol)

    def d1(step):
        return (length_at(step) - length_at(-step)) / (2.0 * step)

    numeric = (4.0 * d1(h / 2) - d1(h)) / 3.0

    wk = None
    try:
        cf = ChernFinsler.from_metric(m, FinslerPoint(base.position(0.5 * (a + b)),
                                                      base.vel(0.5 * (a + b))))
        gm = cf.connection_data.gamma_mixed
        g_a = cf.mj.arrays()["G_a"]
        diff = gm - gm.transpose(0, 2, 1)
        weak = np.einsum("a,amn,m->n", g_a, diff, base.vel(0.5 * (a + b)))
        wk = float(np.abs(weak).max() / (1.0 + np.abs(gm).max() * (1 + np.abs(g_a).max())))
    except Exception:
        pass

    return VariationResult(
        formula=float(formula),
        numeric=float(numeric),
        residual=float(abs(formula - numeric)),
        diagnostics={
            "c0": c0,
            "speed_drift": speed_drift,
            "weakly_kahler_residual": wk,
            "symmetric_term": float(symmetric_part / c0),
            "fixed": spec.fixed,
            "label": spec.label,
        },
    )


def second_variation_check(m: FinslerMetric, spec: VariationSpec, h: float = 1e-2,
                           nodes: int = 32, quad_tol: float = 1e-12,
                           geodesic_tol: float = 1e-7) -> VariationResult:
    """Compare the second variation formula along a unit-speed geodesic base

        d2l/ds2(0) = [ Re<nabla_{U+Ubar} U, T> ]_a^b
                     + int { |nabla_{T+Tbar} U|^2 + Re<<nabla_{T+Tbar} U, nabla_{T+Tbar} U>>
                             - |d/dt Re<U,T>|^2
                             - Re[ <Omega(T,Ubar)U, T> - <Omega(U,Tbar)U, T>
                                   + <<tau^H(U,Tbar), U>> - <<tau^H(T,Ubar), U>> ] } dt

    against the numeric second s-derivative of the length functional.

    As in the first variation, the symmetric-product square is the fiber
    Hessian contribution beyond the Levi form; it vanishes identically for
    hermitian metrics (all the closed-form oracle cases) and is required for
    the formula to match the numeric derivative on non-hermitian metrics.
    """
    a, b = spec.a, spec.b
    base = spec.curve_at(0.0)
    u = _u_field(spec, h)
    ht = 1e-2 * (b - a)

    # precondition: unit-speed geodesic base
    geo_res = 0.0
    for t in np.linspace(a, b, 7):
        z, vel = base.position(t), base.vel(t)
        gamma = connection_gamma1_values(m, z, vel)
        res = base.acc(t, ht) + np.einsum("am,m->a", gamma, vel)
        geo_res = max(geo_res, float(np.abs(res).max()))
    c0 = m.F(base.position(a), base.vel(a))
    if geo_res > geodesic_tol:
        raise ValueError(
            f"second variation needs a geodesic base: residual {geo_res:.3e} > {geodesic_tol}"
        )

    def du_dt(t):
        return _richardson(u, t, ht)

    def re_ut(t):
        z, vel = base.position(t), base.vel(t)
        return complex(np.einsum("ab,a,b->", _levi_at(m, z, vel), u(t), np.conj(vel))).real

    ts, ws = _gl_nodes(a, b, nodes)
    integral = 0.0
    symmetric_part = 0.0
    kahler_res = 0.0
    re_ut_vals = []
    for t, wq in zip(ts, ws):
        z, vel = base.position(t), base.vel(t)
        pc = PointCurvature.at(m, FinslerPoint(z, vel))
        ut = u(t)
        gamma_m = connection_mixed_values(m, z, vel)
        nabla_u = du_dt(t) + np.einsum("abm,b,m->a", gamma_m, ut, vel)
        term_norm = pc.herm(nabla_u, nabla_u).real
        term_symm = pc.symm(nabla_u, nabla_u).real
        d_reut = _richardson(re_ut, t, ht)
        curvature_term = (
            pc.omega_pair(vel, ut, ut, vel)
            - pc.omega_pair(ut, vel, ut, vel)
            + pc.symm(pc.tau_h(ut, vel), ut)
            - pc.symm(pc.tau_h(vel, ut), ut)
        ).real
        integral += wq * (term_norm + term_symm - d_reut**2 - curvature_term)
        symmetric_part += wq * term_symm
        gm = pc.cf.connection_data.gamma_mixed
        diff = np.einsum("amn,m->an", gm - gm.transpose(0, 2, 1), vel)
        kahler_res = max(kahler_res, float(np.abs(diff).max() / (1.0 + np.abs(gm).max())))
        re_ut_vals.append(re_ut(t))

    def d2u_ds2(t):
        def f(s):
            return spec.sigma(s, t)

        def dd(step):
            return (f(step) - 2.0 * f(0.0) + f(-step)) / step**2

        # second central differences carry an O(h^2) error term
        return (4.0 * dd(h / 2) - dd(h)) / 3.0

    def boundary(t):
        z, vel = base.position(t), base.vel(t)
        gamma_m = connection_mixed_values(m, z, vel)
        ut = u(t)
        nab = d2u_ds2(t) + np.einsum("abm,b,m->a", gamma_m, ut, ut)
        return complex(np.einsum("ab,a,b->", _levi_at(m, z, vel), nab, np.conj(vel))).real

    formula = boundary(b) - boundary(a) + integral

    def length_at(s):
        return curve_length(m, spec.curve_at(s), a, b, tol=quad_tol)

    l0 = length_at(0.0)

    def dd(step):
        return (length_at(step) - 2.0 * l0 + length_at(-step)) / step**2

    numeric = (4.0 * dd(h / 2) - dd(h)) / 3.0

    re_ut_vals = np.asarray(re_ut_vals)
    return VariationResult(
        formula=float(formula),
        numeric=float(numeric),
        residual=float(abs(formula - numeric)),
        diagnostics={
            "c0": float(c0),
            "geodesic_residual": geo_res,
            "kahler_residual": kahler_res,
            "re_ut_constancy": float(re_ut_vals.max() - re_ut_vals.min()),
            "symmetric_term": float(symmetric_part),
            "fixed": spec.fixed,
            "label": spec.label,
        },
    )
