"""Curvature blocks, holomorphic/flag curvature, and the identity suites.

Block component conventions (arrays indexed [upper, lower, ...]):

    r_hh[a, b, m, n]   R^a_{b;m nbar}   = -delta_nbar(Gamma^a_{b;m})
                                          - Gamma^a_{bs} delta_nbar(Gamma^s_{;m})
    r_vh[a, b, d, n]   R^a_{bd;nbar}    = -delta_nbar(Gamma^a_{bd})
    r_hv[a, b, g, m]   R^a_{b gbar;m}   = -dot-d_gbar(Gamma^a_{b;m})
                                          - Gamma^a_{bs} Gamma^s_{gbar;m}
    r_vv[a, b, d, g]   R^a_{bd gbar}    = -dot-d_gbar(Gamma^a_{bd})

The curvature 2-form in the coframe is then

    Omega^a_b = r_hh dz^m ^ dzbar^n + r_vh psi^d ^ dzbar^n
              + r_hv dz^m ^ psibar^g + r_vv psi^d ^ psibar^g,

the horizontal curvature tensor is R(H,Kbar,L,Mbar) = G_{s bbar} r_hh[s,a,m,n]
H^m conj(K)^n L^a conj(M)^b, and tau^H(X,Ybar) = Omega(X,Ybar) chi.

Bianchi component equations
---------------------------
``bianchi_residuals`` checks the (1,1)-type components of D theta = eta^H ^ Omega
and D tau = eta^V ^ Omega, written out in the coframe basis.  With
A^a_{mn} = Gamma^a_{n;m} - Gamma^a_{m;n} (torsion coefficient of dz^m ^ dz^n),
C^a_{mn} = -delta_nbar(Gamma^a_{;m}) and E^a_{mg} = -Gamma^a_{gbar;m}:

  dz^m ^ dz^n ^ dzbar^r of D theta:
      delta_rbar(A^a_{mn}) + Gamma^a_{ng} delta_rbar(Gamma^g_{;m})
                           - Gamma^a_{mg} delta_rbar(Gamma^g_{;n})
      = r_hh[a,m,n,r] - r_hh[a,n,m,r]
  dz^m ^ dz^n ^ psibar^g of D theta:
      dot-d_gbar(A^a_{mn}) + Gamma^a_{ns} Gamma^s_{gbar;m}
                           - Gamma^a_{ms} Gamma^s_{gbar;n}
      = r_hv[a,m,g,n] - r_hv[a,n,g,m]
  dz^m ^ psi^s ^ dzbar^n of D tau:
      dot-d_s(C^a_{mn}) + E^a_{mb} conj(Gamma^b_{sbar;n}) + Gamma^a_{bs} C^b_{mn}
      = r_hh[a,s,m,n]
  dz^m ^ psi^s ^ psibar^g of D tau:
      dot-d_s(E^a_{mg}) + Gamma^a_{bs} E^b_{mg} = r_hv[a,s,g,m]

The remaining (1,1) components of D theta (the dz^nu ^ psi^g ^ dzbar and
dz^nu ^ psi^g ^ psibar families) reproduce the definitions of r_vh and r_vv
term by term and carry no independent content in this assembly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .connection import ChernFinsler, ConnectionData, DeltaDerivatives, HorizontalVector
from .errors import EngineError
from .jets import FinslerPoint, d_v, d_vbar
from .metrics import FinslerMetric


@dataclass(frozen=True)
class CurvatureBlocks:
    r_hh: np.ndarray
    r_vh: np.ndarray
    r_hv: np.ndarray
    r_vv: np.ndarray

    def symmetry_residual(self) -> float:
        """r_vh and r_vv are symmetric in their two lower unbarred indices."""
        s1 = np.abs(self.r_vh - self.r_vh.transpose(0, 2, 1, 3)).max()
        s2 = np.abs(self.r_vv - self.r_vv.transpose(0, 2, 1, 3)).max()
        scale = 1.0 + max(np.abs(self.r_vh).max(), np.abs(self.r_vv).max())
        return float(max(s1, s2) / scale)


def curvature_blocks(c: ConnectionData, d: DeltaDerivatives) -> CurvatureBlocks:
    r_hh = -d.delta_mixed_a.transpose(0, 1, 2, 3) - np.einsum(
        "abs,smn->abmn", c.gamma_vertical, d.delta_gamma_a
    )
    r_vh = -d.delta_vert_a
    r_hv = -d.dot_mixed_a.transpose(0, 1, 3, 2) - np.einsum(
        "abs,sgm->abgm", c.gamma_vertical, d.gamma_bar
    )
    r_vv = -d.dot_vert_a
    return CurvatureBlocks(r_hh=r_hh, r_vh=r_vh, r_hv=r_hv, r_vv=r_vv)


class PointCurvature:
    """Pipeline bundle: metric jet, connection algebra and curvature blocks
    at one point, with the contraction helpers used by every identity."""

    def __init__(self, cf: ChernFinsler):
        self.cf = cf
        self.mj = cf.mj
        self.n = cf.n
        self.v = cf.mj.point.v

    @classmethod
    def at(cls, m: FinslerMetric, p: FinslerPoint, path: str = "auto") -> "PointCurvature":
        return cls(ChernFinsler.from_metric(m, p, path))

    @cached_property
    def blocks(self) -> CurvatureBlocks:
        return curvature_blocks(self.cf.connection_data, self.cf.delta_derivatives)

    @cached_property
    def arrays(self):
        return self.mj.arrays()

    @property
    def G(self) -> float:
        return self.mj.G

    # -- contractions -------------------------------------------------------

    def herm(self, A, B) -> complex:
        return complex(np.einsum("ab,a,b->", self.arrays["levi"], A, np.conj(B)))

    def symm(self, A, B) -> complex:
        return complex(np.einsum("ab,a,b->", self.arrays["G_ab"], A, B))

    def omega(self, X, Y, Z) -> np.ndarray:
        """Components of Omega(X, Ybar) Z for horizontal X, Y, Z."""
        return np.einsum("abmn,m,n,b->a", self.blocks.r_hh, X, np.conj(Y), Z)

    def omega_pair(self, X, Y, Z, W) -> complex:
        """<Omega(X, Ybar) Z, W>."""
        return self.herm(self.omega(X, Y, Z), W)

    def tau_h(self, X, Y) -> np.ndarray:
        """tau^H(X, Ybar) = Omega(X, Ybar) chi."""
        return self.omega(X, Y, self.v)

    def tensor(self, H, K, L, M) -> complex:
        """R(H, Kbar, L, Mbar)."""
        return complex(
            np.einsum(
                "sb,samn,m,n,a,b->",
                self.arrays["levi"], self.blocks.r_hh, H, np.conj(K), L, np.conj(M),
            )
        )


def curvature_at(m: FinslerMetric, p: FinslerPoint, path: str = "auto") -> PointCurvature:
    return PointCurvature.at(m, p, path)


def horizontal_curvature_tensor(b: CurvatureBlocks, levi_matrix: np.ndarray,
                                H, K, L, M) -> complex:
    """R(H, Kbar, L, Mbar) = G_{s bbar} R^s_{a;m nbar} H^m conj(K^n) L^a conj(M^b)."""

    def comps(x):
        return x.comps if isinstance(x, HorizontalVector) else np.asarray(x, dtype=complex)

    return complex(
        np.einsum("sb,samn,m,n,a,b->", levi_matrix, b.r_hh,
                  comps(H), np.conj(comps(K)), comps(L), np.conj(comps(M)))
    )


def holomorphic_curvature(m: FinslerMetric, p: FinslerPoint, path: str = "auto",
                          pc: PointCurvature | None = None) -> float:
    """K_F = -(2/G^2) G_a delta_nbar(Gamma^a_{;m}) v^m conj(v)^n; real by
    the curvature symmetries, and invariant under v -> zeta v."""
    pc = pc or PointCurvature.at(m, p, path)
    dga = pc.cf.delta_derivatives.delta_gamma_a
    val = -2.0 / pc.G**2 * np.einsum(
        "a,amn,m,n->", pc.arrays["G_a"], dga, pc.v, np.conj(pc.v)
    )
    if abs(val.imag) > 1e-9 * (1.0 + abs(val)):
        raise EngineError(f"holomorphic curvature has imaginary residue {val.imag:.3e}")
    return float(val.real)


def holomorphic_curvature_tensor_route(pc: PointCurvature) -> float:
    """Second route through the curvature tensor: 2/G^2 Re R(chi,chi,chi,chi)."""
    r = pc.tensor(pc.v, pc.v, pc.v, pc.v)
    return float(2.0 / pc.G**2 * r.real)


def flag_curvature(m: FinslerMetric, p: FinslerPoint, H, path: str = "auto",
                   pc: PointCurvature | None = None) -> float:
    """Horizontal flag curvature along H, expressed in Chern-Finsler data:

    R(H,H) = Re[ <Omega(chi,Hbar)H, chi> - <Omega(H,chibar)H, chi>
                 + <<tau^H(H,chibar), H>> - <<tau^H(chi,Hbar), H>> ].
    """
    pc = pc or PointCurvature.at(m, p, path)
    h = H.comps if isinstance(H, HorizontalVector) else np.asarray(H, dtype=complex)
    chi = pc.v
    val = (
        pc.omega_pair(chi, h, h, chi)
        - pc.omega_pair(h, chi, h, chi)
        + pc.symm(pc.tau_h(h, chi), h)
        - pc.symm(pc.tau_h(chi, h), h)
    )
    return float(val.real)


# -- identity suites -------------------------------------------------------------


def _draws(rng: np.random.Generator, n: int) -> np.ndarray:
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


def curvature_symmetry_residuals(m: FinslerMetric, p: FinslerPoint, draws: int = 20,
                                 seed: int = 0, path: str = "auto",
                                 pc: PointCurvature | None = None) -> dict[str, float]:
    """Antisymmetry and conjugate symmetry of the horizontal curvature tensor,
    plus the conditional pair-swap symmetry together with the residual of its
    hypothesis (horizontal antiholomorphic derivative of theta)."""
    pc = pc or PointCurvature.at(m, p, path)
    rng = np.random.default_rng(seed)
    r_hh = pc.blocks.r_hh
    scale = 1.0 + np.abs(r_hh).max() * (1.0 + np.abs(pc.arrays["levi"]).max())

    eqtquat = eqtcin = eqtsei = 0.0
    for _ in range(draws):
        H, K, L, M = (_draws(rng, pc.n) for _ in range(4))
        # Omega as a genuine 2-form: swapping a (1,0) and a (0,1) slot flips sign
        omega_HK = np.einsum("abmn,m,n->ab", r_hh, H, np.conj(K))
        omega_KbarH = -np.einsum("abmn,m,n->ab", r_hh, H, np.conj(K))
        r1 = np.einsum("sb,sa,a,b->", pc.arrays["levi"], omega_KbarH + omega_HK, L, np.conj(M))
        eqtquat = max(eqtquat, abs(r1))
        r2 = pc.tensor(K, H, M, L) - np.conj(pc.tensor(H, K, L, M))
        eqtcin = max(eqtcin, abs(r2))
        r3 = pc.tensor(L, K, H, M) - pc.tensor(H, K, L, M)
        eqtsei = max(eqtsei, abs(r3))
    dhtheta = np.abs(r_hh - r_hh.transpose(0, 2, 1, 3)).max() / (1.0 + np.abs(r_hh).max())
    return {
        "eqtquat": float(eqtquat / scale),
        "eqtcin": float(eqtcin / scale),
        "eqtsei": float(eqtsei / scale),
        "dhtheta": float(dhtheta),
        "block_symmetry": pc.blocks.symmetry_residual(),
    }


def tau_contraction_residual(m: FinslerMetric, p: FinslerPoint, path: str = "auto",
                             pc: PointCurvature | None = None,
                             breakdown: bool = False):
    """Radial contractions of the four blocks against the (1,1)-torsion:
    R_hh v = -delta_nbar Gamma, R_vh v = 0, R_hv v = -Gamma_bar, R_vv v = 0."""
    pc = pc or PointCurvature.at(m, p, path)
    b = pc.blocks
    d = pc.cf.delta_derivatives
    v = pc.v
    parts = {}
    lhs = np.einsum("abmn,b->amn", b.r_hh, v)
    parts["r_hh_v"] = np.abs(lhs + d.delta_gamma_a).max() / (1.0 + np.abs(lhs).max())
    lhs = np.einsum("abdn,b->adn", b.r_vh, v)
    parts["r_vh_v"] = np.abs(lhs).max() / (1.0 + np.abs(b.r_vh).max() * np.abs(v).max())
    lhs = np.einsum("abgm,b->agm", b.r_hv, v)
    parts["r_hv_v"] = np.abs(lhs + d.gamma_bar).max() / (1.0 + np.abs(lhs).max())
    lhs = np.einsum("abdg,b->adg", b.r_vv, v)
    parts["r_vv_v"] = np.abs(lhs).max() / (1.0 + np.abs(b.r_vv).max() * np.abs(v).max())
    parts = {k: float(x) for k, x in parts.items()}
    return parts if breakdown else max(parts.values())


def bianchi_residuals(m: FinslerMetric, p: FinslerPoint, path: str = "auto",
                      pc: PointCurvature | None = None) -> dict[str, float]:
    """Component residuals of D theta = eta^H ^ Omega and D tau = eta^V ^ Omega
    (see the module docstring for the exact equations checked).

    The left sides are assembled from the torsion coefficients: A uses the
    definition route for Gamma^a_{b;m} and the dot-derivatives of C and E are
    taken on freshly composed jets, so the match against the curvature blocks
    exercises the operator-commutation content of the identities rather than
    reproducing the block definitions.
    """
    pc = pc or PointCurvature.at(m, p, path)
    cf = pc.cf
    n = pc.n
    b = pc.blocks
    d = cf.delta_derivatives
    cd = cf.connection_data
    vert = cd.gamma_vertical
    gbar = d.gamma_bar

    # D theta, dz ^ dz ^ dzbar
    res_a = 0.0
    scale_a = 1.0 + np.abs(b.r_hh).max()
    for al in range(n):
        for mu in range(n):
            for nu in range(mu + 1, n):
                a_jet = cf.mixed_def[al][nu][mu] - cf.mixed_def[al][mu][nu]
                for rho in range(n):
                    lhs = cf.delta_bar(rho, a_jet).value
                    lhs += np.einsum("g,g->", vert[al, nu], d.delta_gamma_a[:, mu, rho])
                    lhs -= np.einsum("g,g->", vert[al, mu], d.delta_gamma_a[:, nu, rho])
                    rhs = b.r_hh[al, mu, nu, rho] - b.r_hh[al, nu, mu, rho]
                    res_a = max(res_a, abs(lhs - rhs))

    # D theta, dz ^ dz ^ psibar
    res_b = 0.0
    scale_b = 1.0 + np.abs(b.r_hv).max()
    for al in range(n):
        for mu in range(n):
            for nu in range(mu + 1, n):
                a_jet = cf.mixed_def[al][nu][mu] - cf.mixed_def[al][mu][nu]
                for g in range(n):
                    lhs = d_vbar(a_jet, g).value
                    lhs += np.einsum("s,s->", vert[al, nu], gbar[:, g, mu])
                    lhs -= np.einsum("s,s->", vert[al, mu], gbar[:, g, nu])
                    rhs = b.r_hv[al, mu, g, nu] - b.r_hv[al, nu, g, mu]
                    res_b = max(res_b, abs(lhs - rhs))

    # D tau, dz ^ psi ^ dzbar and dz ^ psi ^ psibar
    res_t1 = 0.0
    res_t2 = 0.0
    scale_t = 1.0 + np.abs(b.r_hh).max() + np.abs(b.r_hv).max()
    c_vals = -d.delta_gamma_a
    e_vals = -gbar.transpose(0, 2, 1)  # E[a, m, g] = -Gamma^a_{gbar;m}
    for al in range(n):
        for mu in range(n):
            c_jets = [-cf.delta_bar(nu, cf.gamma1[al][mu]) for nu in range(n)]
            e_jets = [-cf.gamma_bar[al][g][mu] for g in range(n)]
            for s in range(n):
                for nu in range(n):
                    lhs = d_v(c_jets[nu], s).value
                    lhs += np.einsum("b,b->", e_vals[al, mu], np.conj(gbar[:, s, nu]))
                    lhs += np.einsum("b,b->", vert[al, :, s], c_vals[:, mu, nu])
                    res_t1 = max(res_t1, abs(lhs - b.r_hh[al, s, mu, nu]))
                for g in range(n):
                    lhs = d_v(e_jets[g], s).value
                    lhs += np.einsum("b,b->", vert[al, :, s], e_vals[:, mu, g])
                    res_t2 = max(res_t2, abs(lhs - b.r_hv[al, s, g, mu]))

    return {
        "dtheta_dzdz_dzbar": float(res_a / scale_a),
        "dtheta_dzdz_psibar": float(res_b / scale_b),
        "dtau_dz_psi_dzbar": float(res_t1 / scale_t),
        "dtau_dz_psi_psibar": float(res_t2 / scale_t),
    }


def constant_curvature_residuals(m: FinslerMetric, p: FinslerPoint, c: float,
                                 draws: int = 20, seed: int = 0, path: str = "auto",
                                 pc: PointCurvature | None = None) -> dict[str, float]:
    """Residuals of the constant-holomorphic-curvature identities (the metric
    is assumed to satisfy K_F == 2c; residuals measure how well it does)."""
    pc = pc or PointCurvature.at(m, p, path)
    rng = np.random.default_rng(seed)
    chi = pc.v
    G = pc.G

    lhs = pc.omega_pair(chi, chi, chi, chi)
    rhs = c * G * G
    out = {"eqchc": abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))}

    t = pc.tau_h(chi, chi)
    rhs_vec = c * G * chi
    out["eqstar"] = np.abs(t - rhs_vec).max() / (1.0 + np.abs(t).max() + np.abs(rhs_vec).max())

    cuno = hbis = tsu = fine = 0.0
    for _ in range(draws):
        H = _draws(rng, pc.n)
        K = _draws(rng, pc.n)

        lhs = pc.omega_pair(chi, K, chi, chi)
        rhs = c * G * pc.herm(chi, K)
        cuno = max(cuno, abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs)))

        lhs = pc.omega_pair(chi, K, H, chi)
        rhs = 0.5 * c * (pc.herm(H, chi) * pc.herm(chi, K) + G * pc.herm(H, K))
        hbis = max(hbis, abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs)))

        t = pc.tau_h(K, chi)
        rhs_vec = 0.5 * c * (pc.herm(K, chi) * chi + G * K)
        tsu = max(tsu, np.abs(t - rhs_vec).max()
                  / (1.0 + np.abs(t).max() + np.abs(rhs_vec).max()))

        lhs = (
            pc.omega_pair(chi, K, H, chi)
            - pc.omega_pair(H, chi, K, chi)
            + pc.symm(H, pc.tau_h(K, chi))
            - pc.symm(H, pc.tau_h(chi, K))
        ).real
        rhs = 0.5 * c * (
            G * (pc.herm(H, K) - pc.symm(H, K))
            + pc.herm(H, chi) * (pc.herm(chi, K) - 2.0 * pc.herm(K, chi))
        ).real
        fine = max(fine, abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs)))

    out.update(eqCuno=cuno, eqHbis=hbis, eqtsu=tsu, fine=fine)
    return {k: float(x) for k, x in out.items()}


def estimate_constant_curvature(m: FinslerMetric, points: list[FinslerPoint],
                                path: str = "auto") -> dict:
    """Fit c as the sample mean of K_F / 2; the spread diagnoses constancy."""
    vals = np.array([holomorphic_curvature(m, p, path) / 2.0 for p in points])
    return {
        "c": float(vals.mean()),
        "std": float(vals.std()),
        "min_half_kf": float(vals.min()),
        "max_half_kf": float(vals.max()),
        "count": len(points),
    }
