"""Dense truncated Taylor-jet arithmetic and Wirtinger derivative assembly.

A point of the slit tangent bundle has 4n underlying real coordinates
(Re z, Im z, Re v, Im v).  A :class:`TaylorJet` stores every mixed partial
derivative of a (complex-valued) function of those coordinates up to a fixed
total order, evaluated at one point.

Normalization convention
------------------------
Coefficients are *derivative values*, not Taylor coefficients: the entry for
multi-index I is the mixed partial ``D^I f`` itself, without division by I!.
Under this convention the product rule is the generalized Leibniz formula

    D^K (f g) = sum_{I+J=K}  [prod_t C(K_t, I_t)]  D^I f  D^J g,

and differentiation is a plain index shift.  The factorial convention is
pinned by ``tests/test_jets.py::test_factorial_convention``.

The same index bookkeeping is reused for tables of Wirtinger derivatives: a
table indexed by multi-indices over the 4n formal symbols
(z_1..z_n, zbar_1..zbar_n, v_1..v_n, vbar_1..vbar_n) obeys the identical
Leibniz/shift algebra, because the Wirtinger operators are commuting
derivations.  Helpers for that interpretation (``d_z``, ``d_zbar``, ``d_v``,
``d_vbar``, ``wirtinger_conj``) live at the bottom of this module.  Note that
``TaylorJet.conj`` conjugates coefficients in place, which is correct only
for the real-coordinate interpretation; Wirtinger tables must use
``wirtinger_conj`` (it also swaps the barred and unbarred index blocks).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, SingularEvaluationError

MAX_ORDER = 4
_EPS_V = 1e-12

_SPACES: dict[tuple[int, int], "JetSpace"] = {}


def jet_space(dim: int, max_order: int = MAX_ORDER) -> "JetSpace":
    key = (dim, max_order)
    if key not in _SPACES:
        _SPACES[key] = JetSpace(dim, max_order)
    return _SPACES[key]


class JetSpace:
    """Multi-index enumeration and precomputed tables for one (dim, order).

    Indices of total degree <= order are enumerated sorted by degree, so the
    coefficient array of a jet of logical order o is a prefix of the full
    array.  Construction cost is paid once per dimension and cached.
    """

    def __init__(self, dim: int, max_order: int = MAX_ORDER):
        if dim < 1:
            raise ValueError(f"jet dimension must be >= 1, got {dim}")
        if not 0 <= max_order <= MAX_ORDER:
            raise ValueError(f"jet order must be in [0, {MAX_ORDER}], got {max_order}")
        self.dim = dim
        self.max_order = max_order

        rows = []
        self.sizes = []  # sizes[o] = number of indices with degree <= o
        for deg in range(max_order + 1):
            for combo in itertools.combinations_with_replacement(range(dim), deg):
                e = [0] * dim
                for t in combo:
                    e[t] += 1
                rows.append(tuple(e))
            self.sizes.append(len(rows))
        self.exponents = np.array(rows, dtype=np.int64)
        self.degrees = self.exponents.sum(axis=1)
        self.index_of = {e: i for i, e in enumerate(rows)}

        self._mul = None
        self._shift = None
        self._conj_perm = None

    # -- lazy tables ------------------------------------------------------

    def _build_mul(self):
        n_total = self.sizes[-1]
        ti, tj, tk, tw = [], [], [], []
        exps = self.exponents
        degs = self.degrees
        for i in range(n_total):
            di = degs[i]
            ei = exps[i]
            for j in range(self.sizes[self.max_order - di]):
                k = self.index_of[tuple(ei + exps[j])]
                w = 1.0
                ek = exps[k]
                for t in range(self.dim):
                    if ei[t]:
                        w *= math.comb(ek[t], ei[t])
                ti.append(i)
                tj.append(j)
                tk.append(k)
                tw.append(w)
        order_rows = np.argsort(np.asarray(degs)[tk], kind="stable")
        self._mul = (
            np.asarray(ti)[order_rows],
            np.asarray(tj)[order_rows],
            np.asarray(tk)[order_rows],
            np.asarray(tw, dtype=float)[order_rows],
        )
        kdegs = degs[self._mul[2]]
        self._mul_bounds = np.searchsorted(kdegs, np.arange(self.max_order + 2))

    @property
    def mul_table(self):
        if self._mul is None:
            self._build_mul()
        return self._mul, self._mul_bounds

    @property
    def shift_tables(self):
        """shift[d][m] = index of exponent(m) + e_d, for deg(m) < max_order."""
        if self._shift is None:
            m_max = self.sizes[self.max_order - 1] if self.max_order >= 1 else 0
            tabs = np.empty((self.dim, m_max), dtype=np.int64)
            for d in range(self.dim):
                for m in range(m_max):
                    e = self.exponents[m].copy()
                    e[d] += 1
                    tabs[d, m] = self.index_of[tuple(e)]
            self._shift = tabs
        return self._shift

    def conj_permutation(self) -> np.ndarray:
        """Index permutation swapping the barred/unbarred Wirtinger blocks.

        Valid only when dim = 4n with slot layout [z | zbar | v | vbar].
        """
        if self._conj_perm is None:
            if self.dim % 4:
                raise ValueError("conjugation permutation needs dim divisible by 4")
            n = self.dim // 4
            perm = np.empty(self.sizes[-1], dtype=np.int64)
            for i, e in enumerate(self.exponents):
                swapped = np.concatenate(
                    [e[n : 2 * n], e[:n], e[3 * n :], e[2 * n : 3 * n]]
                )
                perm[i] = self.index_of[tuple(swapped)]
            self._conj_perm = perm
        return self._conj_perm


@dataclass
class TaylorJet:
    """Truncated jet of a complex-valued function of ``space.dim`` variables.

    ``order`` is the logical truncation order; ``coeffs`` has length
    ``space.sizes[order]`` and stores derivative values (see module docs).
    Instances are treated as immutable; all operations return new jets.
    """

    space: JetSpace
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        expected = self.space.sizes[self.order]
        if len(self.coeffs) != expected:
            raise ValueError(
                f"coefficient count {len(self.coeffs)} != C(dim+order, order) = {expected}"
            )

    # -- basic accessors ---------------------------------------------------

    @property
    def value(self) -> complex:
        return complex(self.coeffs[0])

    def coefficient(self, exps) -> complex:
        return complex(self.coeffs[self.space.index_of[tuple(exps)]])

    def truncate(self, order: int) -> "TaylorJet":
        if order > self.order:
            raise ValueError("cannot extend a jet to higher order")
        if order == self.order:
            return self
        return TaylorJet(self.space, order, self.coeffs[: self.space.sizes[order]].copy())

    # -- arithmetic ---------------------------------------------------------

    def _binary_orders(self, other):
        if self.space is not other.space:
            raise ValueError("jets live in different spaces")
        return min(self.order, other.order)

    def __add__(self, other):
        if isinstance(other, TaylorJet):
            o = self._binary_orders(other)
            n = self.space.sizes[o]
            return TaylorJet(self.space, o, self.coeffs[:n] + other.coeffs[:n])
        c = self.coeffs.copy()
        c[0] += other
        return TaylorJet(self.space, self.order, c)

    __radd__ = __add__

    def __neg__(self):
        return TaylorJet(self.space, self.order, -self.coeffs)

    def __sub__(self, other):
        return self + (-other if isinstance(other, TaylorJet) else -complex(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TaylorJet):
            return TaylorJet(self.space, self.order, self.coeffs * other)
        o = self._binary_orders(other)
        (ti, tj, tk, tw), bounds = self.space.mul_table
        m = bounds[o + 1]
        prod = tw[:m] * self.coeffs[ti[:m]] * other.coeffs[tj[:m]]
        size = self.space.sizes[o]
        out = np.bincount(tk[:m], weights=prod.real, minlength=size).astype(complex)
        out += 1j * np.bincount(tk[:m], weights=prod.imag, minlength=size)
        return TaylorJet(self.space, o, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorJet):
            return self * jet_inv(other)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return jet_inv(self) * other

    def conj(self) -> "TaylorJet":
        """Complex conjugate (real-coordinate interpretation only)."""
        return TaylorJet(self.space, self.order, np.conj(self.coeffs))

    def derive(self, var: int) -> "TaylorJet":
        """Partial derivative in variable ``var``; drops the order by one."""
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        size = self.space.sizes[self.order - 1]
        tab = self.space.shift_tables[var][:size]
        return TaylorJet(self.space, self.order - 1, self.coeffs[tab].copy())


def jet_constant(space: JetSpace, order: int, value: complex) -> TaylorJet:
    c = np.zeros(space.sizes[order], dtype=complex)
    c[0] = value
    return TaylorJet(space, order, c)


def jet_variable(space: JetSpace, order: int, var: int, value: complex) -> TaylorJet:
    c = np.zeros(space.sizes[order], dtype=complex)
    c[0] = value
    if order >= 1:
        c[space.index_of[tuple(np.eye(space.dim, dtype=np.int64)[var])]] = 1.0
    return TaylorJet(space, order, c)


# -- analytic functions of one jet ------------------------------------------


def _compose(f: TaylorJet, series: list[complex]) -> TaylorJet:
    """Evaluate sum_k series[k] * h^k with h = f minus its constant term."""
    h = TaylorJet(f.space, f.order, f.coeffs.copy())
    h.coeffs[0] = 0.0
    out = jet_constant(f.space, f.order, series[f.order])
    for k in range(f.order - 1, -1, -1):
        out = out * h + series[k]
    return out


def _positive_constant(f: TaylorJet, what: str) -> float:
    c = f.value
    if abs(c.imag) > 1e-9 * (1.0 + abs(c)) or c.real <= 0.0:
        raise DomainError(f"{what} of a jet with non-positive constant term {c}")
    return c.real


def jet_inv(f: TaylorJet) -> TaylorJet:
    c = f.value
    if abs(c) < 1e-300:
        raise SingularEvaluationError("division by a jet with zero constant term")
    series = [(-1.0) ** k / c ** (k + 1) for k in range(f.order + 1)]
    return _compose(f, series)


def jet_pow(f: TaylorJet, p: float) -> TaylorJet:
    """f**p for a real literal exponent p.

    Non-negative integer exponents work for any jet; fractional or negative
    exponents require a positive real constant term.
    """
    if float(p) == int(p) and p >= 0:
        k = int(p)
        out = jet_constant(f.space, f.order, 1.0)
        base = f
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out
    c = _positive_constant(f, f"power {p}")
    series = []
    coef = 1.0
    for k in range(f.order + 1):
        series.append(coef * c ** (p - k))
        coef *= (p - k) / (k + 1)
    return _compose(f, series)


def jet_sqrt(f: TaylorJet) -> TaylorJet:
    _positive_constant(f, "sqrt")
    return jet_pow(f, 0.5)


def jet_log(f: TaylorJet) -> TaylorJet:
    c = _positive_constant(f, "log")
    series = [complex(math.log(c))]
    for k in range(1, f.order + 1):
        series.append((-1.0) ** (k + 1) / (k * c**k))
    return _compose(f, series)


def jet_exp(f: TaylorJet) -> TaylorJet:
    c = f.value
    ec = np.exp(c)
    series = [ec / math.factorial(k) for k in range(f.order + 1)]
    return _compose(f, series)


def jet_re(f: TaylorJet) -> TaylorJet:
    return (f + f.conj()) * 0.5


def jet_im(f: TaylorJet) -> TaylorJet:
    return (f - f.conj()) * (-0.5j)


def jet_abs2(f: TaylorJet) -> TaylorJet:
    return f * f.conj()


# -- points of the slit tangent bundle ---------------------------------------


@dataclass(frozen=True)
class FinslerPoint:
    """A point (z, v) of the slit bundle: z in C^n, v in C^n minus 0."""

    z: np.ndarray
    v: np.ndarray
    eps_v: float = _EPS_V

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex).reshape(-1)
        v = np.asarray(self.v, dtype=complex).reshape(-1)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "v", v)
        if z.shape[0] < 1:
            raise ValueError("dimension must be >= 1")
        if v.shape != z.shape:
            raise ValueError(f"z and v dimensions differ: {z.shape} vs {v.shape}")
        if np.linalg.norm(v) <= self.eps_v:
            raise ValueError(
                f"|v| = {np.linalg.norm(v):.3e} <= {self.eps_v}: point is not in the slit bundle"
            )

    @property
    def n(self) -> int:
        return self.z.shape[0]


def seed_point_jets(p: FinslerPoint, order: int) -> tuple[list[TaylorJet], list[TaylorJet]]:
    """Coordinate functions z^mu, v^alpha as jets over the 4n real variables.

    Slot layout: [Re z_1..n | Im z_1..n | Re v_1..n | Im v_1..n].  The jet of
    z^mu has constant term z_mu, coefficient 1 in its Re-slot and 1j in its
    Im-slot; likewise for v^alpha.
    """
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in [1, {MAX_ORDER}], got {order}")
    n = p.n
    space = jet_space(4 * n)
    size = space.sizes[order]

    def seed(value, re_slot, im_slot):
        c = np.zeros(size, dtype=complex)
        c[0] = value
        c[1 + re_slot] = 1.0
        c[1 + im_slot] = 1.0j
        return TaylorJet(space, order, c)

    zs = [seed(p.z[mu], mu, n + mu) for mu in range(n)]
    vs = [seed(p.v[a], 2 * n + a, 3 * n + a) for a in range(n)]
    return zs, vs


# -- Wirtinger derivative assembly -------------------------------------------


@dataclass(frozen=True)
class WirtingerIndex:
    """Mixed Wirtinger derivative: counts per variable for d/dz, d/dzbar, d/dv, d/dvbar."""

    dz: tuple
    dzbar: tuple
    dv: tuple
    dvbar: tuple

    @staticmethod
    def make(n, dz=(), dzbar=(), dv=(), dvbar=()):
        """Build from lists of 0-based variable positions, e.g. dv=[0, 0] for d^2/dv1^2."""

        def counts(positions):
            c = [0] * n
            for pos in positions:
                c[pos] += 1
            return tuple(c)

        return WirtingerIndex(counts(dz), counts(dzbar), counts(dv), counts(dvbar))

    @property
    def order(self) -> int:
        return sum(self.dz) + sum(self.dzbar) + sum(self.dv) + sum(self.dvbar)

    def conjugate(self) -> "WirtingerIndex":
        return WirtingerIndex(self.dzbar, self.dz, self.dvbar, self.dv)

    def flat(self) -> tuple:
        return self.dz + self.dzbar + self.dv + self.dvbar

    @staticmethod
    def from_flat(exps) -> "WirtingerIndex":
        n = len(exps) // 4
        e = tuple(int(x) for x in exps)
        return WirtingerIndex(e[:n], e[n : 2 * n], e[2 * n : 3 * n], e[3 * n :])


def _wirtinger_expansion(n: int, idx: WirtingerIndex):
    """Expand a product of Wirtinger operators into real partials.

    Yields (real multi-index over 4n slots, complex weight).  Each d/dz factor
    contributes (d/dx - i d/dy)/2, each d/dzbar (d/dx + i d/dy)/2, and the
    same pattern for v with slots (Re v, Im v).
    """
    factors = []
    for mu in range(n):
        factors += [(mu, n + mu, -0.5j)] * idx.dz[mu]
        factors += [(mu, n + mu, +0.5j)] * idx.dzbar[mu]
        factors += [(2 * n + mu, 3 * n + mu, -0.5j)] * idx.dv[mu]
        factors += [(2 * n + mu, 3 * n + mu, +0.5j)] * idx.dvbar[mu]
    for choice in itertools.product((0, 1), repeat=len(factors)):
        exps = [0] * (4 * n)
        w = 1.0 + 0.0j
        for pick, (re_slot, im_slot, im_w) in zip(choice, factors):
            if pick:
                exps[im_slot] += 1
                w *= im_w
            else:
                exps[re_slot] += 1
                w *= 0.5
        yield tuple(exps), w


def wirtinger_extract(jet: TaylorJet, idx: WirtingerIndex) -> complex:
    """Mixed Wirtinger partial of the jetted function at the seed point."""
    n = jet.space.dim // 4
    if idx.order > jet.order:
        raise ValueError(f"index order {idx.order} exceeds jet order {jet.order}")
    total = 0.0 + 0.0j
    for exps, w in _wirtinger_expansion(n, idx):
        total += w * jet.coeffs[jet.space.index_of[exps]]
    return total


_EXTRACTION: dict[int, sp.csr_matrix] = {}


def extraction_matrix(n: int) -> sp.csr_matrix:
    """Sparse linear map from real-coordinate jet coefficients to the full
    Wirtinger table, both indexed by the order-4 enumeration of jet_space(4n)."""
    if n not in _EXTRACTION:
        space = jet_space(4 * n)
        rows, cols, vals = [], [], []
        for i, exps in enumerate(space.exponents):
            idx = WirtingerIndex.from_flat(exps)
            for rexps, w in _wirtinger_expansion(n, idx):
                rows.append(i)
                cols.append(space.index_of[rexps])
                vals.append(w)
        m = space.sizes[-1]
        _EXTRACTION[n] = sp.csr_matrix(
            (np.asarray(vals, dtype=complex), (rows, cols)), shape=(m, m)
        )
    return _EXTRACTION[n]


def wirtinger_table(jet: TaylorJet) -> np.ndarray:
    """All Wirtinger derivatives (degree <= jet.order) of a real-coordinate jet."""
    n = jet.space.dim // 4
    size = jet.space.sizes[jet.order]
    mat = extraction_matrix(n)[:size, :size]
    return mat @ jet.coeffs


# -- Wirtinger-table jets -----------------------------------------------------
#
# A TaylorJet over the 4n Wirtinger slots [z | zbar | v | vbar] stores the
# local expansion of a function in terms of its Wirtinger derivatives.  The
# arithmetic above applies verbatim; only differentiation direction names and
# conjugation differ.


def d_z(jet: TaylorJet, mu: int) -> TaylorJet:
    return jet.derive(mu)


def d_zbar(jet: TaylorJet, mu: int) -> TaylorJet:
    return jet.derive(jet.space.dim // 4 + mu)


def d_v(jet: TaylorJet, alpha: int) -> TaylorJet:
    return jet.derive(2 * (jet.space.dim // 4) + alpha)


def d_vbar(jet: TaylorJet, alpha: int) -> TaylorJet:
    return jet.derive(3 * (jet.space.dim // 4) + alpha)


def wirtinger_conj(jet: TaylorJet) -> TaylorJet:
    """Conjugate of a Wirtinger-table jet: conjugate coefficients and swap
    the z/zbar and v/vbar index blocks."""
    perm = jet.space.conj_permutation()[: len(jet.coeffs)]
    return TaylorJet(jet.space, jet.order, np.conj(jet.coeffs[perm]))
