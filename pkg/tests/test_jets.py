"""Jet arithmetic and Wirtinger assembly tests.

Independent oracles: central finite differences of scalar evaluations, and
closed-form hand differentiation for the hyperbolic disk entries.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfinsler.errors import DomainError, SingularEvaluationError
from cfinsler.jets import (
    FinslerPoint,
    TaylorJet,
    WirtingerIndex,
    d_z,
    jet_abs2,
    jet_exp,
    jet_inv,
    jet_log,
    jet_pow,
    jet_space,
    jet_sqrt,
    jet_variable,
    seed_point_jets,
    wirtinger_conj,
    wirtinger_extract,
    wirtinger_table,
)
from cfinsler.metrics import builtin_metric
from cfinsler.sampling import SampleConfig, sample_points


def disk_jet(p, order=4):
    zs, vs = seed_point_jets(p, order)
    return jet_abs2(vs[0]) / jet_pow(1.0 - jet_abs2(zs[0]), 2)


def test_factorial_convention():
    # coefficients are derivative values: d^2/dx^2 (x^2) = 2, not the Taylor 1
    x = jet_variable(jet_space(1, 2), 2, 0, 3.0)
    sq = x * x
    assert sq.coefficient((0,)) == 9.0
    assert sq.coefficient((1,)) == 6.0
    assert sq.coefficient((2,)) == 2.0


def test_seeding_basics():
    p = FinslerPoint([0.0], [1.0])
    zs, vs = seed_point_jets(p, 1)
    assert zs[0].value == 0.0
    assert zs[0].coefficient((1, 0, 0, 0)) == 1.0
    assert zs[0].coefficient((0, 1, 0, 0)) == 1.0j
    assert vs[0].coefficient((0, 0, 1, 0)) == 1.0

    p = FinslerPoint([0.5], [1.0])
    zs, _ = seed_point_jets(p, 4)
    assert zs[0].value == 0.5

    p2 = FinslerPoint([0.1, 0.2], [1.0, 2.0])
    zs, vs = seed_point_jets(p2, 2)
    assert len(zs) == 2 and len(vs) == 2
    assert zs[0].space.dim == 8
    # unit coefficient only in the variable's own direction
    assert zs[0].coefficient((0, 1, 0, 0, 0, 0, 0, 0)) == 0.0


def test_seed_order_validation():
    p = FinslerPoint([0.0], [1.0])
    with pytest.raises(ValueError):
        seed_point_jets(p, 0)
    with pytest.raises(ValueError):
        seed_point_jets(p, 5)


def test_coefficient_count():
    space = jet_space(4, 4)
    assert space.sizes[4] == math.comb(4 + 4, 4)
    space8 = jet_space(8, 4)
    assert space8.sizes[4] == math.comb(8 + 4, 4)


def test_abs2_and_mul():
    p = FinslerPoint([0.0], [1.0])
    _, vs = seed_point_jets(p, 2)
    a = jet_abs2(vs[0])
    assert a.value == 1.0
    # |v|^2 = u^2 + w^2: second derivative in u is 2
    assert a.coefficient((0, 0, 2, 0)) == 2.0
    assert a.coefficient((0, 0, 0, 2)) == 2.0

    p = FinslerPoint([0.5], [2.0])
    zs, vs = seed_point_jets(p, 2)
    assert (zs[0] * vs[0]).value == 1.0


def test_pow_real_against_finite_differences():
    x = jet_variable(jet_space(1, 4), 4, 0, 4.0)
    px = jet_pow(x, -2.0)
    assert px.value == 0.0625
    assert px.coefficient((1,)) == pytest.approx(-2 * 4.0**-3, rel=1e-14)

    def f(t):
        return (4.0 + t) ** -2.0

    h = 1e-3
    fd1 = (f(h) - f(-h)) / (2 * h)
    fd2 = (f(h) - 2 * f(0) + f(-h)) / h**2
    assert px.coefficient((1,)) == pytest.approx(fd1, rel=1e-5)
    assert px.coefficient((2,)) == pytest.approx(fd2, rel=1e-5)


def test_analytic_functions_round_trip():
    x = jet_variable(jet_space(2, 4), 4, 0, 2.0)
    y = jet_variable(jet_space(2, 4), 4, 1, 0.5)
    f = x * x + y
    assert np.allclose(jet_exp(jet_log(f)).coeffs, f.coeffs, atol=1e-12)
    assert np.allclose((jet_sqrt(f) * jet_sqrt(f)).coeffs, f.coeffs, atol=1e-12)
    assert np.allclose((f * jet_inv(f)).coeffs,
                       np.eye(1, len(f.coeffs), 0)[0], atol=1e-13)


def test_singularities_raise():
    space = jet_space(1, 2)
    zero = jet_variable(space, 2, 0, 0.0)
    with pytest.raises(SingularEvaluationError):
        jet_inv(zero)
    neg = jet_variable(space, 2, 0, -1.0)
    with pytest.raises(DomainError):
        jet_sqrt(neg)
    with pytest.raises(DomainError):
        jet_log(neg)


def test_wirtinger_extract_flat_levi():
    p = FinslerPoint([0.0], [1.0])
    _, vs = seed_point_jets(p, 2)
    f = jet_abs2(vs[0])
    idx = WirtingerIndex.make(1, dv=[0], dvbar=[0])
    assert wirtinger_extract(f, idx) == pytest.approx(1.0)


def test_wirtinger_extract_holomorphic():
    p = FinslerPoint([0.3 + 0.2j], [1.0 - 0.5j])
    zs, vs = seed_point_jets(p, 3)
    f = zs[0] * vs[0]
    assert wirtinger_extract(f, WirtingerIndex.make(1, dzbar=[0])) == pytest.approx(0.0)
    assert wirtinger_extract(f, WirtingerIndex.make(1, dvbar=[0])) == pytest.approx(0.0)
    assert wirtinger_extract(f, WirtingerIndex.make(1, dz=[0])) == pytest.approx(p.v[0])


def test_wirtinger_extract_disk_levi():
    # closed form: G_{1 1bar} = (1 - |z|^2)^{-2} = 16/9 at z = 0.5
    p = FinslerPoint([0.5], [1.0])
    g = disk_jet(p)
    idx = WirtingerIndex.make(1, dv=[0], dvbar=[0])
    assert wirtinger_extract(g, idx) == pytest.approx(16.0 / 9.0, rel=1e-12)


def test_extract_order_guard():
    p = FinslerPoint([0.0], [1.0])
    _, vs = seed_point_jets(p, 2)
    with pytest.raises(ValueError):
        wirtinger_extract(vs[0], WirtingerIndex.make(1, dv=[0, 0, 0]))


def test_table_matches_single_extraction():
    p = FinslerPoint([0.4 - 0.1j], [0.8 + 0.3j])
    g = disk_jet(p)
    table = wirtinger_table(g)
    space = g.space
    for i, exps in enumerate(space.exponents[: len(table)]):
        idx = WirtingerIndex.from_flat(exps)
        assert table[i] == pytest.approx(wirtinger_extract(g, idx), abs=1e-12)


def test_conjugation_symmetry_real_function():
    # G real-valued: the table at a conjugated index is the conjugate entry
    p = FinslerPoint([0.2 + 0.3j], [1.1 - 0.4j])
    tab = wirtinger_table(disk_jet(p))
    wj = TaylorJet(jet_space(4, 4), 4, tab)
    assert np.abs(wirtinger_conj(wj).coeffs - tab).max() < 1e-12


def test_wirtinger_shift_matches_table():
    p = FinslerPoint([0.2 - 0.1j], [0.9 + 0.2j])
    tab = wirtinger_table(disk_jet(p))
    space = jet_space(4, 4)
    wj = TaylorJet(space, 4, tab)
    dz = d_z(wj, 0)
    assert dz.value == pytest.approx(
        tab[space.index_of[WirtingerIndex.make(1, dz=[0]).flat()]]
    )


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_leibniz_and_linearity(seed):
    rng = np.random.default_rng(seed)
    space = jet_space(4, 3)
    n1 = space.sizes[3]
    a = TaylorJet(space, 3, rng.standard_normal(n1) + 1j * rng.standard_normal(n1))
    b = TaylorJet(space, 3, rng.standard_normal(n1) + 1j * rng.standard_normal(n1))
    idx = WirtingerIndex.make(1, dz=[0])
    lam = complex(rng.standard_normal(), rng.standard_normal())
    lin = wirtinger_extract(a * lam + b, idx)
    assert lin == pytest.approx(lam * wirtinger_extract(a, idx) + wirtinger_extract(b, idx))
    # first-order product rule holds exactly at jet precision
    prod = wirtinger_extract(a * b, idx)
    expected = (wirtinger_extract(a, idx) * b.value + a.value * wirtinger_extract(b, idx))
    assert prod == pytest.approx(expected, rel=1e-12, abs=1e-12)


METRICS = [
    builtin_metric("euclidean", 2),
    builtin_metric("poincare_ball", 1),
    builtin_metric("poincare_ball", 2),
    builtin_metric("lp_finsler", 2, {"p": 4}),
]


@pytest.mark.parametrize("metric", METRICS, ids=lambda m: f"{m.name}{m.n}")
def test_finite_difference_cross_validation(metric):
    """Wirtinger derivatives of order <= 3 against central differences with
    step 1e-5 on the real coordinates, one differentiation at a time against
    the jet-computed lower-order tables."""
    h = 1e-5
    pts = sample_points(metric, SampleConfig(count=20, seed=3))
    space = jet_space(4 * metric.n, 4)

    def table(p, order):
        return metric.evaluate(p, order=order, path="jets").table

    for p in pts:
        t3 = table(p, 3)
        worst = 0.0
        for i, exps in enumerate(space.exponents[: space.sizes[3]]):
            deg = int(space.degrees[i])
            if deg == 0 or deg > 3:
                continue
            # peel off the last Wirtinger factor and difference it
            d = int(np.nonzero(exps)[0][-1])
            lower = exps.copy()
            lower[d] -= 1
            j = space.index_of[tuple(lower)]
            n = metric.n
            block, pos = divmod(d, n)
            if block in (0, 1):  # z or zbar: vary Re z / Im z
                def shifted(dx, dy):
                    z = p.z.copy()
                    z[pos] += dx + 1j * dy
                    return table(FinslerPoint(z, p.v), deg - 1)[j]
            else:  # v or vbar
                def shifted(dx, dy):
                    v = p.v.copy()
                    v[pos] += dx + 1j * dy
                    return table(FinslerPoint(p.z, v), deg - 1)[j]
            ddx = (shifted(h, 0) - shifted(-h, 0)) / (2 * h)
            ddy = (shifted(0, h) - shifted(0, -h)) / (2 * h)
            sign = -1.0 if block in (0, 2) else 1.0
            fd = 0.5 * (ddx + sign * 1j * ddy)
            worst = max(worst, abs(fd - t3[i]) / (1.0 + abs(t3[i])))
        assert worst < 1e-6
