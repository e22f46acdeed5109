import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from evoasym.asymptotics import perturb_to_almost_orbit
from evoasym.core import Interpolation, SampledCurve, TimeGrid
from evoasym.errors import InvalidInputError
from evoasym.means import (
    HypothesisVerdict,
    MeasureFamily,
    almost_convergence_profile,
    average_inheritance_trace,
    block_alpha,
    block_indicator_curve,
    hypothesis_h_falsify,
    hypothesis_hu_falsify,
    mean,
    shifted_mean,
    vanishing_mass_check,
)
from evoasym.operators import Forcing, OperatorSpec
from evoasym.systems import make_closed_form_system, make_flow_system, orbit

FAMILIES = [MeasureFamily.dirac(), MeasureFamily.cesaro(), MeasureFamily.window(3.5), MeasureFamily.block()]
ROT = make_closed_form_system("rotation")


def wiggly(interp=Interpolation.LINEAR):
    g = TimeGrid.uniform(0, 60, 0.3)
    return SampledCurve.from_function(g, lambda t: [np.sin(t), np.cos(2 * t) + t / 10], interp)


def test_family_validation():
    with pytest.raises(InvalidInputError):
        MeasureFamily.window(0)
    with pytest.raises(InvalidInputError):
        MeasureFamily("cesaro", 2.0)
    with pytest.raises(ValueError):
        MeasureFamily("gauss")


def test_mean_examples():
    g = TimeGrid.uniform(0, 20, 1.0)
    lin = SampledCurve.from_function(g, lambda t: [t, 0.0])
    np.testing.assert_array_equal(mean(MeasureFamily.cesaro(), lin, 10), [5.0, 0.0])
    np.testing.assert_array_equal(shifted_mean(MeasureFamily.cesaro(), lin, 10, 3), [8.0, 0.0])
    v = wiggly()
    assert np.array_equal(mean(MeasureFamily.dirac(), v, 7.7), v(7.7))
    assert np.array_equal(shifted_mean(MeasureFamily.dirac(), v, 7.7, 2), v(9.7))
    c = SampledCurve.constant(g, [2.5, -1.0])
    np.testing.assert_allclose(mean(MeasureFamily.cesaro(), c, 13.3), [2.5, -1.0], rtol=1e-15)


@pytest.mark.parametrize("fam", FAMILIES, ids=str)
@pytest.mark.parametrize("interp", list(Interpolation))
def test_total_mass_and_linearity(fam, interp):
    g = TimeGrid.uniform(0, 60, 0.3)
    one = SampledCurve.constant(g, [1.0], interp)
    v, w = wiggly(interp), SampledCurve.from_function(g, lambda t: [t * t / 100, 1.0], interp)
    for t in (0.7, 2.0, 9.0, 13.4, 40.0):
        assert abs(mean(fam, one, t)[0] - 1.0) <= 1e-14
        lhs = mean(fam, v.with_values(2.0 * v.values - 3.0 * w.values), t)
        np.testing.assert_allclose(lhs, 2.0 * mean(fam, v, t) - 3.0 * mean(fam, w, t), rtol=1e-13, atol=1e-13)
        assert np.array_equal(shifted_mean(fam, v, t, 0.0), mean(fam, v, t))


@pytest.mark.parametrize("fam", FAMILIES[1:], ids=str)
def test_means_match_quad(fam):
    v = wiggly()
    for t, h in ((5.0, 0.0), (13.4, 2.2), (31.0, 7.5)):
        a, b, norm = fam.pieces(t)
        ref = sum(
            integrate.quad(lambda s, k=k: v(s + h)[k], lo, hi, points=v.times[(v.times > lo + h) & (v.times < hi + h)] - h,
                           limit=400)[0]
            for lo, hi in zip(a, b)
            for k in [0]
        ) / norm
        assert abs(shifted_mean(fam, v, t, h)[0] - ref) <= 1e-10


def test_cesaro_matches_antiderivative():
    g = TimeGrid.uniform(0, 50, 0.25)
    v = SampledCurve.from_function(g, lambda t: [3 * t - 2])
    for t in (1.0, 7.3, 49.9):
        assert abs(mean(MeasureFamily.cesaro(), v, t)[0] - (1.5 * t - 2)) <= 1e-12


def test_support_outside_span():
    v = wiggly()
    with pytest.raises(InvalidInputError):
        mean(MeasureFamily.cesaro(), v, 61)
    with pytest.raises(InvalidInputError):
        shifted_mean(MeasureFamily.window(2.0), v, 59, 2)
    with pytest.raises(InvalidInputError):
        mean(MeasureFamily.cesaro(), v, 0)


def test_block_alpha():
    assert block_alpha(4) == 2 and block_alpha(100) == 50
    assert block_alpha(4.5) == 2.5 and block_alpha(5.5) == 3
    ts = np.linspace(0, 20, 401)
    brute = [integrate.quad(lambda x: float(int(x) % 2 == 0), 0, t, points=range(21), limit=100)[0] for t in ts]
    np.testing.assert_allclose(block_alpha(ts), brute, atol=1e-10)


def test_vanishing_mass():
    m = vanishing_mass_check(MeasureFamily.cesaro(), [5], [10, 100]).masses
    assert m[0, 1] == 0.05
    assert vanishing_mass_check(MeasureFamily.block(), [4], [100]).masses[0, 0] == 0.04
    assert vanishing_mass_check(MeasureFamily.dirac(), [5], [6, 100]).masses.tolist() == [[0.0, 0.0]]
    for fam in FAMILIES:
        m = vanishing_mass_check(fam, [1, 5], [10, 50, 200, 1000]).masses
        assert np.all(np.diff(m, axis=1) <= 0) and np.all(m[:, -1] <= 0.01)


def test_mass_matches_mean_of_indicator():
    g = TimeGrid(np.arange(0, 61, dtype=float))
    for p in (3, 4, 10):
        ind = SampledCurve(g, (g.points < p).astype(float), Interpolation.CONSTANT)
        for fam in FAMILIES[1:]:
            for t in (5.0, 12.5, 40.0):
                assert abs(mean(fam, ind, t)[0] - fam.mass(p, t)) <= 1e-14


def test_block_counterexample_exact():
    n = block_indicator_curve(200)
    rep = hypothesis_h_falsify(MeasureFamily.block(), n, [1], [4, 10, 100], 1e-3)
    assert rep.verdict is HypothesisVerdict.VIOLATED
    assert np.all(rep.means == 1.0) and np.all(rep.shifted == 0.0)
    for t in np.arange(1.0, 150.0, 0.5):
        assert mean(MeasureFamily.block(), n, t)[0] == 1.0


def test_hypothesis_h_consistent_cases():
    g = TimeGrid.uniform(0, 1000, 0.05)
    c = SampledCurve.constant(g, [0.4])
    # the shifted measure loses mass K/t, so the deviation is 0.4*K/t: zero only in the limit
    rep = hypothesis_h_falsify(MeasureFamily.cesaro(), c, [0, 1, 3], [100, 300, 1000], 0.05)
    assert rep.verdict is HypothesisVerdict.CONSISTENT
    np.testing.assert_allclose(rep.deviations[:, 2], 0.4 * 3 / rep.times, rtol=1e-9)
    assert np.all(rep.deviations[:, 0] <= 1e-12)
    e = SampledCurve.from_function(g, lambda t: math.exp(-t) + 2.0)
    rep = hypothesis_h_falsify(MeasureFamily.cesaro(), e, [0, 1], [100, 200, 500, 1000], 0.05)
    assert rep.verdict is HypothesisVerdict.CONSISTENT
    assert np.all(rep.deviations[rep.times >= 100] <= (1 + math.e) / 100 + 2 / 100)


def test_hypothesis_inconclusive_without_cauchy():
    g = TimeGrid.uniform(0, 1000, 0.5)
    grow = SampledCurve.from_function(g, lambda t: math.sqrt(t))
    rep = hypothesis_h_falsify(MeasureFamily.cesaro(), grow, [1], [100, 500, 1000], 0.05)
    assert rep.verdict is HypothesisVerdict.INCONCLUSIVE


def test_hypothesis_hu():
    n = block_indicator_curve(200)
    rep = hypothesis_hu_falsify(MeasureFamily.block(), n, 1.0, 0.25, [4, 10, 100], 1e-3)
    assert rep.verdict is HypothesisVerdict.VIOLATED
    assert np.all(rep.max_deviation >= 1 - 1e-3)
    g = TimeGrid.uniform(0, 600, 0.05)
    e = SampledCurve.from_function(g, lambda t: math.exp(-t))
    rep = hypothesis_hu_falsify(MeasureFamily.cesaro(), e, 1.0, 0.1, [100, 200, 500], 0.05)
    assert rep.verdict is HypothesisVerdict.CONSISTENT
    assert np.all(rep.max_deviation <= (1 + math.e) / rep.times)
    h0 = hypothesis_hu_falsify(MeasureFamily.block(), n, 0.0, 0.25, [4, 10, 100], 1e-3)
    h = hypothesis_h_falsify(MeasureFamily.block(), n, [0.0], [4, 10, 100], 1e-3)
    assert np.array_equal(h0.max_deviation, h.deviations[:, 0]) and h0.verdict == h.verdict


@settings(max_examples=40, deadline=None)
@given(t=st.floats(0.5, 40), K=st.floats(0, 10))
def test_dirac_shift_integral(t, K):
    v = wiggly()
    rep = hypothesis_h_falsify(MeasureFamily.dirac(), v, [K], [t], 1.0)
    expect = v(t - K) if t >= K else np.zeros(2)
    assert np.array_equal(rep.shifted[0, 0], expect)


def test_average_inheritance_rotation():
    g = TimeGrid.uniform(0, 260, 0.01)
    u = orbit(ROT, 0.0, [1.0, 0.0], g)
    tr = average_inheritance_trace(MeasureFamily.cesaro(), ROT, u, np.arange(50, 201, 10.0), 50, 0.5, 1e-9, 100)
    assert np.all(tr.norms <= 2 / tr.times + 1e-4)
    assert tr.norms[tr.times == 100][0] <= 0.025
    v = perturb_to_almost_orbit(u, Forcing.power_decay(1.0, 2.0, [1.0, 0.0]))
    tr = average_inheritance_trace(MeasureFamily.cesaro(), ROT, v, np.arange(100, 201, 10.0), 50, 0.5, 1e-2, 100)
    assert tr.norms[-1] <= 0.05
    c = SampledCurve.constant(g, [1.0, -2.0])
    still = make_flow_system(OperatorSpec.quadratic(np.zeros((2, 2))), Forcing.zero(), 1.0)
    for fam in FAMILIES:
        tr = average_inheritance_trace(fam, still, c,
                                       np.arange(10, 200, 10.0), 20, 0.5, 1e-9, 50)
        np.testing.assert_allclose(tr.values, np.tile([1.0, -2.0], (tr.times.size, 1)), rtol=1e-14)
        assert tr.cauchy_ok
    with pytest.raises(InvalidInputError):
        average_inheritance_trace(MeasureFamily.cesaro(), make_closed_form_system("linear-decay"), u,
                                  np.arange(100, 201, 10.0), 50, 0.5, 1e-2, 100)


def test_almost_convergence_contrast():
    g = TimeGrid.uniform(0, 260, 0.01)
    u = orbit(ROT, 0.0, [1.0, 0.0], g)
    ts = np.arange(100, 201, 5.0)
    ces = almost_convergence_profile(MeasureFamily.cesaro(), u, ts, 50, 0.5, 0.05, 100)
    assert ces.supported and np.all(ces.deviation <= 4 / ts)
    dirac = almost_convergence_profile(MeasureFamily.dirac(), u, ts, 50, 0.5, 0.05, 100)
    assert not dirac.supported and dirac.deviation.max() >= 1.9
    c = SampledCurve.constant(g, [3.0])
    assert np.all(almost_convergence_profile(MeasureFamily.window(5), c, ts, 50, 0.5).deviation <= 1e-12)
