import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evoasym.asymptotics import (
    AAEVerdict,
    ASPClass,
    DefectProfile,
    aae_check,
    asp_midpoint_test,
    asp_scan,
    cluster_points,
    defect_profile,
    h_grid,
    is_almost_orbit,
    modulus_of_continuity,
    omega_invariance_check,
    perturb_to_almost_orbit,
    prop21_inequality_check,
    sces_consequence_check,
)
from evoasym.core import SampledCurve, TimeGrid
from evoasym.errors import DimensionMismatchError, InsufficientDataError, InvalidInputError
from evoasym.operators import Forcing, OperatorSpec
from evoasym.systems import (
    ProductSystemSpec,
    StepSequence,
    make_closed_form_system,
    make_flow_system,
    make_product_system,
    orbit,
    sces_profile,
)

SHIFT = make_closed_form_system("shift-exp")
DECAY = make_closed_form_system("linear-decay")
ROT = make_closed_form_system("rotation")


def profile(values, times=None):
    times = np.arange(len(values), dtype=float) if times is None else np.asarray(times, float)
    v = np.asarray(values, dtype=float)
    return DefectProfile(times, v, np.zeros_like(v), 1.0, 0.5)


def test_h_grid():
    np.testing.assert_allclose(h_grid(2, 0.5), [0, 0.5, 1, 1.5, 2])
    assert h_grid(1, 0.3)[-1] == 1.0
    with pytest.raises(InvalidInputError):
        h_grid(0, 0.1)


def test_shift_exp_defect_closed_form():
    u = SampledCurve.constant(TimeGrid.uniform(0, 80, 0.5), [2.0])
    ts = np.arange(0, 20.5, 0.5)
    prof = defect_profile(u, SHIFT, ts, 50, 0.5)
    np.testing.assert_allclose(prof.values, np.exp(-ts) * (1 - np.exp(-50)), rtol=0, atol=1e-10)
    assert np.all((prof.argmax_h >= 0) & (prof.argmax_h <= 50))


def test_exact_orbits_have_zero_defect():
    g = TimeGrid.uniform(0, 40, 0.25)
    for sys, x0 in ((DECAY, [1.0, -2.0]), (ROT, [1.0, 0.5]), (SHIFT, [3.0])):
        u = orbit(sys, 0.0, x0, g)
        assert np.max(defect_profile(u, sys, np.arange(0, 20, 1.0), 10, 0.25).values) <= 1e-12
    flow = make_flow_system(OperatorSpec.identity(2), Forcing.zero(), 0.01)
    u = orbit(flow, 0.0, [1.0, 1.0], TimeGrid.uniform(0, 12, 0.05))
    assert np.max(defect_profile(u, flow, np.arange(0, 7, 1.0), 5, 0.05).values) == 0.0


def test_perturbed_decay_defect_oracle():
    # u(t) = e^{-t} + (1+t)^{-2};  psi(t) = max_h |p(t+h) - e^{-h} p(t)|
    g = TimeGrid.uniform(0, 160, 0.5)
    base = orbit(DECAY, 0.0, [1.0], g)
    u = perturb_to_almost_orbit(base, Forcing.power_decay(1.0, 2.0, [1.0]))
    ts = np.arange(0, 101, 5.0)
    prof = defect_profile(u, DECAY, ts, 50, 0.5)
    p = lambda t: (1 + t) ** -2.0
    hs = np.arange(0, 50.5, 0.5)
    ref = [np.max(np.abs(p(t + hs) - np.exp(-hs) * (base(t)[0] + p(t)) + np.exp(-(t + hs)))) for t in ts]
    np.testing.assert_allclose(prof.values, ref, atol=1e-12)
    assert prof.at(100) < 1e-2
    assert is_almost_orbit(prof, 1e-2, 60).ok


def test_defect_requires_span():
    u = SampledCurve.constant(TimeGrid.uniform(0, 10, 1), [1.0])
    with pytest.raises(InvalidInputError):
        defect_profile(u, SHIFT, [0, 5], 6, 1)


@settings(max_examples=25, deadline=None)
@given(H=st.sampled_from([2.0, 4.0, 8.0]), t=st.floats(0, 10))
def test_defect_monotone_in_horizon_and_resolution(H, t):
    g = TimeGrid.uniform(0, 30, 0.125)
    u = perturb_to_almost_orbit(orbit(ROT, 0.0, [1.0, 0.0], g), Forcing.power_decay(0.5, 1.0, [0.0, 1.0]))
    coarse = defect_profile(u, ROT, [t], H, 0.5).values[0]
    longer = defect_profile(u, ROT, [t], 2 * H, 0.5).values[0]
    finer = defect_profile(u, ROT, [t], H, 0.25).values[0]
    # incremental transport follows a different rounding path on a finer grid
    assert longer >= coarse - 1e-12 and finer >= coarse - 1e-12


def test_is_almost_orbit_examples():
    assert is_almost_orbit(profile([0.0] * 5), 1e-9, 0).ok
    ts = np.arange(0, 21.0)
    v = is_almost_orbit(profile(np.exp(-ts), ts), 1e-3, 10)
    assert v.ok and v.max_tail == pytest.approx(math.exp(-10))
    assert v.slope < 0
    assert not is_almost_orbit(profile([0.5] * 10), 1e-3, 2).ok
    # small values that keep growing fail the trend test
    w = is_almost_orbit(profile(np.linspace(0, 1e-3, 10)), 1e-3, 0)
    assert w.below_tol and not w.nonincreasing and not w.ok
    with pytest.raises(InsufficientDataError):
        is_almost_orbit(profile([0.0, 0.0, 0.0]), 1e-3, 1)


def test_aae_self_and_contrast():
    ts = np.arange(0, 41, 2.0)
    rep = aae_check(ROT, ROT, [(0.0, [1.0, 0.0])], ts, 10, 0.5, 1e-6, 20)
    assert rep.verdict is AAEVerdict.SUPPORTED
    assert np.max(rep.forward.values) <= 1e-12 and np.max(rep.backward.values) <= 1e-12
    rep = aae_check(DECAY, ROT, [(0.0, [1.0, 0.0])], ts, 10, 0.5, 1e-3, 20)
    assert rep.verdict is not AAEVerdict.SUPPORTED
    # rotation orbits are not almost-orbits of the decay: defect stays near 1
    assert rep.forward_check.max_tail > 0.9
    assert not rep.forward_check.ok
    with pytest.raises(DimensionMismatchError):
        aae_check(SHIFT, ROT, [(0.0, [1.0])], ts, 10, 0.5, 1e-3, 20)


def test_aae_report_files(tmp_path):
    rep = aae_check(DECAY, DECAY, [(0.0, [1.0])], np.arange(0, 21, 2.0), 5, 0.5, 1e-3, 10)
    paths = rep.write(tmp_path, "aae", ["params: x"])
    assert [p.name for p in paths] == ["aae.forward.csv", "aae.backward.csv", "aae.txt"]
    assert "verdict: aae-supported" in paths[2].read_text()
    assert paths[0].read_text().splitlines()[2] == "t,psi"


def test_perturb_to_almost_orbit():
    g = TimeGrid.uniform(0, 120, 0.5)
    u = orbit(DECAY, 0.0, [1.0], g)
    assert np.array_equal(perturb_to_almost_orbit(u, Forcing.zero()).values, u.values)
    v = perturb_to_almost_orbit(u, Forcing.power_decay(1.0, 1.0, [1.0]))
    prof = defect_profile(v, DECAY, np.arange(0, 71, 5.0), 50, 0.5)
    assert prof.values[-1] < prof.values[3] and prof.values[-1] < 0.02
    const = SampledCurve.constant(g, [0.3])
    w = perturb_to_almost_orbit(u, Forcing.custom(const, l1_integrable=False))
    assert not is_almost_orbit(defect_profile(w, DECAY, np.arange(0, 71, 5.0), 50, 0.5), 0.1, 20).ok
    with pytest.raises(InvalidInputError):
        perturb_to_almost_orbit(u, SampledCurve.constant(TimeGrid([0, 10]), [1.0]))
    with pytest.raises(DimensionMismatchError):
        perturb_to_almost_orbit(u, Forcing.power_decay(1.0, 1.0, [1.0, 0.0]))


def test_asp_scan_examples():
    ts = np.arange(0, 30.5, 0.5)
    reps = asp_scan(SHIFT, [[-1.0], [0.0], [3.0]], ts, 50, 0.5, 1e-3, 10)
    for r in reps:
        assert r.classification is ASPClass.ALMOST_STATIONARY
        np.testing.assert_allclose([v for _, v in r.defect_at], np.exp(-ts) * (1 - np.exp(-50)), atol=1e-10)
    q = OperatorSpec.quadratic(np.diag([1.0, 2.0]), [-1.0, 2.0])
    flow = make_flow_system(q, Forcing.zero(), 0.01)
    (r,) = asp_scan(flow, [[1.0, -1.0]], np.arange(0, 5.0, 1.0), 2, 0.5, 1e-3, 2)
    assert r.is_stationary and r.is_almost_stationary
    (r,) = asp_scan(DECAY, [[2.0]], np.arange(0, 30.0, 1.0), 20, 0.5, 1e-3, 10)
    assert r.classification is ASPClass.NEITHER
    assert r.defect_at[-1][1] == pytest.approx(2 * (1 - math.exp(-20)), rel=1e-12)


def test_sp_subset_asp():
    prod = make_product_system(ProductSystemSpec(StepSequence.power(1.0, 0.6), OperatorSpec.l1(1.0, 2)))
    pts = [[0.0, 0.0], [0.0, 1e-3], [2.0, 0.0], [-0.5, 0.5]]
    for r in asp_scan(prod, pts, np.arange(0, 20.0, 1.0), 5, 0.5, 1e-2, 10):
        if r.is_stationary:
            assert r.decay.ok


def test_asp_midpoint():
    ts = np.arange(0, 30.5, 0.5)
    assert asp_midpoint_test(SHIFT, [-1.0], [2.0], [0, 0.25, 0.5, 1], ts, 50, 0.5, 1e-3, 10)
    assert asp_midpoint_test(SHIFT, [-1.0], [2.0], [0, 1], ts, 50, 0.5, 1e-3, 10)
    with pytest.raises(InvalidInputError):
        asp_midpoint_test(DECAY, [1.0], [0.0], [0.5], ts, 20, 0.5, 1e-3, 10)
    q = OperatorSpec.quadratic(np.eye(2), [-1.0, 0.0])
    flow = make_flow_system(q, Forcing.zero(), 0.05)
    assert asp_midpoint_test(flow, [1.0, 0.0], [1.0, 0.0], [0.3], np.arange(0, 5.0), 2, 0.5, 1e-3, 1)


def _verdicts(sys, curves, ts, H):
    return tuple(is_almost_orbit(defect_profile(c, sys, ts, H, 0.5), 1e-2, ts[len(ts) // 2]) for c in curves)


def test_sces_consequence():
    g = TimeGrid.uniform(0, 60, 0.05)
    prof = sces_profile(DECAY, [0, 10, 20, 40], [0, 10, 20], 4, 0, dim=1)
    u1 = orbit(DECAY, 0.0, [1.0], g)
    u2 = orbit(DECAY, 0.0, [-1.0], g)
    ts = np.arange(0, 40.0, 2.0)
    chk = sces_consequence_check(prof, u1, u2, 8, 1e-3, _verdicts(DECAY, [u1, u2], ts, 20))
    assert chk.ok
    np.testing.assert_allclose(chk.distances, 2 * np.exp(-chk.times), rtol=1e-12)
    same = sces_consequence_check(prof, u1, u1, 0, 1e-15, _verdicts(DECAY, [u1, u1], ts, 20))
    assert same.ok and np.all(same.distances == 0)
    u3 = perturb_to_almost_orbit(u2, Forcing.power_decay(1.0, 2.0, [1.0]))
    assert sces_consequence_check(prof, u1, u3, 20, 1e-2, _verdicts(DECAY, [u1, u3], ts, 20)).ok
    rot_prof = sces_profile(ROT, [0, 10], [0], 4, 0)
    with pytest.raises(InvalidInputError):
        sces_consequence_check(rot_prof, u1, u2, 8, 1e-3, _verdicts(DECAY, [u1, u2], ts, 20))
    bad = is_almost_orbit(profile([0.5] * 5), 1e-3, 0)
    with pytest.raises(InvalidInputError):
        sces_consequence_check(prof, u1, u2, 8, 1e-3, (bad, bad))


def test_limsup_liminf_inequality():
    g = TimeGrid.uniform(0, 200, 0.05)
    a = orbit(ROT, 0.0, [1.0, 0.0], g)
    b = orbit(ROT, 0.0, [0.5, 0.0], g)
    r = prop21_inequality_check(a, a, 1.0, 100)
    assert r.ok and r.sup == 0 and r.inf == 0
    r = prop21_inequality_check(a, b, 1.0, 100)
    assert r.ok and abs(r.sup - 0.5) < 1e-12 and r.oscillation <= 1e-9
    u1 = perturb_to_almost_orbit(orbit(DECAY, 0.0, [1.0], g), Forcing.power_decay(1.0, 2.0, [1.0]))
    u2 = perturb_to_almost_orbit(orbit(DECAY, 0.0, [-3.0], g), Forcing.power_decay(0.5, 1.5, [1.0]))
    r = prop21_inequality_check(u1, u2, 1.0, 50, 100)
    assert r.oscillation <= 1e-3 and r.window == (50.0, 100.0)
    with pytest.raises(InsufficientDataError):
        prop21_inequality_check(a, b, 1.0, 199.99)


def test_cluster_points():
    g = TimeGrid.uniform(0, 100, 0.1)
    (c,) = cluster_points(orbit(DECAY, 0.0, [1.0, 1.0], g), 50, 1e-3)
    assert np.linalg.norm(c) < 1e-20
    cs = cluster_points(orbit(ROT, 0.0, [1.0, 0.0], g), 50, 0.2)
    assert len(cs) >= 10
    np.testing.assert_allclose(np.linalg.norm(cs, axis=1), 1.0, atol=1e-12)
    (k,) = cluster_points(SampledCurve.constant(g, [2.0, 3.0]), 0, 0.1)
    assert k.tolist() == [2.0, 3.0]
    with pytest.raises(InsufficientDataError):
        cluster_points(SampledCurve.constant(g, [2.0]), 99.5, 0.1)


def test_omega_invariance():
    g = TimeGrid.uniform(0, 80, 0.1)
    q = OperatorSpec.quadratic(np.eye(1), [-1.0])
    flow = make_flow_system(q, Forcing.zero(), 0.1)
    c = SampledCurve.constant(g, [1.0])
    tr = omega_invariance_check(flow, c, [1.0], [1, 2, 4, 8, 16, 32], True, 1e-9)
    assert np.all(tr.transported == 0) and np.all(tr.fixed == 0)
    u = orbit(DECAY, 0.0, [1.0], g)
    s = np.arange(5.0, 80.0, 5.0)
    tr = omega_invariance_check(DECAY, u, [0.0], s, True, 1e-3)
    np.testing.assert_allclose(tr.transported, np.exp(-tr.t), rtol=1e-10)
    assert np.all(np.diff(tr.t - tr.s) > 0)
    assert tr.s.tolist() == [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0]
    flat = omega_invariance_check(DECAY, u, [0.0], s, False, 1e-3)
    assert np.all(flat.t - flat.s == 5.0)
    r = orbit(ROT, 0.0, [1.0, 0.0], TimeGrid.uniform(0, 70, 0.01))
    sn = 2 * np.pi * np.arange(1, 11)
    tr = omega_invariance_check(ROT, r, [1.0, 0.0], sn, True, 1e-3)
    assert np.max(tr.transported) < 1e-4 and np.max(tr.fixed) < 1e-12
    with pytest.raises(InvalidInputError):
        omega_invariance_check(DECAY, u, [0.5], s, True, 1e-3)


def test_modulus_of_continuity():
    g = TimeGrid.uniform(0, 60, 0.01)
    deltas = [0.05, 0.1, 0.5, 1.0]
    for d, m in modulus_of_continuity(SampledCurve.constant(g, [1.0]), deltas, 10):
        assert m == 0
    for d, m in modulus_of_continuity(orbit(ROT, 0.0, [1.0, 0.0], g), deltas, 10):
        assert abs(m - 2 * math.sin(d / 2)) <= 1e-9
    for d, m in modulus_of_continuity(orbit(DECAY, 0.0, [2.0], g), deltas, 10):
        assert m <= 2 * d
    with pytest.raises(InvalidInputError):
        modulus_of_continuity(orbit(ROT, 0.0, [1.0, 0.0], g), [0.001], 10)
