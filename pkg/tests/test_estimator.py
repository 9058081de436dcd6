import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from delaylab.engine import chunk_for, map_paths, mean_stderr, pairwise_sum
from delaylab.errors import AlignmentError, EllipticityError, InvalidArgumentError
from delaylab.estimator import (ErrorEstimate, caratheodory_rate_experiment,
                                delay_continuity_experiment, fit_rate, strong_error,
                                weak_error)
from delaylab.estimator import properties as props
from delaylab.model import InitialSegment, TestFunction, build_mesh, catalog_problem


# --- rate fits ----------------------------------------------------------------

def test_fit_geometric_sequence():
    f = fit_rate([4, 16, 64], [0.5, 0.25, 0.125])
    assert f.slope == pytest.approx(-0.5, abs=1e-12)
    assert f.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_constant_errors_slope_zero():
    assert fit_rate([1, 2, 4, 8], [0.3] * 4).slope == pytest.approx(0.0, abs=1e-12)


@given(c=st.floats(1e-6, 1e6))
def test_fit_scale_invariance(c):
    f = fit_rate([2, 4, 8], [c / 2, c / 4, c / 8])
    assert f.slope == pytest.approx(-1.0, abs=1e-9)


@given(slope=st.floats(-3, 3), c=st.floats(1e-3, 1e3),
       levels=st.lists(st.floats(0.01, 1000), min_size=3, max_size=8, unique=True))
def test_fit_recovers_planted_exponent(slope, c, levels):
    levels = sorted(levels)
    if levels[-1] / levels[0] < 1.5:
        return
    errors = [c * x**slope for x in levels]
    assert fit_rate(levels, errors).slope == pytest.approx(slope, abs=1e-8)


@pytest.mark.parametrize("errors", [[0.1, 0.0, 0.2], [0.1, -0.1, 0.2], [0.1, float("nan"), 0.2]])
def test_fit_rejects_nonpositive(errors):
    with pytest.raises(InvalidArgumentError):
        fit_rate([1, 2, 4], errors)


def test_fit_needs_three_levels():
    with pytest.raises(InvalidArgumentError):
        fit_rate([1, 2], [0.1, 0.05])


def test_censoring_rule():
    assert ErrorEstimate(0.0, 0.0, 10, "weak").censored
    assert ErrorEstimate(0.01, 0.006, 10, "weak").censored
    assert not ErrorEstimate(0.013, 0.006, 10, "weak").censored
    with pytest.raises(InvalidArgumentError):
        ErrorEstimate(0.1, -1.0, 10, "weak")


# --- engine -----------------------------------------------------------------------

@given(st.lists(st.floats(-1e6, 1e6), max_size=200))
def test_pairwise_sum_close_to_exact(values):
    assert pairwise_sum(values) == pytest.approx(math.fsum(values), abs=1e-6)


def test_pairwise_sum_fixed_tree():
    assert pairwise_sum([1e16, 1.0, -1e16, 1.0]) == ((1e16 + 1.0) + (-1e16 + 1.0))


def test_mean_stderr_known_values():
    est = mean_stderr([1.0, 2.0, 3.0, 4.0])
    assert est.value == 2.5
    assert est.stderr == pytest.approx(math.sqrt(np.var([1, 2, 3, 4], ddof=1) / 4))


def test_map_paths_worker_count_invariant():
    mesh = build_mesh(1.0, 64)

    def kernel(dB):
        return {"s": dB.sum(axis=0), "q": (dB**2).sum(axis=0)}

    ref = map_paths(kernel, mesh, 1000, 3, chunk=128, workers=1)
    for w in (2, 3, 7):
        out = map_paths(kernel, mesh, 1000, 3, chunk=128, workers=w)
        assert all(np.array_equal(ref[k], out[k]) for k in ref)
    # per-path streams: chunking does not change the draws
    other = map_paths(kernel, mesh, 1000, 3, chunk=1000, workers=1)
    assert np.array_equal(ref["s"], other["s"])


def test_workers_env(monkeypatch):
    from delaylab.engine import default_workers
    monkeypatch.setenv("DELAYLAB_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("DELAYLAB_WORKERS", "zero")
    with pytest.raises(InvalidArgumentError):
        default_workers()


def test_chunk_for_independent_of_workers():
    assert chunk_for(100_000, 1e6) == 256
    assert chunk_for(10, 1.0) == 10


# --- strong and weak errors ----------------------------------------------------------------

def test_strong_error_identical_problems(trig25):
    e = strong_error(trig25, trig25, paths=50, steps=256)
    assert (e.value, e.stderr) == (0.0, 0.0)


def test_strong_error_pure_noise_delays():
    e = strong_error(catalog_problem("pure_noise", tau=0.25), catalog_problem("pure_noise", tau=0.5),
                     paths=50, steps=256, sup=True)
    assert e.value == 0.0


def test_strong_error_incompatible():
    with pytest.raises(InvalidArgumentError):
        strong_error(catalog_problem("trig"), catalog_problem("trig", phi=InitialSegment.constant(1.0)),
                     paths=4, steps=16)


@pytest.mark.slow
def test_strong_error_gap_scaling():
    base = catalog_problem("trig", tau=0.2)
    wide = strong_error(base, catalog_problem("trig", tau=0.3), 2000, steps=4000, t=1.0)
    narrow = strong_error(base, catalog_problem("trig", tau=0.25), 2000, steps=4000, t=1.0)
    assert wide.value > 0
    assert 0.35 <= narrow.value / wide.value <= 0.65


def test_weak_error_constant_function(trig25):
    one = TestFunction.custom(lambda x: np.ones_like(x), bound=1.0)
    e = weak_error(trig25, catalog_problem("trig", tau=0.5), one, paths=100, steps=256)
    assert (e.value, e.stderr) == (0.0, 0.0)


def test_weak_error_symmetric_law_pure_noise():
    e = weak_error(catalog_problem("pure_noise", tau=0.25), catalog_problem("pure_noise", tau=0.5),
                   TestFunction.indicator(0.0), paths=1000, steps=64)
    assert e.value == 0.0


def test_weak_error_gaussian_cdf():
    # X = B(1) against the frozen process X = 0, where g = 1{x <= 1} equals 1
    e = weak_error(catalog_problem("pure_noise"), catalog_problem("constant", {"drift": 0, "sigma": 0}),
                   TestFunction.indicator(1.0), paths=100_000, steps=16)
    assert abs((1 - e.value) - norm.cdf(1.0)) <= 3 * e.stderr


def test_stderr_shrinks_like_inverse_sqrt_paths():
    p1, p2 = catalog_problem("trig", tau=0.25), catalog_problem("trig", tau=0.5)
    g = TestFunction.sine(0.0)
    s1 = weak_error(p1, p2, g, 1000, steps=256).stderr
    s4 = weak_error(p1, p2, g, 4000, steps=256).stderr
    assert s1 / s4 == pytest.approx(2.0, rel=0.2)


@pytest.mark.parametrize("name,taus", [("trig", (0.25, 0.5)), ("linear_delay", (0.25, 0.5)),
                                       ("pure_noise", (0.25, 0.5)), ("trig_x", (0.0, 0.0))])
def test_coupling_never_hurts_for_lipschitz_g(name, taus):
    p1, p2 = catalog_problem(name, tau=taus[0]), catalog_problem(name, tau=taus[1])
    g = TestFunction.sine(0.5)
    c = weak_error(p1, p2, g, 2000, steps=256, coupled=True)
    u = weak_error(p1, p2, g, 2000, steps=256, coupled=False)
    assert c.stderr <= u.stderr


def test_weak_error_deterministic(trig25):
    g = TestFunction.indicator(0.5)
    p2 = catalog_problem("trig", tau=0.5)
    a = weak_error(trig25, p2, g, 500, seed=9, steps=256, workers=1)
    b = weak_error(trig25, p2, g, 500, seed=9, steps=256, workers=4)
    assert a == b


# --- experiments ----------------------------------------------------------------------------

def test_caratheodory_constant_coefficients_zero():
    base = catalog_problem("constant", {"drift": 1.0, "sigma": 2.0})
    r = caratheodory_rate_experiment(base, [4, 8, 16], paths=50, steps=1024)
    assert all(row.value == 0.0 and row.censored for row in r.rows)
    assert r.fit is None
    r = caratheodory_rate_experiment(base, [4, 8, 16], paths=50, steps=1024,
                                     g=TestFunction.indicator(0.5))
    assert all(row.value == 0.0 for row in r.rows)


def test_caratheodory_alignment_lists_levels():
    with pytest.raises(AlignmentError) as err:
        caratheodory_rate_experiment(catalog_problem("trig_x"), [4, 5, 8, 7], 10, steps=4096)
    msg = str(err.value)
    assert "n=5" in msg and "n=7" in msg and "n=4" not in msg


def test_caratheodory_weak_needs_ellipticity():
    base = catalog_problem("linear_additive", {"a": 1.0, "sigma0": 0.0})
    with pytest.raises(EllipticityError):
        caratheodory_rate_experiment(base, [4, 8], 10, steps=64, g=TestFunction.indicator(0.0))


def test_caratheodory_strong_rate_small_budget():
    base = catalog_problem("trig_x", phi=InitialSegment.constant(1.0))
    r = caratheodory_rate_experiment(base, [4, 8, 16, 32], paths=300, steps=1024)
    assert r.fit is not None and -0.75 <= r.fit.slope <= -0.3
    assert [row.kind for row in r.rows] == ["strong-sup-L2"] * 4


def test_delay_continuity_zero_gap(trig25):
    p = trig25.with_phi(InitialSegment.holder(0.0, 1.0, 0.5))
    r = delay_continuity_experiment(p, [0.0, 0.125], 200, TestFunction.indicator(1.0), steps=256)
    assert r.rows[0].value == 0.0 and r.rows[0].stderr == 0.0
    assert r.meta["expected_slope"] == 0.5


def test_delay_continuity_rejects_misaligned_gap(trig25):
    with pytest.raises(AlignmentError):
        delay_continuity_experiment(trig25, [0.1], 10, TestFunction.indicator(1.0), steps=256)


def test_delay_continuity_needs_ellipticity():
    p = catalog_problem("delayed_drift_ode", tau=0.25)
    with pytest.raises(EllipticityError):
        delay_continuity_experiment(p, [0.125], 10, TestFunction.indicator(1.0), steps=256)


# --- boundedness properties --------------------------------------------------------------------

def test_pure_noise_moment_profile():
    c = props.second_moment_check(catalog_problem("pure_noise"), paths=4000, steps=64)
    assert c.coarse == pytest.approx(1.0, rel=0.1)
    assert c.fine == pytest.approx(1.0, rel=0.1)
    h = props.holder_check(catalog_problem("pure_noise"), paths=4000, steps=64)
    assert h.stable() and h.fine == pytest.approx(1.0, rel=0.15)


def test_pure_noise_derivative_checks_exact():
    p = catalog_problem("pure_noise", tau=0.25)
    d = props.derivative_moment_check(p, paths=20, steps=64, K=8)
    assert (d.coarse, d.fine) == (1.0, 1.0)
    dh = props.derivative_holder_check(p, paths=20, steps=64)
    assert (dh.coarse, dh.fine) == (0.0, 0.0) and dh.stable()
    s = props.second_variation_check(p, paths=20, steps=64, K=8)
    assert (s.coarse, s.fine) == (0.0, 0.0)


def test_property_check_ratio():
    assert props.PropertyCheck("x", 1.0, 1.9, 8).stable()
    assert not props.PropertyCheck("x", 1.0, 2.1, 8).stable()
    assert not props.PropertyCheck("x", 0.0, 2.1, 8).stable()
