import math

import numpy as np
import pytest

from delaylab.errors import AlignmentError, InvalidArgumentError
from delaylab.model import (InitialSegment, build_mesh, catalog_problem, coarsen_path,
                            sample_brownian)
from delaylab.solver import (build_caratheodory_problem, euler_batch, solve_euler_delay,
                             solve_pair_coupled)

from conftest import batch_increments


def test_pure_noise_is_shifted_brownian_motion():
    p = catalog_problem("pure_noise", tau=0.5, phi=InitialSegment.constant(2.0))
    path = sample_brownian(build_mesh(1.0, 4096), 3)
    X = solve_euler_delay(p, path).values
    # the scheme is the running sum 2 + dB_0 + ... + dB_i; compare against the
    # Brownian values up to summation-order rounding
    assert X[0] == 2.0
    assert np.max(np.abs(X - (2.0 + path.values))) <= 1e-13


def test_delayed_drift_ode_method_of_steps():
    p = catalog_problem("delayed_drift_ode", tau=0.5, phi=InitialSegment.constant(1.0))
    path = sample_brownian(build_mesh(1.0, 4096), 0)
    X = solve_euler_delay(p, path)
    assert abs(X.at(1.0) - 2.125) <= 1e-3
    # on [0, 1/2] the solution is 1 + t
    assert abs(X.at(0.5) - 1.5) <= 1e-3


def test_misaligned_delay_rejected():
    p = catalog_problem("trig", tau=0.2)
    with pytest.raises(AlignmentError):
        solve_euler_delay(p, sample_brownian(build_mesh(1.0, 4096), 0))


def test_horizon_mismatch_rejected():
    p = catalog_problem("trig", tau=0.25, T=2.0)
    with pytest.raises(InvalidArgumentError):
        solve_euler_delay(p, sample_brownian(build_mesh(1.0, 64), 0))


def test_zero_delay_matches_plain_euler_maruyama():
    p = catalog_problem("trig_x", phi=InitialSegment.constant(1.0))
    path = sample_brownian(build_mesh(1.0, 512), 4)
    X = solve_euler_delay(p, path).values
    x = np.empty(513)
    x[0] = 1.0
    for i in range(512):
        x[i + 1] = x[i] + math.sin(x[i]) * path.mesh.h + (1 + 0.5 * math.cos(x[i])) * path.increments[i]
    assert np.array_equal(X, x)


def test_trig_zero_delay_uses_current_state_twice():
    p = catalog_problem("trig", phi=InitialSegment.constant(0.3))
    path = sample_brownian(build_mesh(1.0, 128), 1)
    X = solve_euler_delay(p, path).values
    x = np.empty(129)
    x[0] = 0.3
    for i in range(128):
        xi = x[i]
        x[i + 1] = xi + (math.sin(xi) + math.cos(xi)) * path.mesh.h \
            + (1 + 0.5 * math.cos(2 * xi)) * path.increments[i]
    assert np.allclose(X, x, rtol=0, atol=1e-12)


def test_history_lookup_uses_phi():
    # b = y with phi(t) = |t| on [-1/2, 0] and no noise: X(t) = int_0^t (1/2 - s) ds for t <= 1/2
    p = catalog_problem("delayed_drift_ode", tau=0.5, phi=InitialSegment.holder(0.0, 1.0, 1.0))
    X = solve_euler_delay(p, sample_brownian(build_mesh(1.0, 4096), 0))
    assert X.at(0.5) == pytest.approx(0.125, abs=1e-3)


def test_coarsened_path_equals_coarse_scheme(trig25):
    fine = sample_brownian(build_mesh(1.0, 1024), 2)
    coarse = coarsen_path(fine, 4)
    direct = euler_batch(trig25, coarse.mesh, coarse.increments[:, None])[:, 0]
    assert np.array_equal(solve_euler_delay(trig25, coarse).values, direct)


def test_coupled_identical_problems_bitwise(trig25):
    path = sample_brownian(build_mesh(1.0, 1024), 5)
    a, b = solve_pair_coupled(trig25, trig25, path)
    assert np.array_equal(a.values, b.values)


def test_pure_noise_delay_independent():
    p1 = catalog_problem("pure_noise", tau=0.25)
    p2 = catalog_problem("pure_noise", tau=0.5)
    a, b = solve_pair_coupled(p1, p2, sample_brownian(build_mesh(1.0, 1024), 5))
    assert np.array_equal(a.values, b.values)


def test_coupled_requires_same_horizon():
    with pytest.raises(InvalidArgumentError):
        solve_pair_coupled(catalog_problem("trig"), catalog_problem("trig", T=2.0),
                           sample_brownian(build_mesh(1.0, 64), 0))


def test_coupled_gap_scaling_constant_stable():
    # RMS of X_tau1(1) - X_tau2(1) over sqrt(gap) should not drift with the gap
    N, M = 4000, 2000
    dB = batch_increments(N, M, seed=7)
    mesh = build_mesh(1.0, N)
    X1 = euler_batch(catalog_problem("trig", tau=0.2), mesh, dB)[-1]
    Ks = []
    for tau2 in (0.3, 0.25, 0.225):
        X2 = euler_batch(catalog_problem("trig", tau=tau2), mesh, dB)[-1]
        rms = math.sqrt(np.mean((X1 - X2) ** 2))
        Ks.append(rms / math.sqrt(tau2 - 0.2))
    assert max(Ks) / min(Ks) <= 2.0, Ks


def test_linear_additive_strong_order_one():
    # self-convergence against a much finer Euler solution on the same paths
    p = catalog_problem("linear_additive", {"a": 1.0, "sigma0": 1.0}, phi=InitialSegment.constant(1.0))
    Nf, M = 2**14, 200
    dBf = batch_increments(Nf, M, seed=3)
    ref = euler_batch(p, build_mesh(1.0, Nf), dBf)[-1]
    hs, errs = [], []
    for k in range(6, 13):
        N = 2**k
        dB = dBf.reshape(N, Nf // N, M).sum(axis=1)
        X = euler_batch(p, build_mesh(1.0, N), dB)[-1]
        hs.append(1.0 / N)
        errs.append(math.sqrt(np.mean((X - ref) ** 2)))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 0.9, slope


def test_linear_additive_mean_matches_closed_form():
    # E X(1) = x0 * e^a for b = a x with additive noise (Euler mean is (1 + a h)^N x0)
    p = catalog_problem("linear_additive", {"a": 1.0, "sigma0": 1.0}, phi=InitialSegment.constant(1.0))
    N, M = 1024, 4000
    X = euler_batch(p, build_mesh(1.0, N), batch_increments(N, M, seed=1))[-1]
    se = X.std(ddof=1) / math.sqrt(M)
    assert abs(X.mean() - (1 + 1 / N) ** N) <= 4 * se
    assert abs(X.var(ddof=1) - (math.e**2 - 1) / 2) <= 0.1 * (math.e**2 - 1) / 2


# --- Carathéodory construction ---------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 4, 8, 64])
def test_caratheodory_constant_coefficients(n):
    base = catalog_problem("constant", {"drift": 1.0, "sigma": 2.0})
    p = build_caratheodory_problem(base, n)
    assert p.tau == pytest.approx(1.0 / n)
    path = sample_brownian(build_mesh(1.0, 1024), n)
    X = solve_euler_delay(p, path).values
    assert np.allclose(X, path.mesh.nodes + 2.0 * path.values, rtol=0, atol=1e-12)


def test_caratheodory_lagged_ode():
    base = catalog_problem("linear_additive", {"a": 1.0, "sigma0": 0.0},
                           phi=InitialSegment.constant(1.0))
    p = build_caratheodory_problem(base, 2)
    X = solve_euler_delay(p, sample_brownian(build_mesh(1.0, 4096), 0))
    assert X.at(0.5) == pytest.approx(1.5, abs=1e-3)
    assert X.at(1.0) == pytest.approx(2.125, abs=1e-3)


def test_caratheodory_derivatives_wired():
    base = catalog_problem("trig_x")
    p = build_caratheodory_problem(base, 8)
    x = np.array([0.1, 0.7, -2.0])
    y = np.array([1.3, -0.4, 0.5])
    assert np.all(p.b.d_x(0.0, x, y) == 0)
    assert np.allclose(p.b.d_y(0.0, x, y), np.cos(y))
    assert np.allclose(p.sigma.d_y(0.0, x, y), -0.5 * np.sin(y))
    assert np.allclose(p.sigma.d_yy(0.0, x, y), -0.5 * np.cos(y))
    assert p.phi.evaluate(-0.1) == base.phi.evaluate(0.0)


def test_caratheodory_requires_undelayed_base():
    with pytest.raises(InvalidArgumentError):
        build_caratheodory_problem(catalog_problem("trig"), 4)
    with pytest.raises(InvalidArgumentError):
        build_caratheodory_problem(catalog_problem("trig_x", tau=0.5), 4)
    with pytest.raises(InvalidArgumentError):
        build_caratheodory_problem(catalog_problem("trig_x"), 0)
