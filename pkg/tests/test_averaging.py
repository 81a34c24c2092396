import math

import numpy as np
import pytest

from cgolab.averaging import (
    AVERAGING_CSV_HEADER,
    average_norm,
    average_slope_test,
    cov_map,
    jacobian,
    jacobian_fd,
    jacobian_lower_bound,
    measure_integral,
    measure_regime,
    quadrature_nodes,
    select_theta,
)
from cgolab.frames import make_frame
from cgolab.multipliers import CoefficientPiece, DivergenceFormCoefficient, holder_bump, smooth_bump
from cgolab.spectral import GridFunction, make_grid

FRAME = make_frame((1, 0, 0))


def _random_frame(rng):
    xi0 = rng.normal(size=3)
    return make_frame(xi0 * rng.uniform(0.2, 3.0) / np.linalg.norm(xi0))


def test_cov_map_examples():
    assert cov_map(FRAME, (0, 0, 0), 0.1, 0.4) == (0.0, 0.0)
    xi = 0.5 * FRAME.xi0  # orthogonal to the mu-plane, but not to xi0
    perp = np.cross(FRAME.mu1, FRAME.mu2)
    perp = perp - (perp @ FRAME.xi0) * FRAME.xi0
    assert np.linalg.norm(perp) < 1e-12  # in 3-D the mu-plane complement is xi0 itself
    vals = {cov_map(FRAME, xi, 0.1, th) for th in np.linspace(0, 6, 7)}
    ref = cov_map(FRAME, xi, 0.1, 0.0)
    assert all(abs(v[0] - ref[0]) < 1e-12 and abs(v[1] - ref[1]) < 1e-12 for v in vals)


def test_jacobian_closed_form_example():
    J = jacobian(FRAME, FRAME.mu1, 0.1, 0.0)
    assert J == pytest.approx(4 / 0.001 * math.sqrt(1 - 0.0025), rel=1e-12)
    assert J >= jacobian_lower_bound(FRAME, FRAME.mu1, 0.1) == pytest.approx(2000.0)
    assert jacobian_lower_bound(FRAME, FRAME.xi0, 0.1) == 0
    assert jacobian(FRAME, FRAME.xi0, 0.1, 0.3) >= 0


def test_jacobian_matches_finite_differences_and_bound():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        fr = _random_frame(rng)
        tmax = min(1.0, 1 / (2 * np.linalg.norm(fr.xi0)))
        tau = rng.uniform(0.05, 1.0) * tmax
        th = rng.uniform(0, 2 * math.pi)
        xi = rng.normal(size=3) * rng.uniform(0.5, 10)
        J = jacobian(fr, xi, tau, th)
        worst = max(worst, abs(jacobian_fd(fr, xi, tau, th) - J) / J)
        assert jacobian_lower_bound(fr, xi, tau) <= J * (1 + 1e-12)
    assert worst <= 1e-6


def test_tau_out_of_range():
    with pytest.raises(ValueError):
        jacobian(FRAME, (1, 0, 0), 0.6, 0.0)


def test_quadrature_nodes_midpoints():
    taus, thetas, w = quadrature_nodes(0.1, 4, 8)
    assert taus[0] == pytest.approx(0.1125) and taus[-1] == pytest.approx(0.1875)
    assert w * 4 * 8 == pytest.approx(2 * math.pi)


def _mode(spec, k):
    x = np.stack(np.meshgrid(*spec.coord_axes(), indexing="ij"), -1)
    return GridFunction(spec, np.exp(1j * x @ np.asarray(k, float)), "physical")


def test_average_norm_examples(grid16):
    zero = GridFunction(grid16, np.zeros(grid16.shape, dtype=complex), "physical")
    assert average_norm(zero, 1.0, 0.1, FRAME) == 0.0
    f = _mode(grid16, (2, 1, 0))
    # the tau integrand behaves like a power of tau, so the midpoint rule needs ~48 nodes for 1e-4
    coarse = average_norm(f, 1.0, 0.1, FRAME, n_tau=48, n_theta=16)
    fine = average_norm(f, 1.0, 0.1, FRAME, n_tau=480, n_theta=160)
    assert abs(coarse - fine) <= 1e-4 * fine
    with pytest.raises(ValueError):
        average_norm(f, 1.0, 0.1, FRAME, n_tau=4)


def test_average_norm_theta_symmetry(grid16):
    # a spectrum on the xi0 axis does not see the rotation angle
    from cgolab.averaging import fixed_theta_norms

    f = _mode(grid16, (2, 0, 0))
    vals = fixed_theta_norms(f, 1.0, 0.1, FRAME, np.linspace(0, 6, 9))
    assert np.ptp(vals) <= 1e-10 * vals.max()


def _holder_q(spec, beta=(1, 1, 0)):
    f = GridFunction(spec, holder_bump(spec, (0.1, 0, 0), 0.7), "physical")
    return DivergenceFormCoefficient(spec, "scalar", [CoefficientPiece(beta, f, 0.5)])


def test_select_theta_zero_and_min_le_mean(grid16):
    Z, z = DivergenceFormCoefficient.zero(grid16, "vector"), DivergenceFormCoefficient.zero(grid16, "scalar")
    sample = select_theta(Z, z, Z, z, 0.1, FRAME, 8, 8)
    taus, thetas, _ = quadrature_nodes(0.1, 8, 8)
    assert sample.score == 0 and sample.tau == taus[0] and sample.theta == thetas[0]
    bump = GridFunction(grid16, smooth_bump(grid16, (0, 0, 0), 0.8), "physical")
    Q = DivergenceFormCoefficient(grid16, "vector", [CoefficientPiece((0, 0, 0), bump, 1.0, 1)])
    for h in (0.1, 0.05):
        s = select_theta(Q, _holder_q(grid16), Z, z, h, FRAME, 8, 8)
        assert s.score <= s.average_score
        assert h <= s.tau <= 2 * h
    assert len(AVERAGING_CSV_HEADER) == 5


def test_average_slope_window_and_degenerate(grid16):
    zero = GridFunction(grid16, np.zeros(grid16.shape, dtype=complex), "physical")
    rep = average_slope_test(zero, 1.0, 1.5, 0.25, FRAME, [0.1, 0.05])
    assert rep.degenerate and rep.passed
    with pytest.raises(ValueError):
        average_slope_test(zero, 1.0, 1.0, 0.25, FRAME, [0.1])


def test_averaged_slope_beats_worst_fixed():
    spec = make_grid(3, 32)
    q = _holder_q(spec)
    eps = 0.25
    s = 2 - 2 * eps
    hs = [2.0 ** -k for k in range(3, 8)]
    rep = average_slope_test(q.field(0), 1.0, s, eps, FRAME, hs)
    assert rep.passed
    assert rep.beats_worst_fixed


def _regime_samples(h):
    e0, m1, m2 = FRAME.xi0, FRAME.mu1, FRAME.mu2
    return {
        "small": [0.5 * e0 + 0.3 * m1, 4 * m2 + 2 * e0, 10 * m1],
        "large-thin": [(4 / h) * m1 + e0, (8 / h) * (m1 + m2) / math.sqrt(2)],
        "large-flat": [(30 / h) * e0 + 0.2 * m1, (40 / h) * e0 + 0.05 * m2],
    }


def test_measure_estimate_bounded_over_regimes():
    # worst normalized integral over samples from every regime stays within x8 across h
    eps = 0.25
    worst = []
    for h in (2.0 ** -k for k in range(4, 9)):
        vals = []
        for reg, xs in _regime_samples(h).items():
            for xi in xs:
                assert measure_regime(FRAME, xi, h) == reg
                bracket = 1 + float(xi @ xi)
                vals.append(measure_integral(FRAME, xi, h, eps) * (h * h * bracket) ** (2 - 2 * eps))
        worst.append(max(vals))
    assert max(worst) / min(worst) <= 8
