import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgolab.frames import (
    ProblemSpec,
    XLambdaWeight,
    Zeta,
    check_hypotheses,
    make_frame,
    p_symbol,
    symbol_on_grid,
    tau_max,
    xlambda_norm,
    zeta_rot,
)
from cgolab.spectral import GridFunction, inner, l2_norm, random_bandlimited
from oracles import grid_points, zeta1_reference


def test_make_frame_canonical():
    fr = make_frame((0, 0, 3))
    assert np.array_equal(fr.mu1, [1, 0, 0]) and np.array_equal(fr.mu2, [0, 1, 0])
    fr = make_frame((1, 0, 0))
    assert fr.mu1[0] == 0 and fr.mu2[0] == 0
    with pytest.raises(ValueError):
        make_frame((0, 0, 0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=3, max_size=3).filter(any))
def test_frame_invariants(xi0):
    fr = make_frame(xi0)
    M = np.array([fr.mu1, fr.mu2])
    assert np.abs(M @ M.T - np.eye(2)).max() < 1e-12
    assert np.abs(M @ np.asarray(xi0, float)).max() < 1e-12


def test_zeta_rot_example():
    fr = make_frame((0, 0, 1))
    z1 = zeta_rot(fr, 1, 0.1, 0.0).vec
    assert np.allclose(z1, [1, 0.99874921777190895j, -0.05j], atol=1e-15)
    z2 = zeta_rot(fr, 2, 0.1, 0.0).vec
    assert np.allclose(z1 + z2, [0, 0, -0.1j], atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(tau_frac=st.floats(1e-3, 1.0), theta=st.floats(0, 2 * math.pi), k=st.sampled_from([1, 2]),
       xi0=st.lists(st.integers(-3, 3), min_size=3, max_size=3).filter(any))
def test_zeta_in_class(tau_frac, theta, k, xi0):
    fr = make_frame(xi0)
    tau = tau_frac * tau_max(fr)
    z = zeta_rot(fr, k, tau, theta)
    assert max(z.defects()) < 1e-12
    if k == 1:
        ref = zeta1_reference(fr.xi0.tolist(), fr.mu1.tolist(), fr.mu2.tolist(), tau, theta)
        assert np.abs(z.vec - np.array(ref)).max() < 1e-12


def test_zeta_rot_range():
    fr = make_frame((1, 0, 0))
    with pytest.raises(ValueError):
        zeta_rot(fr, 1, 0.6, 0.0)
    with pytest.raises(ValueError):
        zeta_rot(fr, 3, 0.1, 0.0)


def test_p_symbol_examples():
    z = np.array([1, 1j, 0])
    assert p_symbol(z, 1.0, (0, 0, 0)) == 0
    assert p_symbol(z, 1.0, (2, 0, 0)) == pytest.approx(4 - 4j)
    assert abs(p_symbol(z, 1.0, (0, -2, 0))) < 1e-15


def test_symbol_on_grid_matches_pointwise(grid16):
    fr = make_frame((1, 1, 0))
    z = zeta_rot(fr, 1, 0.1, 0.3)
    P = symbol_on_grid(grid16, z, 0.1)
    for k in [(1, 2, 3), (-8, 0, 7)]:
        xi = np.array(k) * 2 * math.pi / grid16.L
        assert P[grid16.lattice_index(k)] == pytest.approx(p_symbol(z, 0.1, xi), abs=1e-14)


def test_xlambda_examples(grid16, rng):
    z = Zeta(np.array([1, 1j, 0]))
    zero = GridFunction(grid16, np.zeros(grid16.shape), "spectral")
    assert xlambda_norm(zero, XLambdaWeight(0.1, z, 0.5)) == 0
    u = random_bandlimited(grid16, rng)
    assert xlambda_norm(u, XLambdaWeight(0.1, z, 0.0)) == pytest.approx(l2_norm(u), rel=1e-12)
    k = (2, 1, 0)
    x = grid_points(grid16)
    xi = np.array(k, float)
    mode = GridFunction(grid16, 2.0 * np.exp(1j * x @ xi).reshape(grid16.shape), "physical")
    expected = 2.0 * math.sqrt(grid16.L ** 3) * (0.1 + abs(p_symbol(z, 0.1, xi))) ** 0.5
    assert xlambda_norm(mode, XLambdaWeight(0.1, z, 0.5)) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.sampled_from([-1.0, -0.5, 0.5, 1.0]), c=st.complex_numbers(min_magnitude=1e-100, max_magnitude=10))
def test_xlambda_is_norm_and_dual(grid16, seed, lam, c):
    rng = np.random.default_rng(seed)
    z = zeta_rot(make_frame((0, 0, 1)), 1, 0.1, 0.2)
    w, wd = XLambdaWeight(0.1, z, lam), XLambdaWeight(0.1, z, -lam)
    u, v = random_bandlimited(grid16, rng), random_bandlimited(grid16, rng)
    nu = xlambda_norm(u, w)
    assert xlambda_norm(u * c, w) == pytest.approx(abs(c) * nu, rel=1e-12)
    assert xlambda_norm(u + v, w) <= nu + xlambda_norm(v, w) + 1e-12
    assert abs(inner(u, v)) <= nu * xlambda_norm(v, wd) * (1 + 1e-12)


def test_check_hypotheses_examples():
    assert not check_hypotheses(ProblemSpec(m=2, d=3, s=1.9, p=2, eps=0.25)).passed
    rep = check_hypotheses(ProblemSpec(m=2, d=3, s=1.5, p=12, eps=0.25))
    assert rep.passed and rep.t == 2.0
    assert not check_hypotheses(ProblemSpec(m=2, d=3, s=2.0, p=12, eps=0.25)).checks["s<m/2+1"]
    ps = ProblemSpec.from_eps(eps=0.25)
    assert ps.s == pytest.approx(1.625)
