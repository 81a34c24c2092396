import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgolab.spectral import (
    GridFunction,
    apply_multiplier,
    derivative,
    forward,
    holder_data,
    inverse,
    l2_norm,
    load_grid_function,
    make_grid,
    mollify_split,
    product,
    random_bandlimited,
    save_grid_function,
    sobolev_norm,
)
from oracles import direct_transform, grid_points


def test_make_grid_valid():
    spec = make_grid(3, 32, 2 * math.pi, 0.9)
    assert spec.size == 32768


@pytest.mark.parametrize("args", [(3, 32, 2 * math.pi, 3.0), (3, 48, 2 * math.pi, 0.9), (3, 4, 2 * math.pi, 0.9)])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_lattice_is_integer_for_unit_torus(grid16):
    ax = grid16.freq_axes()[0].ravel()
    assert sorted(np.rint(ax).astype(int)) == list(range(-8, 8))


def test_forward_matches_direct_sum():
    spec = make_grid(3, 8)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    coeffs = forward(spec, vals)
    for k in [(0, 0, 0), (1, -2, 3), (-4, 0, 1)]:
        xi = np.array(k) * 2 * math.pi / spec.L
        assert abs(coeffs[spec.lattice_index(k)] - direct_transform(spec, vals, xi)) < 1e-12 * np.abs(coeffs).max()


@pytest.mark.parametrize("N", [8, 16, 32])
def test_round_trip_and_parseval(N):
    spec = make_grid(3, N)
    rng = np.random.default_rng(N)
    vals = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    back = inverse(spec, forward(spec, vals))
    assert np.abs(back - vals).max() <= 1e-12 * np.abs(vals).max()
    u = GridFunction(spec, vals, "physical")
    phys = math.sqrt(np.sum(np.abs(vals) ** 2) * spec.dx ** 3)
    assert abs(l2_norm(u) - phys) <= 1e-12 * phys
    assert abs(sobolev_norm(u, 0.0) - phys) <= 1e-12 * phys


def _mode(spec, k, amp=1.0):
    x = grid_points(spec)
    xi = np.array(k) * 2 * math.pi / spec.L
    return GridFunction(spec, amp * np.exp(1j * x @ xi).reshape(spec.shape), "physical"), xi


def test_multiplier_identity_and_single_mode(grid16, rng):
    u = random_bandlimited(grid16, rng)
    assert np.allclose(apply_multiplier(u, lambda *ax: np.ones(grid16.shape)).spectral(), u.spectral())
    v, xi = _mode(grid16, (1, 2, 0))
    jb = 1 + grid16.freq_norm2()
    w = apply_multiplier(v, jb)
    assert np.allclose(w.physical(), (1 + xi @ xi) * v.physical())


def test_multiplier_rejects_nonfinite(grid16, rng):
    with pytest.raises(ValueError):
        apply_multiplier(random_bandlimited(grid16, rng), np.full(grid16.shape, np.inf))


def test_derivative_examples(grid16):
    u, xi = _mode(grid16, (1, 0, 0))
    assert np.allclose(derivative(u, (1, 0, 0)).physical(), u.physical())
    v, xi = _mode(grid16, (2, -1, 3))
    assert np.allclose(derivative(v, (1, 2, 1)).physical(), xi[0] * xi[1] ** 2 * xi[2] * v.physical())
    c = GridFunction(grid16, np.full(grid16.shape, 2.0 + 0j), "physical")
    assert np.abs(derivative(c, (0, 1, 0)).physical()).max() < 1e-12
    assert np.allclose(derivative(v, (0, 0, 0)).physical(), v.physical())


@settings(max_examples=20, deadline=None)
@given(a=st.tuples(*[st.integers(0, 2)] * 3), b=st.tuples(*[st.integers(0, 2)] * 3), seed=st.integers(0, 10**6))
def test_derivative_composes_exactly(a, b, seed):
    spec = make_grid(3, 8)
    u = random_bandlimited(spec, np.random.default_rng(seed))
    lhs = derivative(derivative(u, a), b).spectral()
    rhs = derivative(u, tuple(x + y for x, y in zip(a, b))).spectral()
    assert np.array_equal(lhs, rhs)


def test_sobolev_single_mode(grid16):
    u, xi = _mode(grid16, (1, 1, 0), amp=3.0)
    vol = math.sqrt(grid16.L ** 3)
    assert sobolev_norm(u, 1.5) == pytest.approx(3.0 * vol * (1 + xi @ xi) ** 0.75, rel=1e-12)
    assert sobolev_norm(GridFunction(grid16, np.zeros(grid16.shape), "physical"), 2.0) == 0.0


def test_holder_data_examples(grid16):
    c = GridFunction(grid16, np.full(grid16.shape, 2.5 + 0j), "physical")
    assert holder_data(c, 0.5) == (2.5, 0.0)
    x1 = grid16.coord_axes()[0] * np.ones(grid16.shape)
    sup, quot = holder_data(GridFunction(grid16, x1 + 0j, "physical"), 1.0)
    # the periodic wrap pair is excluded by construction, interior pairs give slope 1
    assert quot == pytest.approx(1.0, rel=1e-12)
    bump = np.exp(-grid16.radius() ** 2)
    assert holder_data(GridFunction(grid16, bump + 0j, "physical"), 0.5)[0] >= bump.max()


def test_mollify_split_examples(grid16):
    one = GridFunction(grid16, np.ones(grid16.shape, dtype=complex), "physical")
    sp = mollify_split(one, 0.1)
    assert np.allclose(sp.smooth.physical(), 1.0) and sp.rough_sup < 1e-12
    u, _ = _mode(grid16, (1, 0, 0))
    rough = [mollify_split(u, h).rough_sup for h in (0.2, 0.1, 0.05)]
    assert rough[0] > rough[1] > rough[2]
    with pytest.raises(ValueError):
        mollify_split(u, 0.0)


def test_mollify_split_holder_slope():
    from cgolab.fitting import fit_slope

    # a fine one-dimensional grid resolves the cusp well below every h
    spec = make_grid(1, 4096)
    theta = 0.5
    x1 = spec.coord_axes()[0]
    f = GridFunction(spec, np.abs(np.sin(x1)) ** theta + 0j, "physical")
    hs = [2.0 ** -k for k in range(3, 8)]
    fit = fit_slope(hs, [mollify_split(f, h).rough_sup for h in hs])
    assert abs(fit.slope - theta) < 0.1


def test_product_dealiased_is_exact_convolution():
    spec = make_grid(3, 8)
    rng = np.random.default_rng(3)
    u, v = random_bandlimited(spec, rng, 3), random_bandlimited(spec, rng, 3)
    w = product(u, v)
    k = (1, 2, -1)
    ref = 0j
    for a in np.ndindex(spec.shape):
        ka = [c if c < 4 else c - 8 for c in a]
        kb = [k[i] - ka[i] for i in range(3)]
        if all(-4 <= c < 4 for c in kb):
            ref += u.spectral()[a] * v.spectral()[spec.lattice_index(kb)]
    assert abs(w.spectral()[spec.lattice_index(k)] - ref * spec.quad_weight) < 1e-10


def test_serialization_round_trip(tmp_path, grid16, rng):
    u = random_bandlimited(grid16, rng).as_physical()
    data, side = save_grid_function(u, tmp_path / "u.c64")
    assert data.stat().st_size == 8 * grid16.size
    back = load_grid_function(data)
    assert back.representation == "physical"
    assert np.abs(back.physical() - u.physical()).max() < 1e-5 * np.abs(u.physical()).max()
