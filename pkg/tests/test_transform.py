import json
import math
import warnings

import numpy as np
import pytest

from hyperfrac.geometry import HyperbolicSpace
from hyperfrac.heat import heat_kernel
from hyperfrac.kernels import poisson_kernel, poisson_symbol
from hyperfrac.transform import (
    ExtensionSlice,
    RadialGridFunction,
    SpectralGridFunction,
    TruncationWarning,
    extension_solve,
    fractional_laplacian,
    inverse_spherical_transform,
    lp_norm,
    neumann_limit,
    neumann_symbol,
    pde_residual,
    plancherel_l2,
    radial_laplacian,
    richardson_limit,
    shifted_fractional,
    sobolev_norm,
    spherical_transform,
    weighted_l2,
)


def heat_grid(space, t, step=0.0125, radius=None):
    radius = radius or max(10.0, 2 * space.rho * t + 13 * math.sqrt(t))
    grid = np.arange(0.0, radius + step / 2, step)
    return RadialGridFunction.from_callable(space, lambda r: heat_kernel(space, t, r), grid)


@pytest.fixture(scope="module")
def h1():
    return heat_grid(HyperbolicSpace(3), 1.0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_heat_forward_small_time(n):
    sp = HyperbolicSpace(n)
    lam = np.linspace(0.0, 10.0, 101)
    fh = spherical_transform(heat_grid(sp, 0.1), lam)
    assert np.max(np.abs(fh.values / np.exp(-0.1 * (lam ** 2 + sp.rho ** 2)) - 1)) < 1e-6


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_heat_forward_absolute(n, t):
    sp = HyperbolicSpace(n)
    lam = np.linspace(0.0, 10.0, 101)
    fh = spherical_transform(heat_grid(sp, t), lam)
    assert np.max(np.abs(fh.values - np.exp(-t * (lam ** 2 + sp.rho ** 2)))) < 1e-13


@pytest.mark.xfail(strict=True, reason="relative error near e^-65 is below the double-precision cancellation floor")
def test_heat_forward_relative_unit_time(h1):
    lam = np.linspace(0.0, 8.0, 81)
    fh = spherical_transform(h1, lam)
    assert np.max(np.abs(fh.values / np.exp(-(lam ** 2 + 1)) - 1)) < 1e-6


def test_forward_direct_method_agrees(h1):
    lam = np.linspace(0.0, 4.0, 9)
    a = spherical_transform(h1, lam).values
    b = spherical_transform(h1, lam, method="direct").values
    assert np.max(np.abs(a - b)) < 1e-13


def test_poisson_forward(h3):
    grid = np.linspace(0.0, 40.0, 401)
    f = RadialGridFunction.from_callable(h3, lambda r: poisson_kernel(h3, 0.5, 1.0, r), grid)
    lam = np.linspace(0.0, 8.0, 17)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        fh = spherical_transform(f, lam)
    assert np.max(np.abs(fh.values / poisson_symbol(h3, 0.5, 1.0, lam) - 1)) < 1e-6


def test_zero_function(h3):
    f = RadialGridFunction(h3, np.linspace(0, 5, 11), np.zeros(11))
    assert np.all(spherical_transform(f, [0.0, 1.0]).values == 0)
    g = SpectralGridFunction(h3, np.linspace(0, 5, 11), np.zeros(11))
    assert np.all(inverse_spherical_transform(g, [0.0, 1.0]).values == 0)


def test_truncation_warning(h3):
    f = RadialGridFunction(h3, np.linspace(0, 2, 21), np.ones(21))
    with pytest.warns(TruncationWarning):
        spherical_transform(f, [0.0, 1.0])


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_heat_round_trip(n, t):
    sp = HyperbolicSpace(n)
    fh = spherical_transform(heat_grid(sp, t), np.linspace(0.0, 10.0, 201))
    r = np.linspace(0.0, 5.0, 51)
    back = inverse_spherical_transform(fh, r)
    assert np.max(np.abs(back.values / heat_kernel(sp, t, r) - 1)) < 1e-6


def test_inverse_direct_method_agrees(h1):
    fh = spherical_transform(h1, np.linspace(0.0, 10.0, 101))
    r = np.array([0.0, 0.7, 2.0])
    a = inverse_spherical_transform(fh, r).values
    b = inverse_spherical_transform(fh, r, method="direct").values
    assert np.allclose(a, b, rtol=1e-10)


def test_plancherel_heat(h1, h3):
    # int h_1^2 = h_2(0) by the semigroup law
    target = heat_kernel(h3, 2.0, 0.0)
    assert lp_norm(h1, 2) ** 2 == pytest.approx(target, rel=1e-6)
    assert sobolev_norm(h1, 0.0) ** 2 == pytest.approx(target, rel=1e-6)
    fh = spherical_transform(h1, np.linspace(0, 10, 101))
    assert plancherel_l2(fh) ** 2 == pytest.approx(lp_norm(h1, 2) ** 2, rel=1e-6)


def test_fractional_order_zero(h1):
    r = np.linspace(0.0, 5.0, 51)
    out = fractional_laplacian(h1, 0.0, r_grid=r)
    assert np.max(np.abs(out.values / heat_kernel(h1.space, 1.0, r) - 1)) < 1e-6


def test_fractional_order_one_is_laplacian(h1, h3):
    step = 0.01
    r = np.arange(0.0, 5.0, step)
    fd = -radial_laplacian(h3, heat_kernel(h3, 1.0, r), step)
    spectral = fractional_laplacian(h1, 1.0, r_grid=r, lambda_grid=np.linspace(0, 12, 241)).values
    sel = (r >= 0.2) & (r <= 4.0)
    assert np.max(np.abs(spectral[sel] / fd[sel] - 1)) < 1e-3


def test_shifted_order_two(h1, h3):
    step = 0.01
    r = np.arange(0.0, 5.0, step)
    v = heat_kernel(h3, 1.0, r)
    fd = -radial_laplacian(h3, v, step) - h3.rho ** 2 * v
    spectral = shifted_fractional(h1, 2.0, r_grid=r, lambda_grid=np.linspace(0, 12, 241)).values
    sel = (r >= 0.2) & (r <= 4.0)
    assert np.max(np.abs(spectral[sel] / fd[sel] - 1)) < 1e-3


def test_composition_on_spectral_side(h1):
    fh = spherical_transform(h1, np.linspace(0.0, 10.0, 101))
    s = fh.grid ** 2 + 1.0
    two_steps = s ** 0.3 * (s ** 0.4 * fh.values)
    assert np.allclose(two_steps, s ** 0.7 * fh.values, rtol=1e-12, atol=0)


def test_fractional_rejects_negative(h1):
    with pytest.raises(ValueError):
        fractional_laplacian(h1, -0.5)


def test_extension_contracts_and_converges(h1):
    norm_f = lp_norm(h1, 2)
    slices = extension_solve(h1, 0.5, [1e-3, 0.1, 1.0], lambda_grid=np.linspace(0, 10, 201))
    for s in slices:
        assert lp_norm(s.profile, 2) <= norm_f * (1 + 1e-9)
    diff = RadialGridFunction(h1.space, h1.grid, slices[0].profile.values - h1.values)
    assert lp_norm(diff, 2) / norm_f <= 1e-2


def test_extension_half_order_matches_poisson_convolution(h1, h3):
    # at sigma = 1/2 the slice multiplier is e^{-y s}
    sl = extension_solve(h1, 0.5, [0.7], r_grid=np.array([0.0, 1.0, 2.0]),
                         lambda_grid=np.linspace(0, 10, 101))[0]
    fh = spherical_transform(h1, np.linspace(0, 10, 101))
    direct = SpectralGridFunction(h3, fh.grid, fh.values * np.exp(-0.7 * np.sqrt(fh.grid ** 2 + 1)))
    ref = inverse_spherical_transform(direct, [0.0, 1.0, 2.0]).values
    assert np.allclose(sl.profile.values, ref, rtol=1e-6)


def test_neumann_symbol_limit():
    ys = 0.2 * 2.0 ** -np.arange(5)
    for sigma in (0.25, 0.4, 0.75):
        samples = np.array([neumann_symbol(sigma, 1.0, y) for y in ys])
        exps = sorted([2 - 2 * sigma, 2, 4 - 2 * sigma, 4])
        assert richardson_limit(samples, ys, exps) == pytest.approx(1.0, abs=1e-6)


def test_richardson_exact_on_polynomial():
    ys = np.array([1.0, 0.5, 0.25])
    vals = 3.0 + 2.0 * ys ** 1.5 - ys ** 2
    assert richardson_limit(vals, ys, [1.5, 2.0]) == pytest.approx(3.0, rel=1e-12)


def test_neumann_limit_recovers_fractional_laplacian(h1):
    r = np.linspace(0.0, 3.0, 31)
    lam = np.linspace(0.0, 10.0, 201)
    ref = fractional_laplacian(h1, 0.4, r_grid=r, lambda_grid=lam).values
    got, residual = neumann_limit(h1, 0.4, r_grid=r, lambda_grid=lam, return_residual=True)
    assert np.max(np.abs(got.values - ref)) / np.max(np.abs(ref)) < 2e-2
    assert residual < 1.0


def test_neumann_rejects(h1):
    with pytest.raises(ValueError):
        neumann_limit(h1, 1.0)


def _slices(h1, ys, sigma=0.4):
    r = np.arange(0.0, 6.0, 0.02)
    return extension_solve(h1, sigma, ys, r_grid=r, lambda_grid=np.linspace(0, 10, 101))


@pytest.mark.xfail(strict=True, reason="y-spacing 0.2 leaves a second-order difference error of about 1.1e-2")
def test_pde_residual_coarse_slices(h1):
    assert pde_residual(_slices(h1, [0.8, 1.0, 1.2]), 0.4) <= 1e-2


def test_pde_residual_converges_with_spacing(h1):
    coarse = pde_residual(_slices(h1, [0.8, 1.0, 1.2]), 0.4)
    fine = pde_residual(_slices(h1, [0.95, 1.0, 1.05]), 0.4)
    assert fine < 1e-2
    # second-order in the y-step: a factor 4 in step gives roughly 16 in residual
    assert coarse / fine > 8


def test_pde_residual_detects_wrong_solution(h1):
    good = _slices(h1, [0.95, 1.0, 1.05])
    bent = [ExtensionSlice(s.y, RadialGridFunction(s.profile.space, s.profile.grid,
                                                   s.profile.values * (1 + 0.05 * (s.y - 1))))
            for s in good]
    assert pde_residual(bent, 0.4) > 10 * pde_residual(good, 0.4)


def test_pde_residual_zero_and_errors(h3):
    grid = np.linspace(0, 1, 11)
    zero = [ExtensionSlice(y, RadialGridFunction(h3, grid, np.zeros(11))) for y in (0.5, 1.0, 1.5)]
    assert pde_residual(zero, 0.4) == 0.0
    with pytest.raises(ValueError):
        pde_residual(zero[:2], 0.4)
    with pytest.raises(ValueError):
        ExtensionSlice(0.0, zero[0].profile)


def test_norms(h3):
    grid = np.linspace(0.0, 3.0, 301)
    one = RadialGridFunction(h3, grid, np.ones_like(grid), "linear")
    vol = 4 * math.pi * (math.sinh(6.0) / 4 - 1.5)
    assert lp_norm(one, 1) == pytest.approx(vol, rel=1e-10)
    assert lp_norm(one, math.inf) == 1.0
    assert weighted_l2(one, lambda r: np.ones_like(r)) ** 2 == pytest.approx(vol, rel=1e-10)
    with pytest.raises(ValueError):
        lp_norm(one, 0.5)


def test_grid_function_validation_and_json(h3):
    with pytest.raises(ValueError):
        RadialGridFunction(h3, np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        RadialGridFunction(h3, np.array([0.0, 1.0]), np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        RadialGridFunction(h3, np.array([1.0, 0.0]), np.array([1.0, 2.0]))
    f = RadialGridFunction(h3, np.linspace(0, 1, 5), np.arange(5.0))
    g = RadialGridFunction.from_json(f.to_json({"rel": 1e-6}))
    assert np.array_equal(g.values, f.values) and g.space.n == 3
    assert f.to_csv().splitlines()[0] == "r,value"
    assert f(2.0) == 0.0


def test_sobolev_norm_nondecreasing_in_order(h1):
    lam = np.linspace(0.0, 10.0, 101)
    norms = [sobolev_norm(h1, s, lambda_grid=lam) for s in (0.0, 0.25, 0.5, 1.0, 2.0)]
    assert all(a <= b for a, b in zip(norms, norms[1:]))
