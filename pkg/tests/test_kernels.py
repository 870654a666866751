import math
import warnings

import numpy as np
import pytest

import oracles
from hyperfrac.geometry import HyperbolicSpace, volume_density
from hyperfrac.kernels import (
    DivergenceError,
    KernelSpec,
    bgr_kernel,
    closed_form_normalization,
    kernel_envelope,
    kernel_mass,
    kernel_table,
    log_poisson_kernel_h3,
    multiplier_identity_ratio,
    neg_poisson_kernel,
    neg_poisson_symbol,
    poisson_kernel,
    poisson_symbol,
    riesz_zero_kernel,
    riesz_zero_symbol,
    scalar_subordination_sides,
    validate_kernel_estimate,
    write_kernel_table,
)
from hyperfrac.transform import RadialGridFunction, TruncationWarning, spherical_transform

LAM = np.linspace(0.0, 8.0, 33)


def _transform(space, func, radius=40.0, start=0.0):
    grid = np.linspace(start, radius, 401)
    f = RadialGridFunction(space, grid, func(grid), "cubic", func)
    with warnings.catch_warnings():
        # the L1 tail is heavy; the transform integrand carries an extra phi_lambda decay
        warnings.simplefilter("ignore", TruncationWarning)
        return spherical_transform(f, LAM)


@pytest.mark.parametrize("sigma, y, r", [(0.4, 1.0, 0.0), (0.3, 0.7, 1.5), (0.75, 2.0, 4.0), (0.5, 0.5, 0.2)])
def test_poisson_against_subordination_oracle(h3, sigma, y, r):
    assert poisson_kernel(h3, sigma, y, r) == pytest.approx(oracles.poisson_h3(sigma, y, r), rel=1e-9)


@pytest.mark.parametrize("sigma, y", [(0.25, 0.5), (0.5, 1.0), (0.75, 2.0)])
def test_closed_form_matches_quadrature(h3, sigma, y):
    r = np.linspace(0.0, 5.0, 26)
    closed = poisson_kernel(h3, sigma, y, r, method="closed")
    quad = poisson_kernel(h3, sigma, y, r, method="quadrature")
    c = closed_form_normalization(lambda x: poisson_kernel(h3, sigma, y, x, "closed"),
                                  lambda x: poisson_kernel(h3, sigma, y, x, "quadrature"), 1.0)
    assert c == pytest.approx(1.0, rel=1e-10)
    assert np.max(np.abs(c * closed / quad - 1)) < 1e-8


def test_log_poisson_reaches_far_radius(h3):
    assert math.isfinite(log_poisson_kernel_h3(0.5, 1.0, 900.0))
    assert log_poisson_kernel_h3(0.5, 1.0, 2.0) == pytest.approx(math.log(poisson_kernel(h3, 0.5, 1.0, 2.0)), rel=1e-13)


@pytest.mark.parametrize("sigma, y", [(0.4, 1.0), (0.25, 0.5), (0.75, 2.0)])
def test_poisson_unit_mass(h3, sigma, y):
    assert kernel_mass(h3, sigma, y) == pytest.approx(1.0, abs=1e-6)


def test_poisson_unit_mass_even_dimension():
    # the quadrature path stops at r = 250; the weighted kernel decays like a power
    # there, so the rest is added from a log-log fit over [100, 250]
    sp = HyperbolicSpace(2)
    r = np.geomspace(100.0, 250.0, 8)
    w = poisson_kernel(sp, 0.5, 1.0, r, "quadrature") * volume_density(sp, r)
    slope, icpt = np.polyfit(np.log(r), np.log(w), 1)
    assert slope == pytest.approx(-1.5, abs=0.05)
    tail = math.exp(icpt) * 250.0 ** (slope + 1) / -(slope + 1)
    assert kernel_mass(sp, 0.5, 1.0) + tail == pytest.approx(1.0, abs=2e-3)


def test_poisson_spreads_out(h3):
    vals = [poisson_kernel(h3, 0.5, y, 0.0) for y in (1.0, 10.0, 100.0)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-10


def test_kernels_decrease_in_r(h3):
    r = np.linspace(0.01, 10.0, 200)
    for vals in (poisson_kernel(h3, 0.3, 0.7, r), -neg_poisson_kernel(h3, 0.3, 0.7, r),
                 riesz_zero_kernel(h3, 0.5, r), bgr_kernel(h3, 1.0, r)):
        assert np.all(np.diff(vals) < 0)


def test_symbol_half_order_is_exponential(h3):
    lam = np.linspace(0.0, 10.0, 41)
    s = np.sqrt(lam ** 2 + 1.0)
    for y in (0.1, 1.0, 3.0):
        assert np.allclose(poisson_symbol(h3, 0.5, y, lam), np.exp(-y * s), rtol=1e-12, atol=0)


def test_symbol_range_and_small_argument(h3):
    vals = poisson_symbol(h3, 0.3, 0.7, LAM)
    assert np.all((vals > 0) & (vals <= 1))
    assert poisson_symbol(h3, 0.3, 1e-9, 0.0) == pytest.approx(1.0, abs=1e-5)


def test_symbol_against_oracle(h3):
    for sigma, y, lam in [(0.3, 0.7, 0.0), (0.3, 0.7, 5.0), (0.8, 2.0, 1.0)]:
        s = math.sqrt(lam ** 2 + 1.0)
        assert poisson_symbol(h3, sigma, y, lam) == pytest.approx(oracles.poisson_symbol(sigma, y, s), rel=1e-12)


def test_poisson_transform_matches_symbol(h3):
    fh = _transform(h3, lambda r: poisson_kernel(h3, 0.3, 0.7, r))
    assert np.max(np.abs(fh.values / poisson_symbol(h3, 0.3, 0.7, LAM) - 1)) < 1e-6


def test_neg_poisson_transform_matches_symbol(h3):
    fh = _transform(h3, lambda r: neg_poisson_kernel(h3, 0.3, 0.7, r))
    assert np.max(np.abs(fh.values / neg_poisson_symbol(h3, 0.3, 0.7, LAM) - 1)) < 1e-6


def test_neg_poisson_sign_and_bounded(h3):
    assert neg_poisson_kernel(h3, 0.4, 1.0, 1.0) < 0
    assert neg_poisson_symbol(h3, 0.4, 1.0, 1.0) < 0
    assert math.isfinite(neg_poisson_kernel(h3, 0.4, 1.0, 0.0))


def test_riesz_negative_order_transform(h3):
    def k(r):
        return riesz_zero_kernel(h3, 1.2, r, negative_order=True)
    fh = _transform(h3, k, start=1e-3)
    assert np.max(np.abs(fh.values / riesz_zero_symbol(h3, 1.2, LAM) - 1)) < 1e-6


def test_riesz_against_oracle(h3):
    assert riesz_zero_kernel(h3, 0.3, 0.5) == pytest.approx(oracles.riesz_h3(0.3, 0.5), rel=1e-9)
    assert riesz_zero_kernel(h3, 1.2, 0.5, True) == pytest.approx(oracles.riesz_h3(1.2, 0.5, True), rel=1e-9)


def test_riesz_near_origin_power(h3):
    r = np.geomspace(1e-3, 1e-1, 30)
    v = r ** (3 + 2 * 0.3) * riesz_zero_kernel(h3, 0.3, r)
    assert np.ptp(v) / v.max() <= 0.05


def test_riesz_singular_origin(h3):
    with pytest.raises(DivergenceError):
        riesz_zero_kernel(h3, 0.3, 0.0)
    with pytest.raises(DivergenceError):
        riesz_zero_kernel(h3, 1.2, 0.0, True)
    assert math.isfinite(riesz_zero_kernel(h3, 1.7, 0.0, True))


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_bgr_closed_form_matches_quadrature(h3, sigma):
    r = np.linspace(0.05, 5.0, 25)
    closed = bgr_kernel(h3, sigma, r, "closed")
    quad = bgr_kernel(h3, sigma, r, "quadrature")
    assert np.max(np.abs(closed / quad - 1)) < 1e-8


def test_bgr_near_origin_exponent(h3):
    r = np.geomspace(1e-4, 1e-2, 20)
    slope = np.polyfit(np.log(r), np.log(bgr_kernel(h3, 1.0, r)), 1)[0]
    assert slope == pytest.approx(-2.0, rel=0.02)


def test_bgr_rejects(h3):
    with pytest.raises(ValueError):
        bgr_kernel(h3, 3.0, 1.0)
    with pytest.raises(DivergenceError):
        bgr_kernel(h3, 1.0, 0.0)


def test_multiplier_identity(h3):
    lam = np.linspace(0.0, 10.0, 101)
    for sigma in (0.25, 0.5, 0.75):
        for y in (0.5, 1.0, 2.0):
            assert np.max(np.abs(multiplier_identity_ratio(h3, sigma, y, lam) - 1)) < 1e-8


def test_scalar_subordination_identity():
    rng = np.random.default_rng(7)
    for _ in range(8):
        lam, sigma, y = rng.uniform(0.1, 5), rng.uniform(0.05, 0.95), rng.uniform(0.2, 3)
        left, right = scalar_subordination_sides(lam, sigma, y)
        assert left == pytest.approx(right, rel=1e-9)


@pytest.mark.parametrize("sigma, y", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, -1.0)])
def test_poisson_rejects_parameters(h3, sigma, y):
    with pytest.raises(ValueError):
        poisson_kernel(h3, sigma, y, 1.0)


def test_method_validation():
    with pytest.raises(ValueError):
        poisson_kernel(HyperbolicSpace(4), 0.5, 1.0, 1.0, method="closed")
    with pytest.raises(ValueError):
        poisson_kernel(HyperbolicSpace(3), 0.5, 1.0, 1.0, method="bogus")


def test_spec_validation(h3):
    with pytest.raises(ValueError):
        KernelSpec("poisson", h3, sigma=0.5)
    with pytest.raises(ValueError):
        KernelSpec("cauchy", h3)
    spec = KernelSpec("poisson", h3, sigma=0.5, y=1.0)
    assert spec.order == 0.5 and spec.label() == "sigma=0.5;y=1.0"
    assert KernelSpec("neg_poisson", h3, sigma=0.5, y=1.0).order == -0.5


def _grids(y):
    near = np.sqrt(np.clip(np.linspace(1e-4, 0.9, 60) - y * y, 0, None))
    far = np.sqrt(np.linspace(1.1, 100.0, 60) - y * y)
    return np.unique(near[near > 0]), far


@pytest.mark.parametrize("family, params", [
    ("poisson", {"sigma": 0.5, "y": 0.5}),
    ("poisson", {"sigma": 0.25, "y": 0.5}),
    ("riesz_zero", {"alpha": 0.5}),
    ("bgr", {"sigma": 1.0}),
])
def test_estimate_spreads_within_calibration(h3, calibration, family, params):
    spec = KernelSpec(family, h3, **params)
    near, far = _grids(spec.y_value)
    for regime, grid in (("near", near), ("far", far)):
        bound = calibration["spread_bounds"][family][regime]
        rep = validate_kernel_estimate(spec, grid, regime, bound)
        assert rep.passed and rep.ratio_min > 0, (regime, rep.spread)


def test_estimate_wrong_exponent_fails(h3, calibration):
    spec = KernelSpec("poisson", h3, sigma=0.5, y=0.5)
    near, _ = _grids(0.5)
    rep = validate_kernel_estimate(spec, near, "near", calibration["spread_bounds"]["poisson"]["near"], exponent=-1.0)
    assert not rep.passed


def test_estimate_single_point_and_empty(h3):
    spec = KernelSpec("poisson", h3, sigma=0.5, y=0.5)
    rep = validate_kernel_estimate(spec, [0.3], "near")
    assert rep.ratio_min == rep.ratio_max
    with pytest.raises(ValueError):
        validate_kernel_estimate(spec, [5.0], "near")
    with pytest.raises(ValueError):
        kernel_envelope(spec, [1.0], "middle")


def test_table_output(tmp_path, h3):
    rows = kernel_table(KernelSpec("poisson", h3, sigma=0.5, y=1.0), [0.0, 1.0])
    path = tmp_path / "k.csv"
    write_kernel_table(path, rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "family,n,params,r,value,method"
    assert lines[1].endswith(",closed")
