"""Numerical checks of Hardy-type inequalities, ground-state identities and
mapping properties of the Poisson operator on H^n.

Spectral sides use the Plancherel formula; real-space sides use radial
quadrature, and double integrals over X x X use geodesic polar
coordinates around the first point.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc

from .geometry import (HyperbolicSpace, distance_polar, inversion_constant, log_volume_density,
                       plancherel_density, volume_density)
from .heat import heat_kernel
from .kernels import (
    log_weighted_subordinated_h3,
    neg_poisson_kernel,
    neg_poisson_symbol,
    poisson_kernel,
    poisson_symbol,
    riesz_zero_kernel,
    riesz_zero_symbol,
    bgr_kernel,
    _subordinate,
)
from .reports import InequalityReport
from .specfun import QuadratureConfig, bessel_k, fourier_integral, gamma_fn, integrate
from .transform import (
    RadialGridFunction,
    TruncationWarning,
    _panels,
    extension_solve,
    lp_norm,
    spherical_transform,
)

__all__ = [
    "DegenerateInputError",
    "TestFunction",
    "TestFunctionFamily",
    "default_family",
    "quadratic_form",
    "hardy_inhomogeneous",
    "ground_state_inhomogeneous",
    "hardy_sharp_case",
    "hardy_homogeneous",
    "quadratic_form_identity",
    "pointwise_integral_rep",
    "isometry_integral",
    "isometry_constant",
    "LqClassification",
    "poisson_lq_norm",
    "bgr_local_norm",
    "contraction_check",
    "poincare_sobolev_scan",
    "kernel_tail",
    "exterior_weight",
]


class DegenerateInputError(ValueError):
    """The test function vanishes, so the ratio is undefined."""


# --------------------------------------------------------------------------
# test functions

GENERATORS = ("heat", "gaussian_bump", "neg_poisson", "riesz_neg", "truncated_polynomial")


@dataclass(frozen=True)
class TestFunction:
    """A radial test function with its decay radius and, when known, its transform."""

    __test__ = False  # not a pytest class

    tag: str
    params: dict
    func: Callable = field(repr=False, compare=False)
    radius: float = 10.0
    symbol: Callable | None = field(default=None, repr=False, compare=False)

    def __call__(self, r):
        return self.func(np.asarray(r, dtype=float))

    def grid_function(self, space: HyperbolicSpace, step: float = 0.01) -> RadialGridFunction:
        grid = np.round(np.arange(0.0, self.radius + 0.5 * step, step), 12)
        return RadialGridFunction(space, grid, self.func(grid), "cubic", self.func)


def gaussian_bump(center: float, width: float) -> TestFunction:
    """exp(-(r-c)^2/w^2) + exp(-(r+c)^2/w^2): even in r, hence smooth at the origin."""
    def func(r):
        return np.exp(-((r - center) / width) ** 2) + np.exp(-((r + center) / width) ** 2)

    return TestFunction("gaussian_bump", {"center": center, "width": width}, func,
                        radius=center + 6.5 * width)


def heat_function(space: HyperbolicSpace, t: float) -> TestFunction:
    radius = max(10.0, 2.0 * space.rho * t + 13.0 * math.sqrt(t))
    return TestFunction("heat", {"t": t}, lambda r: heat_kernel(space, t, r), radius,
                        lambda lam: np.exp(-t * (np.asarray(lam) ** 2 + space.rho ** 2)))


def neg_poisson_function(space: HyperbolicSpace, sigma: float, y: float) -> TestFunction:
    return TestFunction("neg_poisson", {"sigma": sigma, "y": y},
                        lambda r: neg_poisson_kernel(space, sigma, y, r), 40.0,
                        lambda lam: neg_poisson_symbol(space, sigma, y, lam))


def riesz_neg_function(space: HyperbolicSpace, alpha: float) -> TestFunction:
    """P_0^{-alpha}; singular at the origin unless alpha > n/2."""
    def func(r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1e-300)
        out = np.asarray(riesz_zero_kernel(space, alpha, safe, negative_order=True))
        if alpha > space.n / 2:
            origin = gamma_fn(alpha - space.n / 2) * (4 * math.pi) ** (-space.n / 2)
            origin_val = _riesz_neg_origin(space, alpha)
            out = np.where(r > 0, out, origin_val if origin_val is not None else origin)
        return out

    return TestFunction("riesz_neg", {"alpha": alpha}, func, 40.0,
                        lambda lam: riesz_zero_symbol(space, alpha, lam))


def _riesz_neg_origin(space, alpha):
    # int h_t(0) t^{alpha-1} dt; closed form on H^3
    if space.n == 3:
        return (4 * math.pi) ** -1.5 * gamma_fn(alpha - 1.5)
    return float(_subordinate(space, np.array([0.0]), 0.0, alpha)[0])


def truncated_polynomial(support: float, power: int = 4) -> TestFunction:
    """(1 - (r/a)^2)_+^k, of class C^{k-1}."""
    def func(r):
        r = np.asarray(r, dtype=float)
        return np.where(r < support, (1.0 - (r / support) ** 2) ** power, 0.0)

    return TestFunction("truncated_polynomial", {"support": support, "power": power}, func,
                        radius=support + 0.5)


@dataclass(frozen=True)
class TestFunctionFamily:
    """Deterministic family of radial test functions."""

    __test__ = False

    space: HyperbolicSpace
    size: int = 20
    seed: int = 42
    tags: tuple = GENERATORS
    ranges: dict = field(default_factory=lambda: {
        "heat_t": (0.3, 2.0),
        "bump_center": (0.0, 2.0),
        "bump_width": (0.4, 1.2),
        "neg_poisson_sigma": (0.2, 0.8),
        "neg_poisson_y": (0.5, 2.0),
        "riesz_excess": (0.2, 1.0),
        "poly_support": (1.0, 4.0),
    })

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("family needs at least one member")
        bad = set(self.tags) - set(GENERATORS)
        if bad:
            raise ValueError(f"unknown generators {sorted(bad)}")

    def members(self) -> list[TestFunction]:
        rng = np.random.default_rng(self.seed)
        rg = self.ranges
        out = []
        for i in range(self.size):
            tag = self.tags[i % len(self.tags)]
            if tag == "heat":
                out.append(heat_function(self.space, float(rng.uniform(*rg["heat_t"]))))
            elif tag == "gaussian_bump":
                out.append(gaussian_bump(float(rng.uniform(*rg["bump_center"])),
                                         float(rng.uniform(*rg["bump_width"]))))
            elif tag == "neg_poisson":
                out.append(neg_poisson_function(self.space, float(rng.uniform(*rg["neg_poisson_sigma"])),
                                                float(rng.uniform(*rg["neg_poisson_y"]))))
            elif tag == "riesz_neg":
                # alpha above n/2 keeps the function bounded at the origin
                alpha = self.space.n / 2 + float(rng.uniform(*rg["riesz_excess"]))
                out.append(riesz_neg_function(self.space, alpha))
            else:
                out.append(truncated_polynomial(float(rng.uniform(*rg["poly_support"]))))
        return out


def default_family(space: HyperbolicSpace, seed: int = 42) -> TestFunctionFamily:
    return TestFunctionFamily(space, 20, seed)


# --------------------------------------------------------------------------
# shared integrals

def _as_test_function(f, space) -> TestFunction:
    if isinstance(f, TestFunction):
        return f
    if isinstance(f, RadialGridFunction):
        return TestFunction("grid", {}, f, float(f.grid[-1]))
    if callable(f):
        return TestFunction("callable", {}, f)
    raise TypeError("expected a TestFunction, RadialGridFunction or callable")


def _radial_integral(space, integrand, radius, width=0.2, graded=40):
    pan = _panels(float(radius), width, graded)
    vals = integrand(pan.nodes)
    return float(np.sum(vals * volume_density(space, pan.nodes) * pan.weights))


_SYMBOL_CFG = QuadratureConfig(abs_tol=1e-300, rel_tol=1e-11, max_subdivisions=10,
                               transform_hint="half_line_power_exponential")


def quadratic_form(space: HyperbolicSpace, f, sigma: float, shifted: bool = False,
                   cutoff: float = 40.0) -> float:
    """C int |f^|^2 m(lambda) |c|^{-2} dlambda with m = (lambda^2+rho^2)^sigma, or lambda^sigma.

    Uses the analytic transform over the whole half-line when the test
    function carries one; otherwise the numerical transform up to ``cutoff``.
    """
    tf = _as_test_function(f, space)
    rho2 = space.rho ** 2

    def weight(lam):
        return np.abs(lam) ** sigma if shifted else (lam * lam + rho2) ** sigma

    c_inv = inversion_constant(space)
    if tf.symbol is not None:
        def integrand(lam):
            sym = np.asarray(tf.symbol(lam), dtype=float)
            return sym * sym * weight(lam) * plancherel_density(space, lam)
        return c_inv * integrate(integrand, (0.0, math.inf), _SYMBOL_CFG, vectorized=True).value
    grid = tf.grid_function(space)
    pan = _panels(cutoff, 0.5, 0)
    fhat = spherical_transform(grid, np.array([0.0, 1.0]), radius=tf.radius).exact(pan.nodes)
    return c_inv * float(np.sum(fhat * fhat * weight(pan.nodes) * plancherel_density(space, pan.nodes)
                                * pan.weights))


def _log_weighted_riesz(space, sigma):
    """log(P_0^sigma(d) omega sinh^{n-1} d) as a function of d."""
    if space.n == 3:
        return lambda d: log_weighted_subordinated_h3(d, 0.0, -sigma)

    def fn(d):
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore"):
            return (np.log(riesz_zero_kernel(space, sigma, d, method="quadrature"))
                    + np.log(volume_density(space, d)))
    return fn


def kernel_tail(space: HyperbolicSpace, log_weighted: Callable, start: float,
                v_max: float | None = None) -> float:
    """int_start^inf exp(log_weighted(d)) dd, integrated in v = log(d/start).

    Weighted kernels decay like a power of d, so the tail is not small. On
    H^3 the log-safe closed forms reach any radius; elsewhere the
    integration stops at d = 250.
    """
    if v_max is None:
        v_max = 700.0 - math.log(start) if space.n == 3 else math.log(250.0 / start)
    cfg = QuadratureConfig(abs_tol=1e-16, rel_tol=1e-12, max_subdivisions=10)

    def integrand(v):
        return np.exp(log_weighted(start * np.exp(v)) + v + math.log(start))

    return integrate(integrand, (0.0, v_max), cfg, vectorized=True).value


def _sphere_fraction_below(space, c):
    """Fraction of the unit (n-1)-sphere where cos(angle) < c."""
    c = np.clip(c, -1.0, 1.0)
    half = 0.5 * (space.n - 1)
    return betainc(half, half, 0.5 * (1.0 + c))


def exterior_weight(space: HyperbolicSpace, log_weighted: Callable, s, radius: float,
                    nodes: int = 64) -> np.ndarray:
    """int_{|x| > radius} K(d(x, z)) dx for |z| = s, from log(K(d) omega sinh^{n-1} d)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty(s.size)
    x, w = np.polynomial.legendre.leggauss(nodes)
    for i, si in enumerate(s):
        lo, hi = radius - si, radius + si
        tail = kernel_tail(space, log_weighted, hi)
        if si == 0:
            out[i] = tail
            continue
        d = lo + 0.5 * (hi - lo) * (x + 1.0)
        c = (math.cosh(si) * np.cosh(d) - math.cosh(radius)) / (math.sinh(si) * np.sinh(d))
        frac = _sphere_fraction_below(space, c)
        out[i] = tail + 0.5 * (hi - lo) * float(np.sum(w * frac * np.exp(log_weighted(d))))
    return out


def _sphere_constant(space) -> float:
    """Area of the unit (n-2)-sphere, the angular weight in geodesic polar coordinates."""
    m = space.n - 1
    return 2.0 * math.pi ** (m / 2) / gamma_fn(m / 2)


# --------------------------------------------------------------------------
# Hardy inequalities and ground states

def _check_sigma(sigma):
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")


def _nonzero(tf, space):
    probe = np.linspace(0.0, tf.radius, 257)
    if not np.any(np.asarray(tf(probe)) != 0):
        raise DegenerateInputError("test function is identically zero")


def hardy_inhomogeneous(space: HyperbolicSpace, f, sigma: float, y: float,
                        constant: float = 1.0, tolerance: float = 0.0) -> InequalityReport:
    """<(-Delta)^sigma F, F> against y^{2s}[int_near |F|^2 (y^2+r^2)^{-2s} + int_far |F|^2 (y^2+r^2)^{-s}].

    The regions are split at r^2 + y^2 = 1. ``constant`` is the calibrated
    lower constant; the report passes when lhs >= constant * rhs.
    """
    _check_sigma(sigma)
    if not y > 0:
        raise ValueError("y must be positive")
    tf = _as_test_function(f, space)
    _nonzero(tf, space)
    lhs = quadratic_form(space, tf, sigma)

    def weighted(r):
        dist2 = r * r + y * y
        w = np.where(dist2 < 1.0, dist2 ** (-2 * sigma), dist2 ** (-sigma))
        v = np.asarray(tf(r), dtype=float)
        return v * v * w

    split = math.sqrt(1.0 - y * y) if y < 1 else 0.0
    rhs = 0.0
    if split > 0:
        rhs += _radial_integral_between(space, weighted, 0.0, split)
    rhs += _radial_integral_between(space, weighted, split, max(tf.radius, 15.0))
    rhs *= y ** (2 * sigma)
    return InequalityReport("hardy_inhomogeneous", lhs, rhs, constant, tolerance, "inequality",
                            {"n": space.n, "sigma": sigma, "y": y, "function": tf.tag, **tf.params})


def _radial_integral_between(space, integrand, a, b, width=0.2):
    if b <= a:
        return 0.0
    pan = _panels(float(b - a), width, 40 if a == 0 else 0)
    r = a + pan.nodes
    return float(np.sum(integrand(r) * volume_density(space, r) * pan.weights))


def _hardy_ratio_weight(space, sigma, y):
    """|P_y^sigma / P_y^{-sigma}| as a function of r."""
    def w(r):
        return np.asarray(poisson_kernel(space, sigma, y, r)) / np.abs(neg_poisson_kernel(space, sigma, y, r))
    return w


def _sharp_constant(sigma, y):
    return 4.0 ** sigma * gamma_fn(sigma) / (y ** (2 * sigma) * abs(gamma_fn(-sigma)))


def ground_state_inhomogeneous(space: HyperbolicSpace, f, sigma: float, y: float,
                               tolerance: float = 1e-6) -> InequalityReport:
    """<(-Delta)^s F, F> >= 4^s Gamma(s)/(y^{2s}|Gamma(-s)|) int |F|^2 |P_y^s/P_y^{-s}| dx.

    The difference is the ground-state error term; it is nonnegative and
    vanishes for F = P_y^{-sigma}.
    """
    _check_sigma(sigma)
    tf = _as_test_function(f, space)
    _nonzero(tf, space)
    lhs = quadratic_form(space, tf, sigma)
    weight = _hardy_ratio_weight(space, sigma, y)

    def integrand(r):
        v = np.asarray(tf(r), dtype=float)
        return v * v * weight(r)

    rhs = _radial_integral(space, integrand, max(tf.radius, 15.0))
    return InequalityReport("ground_state_inhomogeneous", lhs, rhs, _sharp_constant(sigma, y),
                            tolerance, "inequality",
                            {"n": space.n, "sigma": sigma, "y": y, "function": tf.tag, **tf.params})


def hardy_sharp_case(space: HyperbolicSpace, sigma: float, y: float,
                     tolerance: float = 1e-3, radius: float = 40.0) -> InequalityReport:
    """Equality case F = P_y^{-sigma} of the inhomogeneous ground-state inequality.

    lhs comes from the analytic symbol and the Plancherel formula, the
    right side from real-space quadrature of |F| P_y^sigma. The metadata
    also carries lhs recomputed from the numerically transformed kernel.
    """
    _check_sigma(sigma)
    tf = neg_poisson_function(space, sigma, y)
    lhs = quadratic_form(space, tf, sigma)

    def integrand(r):
        return np.abs(np.asarray(neg_poisson_kernel(space, sigma, y, r))) * np.asarray(
            poisson_kernel(space, sigma, y, r))

    rhs = _radial_integral(space, integrand, radius)
    numeric = TestFunction("neg_poisson_numeric", tf.params, tf.func, radius)
    with warnings.catch_warnings():
        # the density tail is algebraic; phi_lambda supplies the decay
        warnings.simplefilter("ignore", TruncationWarning)
        lhs_real_space = quadratic_form(space, numeric, sigma)
    return InequalityReport("hardy_sharp_case", lhs, rhs, _sharp_constant(sigma, y), tolerance,
                            "identity", {"n": space.n, "sigma": sigma, "y": y,
                                         "lhs_from_kernel_transform": lhs_real_space})


def _check_alpha_window(space, sigma, alpha):
    lo, hi = (2 * sigma + space.n) / 4, space.n / 2
    if not lo < alpha < hi:
        raise ValueError(f"alpha must lie in ({lo:g}, {hi:g})")


def hardy_homogeneous(space: HyperbolicSpace, f, sigma: float, alpha: float,
                      tolerance: float = 1e-6, mode: str = "inequality") -> InequalityReport:
    """<(-Delta)^s F, F> against (Gamma(a)/Gamma(a-s)) int |F|^2 P_0^{s-a}/P_0^{-a} dx.

    The ratio of the two negative-order kernels behaves like r^{-2s} near
    the origin and r^{-s} far out; the split weighted integral with those
    weights is stored in the metadata as the Hardy right-hand side.
    """
    _check_sigma(sigma)
    _check_alpha_window(space, sigma, alpha)
    tf = _as_test_function(f, space)
    _nonzero(tf, space)
    lhs = quadratic_form(space, tf, sigma)

    def ratio_weight(r):
        num = riesz_zero_kernel(space, alpha - sigma, r, negative_order=True)
        den = riesz_zero_kernel(space, alpha, r, negative_order=True)
        return np.asarray(num) / np.asarray(den)

    radius = max(tf.radius, 15.0)

    def middle_integrand(r):
        v = np.asarray(tf(np.maximum(r, 1e-300)), dtype=float)
        return v * v * ratio_weight(np.maximum(r, 1e-300))

    middle = _radial_integral(space, middle_integrand, radius)

    def hardy_integrand(r):
        v = np.asarray(tf(np.maximum(r, 1e-300)), dtype=float)
        rr = np.maximum(r, 1e-300)
        return v * v * np.where(rr < 1.0, rr ** (-2 * sigma), rr ** (-sigma))

    hardy_rhs = _radial_integral(space, hardy_integrand, radius)
    constant = gamma_fn(alpha) / gamma_fn(alpha - sigma)
    return InequalityReport("hardy_homogeneous", lhs, middle, constant, tolerance, mode,
                            {"n": space.n, "sigma": sigma, "alpha": alpha, "function": tf.tag,
                             "hardy_rhs": hardy_rhs, "middle_over_hardy_rhs": constant * middle / hardy_rhs,
                             **tf.params})


# --------------------------------------------------------------------------
# integral representations of the fractional Laplacian

def _distance_nodes(upper, graded=24, width=0.25):
    pan = _panels(float(upper), width, graded)
    return pan.nodes, pan.weights


def quadratic_form_identity(space: HyperbolicSpace, f, sigma: float, tolerance: float = 1e-2,
                            radius: float | None = None, psi_nodes: int = 24) -> InequalityReport:
    """<(-Delta)^s f, f> against (1/(2|Gamma(-s)|)) iint |f(z)-f(x)|^2 P_0^s(d(z,x)) dz dx.

    The double integral is symmetric, so it is twice the integral over
    pairs with |z| >= |x|. Around each x the point z is written in
    geodesic polar coordinates (distance d, angle psi to the direction of
    the origin); the diagonal singularity becomes d^{1-2s}, which graded
    Gauss panels integrate. Beyond d = D only |f(x)|^2 survives and the
    kernel tail is added in closed form.
    """
    _check_sigma(sigma)
    tf = _as_test_function(f, space)
    _nonzero(tf, space)
    lhs = quadratic_form(space, tf, sigma)
    support = float(radius or tf.radius)
    big_d = 2.0 * support + 2.0
    log_w = _log_weighted_riesz(space, sigma)
    tail = kernel_tail(space, log_w, big_d)

    r1_pan = _panels(support, 0.25, 0)
    r1, w1 = r1_pan.nodes, r1_pan.weights
    d, wd = _distance_nodes(big_d)
    kernel_w = np.exp(log_w(d)) / space.omega * _sphere_constant(space) * wd
    gx, gw = np.polynomial.legendre.leggauss(psi_nodes)
    f1 = np.asarray(tf(r1), dtype=float)
    inner = np.empty(r1.size)
    for i, (ri, fi) in enumerate(zip(r1, f1)):
        # |z| >= |x|  <=>  cos(psi) <= coth(r1) tanh(d/2)
        with np.errstate(divide="ignore"):
            bound = np.where(ri > 0, np.tanh(0.5 * d) / np.tanh(ri), np.inf)
        psi_lo = np.arccos(np.clip(bound, -1.0, 1.0))
        psi = psi_lo[:, None] + 0.5 * (math.pi - psi_lo)[:, None] * (gx[None, :] + 1.0)
        jac = 0.5 * (math.pi - psi_lo)[:, None] * gw[None, :]
        r2 = distance_polar(ri, d[:, None], psi)
        diff = np.asarray(tf(r2), dtype=float) - fi
        ang = np.sum(diff * diff * np.sin(psi) ** (space.n - 2) * jac, axis=1)
        inner[i] = float(np.sum(ang * kernel_w)) + fi * fi * tail
    total = 2.0 * float(np.sum(inner * volume_density(space, r1) * w1))
    rhs = total / (2.0 * abs(gamma_fn(-sigma)))
    return InequalityReport("quadratic_form_identity", lhs, rhs, 1.0, tolerance, "identity",
                            {"n": space.n, "sigma": sigma, "function": tf.tag, "cutoff_D": big_d,
                             **tf.params})


def pointwise_integral_rep(space: HyperbolicSpace, f, sigma: float, r_probe: float,
                           tolerance: float = 2e-2, psi_panels: int = 16,
                           reference: float | None = None) -> InequalityReport:
    """(1/|Gamma(-s)|) int (f(x) - f(z)) P_0^s(d(x,z)) dz at |x| = r_probe, against (-Delta)^s f.

    Only sigma < 1/2 is accepted, where the integral converges absolutely.
    The spectral value is computed unless ``reference`` is given.
    """
    if not 0 < sigma < 0.5:
        raise ValueError("the pointwise representation needs 0 < sigma < 1/2")
    tf = _as_test_function(f, space)
    _nonzero(tf, space)
    big_d = r_probe + tf.radius + 2.0
    log_w = _log_weighted_riesz(space, sigma)
    tail = kernel_tail(space, log_w, big_d)
    d, wd = _distance_nodes(big_d)
    kernel_w = np.exp(log_w(d)) / space.omega * _sphere_constant(space) * wd
    # composite Gauss rule in psi resolves the narrow window where z passes the origin
    edges = np.linspace(0.0, math.pi, psi_panels + 1)
    gx, gw = np.polynomial.legendre.leggauss(16)
    psi = (edges[:-1, None] + 0.5 * np.diff(edges)[:, None] * (gx[None, :] + 1.0)).ravel()
    wpsi = (0.5 * np.diff(edges)[:, None] * gw[None, :]).ravel()
    fx = float(np.asarray(tf(np.array([r_probe])))[0])
    r2 = distance_polar(r_probe, d[:, None], psi[None, :])
    diff = fx - np.asarray(tf(r2), dtype=float)
    ang = np.sum(diff * np.sin(psi)[None, :] ** (space.n - 2) * wpsi[None, :], axis=1)
    value = (float(np.sum(ang * kernel_w)) + fx * tail) / abs(gamma_fn(-sigma))
    if reference is None:
        from .transform import fractional_laplacian
        grid = tf.grid_function(space)
        reference = float(fractional_laplacian(grid, sigma, np.array([0.0, r_probe]),
                                               radius=tf.radius).values[1])
    return InequalityReport("pointwise_integral_rep", value, reference, 1.0, tolerance, "identity",
                            {"n": space.n, "sigma": sigma, "r_probe": r_probe, "function": tf.tag,
                             **tf.params})


# --------------------------------------------------------------------------
# the Poisson operator

def _unit_profile(sigma):
    c = 2.0 ** (1.0 - sigma) / gamma_fn(sigma)

    def s1(y):
        y = np.asarray(y, dtype=float)
        safe = np.where(y > 0, y, 1.0)
        with np.errstate(under="ignore"):
            out = c * safe ** sigma * np.asarray(bessel_k(sigma, safe))
        return np.where(y > 0, out, 1.0)
    return s1


def isometry_integral(sigma: float, tau_max: float = 60.0) -> float:
    """int_R (1 + tau^2)^{sigma+1/2} |W(tau)|^2 dtau for the unit y-profile.

    W is the unitary cosine transform of S_1(y) = (2^{1-s}/Gamma(s)) y^s K_s(y),
    the extension of a single spectral mode at spectral radius 1. W is
    computed by double-exponential quadrature for tau <= 1 and by the
    Ooura-Mori rule beyond; past tau_max its two-term asymptotic
    expansion (from the y^{2s} and y^{2s+2} terms of S_1) is integrated
    exactly.
    """
    _check_sigma(sigma)
    s1 = _unit_profile(sigma)
    norm = math.sqrt(2.0 / math.pi)
    cfg = QuadratureConfig(abs_tol=1e-14, rel_tol=1e-12, max_subdivisions=10,
                           transform_hint="half_line_exponential")

    def w_of_tau(tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        out = np.empty(tau.size)
        for i, t in enumerate(tau):
            if t <= 1.0:
                out[i] = integrate(lambda y, t=t: s1(y) * np.cos(t * y), (0.0, math.inf), cfg,
                                   vectorized=True).value
            else:
                out[i] = fourier_integral(s1, float(t), "cos").value
        return norm * out

    def integrand(tau):
        w = w_of_tau(tau)
        return (1.0 + tau * tau) ** (sigma + 0.5) * w * w

    inner_cfg = QuadratureConfig(abs_tol=1e-12, rel_tol=1e-9, max_subdivisions=8)
    head = integrate(integrand, (0.0, 1.0), inner_cfg, vectorized=True).value
    body = integrate(integrand, (1.0, tau_max), inner_cfg, vectorized=True).value
    a = 2.0 ** (-2 * sigma) * gamma_fn(1 - sigma) / gamma_fn(1 + sigma)
    amp = norm * a * gamma_fn(1 + 2 * sigma) * math.sin(math.pi * sigma)
    tail = amp * amp * (tau_max ** (-2 * sigma) / (2 * sigma)
                        - (sigma + 0.5) * tau_max ** (-2 * sigma - 2) / (2 * sigma + 2))
    return 2.0 * (head + body + tail)


def isometry_constant(space: HyperbolicSpace, f, sigma: float, tolerance: float = 1e-3,
                      tau_max: float = 60.0) -> InequalityReport:
    """||T_s f||^2 in H^{s+1/2}(X x R) over ||f||^2 in H^s(X), against 2 sqrt(pi) Gamma(s+1/2)/Gamma(s).

    The extension u^(lambda, y) = f^(lambda) S_1(y s_lambda) is evenly
    extended in y and Fourier transformed with the unitary convention.
    Substituting tau = s_lambda u in the tau-integral gives, for each
    lambda, |f^|^2 s^{2 sigma} times the same one-dimensional integral, so
    the norm is the H^sigma form of f times isometry_integral(sigma).
    """
    _check_sigma(sigma)
    tf = _as_test_function(f, space)
    _nonzero(tf, space)
    h_sigma = quadratic_form(space, tf, sigma)
    lhs = h_sigma * isometry_integral(sigma, tau_max)
    target = 2.0 * math.sqrt(math.pi) * gamma_fn(sigma + 0.5) / gamma_fn(sigma)
    return InequalityReport("isometry_constant", lhs / h_sigma, 1.0, target, tolerance, "identity",
                            {"n": space.n, "sigma": sigma, "function": tf.tag, "norm_ratio": lhs / h_sigma,
                             "extension_norm_sq": lhs, "h_sigma_norm_sq": h_sigma})


@dataclass
class LqClassification:
    q: float
    classification: str  # finite, divergent or inconclusive
    local_exponent: float
    exponents: list
    value: float | None
    metadata: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return self.classification == "finite"


def _poisson_lq_slice(space, sigma, y, q):
    """int |P_y^sigma|^q dx, in log space on H^3."""
    cfg = QuadratureConfig(abs_tol=1e-300, rel_tol=1e-10, max_subdivisions=10,
                           transform_hint="half_line_power_exponential")
    if space.n == 3:
        const = 2 * sigma * math.log(y) - sigma * math.log(4.0) - math.lgamma(sigma)

        def integrand(r):
            from .kernels import log_subordinated_h3
            with np.errstate(divide="ignore"):
                logp = const + log_subordinated_h3(r, y * y, -sigma)
                return np.exp(q * logp + log_volume_density(space, r))
    else:
        def integrand(r):
            p = np.asarray(poisson_kernel(space, sigma, y, r))
            return p ** q * volume_density(space, r)
    return integrate(integrand, (0.0, math.inf), cfg, vectorized=True, scale=y).value


def poisson_lq_norm(space: HyperbolicSpace, sigma: float, q: float,
                    y_small=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6), margin: float = 0.05) -> LqClassification:
    """Decide whether P_y^sigma lies in L^q(X x R_+) from the y -> 0 growth.

    g(y) = int |P_y|^q dx behaves like y^e as y -> 0; the y-integral
    converges at 0 iff e > -1. e is fitted from successive small y; a
    spread in the fitted exponents above ``margin`` is inconclusive, and
    |e + 1| <= margin counts as divergent (logarithmic growth). For finite
    cases the value int_0^inf g dy is returned, with the y < min(y_small)
    piece integrated from the fitted power.
    """
    _check_sigma(sigma)
    if not q > 1:
        raise ValueError("q must exceed 1")
    ys = np.asarray(y_small, dtype=float)
    g = np.array([_poisson_lq_slice(space, sigma, float(y), q) for y in ys])
    slopes = np.diff(np.log(g)) / np.diff(np.log(ys))
    e = float(slopes[-1])
    spread = float(np.max(np.abs(slopes[-3:] - e)))
    if spread > margin:
        label = "inconclusive"
    elif e <= -1.0 + margin:
        label = "divergent"
    else:
        label = "finite"
    value = None
    if label == "finite":
        y0 = float(ys.min())
        cfg = QuadratureConfig(abs_tol=1e-12, rel_tol=1e-8, max_subdivisions=8,
                               transform_hint="half_line_power_exponential")
        upper = integrate(lambda y: np.array([_poisson_lq_slice(space, sigma, float(v), q) for v in y]),
                          (y0, math.inf), cfg, vectorized=True, scale=1.0).value
        value = upper + g[-1] * y0 / (1.0 + e)
    return LqClassification(q, label, e, slopes.tolist(), value,
                            {"n": space.n, "sigma": sigma, "critical_q": (space.n + 1) / space.n})


def bgr_local_norm(space: HyperbolicSpace, sigma: float, p: float,
                   eps=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6), margin: float = 0.05) -> LqClassification:
    """Whether the r < 1 part of the Bessel-Green-Riesz kernel lies in L^{p/2}.

    The integrand |k|^{p/2} density ~ r^{e} near 0; the piece is finite iff e > -1.
    """
    q = p / 2.0
    eps = np.asarray(eps, dtype=float)
    vals = np.abs(np.asarray(bgr_kernel(space, sigma, eps))) ** q * volume_density(space, eps)
    slopes = np.diff(np.log(vals)) / np.diff(np.log(eps))
    e = float(slopes[-1])
    spread = float(np.max(np.abs(slopes[-3:] - e)))
    label = "inconclusive" if spread > margin else ("finite" if e > -1.0 + margin else "divergent")
    value = None
    if label == "finite":
        value = _radial_integral(space, lambda r: np.abs(np.asarray(bgr_kernel(space, sigma, np.maximum(r, 1e-300)))) ** q, 1.0)
    return LqClassification(q, label, e, slopes.tolist(), value,
                            {"n": space.n, "sigma": sigma, "p": p,
                             "critical_p": 2 * space.n / (space.n - sigma)})


def contraction_check(space: HyperbolicSpace, f, sigma: float, y: float, p: float,
                      tolerance: float = 1e-6, radius: float = 15.0) -> InequalityReport:
    """||f * P_y^sigma||_p <= ||f||_p with the convolution taken spectrally.

    For p = 1 the mass of u outside the ball of radius R is added through
    the exterior weight of the Poisson kernel. p = inf uses the grid
    maximum refined around the maximiser.
    """
    _check_sigma(sigma)
    tf = _as_test_function(f, space)
    _nonzero(tf, space)
    step = 0.01
    grid = np.round(np.arange(0.0, radius + 0.5 * step, step), 12)
    f_grid = tf.grid_function(space, step)
    u = extension_solve(f_grid, sigma, [y], r_grid=grid)[0].profile
    meta = {"n": space.n, "sigma": sigma, "y": y, "p": p, "function": tf.tag, **tf.params}
    if p == math.inf:
        nu, nf = _sup_norm(u), _sup_norm(f_grid)
    else:
        nf = _radial_integral(space, lambda r: np.abs(np.asarray(tf(r))) ** p, max(tf.radius, radius)) ** (1 / p)
        inside = _radial_integral(space, lambda r: np.abs(np.asarray(u(r))) ** p, radius)
        if p == 1:
            const = 2 * sigma * math.log(y) - sigma * math.log(4.0) - math.lgamma(sigma)
            if space.n == 3:
                def log_w(d):
                    return const + log_weighted_subordinated_h3(d, y * y, -sigma)
            else:
                def log_w(d):
                    with np.errstate(divide="ignore"):
                        return np.log(np.asarray(poisson_kernel(space, sigma, y, d))) + np.log(volume_density(space, d))
            s_pan = _panels(min(tf.radius, radius - 1.0), 0.25, 0)
            ext = exterior_weight(space, log_w, s_pan.nodes, radius)
            fz = np.asarray(tf(s_pan.nodes), dtype=float)
            outside = float(np.sum(np.abs(fz) * ext * volume_density(space, s_pan.nodes) * s_pan.weights))
            meta["outside_mass"] = outside
            inside += outside
        nu = inside ** (1 / p)
    return InequalityReport("contraction", nu, nf, 1.0, tolerance, "upper", meta)


def _sup_norm(g: RadialGridFunction) -> float:
    vals = np.abs(g(g.grid))
    k = int(np.argmax(vals))
    lo = g.grid[max(k - 1, 0)]
    hi = g.grid[min(k + 1, g.grid.size - 1)]
    fine = np.linspace(lo, hi, 201)
    return float(max(vals[k], np.max(np.abs(g(fine)))))


def poincare_sobolev_scan(space: HyperbolicSpace, sigma: float, p: float,
                          family: TestFunctionFamily | Sequence[TestFunction],
                          floor: float = 1e-6) -> InequalityReport:
    """min over the family of ||(-Delta - rho^2)^{s/4} u||_2^2 / ||u||_p^2.

    Requires n >= 3, 0 < sigma < min(3, n) and 2 < p <= 2n/(n - sigma).
    The report holds the minimum as lhs and passes when it stays above
    ``floor``; pass a calibrated constant as ``floor`` to test it.
    """
    n = space.n
    if n < 3:
        raise ValueError("the scan needs n >= 3")
    if not 0 < sigma < min(3, n):
        raise ValueError("sigma must lie in (0, min(3, n))")
    if not 2 < p <= 2 * n / (n - sigma) + 1e-12:
        raise ValueError(f"p must lie in (2, {2 * n / (n - sigma):g}]")
    members = family.members() if isinstance(family, TestFunctionFamily) else list(family)
    if not members:
        raise DegenerateInputError("empty family")
    ratios = []
    for tf in members:
        _nonzero(tf, space)
        num = quadratic_form(space, tf, sigma / 2.0, shifted=True)
        den = _radial_integral(space, lambda r, tf=tf: np.abs(np.asarray(tf(np.maximum(r, 1e-300)))) ** p,
                               tf.radius) ** (2.0 / p)
        ratios.append(num / den)
    ratios = np.array(ratios)
    k = int(np.argmin(ratios))
    return InequalityReport("poincare_sobolev", float(ratios[k]), 1.0, floor, 0.0, "inequality",
                            {"n": n, "sigma": sigma, "p": p, "ratios": ratios.tolist(),
                             "argmin_tag": members[k].tag, "argmin_params": members[k].params})
