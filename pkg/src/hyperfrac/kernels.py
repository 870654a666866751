"""Kernels obtained from the heat kernel by subordination.

Every kernel here has the form c * S(r) with

    S(r) = int_0^inf h_t(r) exp(-y^2/4t) t^{p-1} dt,

for a power p and (for the Bessel-Green-Riesz kernel) the shifted heat
kernel e^{rho^2 t} h_t. On H^3 the heat kernel is elementary and S has a
closed form in terms of K_nu; those closed forms serve as oracles for the
quadrature path used in every dimension.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .geometry import HyperbolicSpace, log_volume_density, phi_zero
from .heat import heat_kernel, log_heat_kernel
from .reports import EstimateReport
from .specfun import QuadratureConfig, bessel_k, bessel_k_scaled, gamma_fn, integrate

__all__ = [
    "KernelSpec",
    "FAMILIES",
    "poisson_kernel",
    "poisson_symbol",
    "neg_poisson_kernel",
    "neg_poisson_symbol",
    "riesz_zero_kernel",
    "riesz_zero_symbol",
    "bgr_kernel",
    "log_subordinated_h3",
    "log_weighted_subordinated_h3",
    "log_poisson_kernel_h3",
    "closed_form_normalization",
    "kernel_mass",
    "kernel_envelope",
    "validate_kernel_estimate",
    "multiplier_identity_ratio",
    "scalar_subordination_sides",
    "kernel_table",
    "write_kernel_table",
]

FAMILIES = ("heat", "poisson", "neg_poisson", "riesz_zero", "bgr")

_SUB_CFG = QuadratureConfig(abs_tol=0.0 + 1e-300, rel_tol=1e-12, max_subdivisions=10,
                            transform_hint="half_line_power_exponential")


class DivergenceError(ValueError):
    """The subordination integral diverges at the requested point."""


# --------------------------------------------------------------------------
# the subordination integral

def _saddle_scale(space, a):
    # t at which rho^2 t + a/4t is smallest, blended with a/4 for small a
    rho = space.rho
    return np.where(a > 0, a / (4.0 + 2.0 * rho * np.sqrt(a)), 1.0)


def _subordinate(space, r, y2, power, shift=False, cfg=None):
    """int_0^inf h_t(r) e^{-y2/4t} t^{power-1} dt by double-exponential quadrature.

    Substituting t = c*tau with c near the saddle puts every point on the
    same tau scale so all radii are integrated together. The integrand is
    formed from log h_t, which keeps far radii away from underflow.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    y2 = np.broadcast_to(np.asarray(y2, dtype=float), r.shape)
    a = r * r + y2
    c = _saddle_scale(space, a)
    # log integrand at tau = 1 as an overall scale
    log_ref = log_heat_kernel(space, c, r, shift=shift) - y2 / (4.0 * c)
    log_ref = np.where(np.isfinite(log_ref), log_ref, 0.0)

    def integrand(tau):
        t = tau[:, None] * c[None, :]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            log_val = (log_heat_kernel(space, t, r[None, :], shift=shift)
                       - y2[None, :] / (4.0 * t) + (power - 1.0) * np.log(tau[:, None])
                       - log_ref[None, :])
            val = np.exp(log_val)
        return np.where(np.isfinite(val), val, 0.0)

    res = integrate(integrand, (0.0, math.inf), cfg or _SUB_CFG, vectorized=True)
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(log_ref + power * np.log(c)) * np.atleast_1d(res.value)


def log_subordinated_h3(r, y2, power, shift=False):
    """log of the subordination integral on H^3, in closed form.

    With h_t = (4 pi t)^{-3/2}(r/sinh r)e^{-t-r^2/4t} and a = r^2 + y^2,
    int t^{nu-1} e^{-a/4t - t} dt = 2 (sqrt(a)/2)^nu K_nu(sqrt(a)), nu = power - 3/2.
    The shifted kernel drops e^{-t}: int t^{nu-1}e^{-a/4t} dt = Gamma(-nu)(a/4)^nu.
    """
    r = np.asarray(r, dtype=float)
    a = r * r + np.asarray(y2, dtype=float)
    nu = power - 1.5
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_ratio = np.where(r == 0, 0.0, np.log(r) - _log_sinh_safe(r))
        if shift:
            if nu >= 0:
                raise DivergenceError("shifted integral diverges at large t")
            log_int = math.lgamma(-nu) + nu * np.log(a / 4.0)
        else:
            root = np.sqrt(a)
            ks = np.asarray(bessel_k_scaled(abs(nu), np.where(root > 0, root, 1.0)))
            log_int = math.log(2.0) + nu * np.log(0.5 * root) + np.log(ks) - root
    return -1.5 * math.log(4.0 * math.pi) + log_ratio + log_int


def log_weighted_subordinated_h3(r, y2, power):
    """log of S(r) * omega sinh^2 r on H^3, free of the cancellation between
    the e^{-2r} decay of S and the e^{2r} growth of the volume density."""
    r = np.asarray(r, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    nu = power - 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        root = np.hypot(r, np.sqrt(y2))
        ks = np.asarray(bessel_k_scaled(abs(nu), np.where(root > 0, root, 1.0)))
        # log sinh r - sqrt(r^2 + y^2), with r - root = -y^2/(r + root)
        log_sinh_minus_root = np.where(
            r > 20,
            -y2 / (r + root) - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.maximum(r, 20.0))),
            _log_sinh_safe(r) - root)
        out = (-1.5 * math.log(4.0 * math.pi) + math.log(4.0 * math.pi)
               + math.log(2.0) + np.log(r) + log_sinh_minus_root
               + nu * np.log(0.5 * root) + np.log(ks))
    return np.where(r > 0, out, -np.inf)


def _log_sinh_safe(r):
    r = np.asarray(r, dtype=float)
    big = r > 20
    small = np.where(big, 1.0, r)
    return np.where(big, r - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.where(big, r, 21.0))),
                    np.log(np.sinh(small)))


def _shape(value, like):
    out = np.asarray(value).reshape(np.shape(like))
    return float(out) if out.ndim == 0 else out


def _check_sigma_y(sigma, y):
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    if not y > 0:
        raise ValueError("y must be positive")


def _evaluate_subordinated(space, r, y2, power, shift, method, log_const):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("r must be nonnegative")
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" and space.n != 3:
        raise ValueError("closed forms are available for n = 3 only")
    if method == "closed" or (method == "auto" and space.n == 3):
        with np.errstate(under="ignore"):
            out = np.exp(log_const + log_subordinated_h3(r_arr, y2, power, shift))
        return _shape(out, r_arr)
    flat = r_arr.ravel()
    out = math.exp(log_const) * _subordinate(space, flat, y2, power, shift)
    return _shape(out, r_arr)


# --------------------------------------------------------------------------
# Poisson kernels

def _poisson_log_const(sigma, y):
    return 2.0 * sigma * math.log(y) - sigma * math.log(4.0) - math.lgamma(sigma)


def poisson_kernel(space: HyperbolicSpace, sigma: float, y: float, r, method: str = "auto"):
    """P_y^sigma(r) = y^{2 sigma}/(4^sigma Gamma(sigma)) int h_t e^{-y^2/4t} t^{-1-sigma} dt.

    ``method`` selects the H^3 closed form ("closed"), the subordination
    quadrature ("quadrature") or the closed form when available ("auto").
    """
    _check_sigma_y(sigma, y)
    return _evaluate_subordinated(space, r, y * y, -sigma, False, method,
                                  _poisson_log_const(sigma, y))


def log_poisson_kernel_h3(sigma: float, y: float, r):
    """log P_y^sigma(r) on H^3; finite for every r."""
    _check_sigma_y(sigma, y)
    return _poisson_log_const(sigma, y) + log_subordinated_h3(r, y * y, -sigma)


def _bessel_symbol(order, z):
    # (2^{1-v}/Gamma(v)) z^v K_v(z), continuous at z = 0 where it equals 1
    z = np.asarray(z, dtype=float)
    safe = np.where(z > 0, z, 1.0)
    with np.errstate(under="ignore"):
        val = (2.0 ** (1.0 - order) / gamma_fn(order)) * safe ** order * np.asarray(bessel_k(order, safe))
    return np.where(z > 0, val, 1.0)


def _spectral_radius(space, lam):
    lam = np.asarray(lam, dtype=float)
    return np.sqrt(lam * lam + space.rho ** 2)


def poisson_symbol(space: HyperbolicSpace, sigma: float, y: float, lam):
    """(2^{1-sigma}/Gamma(sigma)) (y s)^sigma K_sigma(y s) with s = sqrt(lambda^2 + rho^2)."""
    _check_sigma_y(sigma, y)
    out = _bessel_symbol(sigma, y * _spectral_radius(space, lam))
    return float(out) if out.ndim == 0 else out


def _neg_poisson_log_const(sigma, y):
    # log |y^{-2 sigma} 4^sigma / Gamma(-sigma)|; Gamma(-sigma) < 0 on (0, 1)
    return -2.0 * sigma * math.log(y) + sigma * math.log(4.0) - math.log(abs(gamma_fn(-sigma)))


def neg_poisson_kernel(space: HyperbolicSpace, sigma: float, y: float, r, method: str = "auto"):
    """P_y^{-sigma}(r) = y^{-2 sigma} 4^sigma/Gamma(-sigma) int h_t e^{-y^2/4t} t^{sigma-1} dt.

    Nonpositive; the sign of Gamma(-sigma) is applied last.
    """
    _check_sigma_y(sigma, y)
    out = _evaluate_subordinated(space, r, y * y, sigma, False, method,
                                 _neg_poisson_log_const(sigma, y))
    return -out


def neg_poisson_symbol(space: HyperbolicSpace, sigma: float, y: float, lam):
    """(2^{1+sigma}/Gamma(-sigma)) (y s)^{-sigma} K_sigma(y s); negative."""
    _check_sigma_y(sigma, y)
    z = y * _spectral_radius(space, lam)
    out = (2.0 ** (1.0 + sigma) / gamma_fn(-sigma)) * z ** (-sigma) * np.asarray(bessel_k(sigma, z))
    return float(out) if np.ndim(out) == 0 else out


def multiplier_identity_ratio(space: HyperbolicSpace, sigma: float, y: float, lam):
    """(lambda^2+rho^2)^sigma * neg symbol over the scaled positive symbol; identically 1."""
    s2 = np.asarray(lam, dtype=float) ** 2 + space.rho ** 2
    lhs = s2 ** sigma * neg_poisson_symbol(space, sigma, y, lam)
    factor = 4.0 ** sigma * gamma_fn(sigma) / (y ** (2 * sigma) * gamma_fn(-sigma))
    return lhs / (factor * poisson_symbol(space, sigma, y, lam))


def scalar_subordination_sides(lam: float, sigma: float, y: float,
                               cfg: QuadratureConfig | None = None):
    """Both sides of lam^s int e^{-t lam} t^{s-1} e^{-y^2/4t} dt = (y^{2s}/4^s) int e^{-t lam} t^{-s-1} e^{-y^2/4t} dt."""
    cfg = cfg or QuadratureConfig(abs_tol=1e-300, rel_tol=1e-13, max_subdivisions=10,
                                  transform_hint="half_line_power_exponential")
    scale = y / (2.0 * math.sqrt(lam))

    def weight(power):
        return lambda t: np.exp(-t * lam - y * y / (4.0 * t) + (power - 1.0) * np.log(t))

    left = lam ** sigma * integrate(weight(sigma), (0.0, math.inf), cfg, vectorized=True,
                                    scale=scale).value
    right = (y ** (2 * sigma) / 4.0 ** sigma) * integrate(weight(-sigma), (0.0, math.inf), cfg,
                                                          vectorized=True, scale=scale).value
    return left, right


# --------------------------------------------------------------------------
# Riesz kernels at y = 0 and the Bessel-Green-Riesz kernel

def riesz_zero_kernel(space: HyperbolicSpace, alpha: float, r, negative_order: bool = False,
                      method: str = "auto"):
    """int h_t(r) t^{-1-alpha} dt, or int h_t(r) t^{alpha-1} dt with ``negative_order``.

    The positive-order kernel is singular at r = 0; so is the negative-order
    kernel unless alpha > n/2.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr == 0) and (not negative_order or alpha <= space.n / 2):
        raise DivergenceError("kernel is infinite at r = 0")
    power = alpha if negative_order else -alpha
    return _evaluate_subordinated(space, r_arr, 0.0, power, False, method, 0.0)


def riesz_zero_symbol(space: HyperbolicSpace, alpha: float, lam):
    """Gamma(alpha)(lambda^2 + rho^2)^{-alpha}, the symbol of the negative-order kernel."""
    s2 = np.asarray(lam, dtype=float) ** 2 + space.rho ** 2
    out = gamma_fn(alpha) * s2 ** (-alpha)
    return float(out) if np.ndim(out) == 0 else out


def bgr_kernel(space: HyperbolicSpace, sigma: float, r, method: str = "auto"):
    """Kernel of (-Delta - rho^2)^{-sigma/2}: (1/Gamma(sigma/2)) int e^{rho^2 t} h_t t^{sigma/2-1} dt."""
    if not 0 < sigma < min(3, space.n):
        raise ValueError("sigma must lie in (0, min(3, n))")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DivergenceError("kernel is infinite at r = 0")
    return _evaluate_subordinated(space, r_arr, 0.0, 0.5 * sigma, True, method,
                                  -math.lgamma(0.5 * sigma))


def closed_form_normalization(closed, quadrature, r_ref: float) -> float:
    """Constant C with C*closed(r_ref) = quadrature(r_ref)."""
    return float(quadrature(r_ref) / closed(r_ref))


# --------------------------------------------------------------------------
# specs, envelopes, validation

@dataclass(frozen=True)
class KernelSpec:
    """One kernel family on a given space with its parameters."""

    family: str
    space: HyperbolicSpace
    sigma: float | None = None
    y: float | None = None
    t: float | None = None
    alpha: float | None = None
    negative_order: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.family == "heat":
            if self.t is None or not self.t > 0:
                raise ValueError("heat kernel needs t > 0")
        elif self.family in ("poisson", "neg_poisson"):
            if self.sigma is None or self.y is None:
                raise ValueError("Poisson kernels need sigma and y")
            _check_sigma_y(self.sigma, self.y)
        elif self.family == "riesz_zero":
            if self.alpha is None or not self.alpha > 0:
                raise ValueError("riesz_zero needs alpha > 0")
        elif self.family == "bgr":
            if self.sigma is None or not 0 < self.sigma < min(3, self.space.n):
                raise ValueError("bgr needs 0 < sigma < min(3, n)")

    @property
    def order(self) -> float:
        """Signed subordination order: sigma, -sigma, alpha or -alpha."""
        if self.family == "poisson":
            return self.sigma
        if self.family == "neg_poisson":
            return -self.sigma
        if self.family == "riesz_zero":
            return -self.alpha if self.negative_order else self.alpha
        if self.family == "bgr":
            return self.sigma
        return 0.0

    @property
    def y_value(self) -> float:
        return self.y if self.family in ("poisson", "neg_poisson") else 0.0

    def evaluate(self, r, method: str = "auto"):
        sp = self.space
        if self.family == "heat":
            return heat_kernel(sp, self.t, r)
        if self.family == "poisson":
            return poisson_kernel(sp, self.sigma, self.y, r, method)
        if self.family == "neg_poisson":
            return neg_poisson_kernel(sp, self.sigma, self.y, r, method)
        if self.family == "riesz_zero":
            return riesz_zero_kernel(sp, self.alpha, r, self.negative_order, method)
        return bgr_kernel(sp, self.sigma, r, method)

    def symbol(self, lam):
        sp = self.space
        if self.family == "heat":
            return np.exp(-self.t * (np.asarray(lam, dtype=float) ** 2 + sp.rho ** 2))
        if self.family == "poisson":
            return poisson_symbol(sp, self.sigma, self.y, lam)
        if self.family == "neg_poisson":
            return neg_poisson_symbol(sp, self.sigma, self.y, lam)
        if self.family == "riesz_zero" and self.negative_order:
            return riesz_zero_symbol(sp, self.alpha, lam)
        raise ValueError(f"no bounded symbol for {self.family}")

    def label(self) -> str:
        parts = [f"{k}={getattr(self, k)}" for k in ("sigma", "y", "t", "alpha")
                 if getattr(self, k) is not None]
        if self.negative_order:
            parts.append("negative_order=True")
        return ";".join(parts)


def kernel_envelope(spec: KernelSpec, r, regime: str, exponent: float | None = None):
    """Two-sided size of |kernel| in the near (r^2+y^2 < 1) or far regime.

    Near: y^{2s} R^{-n-2s} for the Poisson families, R^{-n-2s} at y = 0 and
    r^{sigma-n} for the Bessel-Green-Riesz kernel. Far: y^{2s} 4^{-s}
    R^{-2-s} phi_0(r) e^{-rho R}/|Gamma(s)| (the y = 0 kernels drop the y,
    4 and Gamma factors), and r^{sigma-3} phi_0(r) for Bessel-Green-Riesz.
    ``exponent`` replaces the power of R, for negative controls.
    """
    if regime not in ("near", "far"):
        raise ValueError("regime must be 'near' or 'far'")
    sp = spec.space
    r = np.asarray(r, dtype=float)
    s = spec.order
    y = spec.y_value
    big_r = np.sqrt(r * r + y * y)
    if spec.family == "bgr":
        if regime == "near":
            power = s - sp.n if exponent is None else exponent
            return big_r ** power
        power = s - 3.0 if exponent is None else exponent
        return big_r ** power * np.asarray(phi_zero(sp, r))
    if spec.family == "heat":
        raise ValueError("heat bounds are validated by the heat module")
    if regime == "near":
        power = -sp.n - 2.0 * s if exponent is None else exponent
        base = big_r ** power
    else:
        power = -2.0 - s if exponent is None else exponent
        base = big_r ** power * np.asarray(phi_zero(sp, r)) * np.exp(-sp.rho * big_r)
    if spec.family in ("poisson", "neg_poisson"):
        base = base * y ** (2.0 * s)
        if regime == "far":
            base = base * 4.0 ** (-s) / abs(gamma_fn(s))
    return base


def validate_kernel_estimate(spec: KernelSpec, r_grid, regime: str, spread_bound: float = 10.0,
                             exponent: float | None = None, method: str = "auto") -> EstimateReport:
    """Ratio |kernel|/envelope over the grid points belonging to ``regime``.

    Points with r^2 + y^2 = 1 count as far. Points outside the regime are
    dropped; an empty selection raises.
    """
    r = np.atleast_1d(np.asarray(r_grid, dtype=float))
    y = spec.y_value
    dist2 = r * r + y * y
    keep = dist2 < 1.0 if regime == "near" else dist2 >= 1.0
    r = r[keep]
    if r.size == 0:
        raise ValueError(f"no grid points in the {regime} regime")
    values = np.abs(np.atleast_1d(spec.evaluate(r, method)))
    ratios = values / kernel_envelope(spec, r, regime, exponent)
    return EstimateReport(
        name=f"{spec.family}_{regime}",
        grid={"r": [float(r.min()), float(r.max()), int(r.size)], "y": y},
        ratio_min=float(ratios.min()), ratio_max=float(ratios.max()),
        regime=regime, spread_bound=spread_bound, n_points=int(r.size),
        metadata={"n": spec.space.n, "params": spec.label(),
                  "exponent_override": exponent},
    )


# --------------------------------------------------------------------------
# total mass

def kernel_mass(space: HyperbolicSpace, sigma: float, y: float, split: float = 10.0,
                r_max: float | None = None) -> float:
    """int_0^inf P_y^sigma(r) volume_density(r) dr.

    The density-weighted kernel decays like r^{-1-sigma}, so the tail is
    integrated in v = log(r/split). On H^3 the log-safe closed form reaches
    any radius; elsewhere the tail stops at ``r_max`` (default 250), beyond
    which the even-n heat kernel is not resolved.
    """
    _check_sigma_y(sigma, y)
    cfg = QuadratureConfig(abs_tol=1e-15, rel_tol=1e-12, max_subdivisions=10)
    if space.n == 3:
        log_const = _poisson_log_const(sigma, y)

        def log_weighted(r):
            return log_const + log_weighted_subordinated_h3(r, y * y, -sigma)
        v_max = 700.0
    else:
        def log_weighted(r):
            with np.errstate(divide="ignore"):
                return (np.log(poisson_kernel(space, sigma, y, r, "quadrature"))
                        + log_volume_density(space, r))
        v_max = math.log((r_max or 250.0) / split)

    def near(r):
        return np.where(r > 0, np.exp(log_weighted(np.maximum(r, 1e-300))), 0.0)

    def tail(v):
        return np.exp(log_weighted(split * np.exp(v)) + v + math.log(split))

    inner = integrate(near, (0.0, split), cfg, vectorized=True).value
    outer = integrate(tail, (0.0, v_max), cfg, vectorized=True).value
    return inner + outer


# --------------------------------------------------------------------------
# tables

TABLE_COLUMNS = ("family", "n", "params", "r", "value", "method")


def kernel_table(spec: KernelSpec, r_grid, method: str = "auto"):
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    values = np.atleast_1d(spec.evaluate(r_grid, method))
    if spec.family == "heat":
        tag = "closed_form_odd" if spec.space.n % 2 else "abel_even"
    else:
        tag = "closed" if method == "closed" or (method == "auto" and spec.space.n == 3) else "quadrature"
    return [(spec.family, spec.space.n, spec.label(), float(r), float(v), tag)
            for r, v in zip(r_grid, values)]


def write_kernel_table(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
