"""Heat kernels on real hyperbolic space and validators for their bounds.

Odd n uses (-(1/sinh r) d/dr)^k e^{-r^2/4t} applied symbolically. Written
in u = cosh r the operator is -d/du, and everything reduces to derivatives
of F(u) = arccosh(u)/sqrt(u^2-1) = r/sinh r. Even n uses the Abel integral
over the same building blocks.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .geometry import HyperbolicSpace, log_sinh, volume_density
from .reports import EstimateReport
from .specfun import QuadratureConfig, integrate

__all__ = [
    "HeatKernelEval",
    "heat_kernel",
    "heat_kernel_complex",
    "log_heat_kernel",
    "heat_mass",
    "heat_kernel_h5_closed",
    "local_expansion_ratio",
    "heat_envelope",
    "validate_heat_bounds",
    "fit_global_upper_bound",
    "heat_table",
    "write_kernel_table",
    "TABLE_COLUMNS",
]

METHODS = ("closed_form_odd", "abel_even", "complex_formula")


@dataclass(frozen=True)
class HeatKernelEval:
    space: HyperbolicSpace
    t: float
    method: str = ""

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        method = self.method or ("closed_form_odd" if self.space.n % 2 else "abel_even")
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        if method == "closed_form_odd" and self.space.n % 2 == 0:
            raise ValueError("closed_form_odd needs odd n")
        if method == "abel_even" and self.space.n % 2 == 1:
            raise ValueError("abel_even needs even n")
        if method == "complex_formula" and self.space.n != 3:
            raise ValueError("the single-root complex model is three dimensional")
        object.__setattr__(self, "method", method)

    def __call__(self, r):
        if self.method == "complex_formula":
            return heat_kernel_complex(1.0, self.t, r)
        return heat_kernel(self.space, self.t, r)


# --------------------------------------------------------------------------
# derivatives of F(u) = r / sinh r with u = cosh r

_SERIES_TERMS = 64
_F_COEF = np.empty(_SERIES_TERMS)
_F_COEF[0] = 1.0
for _m in range(1, _SERIES_TERMS):
    _F_COEF[_m] = -_m * _F_COEF[_m - 1] / (2 * _m + 1)


def _f_derivs(w, s, kmax):
    """[F, F', ..., F^(kmax)] at u = 1 + w, where s = arccosh(u).

    Power series in w near the origin, the three-term recurrence
    (u^2-1)F^(i+1) + (2i+1)u F^(i) + i^2 F^(i-1) = 0 at moderate r, and
    the large-u form of log(2u)/u far out.
    """
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    out = [np.empty_like(w) for _ in range(kmax + 1)]
    near = w <= 0.5
    far = s > 30.0
    mid = ~near & ~far
    if near.any():
        wn = w[near]
        for i in range(kmax + 1):
            m = np.arange(i, _SERIES_TERMS)
            falling = np.array([math.perm(int(k), i) for k in m], dtype=float)
            coef = _F_COEF[i:] * falling
            out[i][near] = np.polyval(coef[::-1], wn)
    if mid.any():
        sm = s[mid]
        u = np.cosh(sm)
        s2 = np.sinh(sm) ** 2
        vals = [sm / np.sinh(sm)]
        if kmax >= 1:
            vals.append((1.0 - u * vals[0]) / s2)
        for i in range(1, kmax):
            vals.append(-((2 * i + 1) * u * vals[i] + i * i * vals[i - 1]) / s2)
        for i in range(kmax + 1):
            out[i][mid] = vals[i]
    if far.any():
        sf = s[far]
        # log u and 1/u without forming cosh(s)
        log_u = sf - math.log(2.0) + np.log1p(np.exp(-2.0 * sf))
        log_2u = log_u + math.log(2.0)
        harmonic = 0.0
        for i in range(kmax + 1):
            if i:
                harmonic += 1.0 / i
            with np.errstate(under="ignore"):
                out[i][far] = ((-1) ** i * math.factorial(i)
                               * np.exp(-(i + 1) * log_u) * (log_2u - harmonic))
    return out


def _gaussian_derivative_factor(w, s, t, k):
    """Q_k with (-d/du)^k exp(-r^2/4t) = (-1)^k Q_k exp(-r^2/4t)."""
    f = _f_derivs(w, s, max(k - 1, 0))
    b = [-fi / (2.0 * t) for fi in f]
    q = [np.ones(np.broadcast(w, t).shape)]
    for j in range(k):
        acc = 0.0
        for i in range(j + 1):
            acc = acc + comb(j, i) * b[i] * q[j - i]
        q.append(acc)
    return q[k]


# Each evaluator returns (mantissa, log_factor) with h = mantissa * exp(log_factor),
# so that log h stays available where h itself underflows.

def _odd_kernel(n, t, r, shift):
    k = (n - 1) // 2
    with np.errstate(over="ignore"):
        w = 2.0 * np.sinh(0.5 * r) ** 2
    qk = _gaussian_derivative_factor(w, r, t, k)
    exponent = -r * r / (4.0 * t)
    if not shift:
        exponent = exponent - 0.25 * (n - 1) ** 2 * t
    const = (2.0 * math.pi) ** (-k) * (4.0 * math.pi * t) ** -0.5
    return const * (-1) ** k * qk, exponent


def _h3(t, r, shift):
    with np.errstate(invalid="ignore", over="ignore"):
        ratio = np.where(r == 0, 1.0, r / np.sinh(r))
    exponent = -r * r / (4.0 * t)
    if not shift:
        exponent = exponent - t
    return (4.0 * math.pi * t) ** -1.5 * ratio, exponent


_ABEL_CFG = QuadratureConfig(abs_tol=1e-300, rel_tol=1e-12, max_subdivisions=9,
                             transform_hint="half_line_exponential")


_EVEN_R_MAX = 300.0


def _even_kernel(n, t, r, shift, cfg):
    # Beyond _EVEN_R_MAX the integrand underflows through u^{-m}; the kernel
    # there is below e^{-r^2/4t - rho r} and is returned as zero.
    m = n // 2
    t_full = t.ravel()
    r_full = r.ravel()
    inside = r_full <= _EVEN_R_MAX
    t_flat = t_full[inside]
    r_flat = r_full[inside]
    with np.errstate(over="ignore"):
        ch_r = np.cosh(r_flat)
        sh2_half = 2.0 * np.sinh(0.5 * r_flat) ** 2

    # v = width * xi resolves the Gaussian peak at v = 0 when t is small
    width = np.minimum(1.0, np.sqrt(4.0 * t_flat / (1.0 + r_flat * np.tanh(r_flat))))

    def integrand(xi):
        v = xi[:, None] * width
        # cosh z = cosh r cosh v; w = cosh z - 1 without cancellation
        with np.errstate(over="ignore", invalid="ignore"):
            w = sh2_half * np.cosh(v) + 2.0 * np.sinh(0.5 * v) ** 2
            z = 2.0 * np.arcsinh(np.sqrt(0.5 * w))
            qm = _gaussian_derivative_factor(w, z, t_flat, m)
            # e^{-r^2/4t} is factored out of the integral; z - r comes from
            # cosh z - cosh r = 2 cosh r sinh^2(v/2) = 2 sinh((z+r)/2) sinh((z-r)/2)
            gap = 2.0 * np.arcsinh(ch_r * np.sinh(0.5 * v) ** 2 / np.sinh(0.5 * (z + r_flat)))
            gap = np.where(z + r_flat > 0, gap, 0.0)
            val = (np.sqrt(2.0 * ch_r) * np.cosh(0.5 * v) * (-1) ** m * qm
                   * np.exp(-gap * (z + r_flat) / (4.0 * t_flat)))
        return np.where(np.isfinite(val), val * width, 0.0)

    mant = np.zeros(r_full.size)
    if inside.any():
        res = integrate(integrand, (0.0, math.inf), cfg, vectorized=True)
        const = math.sqrt(2.0) * (2.0 * math.pi) ** (-m) * (4.0 * math.pi * t_flat) ** -0.5
        mant[inside] = const * res.value
    exponent = -r_full * r_full / (4.0 * t_full)
    if not shift:
        exponent = exponent - 0.25 * (n - 1) ** 2 * t_full
    return mant.reshape(t.shape), exponent.reshape(t.shape)


def _evaluate(space, t, r, shift, cfg):
    t_arr, r_arr = np.broadcast_arrays(np.asarray(t, dtype=float),
                                       np.asarray(r, dtype=float))
    if np.any(~(t_arr > 0)):
        raise ValueError("t must be positive")
    if np.any(r_arr < 0):
        raise ValueError("r must be nonnegative")
    n = space.n
    if n == 3:
        return _h3(t_arr, r_arr, shift)
    if n % 2:
        return _odd_kernel(n, t_arr, r_arr, shift)
    return _even_kernel(n, t_arr, r_arr, shift, cfg or _ABEL_CFG)


def heat_kernel(space: HyperbolicSpace, t, r, *, shift: bool = False,
                cfg: QuadratureConfig | None = None):
    """h_t(r) on H^n; broadcasts over t and r.

    With ``shift=True`` the factor e^{-rho^2 t} is left out, giving the
    kernel of e^{t(Delta + rho^2)}.
    """
    mant, log_factor = _evaluate(space, t, r, shift, cfg)
    with np.errstate(under="ignore"):
        out = mant * np.exp(log_factor)
    return float(out) if out.ndim == 0 else out


def log_heat_kernel(space: HyperbolicSpace, t, r, *, shift: bool = False,
                    cfg: QuadratureConfig | None = None):
    """log h_t(r), finite far beyond the range where h_t underflows."""
    mant, log_factor = _evaluate(space, t, r, shift, cfg)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(mant) + log_factor
    return float(out) if out.ndim == 0 else out


def heat_kernel_complex(root_value: float, t, r):
    """Heat kernel of the single-root complex model.

    (4 pi t)^{-3/2} e^{-|rho|^2 t} (a/sinh a) e^{-r^2/4t} with a = root_value*r
    and |rho| = root_value; root_value = 1 is H^3.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    a = root_value * r
    with np.errstate(invalid="ignore", over="ignore"):
        ratio = np.where(a == 0, 1.0, a / np.sinh(a))
    out = (4.0 * math.pi * t) ** -1.5 * np.exp(-root_value ** 2 * t) * ratio * np.exp(-r * r / (4.0 * t))
    return float(out) if np.ndim(out) == 0 else out


def heat_kernel_h5_closed(t, r):
    """Five-dimensional kernel written out from the odd-n recursion.

    (2pi)^{-2}(4pi t)^{-1/2} e^{-4t-r^2/4t}
        [(r cosh r - sinh r)/(2t sinh^3 r) + r^2/(4t^2 sinh^2 r)].
    Valid away from r = 0, where the first bracket cancels.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    sh = np.sinh(r)
    bracket = (r * np.cosh(r) - sh) / (2.0 * t * sh ** 3) + r * r / (4.0 * t * t * sh * sh)
    return ((2.0 * math.pi) ** -2 * (4.0 * math.pi * t) ** -0.5
            * np.exp(-4.0 * t - r * r / (4.0 * t)) * bracket)


def local_expansion_ratio(space: HyperbolicSpace, t, r):
    """h_t(r) (4 pi t)^{n/2} e^{r^2/4t}; tends to 1 as t, r -> 0."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    return heat_kernel(space, t, r) * (4.0 * math.pi * t) ** (space.n / 2) * np.exp(r * r / (4.0 * t))


def heat_envelope(space: HyperbolicSpace, t, r):
    """t^{-n/2}(1+t)^{(n-l)/2-1}(1+r) e^{-rho^2 t - rho r - r^2/4t} for rank one."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    n, rho = space.n, space.rho
    return (t ** (-n / 2) * (1.0 + t) ** ((n - 1) / 2 - 1) * (1.0 + r)
            * np.exp(-rho * rho * t - rho * r - r * r / (4.0 * t)))


def _log_ratio_to_gaussian(space, t, r):
    rho = space.rho
    return log_heat_kernel(space, t, r) + rho * rho * t + rho * r + r * r / (4.0 * t)


def fit_global_upper_bound(space: HyperbolicSpace, t_grid, r_grid):
    """Fit d1, d2 in t^{-d1}(1+r)^{d2} e^{-rho^2 t - rho r - r^2/4t}.

    Least squares on the log ratio, then the constant is raised so that
    the envelope dominates every grid point. Returns (d1, d2, constant).
    """
    tt, rr = np.meshgrid(np.asarray(t_grid, float), np.asarray(r_grid, float), indexing="ij")
    y = _log_ratio_to_gaussian(space, tt, rr).ravel()
    design = np.column_stack([np.ones(y.size), -np.log(tt.ravel()), np.log1p(rr.ravel())])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    _, d1, d2 = coef
    residual = y - design[:, 1] * d1 - design[:, 2] * d2
    return float(d1), float(d2), float(np.exp(residual.max()))


def validate_heat_bounds(space: HyperbolicSpace, t_grid, r_grid, kappa: float = 2.0,
                         spread_bound: float = 10.0) -> EstimateReport:
    """Compare h_t(r) with the two-sided envelope on pairs with r <= kappa(1+t)."""
    t_grid = np.asarray(t_grid, dtype=float)
    r_grid = np.asarray(r_grid, dtype=float)
    if t_grid.size == 0 or r_grid.size == 0:
        raise ValueError("grids must be nonempty")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    tt, rr = np.meshgrid(t_grid, r_grid, indexing="ij")
    mask = rr <= kappa * (1.0 + tt)
    t_pts, r_pts = tt[mask], rr[mask]
    n, rho = space.n, space.rho
    log_env = (-0.5 * n * np.log(t_pts) + ((n - 1) / 2 - 1) * np.log1p(t_pts) + np.log1p(r_pts)
               - rho * rho * t_pts - rho * r_pts - r_pts * r_pts / (4.0 * t_pts))
    ratios = np.exp(log_heat_kernel(space, t_pts, r_pts) - log_env)
    d1, d2, const = fit_global_upper_bound(space, t_grid, r_grid)
    return EstimateReport(
        name="heat_two_sided",
        grid={"t": [float(t_grid.min()), float(t_grid.max()), int(t_grid.size)],
              "r": [float(r_grid.min()), float(r_grid.max()), int(r_grid.size)],
              "kappa": kappa},
        ratio_min=float(ratios.min()), ratio_max=float(ratios.max()),
        regime="mixed", spread_bound=spread_bound, n_points=int(ratios.size),
        metadata={"n": space.n, "global_upper_d1": d1, "global_upper_d2": d2,
                  "global_upper_constant": const},
    )


TABLE_COLUMNS = ("n", "t", "r", "value", "method")


def heat_table(space: HyperbolicSpace, t_values, r_grid):
    method = "closed_form_odd" if space.n % 2 else "abel_even"
    rows = []
    r_grid = np.asarray(r_grid, dtype=float)
    for t in t_values:
        vals = heat_kernel(space, float(t), r_grid)
        rows.extend((space.n, float(t), float(r), float(v), method)
                    for r, v in zip(r_grid, np.atleast_1d(vals)))
    return rows


def write_kernel_table(path, rows, columns=TABLE_COLUMNS):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def heat_mass(space: HyperbolicSpace, t: float, cfg: QuadratureConfig | None = None) -> float:
    """Integral of h_t over H^n."""
    cfg = cfg or QuadratureConfig(abs_tol=1e-14, rel_tol=1e-12, max_subdivisions=10,
                                  transform_hint="half_line_exponential")

    def integrand(r):
        h = np.asarray(heat_kernel(space, t, r))
        with np.errstate(over="ignore", invalid="ignore"):
            val = h * volume_density(space, r)
        return np.where(h == 0, 0.0, val)

    return integrate(integrand, (0.0, math.inf), cfg, vectorized=True,
                     scale=max(1.0, math.sqrt(t))).value
