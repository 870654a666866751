"""Special functions and quadrature engines.

Gamma goes through the standard library, complex log-gamma through scipy.
The modified Bessel function K and the double-exponential quadrature rules
are implemented here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special as _sp

__all__ = [
    "PoleError",
    "BesselDomainError",
    "BesselOverflowError",
    "QuadratureError",
    "QuadratureConfig",
    "QuadratureResult",
    "gamma_fn",
    "loggamma_complex",
    "bessel_k",
    "bessel_k_scaled",
    "integrate",
    "fourier_integral",
    "TRANSFORM_HINTS",
]

TRANSFORM_HINTS = ("none", "half_line_exponential", "half_line_power_exponential")


class PoleError(ValueError):
    """Raised when Gamma is requested at a nonpositive integer."""


class BesselDomainError(ValueError):
    pass


class BesselOverflowError(OverflowError):
    pass


class QuadratureError(RuntimeError):
    """Non-convergence; carries the best estimate and its error bound."""

    def __init__(self, message, best_estimate, error_bound, evaluations=0):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_bound = error_bound
        self.evaluations = evaluations


# --------------------------------------------------------------------------
# Gamma


def gamma_fn(x: float) -> float:
    """Gamma function on the real line, including negative non-integers."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x:g}")
    return math.gamma(x)


def loggamma_complex(z):
    """Principal branch of log Gamma for complex arguments (vectorized)."""
    return _sp.loggamma(np.asarray(z, dtype=complex))


# --------------------------------------------------------------------------
# Modified Bessel K of real order

# Taylor coefficients of 1/Gamma(1+z) around z = 0 (A&S 6.1.34 shifted by one).
_RGAM = np.array([
    1.0, 0.5772156649015329, -0.6558780715202538, -0.0420026350340952,
    0.1665386113822915, -0.0421977345555443, -0.0096219715278770,
    0.0072189432466630, -0.0011651675918591, -0.0002152416741149,
    0.0001280502823882, -0.0000201348547807, -0.0000012504934821,
    0.0000011330272320, -0.0000002056338417, 0.0000000061160950,
    0.0000000050020075, -0.0000000011812746, 0.0000000001043427,
    0.0000000000077823, -0.0000000000036968, 0.0000000000005100,
    -0.0000000000000206, -0.0000000000000054, 0.0000000000000014,
    0.0000000000000001,
])

_EPS = 1e-16
_MAXIT = 10000


def _temme_gammas(mu: float):
    """gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2."""
    powers = mu ** np.arange(len(_RGAM))
    gampl = float(np.dot(_RGAM, powers))
    gammi = float(np.dot(_RGAM, powers * (-1.0) ** np.arange(len(_RGAM))))
    odd = np.arange(1, len(_RGAM), 2)
    gam1 = -float(np.dot(_RGAM[odd], mu ** (odd - 1)))
    even = np.arange(0, len(_RGAM), 2)
    gam2 = float(np.dot(_RGAM[even], mu ** even))
    return gam1, gam2, gampl, gammi


def _k_pair_small(mu: float, x: np.ndarray):
    """Temme series for K_mu, K_{mu+1} on x <= 2, scaled by e^x."""
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    fact2 = np.where(np.abs(e) < _EPS, 1.0, np.sinh(e) / np.where(e == 0, 1.0, e))
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total = total + np.where(active, delta, 0.0)
        delta1 = c * (p - i * ff)
        total1 = total1 + np.where(active, delta1, 0.0)
        active &= np.abs(delta) >= np.abs(total) * _EPS
        if not active.any():
            break
    kmu = total
    kmu1 = total1 * 2.0 / x
    scale = np.exp(x)
    return kmu * scale, kmu1 * scale


def _k_pair_hankel(mu: float, x: np.ndarray):
    """Large-argument expansion of e^x K_mu and e^x K_{mu+1}; used for x > 1e6."""
    out = []
    for order in (mu, mu + 1.0):
        four_mu2 = 4.0 * order * order
        term = np.ones_like(x)
        total = np.ones_like(x)
        for k in range(1, 6):
            term = term * (four_mu2 - (2 * k - 1) ** 2) / (8.0 * k * x)
            total = total + term
        out.append(np.sqrt(math.pi / (2.0 * x)) * total)
    return out[0], out[1]


def _k_pair_large(mu: float, x: np.ndarray):
    """Steed's continued fraction for K_mu, K_{mu+1} on x > 2, scaled by e^x."""
    huge = x > 1e6
    if huge.any():
        k0 = np.empty_like(x)
        k1 = np.empty_like(x)
        k0[huge], k1[huge] = _k_pair_hankel(mu, x[huge])
        if (~huge).any():
            k0[~huge], k1[~huge] = _k_pair_large(mu, x[~huge])
        return k0, k1
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu * mu
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    active = np.ones(x.shape, dtype=bool)
    # converged entries keep iterating under the mask and may overflow harmlessly
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(2, _MAXIT):
            a -= 2 * (i - 1)
            c = -a * c / i
            qnew = (q1 - b * q2) / a
            q1 = q2
            q2 = qnew
            q = q + c * qnew
            b = b + 2.0
            d = 1.0 / (b + a * d)
            delh = (b * d - 1.0) * delh
            h = h + np.where(active, delh, 0.0)
            dels = q * delh
            s = s + np.where(active, dels, 0.0)
            active &= np.abs(dels) >= np.abs(s) * _EPS
            if not active.any():
                break
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * x)) / s
    kmu1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, kmu1


def bessel_k_scaled(nu, x):
    """e^x K_nu(x) for real order nu and x > 0 (x may be an array)."""
    nu = abs(float(nu))
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if np.any(~(xa > 0)):
        raise BesselDomainError("bessel_k requires x > 0")
    if not math.isfinite(nu):
        raise BesselDomainError("bessel_k requires a finite order")
    nl = int(nu + 0.5)
    mu = nu - nl
    out0 = np.empty_like(xa)
    out1 = np.empty_like(xa)
    small = xa <= 2.0
    if small.any():
        out0[small], out1[small] = _k_pair_small(mu, xa[small])
    if (~small).any():
        out0[~small], out1[~small] = _k_pair_large(mu, xa[~small])
    kmu, kmu1 = out0, out1
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, nl + 1):
            knext = (mu + k) * (2.0 / xa) * kmu1 + kmu
            kmu, kmu1 = kmu1, knext
    if not np.all(np.isfinite(kmu)):
        raise BesselOverflowError(f"K_{nu:g}(x) overflows for small x")
    return float(kmu[0]) if scalar else kmu


def bessel_k(nu, x):
    """Modified Bessel function of the second kind, K_nu(x), real nu, x > 0."""
    scaled = bessel_k_scaled(nu, x)
    with np.errstate(over="ignore"):
        val = scaled * np.exp(-np.asarray(x, dtype=float))
    if np.ndim(val) == 0:
        val = float(val)
        if not math.isfinite(val):
            raise BesselOverflowError(f"K_{nu:g}({x}) overflows")
    return val


# --------------------------------------------------------------------------
# Double-exponential quadrature


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 10
    transform_hint: str = "none"

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.transform_hint not in TRANSFORM_HINTS:
            raise ValueError(f"unknown transform_hint {self.transform_hint!r}")

    def replace(self, **changes) -> "QuadratureConfig":
        fields = dict(abs_tol=self.abs_tol, rel_tol=self.rel_tol,
                      max_subdivisions=self.max_subdivisions,
                      transform_hint=self.transform_hint)
        fields.update(changes)
        return QuadratureConfig(**fields)


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class QuadratureResult:
    value: float | np.ndarray
    error_estimate: float | np.ndarray
    evaluations: int


_HALF_PI = 0.5 * math.pi


def _rule_tanh_sinh(a, b, u):
    s = _HALF_PI * np.sinh(u)
    width = b - a
    # distance to the nearer endpoint computed without cancellation
    with np.errstate(over="ignore"):
        lo = width / (1.0 + np.exp(-2.0 * s))
        hi = width / (1.0 + np.exp(2.0 * s))
    x = np.where(s < 0, a + lo, b - hi)
    w = width * _HALF_PI * np.cosh(u) / (2.0 * np.cosh(s) ** 2)
    keep = (x > a) & (x < b) & (w > 0)
    return x, w, keep


def _rule_exp_sinh(a, scale, u):
    with np.errstate(over="ignore"):
        e = np.exp(_HALF_PI * np.sinh(u))
    x = a + scale * e
    w = scale * _HALF_PI * np.cosh(u) * e
    keep = np.isfinite(x) & np.isfinite(w) & (x > a)
    return x, w, keep


def _rule_exp_exp(a, scale, u):
    with np.errstate(over="ignore"):
        e = np.exp(u - np.exp(-u))
    x = a + scale * e
    w = scale * e * (1.0 + np.exp(-u))
    keep = np.isfinite(x) & np.isfinite(w) & (x > a)
    return x, w, keep


_RULES = {
    "finite": (_rule_tanh_sinh, -4.0, 4.0),
    "exp_sinh": (_rule_exp_sinh, -4.5, 4.5),
    "exp_exp": (_rule_exp_exp, -4.5, 7.0),
}


def _select_rule(a, b, hint):
    if math.isfinite(a) and math.isfinite(b):
        if hint != "none":
            raise ValueError(f"hint {hint!r} needs a half-line domain")
        return "finite"
    if not math.isfinite(a) or b != math.inf:
        raise ValueError("domains are [a, b] or [a, inf) with finite a")
    if hint == "half_line_exponential":
        return "exp_exp"
    return "exp_sinh"


def _evaluate(f, x, vectorized):
    if vectorized:
        return np.asarray(f(x), dtype=float)
    return np.asarray([f(float(xi)) for xi in x], dtype=float)


def integrate(f: Callable, domain, cfg: QuadratureConfig | None = None, *,
              vectorized: bool = False, scale: float = 1.0,
              raise_on_failure: bool = True) -> QuadratureResult:
    """Integrate f over [a, b] or [a, inf) with a double-exponential rule.

    The step is halved until successive trapezoid sums agree within
    max(abs_tol, rel_tol*|value|). With ``vectorized=True`` f receives the
    node array and may return shape (m,) or (m, k); in the second case all
    k integrals are computed together and each must converge.
    ``scale`` sets the characteristic length of half-line rules.
    """
    cfg = cfg or DEFAULT_QUAD
    a, b = float(domain[0]), float(domain[1])
    if a == b:
        return QuadratureResult(0.0, 0.0, 1)
    kind = _select_rule(a, b, cfg.transform_hint)
    rule, ulo, uhi = _RULES[kind]

    def nodes(u):
        if kind == "finite":
            return rule(a, b, u)
        return rule(a, scale, u)

    h = 0.5
    u = np.arange(ulo, uhi + 1e-12, h)
    x, w, keep = nodes(u)
    vals = _evaluate(f, x[keep], vectorized)
    evaluations = int(keep.sum())
    total = h * np.tensordot(w[keep], vals, axes=(0, 0))
    prev = None
    err = np.inf
    for level in range(1, int(cfg.max_subdivisions) + 1):
        h *= 0.5
        u = np.arange(ulo + h, uhi, 2 * h)
        x, w, keep = nodes(u)
        if keep.any():
            vals = _evaluate(f, x[keep], vectorized)
            evaluations += int(keep.sum())
            new = np.tensordot(w[keep], vals, axes=(0, 0))
        else:
            new = 0.0 * total
        prev = total
        total = 0.5 * total + h * new
        err = np.abs(total - prev)
        tol = np.maximum(cfg.abs_tol, cfg.rel_tol * np.abs(total))
        if level >= 3 and np.all(err <= tol):
            break
    else:
        if raise_on_failure:
            value = total if np.ndim(total) else float(total)
            raise QuadratureError(
                f"no convergence after {cfg.max_subdivisions} halvings",
                value, err, evaluations)
    if np.ndim(total) == 0:
        return QuadratureResult(float(total), float(err), max(evaluations, 1))
    return QuadratureResult(total, err, max(evaluations, 1))


def _ooura_phi(t):
    s = 6.0 * np.sinh(t)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        one_minus = -np.expm1(-s)
        phi = np.where(np.abs(t) < 1e-8, 1.0 / 6.0, t / one_minus)
        es = np.exp(-s)
        dphi = (one_minus - 6.0 * t * np.cosh(t) * es) / one_minus ** 2
        dphi = np.where(np.abs(t) < 1e-8, 0.5, dphi)
        # far left both parts underflow to zero
        phi = np.where(s < -700, 0.0, phi)
        dphi = np.where(s < -700, 0.0, dphi)
    return phi, dphi


def fourier_integral(f: Callable, omega: float, kind: str = "cos",
                     cfg: QuadratureConfig | None = None) -> QuadratureResult:
    """Integral of f(x)*cos(omega x) (or sin) over [0, inf).

    Uses the Ooura-Mori double-exponential transformation, whose nodes
    approach the zeros of the oscillating factor, so slowly decaying f and
    endpoint singularities at 0 are both handled. f must accept arrays.
    """
    cfg = cfg or DEFAULT_QUAD
    if omega <= 0:
        raise ValueError("omega must be positive")
    if kind not in ("cos", "sin"):
        raise ValueError("kind is 'cos' or 'sin'")
    trig = np.cos if kind == "cos" else np.sin
    total = None
    err = np.inf
    evaluations = 0
    h = 0.25
    for level in range(int(cfg.max_subdivisions) + 1):
        big_m = math.pi / h
        shift = 0.5 if kind == "cos" else 0.0
        k = np.arange(math.floor(-4.0 / h), math.ceil(4.5 / h) + 1)
        t = (k - shift) * h
        phi, dphi = _ooura_phi(t)
        x = big_m * phi / omega
        keep = (x > 0) & (dphi > 0)
        xs = x[keep]
        vals = np.asarray(f(xs), dtype=float) * trig(omega * xs)
        evaluations += xs.size
        new = big_m * h / omega * float(np.sum(vals * dphi[keep]))
        if total is not None:
            err = abs(new - total)
            total = new
            if level >= 3 and err <= max(cfg.abs_tol, cfg.rel_tol * abs(total)):
                return QuadratureResult(total, err, evaluations)
        else:
            total = new
        h *= 0.5
    raise QuadratureError("Fourier integral did not converge", total, err, evaluations)
