"""Real hyperbolic space: constants, volume density, spherical functions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .specfun import gamma_fn, loggamma_complex

__all__ = [
    "HyperbolicSpace",
    "PolarPoint",
    "volume_density",
    "log_volume_density",
    "phi_lambda",
    "phi_zero",
    "asymptotic_envelope",
    "plancherel_density",
    "inversion_constant",
    "distance_polar",
    "log_sinh",
]


@dataclass(frozen=True)
class HyperbolicSpace:
    """Real hyperbolic space of dimension n (rank one)."""

    n: int
    rank: int = field(default=1, init=False)
    n_indivisible: int = field(default=1, init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def rho(self) -> float:
        return 0.5 * (self.n - 1)

    @property
    def alpha(self) -> float:
        return 0.5 * (self.n - 2)

    @property
    def beta(self) -> float:
        return -0.5

    @property
    def omega(self) -> float:
        """Surface area of the unit (n-1)-sphere."""
        return 2.0 * math.pi ** (self.n / 2) / gamma_fn(self.n / 2)

    def as_dict(self) -> dict:
        return {"n": self.n, "rho": self.rho, "alpha": self.alpha,
                "beta": self.beta, "omega": self.omega}


@dataclass(frozen=True)
class PolarPoint:
    r: float
    r2: float | None = None
    theta: float | None = None

    def __post_init__(self):
        if self.r < 0 or (self.r2 is not None and self.r2 < 0):
            raise ValueError("radii must be nonnegative")
        if self.theta is not None and not 0 <= self.theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")


def log_sinh(r):
    """log(sinh r) for r > 0, accurate for large r."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(r > 20, r - math.log(2.0) + np.log1p(-np.exp(-2.0 * r)),
                        np.log(np.sinh(np.minimum(r, 20.0))))


def volume_density(space: HyperbolicSpace, r):
    """omega_{n-1} sinh^{n-1} r, so that integrals of radial f are 1-D."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    return space.omega * np.sinh(r) ** (space.n - 1)


def log_volume_density(space: HyperbolicSpace, r):
    return math.log(space.omega) + (space.n - 1) * log_sinh(r)


def _phi_closed_h3(lam, r):
    lam = np.abs(lam)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        r_over_sinh = np.where(r == 0, 1.0, r / np.sinh(r))
        # sin(lam r)/(lam r), continuous at lam r = 0
        return np.sinc(lam * r / math.pi) * r_over_sinh


@lru_cache(maxsize=32)
def _gauss_legendre(m: int):
    # nodes and weights on [0, 1]
    x, w = roots_legendre(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _mehler_terms(n, r, w):
    """Log-amplitude and phase variable of the angular integral.

    With s = log(cosh r - sinh r cos theta) the angular integral becomes
    int_0^r cos(lambda s) (cosh r - cosh s)^{(n-3)/2} ds up to a factor;
    s = r (1 - w^2) then absorbs the endpoint behaviour at s = r.
    """
    s = r * (1.0 - w * w)
    gap = r * w * w
    with np.errstate(divide="ignore"):
        log_diff = (math.log(2.0) + log_sinh(0.5 * (r + s))
                    + log_sinh(0.5 * gap))
        log_norm = (0.5 * (n - 1) * math.log(2.0)
                    + math.lgamma(n / 2) - 0.5 * math.log(math.pi) - math.lgamma((n - 1) / 2)
                    - (n - 2) * log_sinh(r))
        log_amp = log_norm + 0.5 * (n - 3) * log_diff + np.log(2.0 * r * w)
    return log_amp, s


def _phi_quadrature(n, lam, r, rel_tol=1e-10, start=64, max_nodes=8192):
    lam = np.abs(lam).ravel()
    r = r.ravel()
    out = np.ones(lam.size)
    todo = np.flatnonzero(r > 0)
    prev = None
    m = start
    while todo.size:
        wnodes, wweights = _gauss_legendre(m)
        vals = np.empty(todo.size)
        scale = np.empty(todo.size)
        chunk = max(1, 2_000_000 // m)
        for i0 in range(0, todo.size, chunk):
            idx = todo[i0:i0 + chunk]
            rr = r[idx, None]
            log_amp, s = _mehler_terms(n, rr, wnodes[None, :])
            amp = np.exp(log_amp) * wweights
            vals[i0:i0 + chunk] = np.sum(amp * np.cos(lam[idx, None] * s), axis=1)
            scale[i0:i0 + chunk] = np.sum(amp, axis=1)
        if prev is not None:
            # relative test, floored near zeros of phi and at roundoff level
            tol = np.maximum(rel_tol * np.maximum(np.abs(vals), 1e-3 * scale),
                             4e-16 * m * scale)
            done = np.abs(vals - prev) <= tol
            if m >= max_nodes:
                done[:] = True
            out[todo[done]] = vals[done]
            todo = todo[~done]
            prev = vals[~done]
        else:
            prev = vals
        m *= 2
    return out


def phi_lambda(space: HyperbolicSpace, lam, r, method: str = "auto"):
    """Spherical function phi_lambda(r), normalized by phi_lambda(0) = 1.

    ``method`` is "auto" (closed form when n = 3), "closed" or "quadrature"
    (Gauss-Legendre in the angle, node count doubled until the relative
    change is below 1e-10). Arrays broadcast against each other.
    """
    lam_b, r_b = np.broadcast_arrays(np.asarray(lam, dtype=float),
                                     np.asarray(r, dtype=float))
    if np.any(r_b < 0):
        raise ValueError("r must be nonnegative")
    if method == "closed" and space.n != 3:
        raise ValueError("closed form is available for n = 3 only")
    if method in ("auto", "closed") and space.n == 3:
        out = _phi_closed_h3(lam_b, r_b)
    elif method in ("auto", "quadrature"):
        out = _phi_quadrature(space.n, lam_b, r_b).reshape(lam_b.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if out.ndim == 0 else out


def phi_zero(space: HyperbolicSpace, r, method: str = "auto"):
    return phi_lambda(space, 0.0, r, method=method)


def asymptotic_envelope(space: HyperbolicSpace, r):
    """(1 + r) e^{-rho r}, the two-sided size of phi_0."""
    r = np.asarray(r, dtype=float)
    return (1.0 + r) * np.exp(-space.rho * r)


def plancherel_density(space: HyperbolicSpace, lam):
    """|c(lambda)|^{-2} for the Jacobi c-function of H^n (even in lambda)."""
    lam = np.abs(np.asarray(lam, dtype=float))
    rho, alpha, beta = space.rho, space.alpha, space.beta
    safe = np.where(lam == 0, 1.0, lam)
    z = 1j * safe
    log_c = ((rho - z) * math.log(2.0) + loggamma_complex(alpha + 1.0)
             + loggamma_complex(z) - loggamma_complex(0.5 * (z + rho))
             - loggamma_complex(0.5 * (z + rho) - beta))
    out = np.exp(-2.0 * log_c.real)
    out = np.where(lam == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def inversion_constant(space: HyperbolicSpace) -> float:
    """C with f(r) = C int f^(lambda) phi_lambda(r) |c(lambda)|^{-2} dlambda."""
    return 2.0 ** (space.n - 1) / (2.0 * math.pi * space.omega)


def distance_polar(r1, r2, theta):
    """Geodesic distance between points at radii r1, r2 with angle theta."""
    r1, r2, theta = (np.asarray(v, dtype=float) for v in (r1, r2, theta))
    if np.any(r1 < 0) or np.any(r2 < 0):
        raise ValueError("radii must be nonnegative")
    # cosh d - 1 = 2 sinh^2((r1-r2)/2) + 2 sinh r1 sinh r2 sin^2(theta/2)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        half_gap = 2.0 * np.sinh(0.5 * (r1 - r2)) ** 2
        cross = 2.0 * np.sinh(r1) * np.sinh(r2) * np.sin(0.5 * theta) ** 2
        excess = np.maximum(half_gap + cross, 0.0)
        d = 2.0 * np.arcsinh(np.sqrt(0.5 * excess))
        # far apart: cosh d ~ e^d / 2, evaluate in log space
        log_gap = math.log(2.0) + 2.0 * log_sinh(np.abs(0.5 * (r1 - r2)))
        log_cross = (math.log(2.0) + log_sinh(r1) + log_sinh(r2)
                     + 2.0 * np.log(np.sin(0.5 * theta)))
        log_excess = np.logaddexp(log_gap, log_cross)
        d = np.where(log_excess > 30.0, math.log(2.0) + log_excess, d)
    d = np.minimum(d, r1 + r2)
    return float(d) if d.ndim == 0 else d
