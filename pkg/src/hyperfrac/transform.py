"""Radial spherical transform, spectral multipliers and norms on H^n.

Functions live on radial grids. When a grid function carries an exact
callable (a closed form, or another transform) quadratures use it instead
of the interpolant, so composed operations lose no accuracy to sampling.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import HyperbolicSpace, inversion_constant, phi_lambda, plancherel_density, volume_density
from .kernels import poisson_symbol
from .specfun import gamma_fn

__all__ = [
    "RadialGridFunction",
    "SpectralGridFunction",
    "ExtensionSlice",
    "TruncationWarning",
    "default_r_grid",
    "default_lambda_grid",
    "radial_quadrature",
    "spherical_transform",
    "inverse_spherical_transform",
    "spectral_multiplier",
    "fractional_laplacian",
    "shifted_fractional",
    "radial_laplacian",
    "extension_solve",
    "neumann_symbol",
    "richardson_limit",
    "neumann_limit",
    "pde_residual",
    "sobolev_norm",
    "lp_norm",
    "weighted_l2",
    "plancherel_l2",
]


class TruncationWarning(UserWarning):
    """The integrand is not negligible at the truncation point."""


def default_r_grid() -> np.ndarray:
    return np.round(np.arange(0.0, 10.0 + 1e-9, 0.01), 12)


def default_lambda_grid() -> np.ndarray:
    return np.round(np.arange(0.0, 40.0 + 1e-9, 0.02), 12)


def _check_grid(grid, name):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError(f"{name} needs at least two points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if grid[0] < 0:
        raise ValueError(f"{name} must be nonnegative")
    return grid


@dataclass(frozen=True)
class _GridFunction:
    space: HyperbolicSpace
    grid: np.ndarray
    values: np.ndarray
    interpolation: str = "cubic"
    exact: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        grid = _check_grid(self.grid, "grid")
        values = np.asarray(self.values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError("values and grid differ in length")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if self.interpolation not in ("linear", "cubic"):
            raise ValueError("interpolation is 'linear' or 'cubic'")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def _spline(self):
        spline = self.__dict__.get("_cached_spline")
        if spline is None:
            # even functions: zero slope at the origin
            bc = ((1, 0.0), "not-a-knot") if self.grid[0] == 0 else "not-a-knot"
            spline = CubicSpline(self.grid, self.values, bc_type=bc)
            self.__dict__["_cached_spline"] = spline
        return spline

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.exact is not None:
            return np.asarray(self.exact(x), dtype=float)
        inside = (x >= self.grid[0]) & (x <= self.grid[-1])
        if self.interpolation == "linear":
            out = np.interp(x, self.grid, self.values)
        else:
            out = self._spline(np.clip(x, self.grid[0], self.grid[-1]))
        return np.where(inside, out, 0.0)

    def _envelope(self, kind: str, tolerances: dict | None = None) -> dict:
        return {"kind": kind, "space": self.space.as_dict(), "interpolation": self.interpolation,
                "grid": self.grid.tolist(), "values": self.values.tolist(),
                "tolerances": tolerances or {}}

    def to_csv(self, coordinate: str) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow((coordinate, "value"))
        for x, v in zip(self.grid, self.values):
            writer.writerow((repr(float(x)), repr(float(v))))
        return buf.getvalue()


class RadialGridFunction(_GridFunction):
    """f(r) sampled on an increasing grid starting at (or near) 0."""

    @property
    def r_grid(self) -> np.ndarray:
        return self.grid

    @classmethod
    def from_callable(cls, space: HyperbolicSpace, func: Callable, r_grid=None,
                      interpolation: str = "cubic") -> "RadialGridFunction":
        r_grid = default_r_grid() if r_grid is None else np.asarray(r_grid, dtype=float)
        return cls(space, r_grid, np.asarray(func(r_grid), dtype=float), interpolation, func)

    def to_csv(self) -> str:
        return super().to_csv("r")

    def to_json(self, tolerances: dict | None = None) -> str:
        return json.dumps(self._envelope("radial", tolerances))

    @classmethod
    def from_json(cls, text: str) -> "RadialGridFunction":
        data = json.loads(text)
        return cls(HyperbolicSpace(data["space"]["n"]), np.array(data["grid"]),
                   np.array(data["values"]), data.get("interpolation", "cubic"))


class SpectralGridFunction(_GridFunction):
    """f^(lambda) sampled on an increasing grid of lambda >= 0."""

    @property
    def lambda_grid(self) -> np.ndarray:
        return self.grid

    @classmethod
    def from_callable(cls, space: HyperbolicSpace, func: Callable, lambda_grid=None,
                      interpolation: str = "cubic") -> "SpectralGridFunction":
        grid = default_lambda_grid() if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
        return cls(space, grid, np.asarray(func(grid), dtype=float), interpolation, func)

    def to_csv(self) -> str:
        return super().to_csv("lambda")

    def to_json(self, tolerances: dict | None = None) -> str:
        return json.dumps(self._envelope("spectral", tolerances))

    @classmethod
    def from_json(cls, text: str) -> "SpectralGridFunction":
        data = json.loads(text)
        return cls(HyperbolicSpace(data["space"]["n"]), np.array(data["grid"]),
                   np.array(data["values"]), data.get("interpolation", "cubic"))


@dataclass(frozen=True)
class ExtensionSlice:
    y: float
    profile: RadialGridFunction

    def __post_init__(self):
        if not self.y > 0:
            raise ValueError("y must be positive")


# --------------------------------------------------------------------------
# quadrature nodes

_PANEL_NODES = 20


@lru_cache(maxsize=8)
def _gl(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    # barycentric weights for Legendre points
    bary = (-1.0) ** np.arange(m) * np.sqrt((1.0 - x * x) * w)
    return 0.5 * (x + 1.0), 0.5 * w, x, bary


class _Panels:
    """Composite Gauss-Legendre rule on [0, upper] with panel-wise interpolation."""

    def __init__(self, upper: float, width: float, graded_levels: int = 40):
        n_panels = max(1, int(math.ceil(upper / width)))
        edges = np.linspace(0.0, upper, n_panels + 1)
        graded = edges[1] * 2.0 ** -np.arange(graded_levels, 0, -1)
        self.edges = np.concatenate(([0.0], graded, edges[1:]))
        x0, w0, self._ref, self._bary = _gl(_PANEL_NODES)
        lo, hi = self.edges[:-1], self.edges[1:]
        self.nodes = (lo[:, None] + (hi - lo)[:, None] * x0[None, :]).ravel()
        self.weights = ((hi - lo)[:, None] * w0[None, :]).ravel()
        self.panel_of_node = np.repeat(np.arange(lo.size), _PANEL_NODES)

    @property
    def n_panels(self) -> int:
        return self.edges.size - 1

    def locate(self, x):
        return np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.n_panels - 1)

    def interpolate(self, values, x):
        """Evaluate the panel polynomials through ``values`` (given at the nodes) at x."""
        x = np.asarray(x, dtype=float)
        k = self.locate(x)
        lo, hi = self.edges[k], self.edges[k + 1]
        t = 2.0 * (x - lo) / (hi - lo) - 1.0
        local = values.reshape(self.n_panels, _PANEL_NODES)[k]
        diff = t[:, None] - self._ref[None, :]
        exact = diff == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = self._bary[None, :] / diff
            out = np.sum(ratio * local, axis=1) / np.sum(ratio, axis=1)
        hit = exact.any(axis=1)
        if hit.any():
            out[hit] = local[hit][exact[hit]]
        return out


@lru_cache(maxsize=64)
def _panels(upper: float, width: float, graded_levels: int = 40) -> _Panels:
    return _Panels(upper, width, graded_levels)


def radial_quadrature(upper: float, width: float, graded_levels: int = 40):
    """Composite Gauss-Legendre nodes and weights on [0, upper].

    Panels of at most ``width``; the first panel is split geometrically
    toward 0 so that integrable power singularities at the origin are
    resolved.
    """
    pan = _panels(float(upper), float(width), graded_levels)
    return pan.nodes, pan.weights


def _panel_width(frequency: float, cap: float) -> float:
    # 20 Gauss points integrate cos(frequency*x) to ~1e-13 on panels of width 8/frequency
    return min(cap, 8.0 / max(frequency, 1e-12))


def _phi_table(space, lam, r, chunk=400):
    lam = np.asarray(lam, dtype=float)
    out = np.empty((lam.size, r.size))
    for i in range(0, lam.size, chunk):
        out[i:i + chunk] = phi_lambda(space, lam[i:i + chunk, None], r[None, :])
    return out


# --------------------------------------------------------------------------
# Abel-type integrals

_NEAR_NODES = 48


def _cosh_gap(a, b):
    """cosh a - cosh b without cancellation."""
    return 2.0 * np.sinh(0.5 * (a + b)) * np.sinh(0.5 * (a - b))


def _abel_integrals(pan: _Panels, values, targets, power: float, above: bool):
    """int g(x) |cosh x - cosh tau|^power dx over x > tau (``above``) or x < tau.

    g is known at the panel nodes. The two panels next to tau are handled
    by x = tau +- L u^2 with interpolated g, which removes the endpoint
    singularity; the remaining panels use the nodes directly.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    k = pan.locate(targets)
    if above:
        near_end = pan.edges[np.minimum(k + 2, pan.n_panels)]
        far_mask = pan.panel_of_node[None, :] >= (k + 2)[:, None]
    else:
        near_end = pan.edges[np.maximum(k - 1, 0)]
        far_mask = pan.panel_of_node[None, :] <= (k - 2)[:, None]
    length = np.abs(near_end - targets)
    u, wu, _, _ = _gl(_NEAR_NODES)
    sign = 1.0 if above else -1.0
    x = targets[:, None] + sign * length[:, None] * u[None, :] ** 2
    jac = 2.0 * length[:, None] * u[None, :] * wu[None, :]
    g_near = pan.interpolate(values, x.ravel()).reshape(x.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gap = np.abs(_cosh_gap(x, targets[:, None]))
        near_vals = np.where(gap > 0, g_near * gap ** power * jac, 0.0)
    near = np.sum(near_vals, axis=1)
    far = np.zeros(targets.size)
    chunk = max(1, 4_000_000 // max(pan.nodes.size, 1))
    for i in range(0, targets.size, chunk):
        sl = slice(i, i + chunk)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            gap = np.abs(_cosh_gap(pan.nodes[None, :], targets[sl, None]))
            kern = np.where(far_mask[sl], gap ** power, 0.0)
        far[sl] = kern @ (values * pan.weights)
    return near + far


def _mehler_constant(space) -> float:
    n = space.n
    return (2.0 ** (0.5 * (n - 1)) * math.exp(math.lgamma(n / 2) - math.lgamma((n - 1) / 2))
            / math.sqrt(math.pi))


# --------------------------------------------------------------------------
# transforms

def _forward(space, func, lam, radius, tail_tol=1e-12, method="abel"):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    pan = _panels(float(radius), _panel_width(float(np.max(lam, initial=0.0)), 0.2))
    fvals = np.asarray(func(pan.nodes), dtype=float)
    fw = fvals * volume_density(space, pan.nodes) * pan.weights
    tail = abs(float(np.asarray(func(np.array([radius])))[0])) * float(volume_density(space, radius))
    scale = float(np.sum(np.abs(fw))) or 1.0
    if tail > tail_tol * scale:
        warnings.warn(f"|f(R)| density(R) = {tail:.3g} at R = {radius}", TruncationWarning,
                      stacklevel=3)
    if method == "direct":
        return _phi_table(space, lam, pan.nodes) @ fw
    # f^(lam) = M omega int_0^R cos(lam s) A(s) ds,
    # A(s) = int_s^R f(r) sinh r (cosh r - cosh s)^{(n-3)/2} dr
    g = fvals * np.sinh(pan.nodes)
    abel = _abel_integrals(pan, g, pan.nodes, 0.5 * (space.n - 3), above=True)
    const = _mehler_constant(space) * space.omega
    out = np.empty(lam.size)
    chunk = max(1, 4_000_000 // pan.nodes.size)
    aw = abel * pan.weights
    for i in range(0, lam.size, chunk):
        out[i:i + chunk] = np.cos(lam[i:i + chunk, None] * pan.nodes[None, :]) @ aw
    return const * out


def spherical_transform(f: RadialGridFunction, lambda_grid=None, radius: float | None = None,
                        tail_tol: float = 1e-12, method: str = "abel") -> SpectralGridFunction:
    """f^(lambda) = int_0^R f(r) phi_lambda(r) volume_density(r) dr.

    The default method factors the transform into an Abel integral
    followed by a cosine transform; "direct" tabulates phi_lambda instead.
    R defaults to the end of the radial grid. A TruncationWarning is issued
    when |f(R)| density(R) exceeds ``tail_tol`` times the L1 mass. The
    result carries an exact callable that re-runs the quadrature at any
    lambda.
    """
    if method not in ("abel", "direct"):
        raise ValueError("method is 'abel' or 'direct'")
    lam = default_lambda_grid() if lambda_grid is None else _check_grid(lambda_grid, "lambda_grid")
    radius = float(f.grid[-1] if radius is None else radius)
    space = f.space

    def exact(x):
        x = np.asarray(x, dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            return _forward(space, f, np.abs(x).ravel(), radius, tail_tol, method).reshape(x.shape)

    values = _forward(space, f, lam, radius, tail_tol, method)
    return SpectralGridFunction(space, lam, values, "cubic", exact)


def _inverse(space, func, r, cutoff, tail_tol=1e-12, method="abel"):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    r_max = float(np.max(r, initial=0.0))
    lam_pan = _panels(float(cutoff), _panel_width(r_max, 0.5), 0)
    fhat = np.asarray(func(lam_pan.nodes), dtype=float)
    gw = fhat * plancherel_density(space, lam_pan.nodes) * lam_pan.weights
    tail = abs(float(np.asarray(func(np.array([cutoff])))[0])) * float(plancherel_density(space, cutoff))
    scale = float(np.sum(np.abs(gw))) or 1.0
    if tail > tail_tol * scale:
        warnings.warn(f"|f^(L)| density(L) = {tail:.3g} at L = {cutoff}", TruncationWarning,
                      stacklevel=3)
    c_inv = inversion_constant(space)
    if method == "direct":
        return c_inv * (gw @ _phi_table(space, lam_pan.nodes, r))
    out = np.full(r.size, c_inv * float(np.sum(gw)))
    positive = r > 0
    if not positive.any():
        return out
    # f(r) = C M / sinh^{n-2} r int_0^r G(s) (cosh r - cosh s)^{(n-3)/2} ds,
    # G(s) = int f^(lam) |c|^{-2} cos(lam s) dlam
    s_pan = _panels(max(r_max, 1e-3), _panel_width(float(cutoff), 0.2))
    big_g = np.empty(s_pan.nodes.size)
    chunk = max(1, 4_000_000 // lam_pan.nodes.size)
    for i in range(0, s_pan.nodes.size, chunk):
        big_g[i:i + chunk] = np.cos(s_pan.nodes[i:i + chunk, None] * lam_pan.nodes[None, :]) @ gw
    rp = r[positive]
    abel = _abel_integrals(s_pan, big_g, rp, 0.5 * (space.n - 3), above=False)
    out[positive] = c_inv * _mehler_constant(space) * abel / np.sinh(rp) ** (space.n - 2)
    return out


def inverse_spherical_transform(fhat: SpectralGridFunction, r_grid=None,
                                cutoff: float | None = None, tail_tol: float = 1e-12,
                                method: str = "abel") -> RadialGridFunction:
    """f(r) = C int_0^L f^(lambda) phi_lambda(r) |c(lambda)|^{-2} dlambda.

    C is the inversion constant of the space; L defaults to the end of
    the lambda grid. ``method`` is as for spherical_transform.
    """
    if method not in ("abel", "direct"):
        raise ValueError("method is 'abel' or 'direct'")
    r_grid = default_r_grid() if r_grid is None else _check_grid(r_grid, "r_grid")
    cutoff = float(fhat.grid[-1] if cutoff is None else cutoff)
    space = fhat.space

    def exact(x):
        x = np.asarray(x, dtype=float)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            return _inverse(space, fhat, np.abs(x).ravel(), cutoff, tail_tol, method).reshape(x.shape)

    values = _inverse(space, fhat, r_grid, cutoff, tail_tol, method)
    return RadialGridFunction(space, r_grid, values, "cubic", exact)


def spectral_multiplier(f: RadialGridFunction, symbol: Callable, r_grid=None,
                        lambda_grid=None, radius: float | None = None) -> RadialGridFunction:
    """Inverse transform of symbol(lambda) * f^(lambda)."""
    fhat = spherical_transform(f, lambda_grid, radius)
    product = SpectralGridFunction(
        f.space, fhat.grid, symbol(fhat.grid) * fhat.values, "cubic",
        lambda x: symbol(np.asarray(x, dtype=float)) * fhat.exact(x))
    return inverse_spherical_transform(product, f.grid if r_grid is None else r_grid)


def fractional_laplacian(f: RadialGridFunction, sigma: float, r_grid=None, lambda_grid=None,
                         radius: float | None = None) -> RadialGridFunction:
    """(-Delta)^sigma f through the multiplier (lambda^2 + rho^2)^sigma."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rho2 = f.space.rho ** 2
    return spectral_multiplier(f, lambda lam: (lam * lam + rho2) ** sigma, r_grid, lambda_grid, radius)


def shifted_fractional(f: RadialGridFunction, sigma: float, r_grid=None, lambda_grid=None,
                       radius: float | None = None) -> RadialGridFunction:
    """(-Delta - rho^2)^{sigma/2} f through the multiplier lambda^sigma."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return spectral_multiplier(f, lambda lam: np.abs(lam) ** sigma, r_grid, lambda_grid, radius)


def radial_laplacian(space: HyperbolicSpace, values, step: float):
    """f'' + (n-1) coth(r) f' by fourth-order differences on r = 0, step, ...

    The profile is extended evenly across r = 0, where the operator is n f''(0).
    The last two points are left as NaN.
    """
    values = np.asarray(values, dtype=float)
    ext = np.concatenate((values[2:0:-1], values))
    d1 = np.full(values.shape, np.nan)
    d2 = np.full(values.shape, np.nan)
    c = ext[2:-2]
    d1[:-2] = (ext[:-4] - 8 * ext[1:-3] + 8 * ext[3:-1] - ext[4:]) / (12 * step)
    d2[:-2] = (-ext[:-4] + 16 * ext[1:-3] - 30 * c + 16 * ext[3:-1] - ext[4:]) / (12 * step * step)
    r = step * np.arange(values.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = d2 + (space.n - 1) * d1 / np.tanh(r)
    out[0] = space.n * d2[0]
    return out


# --------------------------------------------------------------------------
# extension problem

def extension_solve(f: RadialGridFunction, sigma: float, y_list: Sequence[float],
                    r_grid=None, lambda_grid=None, radius: float | None = None):
    """Slices u(., y) of the extension with u^(lambda, y) = f^(lambda) P^_y(lambda)."""
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    fhat = spherical_transform(f, lambda_grid, radius)
    space = f.space
    slices = []
    for y in y_list:
        if not y > 0:
            raise ValueError("y must be positive")

        def symbol(lam, y=y):
            return poisson_symbol(space, sigma, y, lam)

        uhat = SpectralGridFunction(space, fhat.grid, symbol(fhat.grid) * fhat.values, "cubic",
                                    lambda x, s=symbol: s(np.asarray(x, dtype=float)) * fhat.exact(x))
        slices.append(ExtensionSlice(float(y), inverse_spherical_transform(
            uhat, f.grid if r_grid is None else r_grid)))
    return slices


def neumann_symbol(sigma: float, s, y):
    """-2^{2s-1}(Gamma(s)/Gamma(1-s)) y^{1-2s} d/dy of the Poisson symbol at spectral radius s.

    Equals (2^sigma/Gamma(1-sigma)) s^{2 sigma} (y s)^{1-sigma} K_{1-sigma}(y s),
    which tends to s^{2 sigma} as y -> 0.
    """
    from .specfun import bessel_k

    s = np.asarray(s, dtype=float)
    z = np.asarray(y, dtype=float) * s
    with np.errstate(under="ignore"):
        return (2.0 ** sigma / gamma_fn(1.0 - sigma)) * s ** (2 * sigma) * z ** (1 - sigma) \
            * np.asarray(bessel_k(1.0 - sigma, z))


def richardson_limit(values, ys, exponents):
    """Limit at y = 0 of samples v(y_k) = L + sum_j a_j y_k^{e_j} + ...

    Solves the square system in (L, a_1, ..., a_m) for m = len(ys) - 1
    exponents. ``values`` may carry extra trailing axes.
    """
    ys = np.asarray(ys, dtype=float)
    exponents = np.asarray(exponents, dtype=float)[: ys.size - 1]
    design = np.column_stack([np.ones_like(ys)] + [ys ** e for e in exponents])
    values = np.asarray(values, dtype=float)
    flat = values.reshape(ys.size, -1)
    coef = np.linalg.solve(design, flat)
    return coef[0].reshape(values.shape[1:])


def _neumann_exponents(sigma, depth):
    # powers in the small-y expansion of y^{1-2s} d/dy (z^s K_s(z))
    exps = []
    k = 0
    while len(exps) < depth:
        exps.extend([2 * k + 2 - 2 * sigma, 2 * k + 2])
        k += 1
    return sorted(exps)[:depth]


def neumann_limit(f: RadialGridFunction, sigma: float, y0: float = 0.2, depth: int = 4,
                  r_grid=None, lambda_grid=None, radius: float | None = None,
                  return_residual: bool = False):
    """Recover (-Delta)^sigma f from the weighted Neumann data of the extension.

    For each lambda the Neumann symbol is sampled at y_k = y0 2^{-k},
    k = 0..depth, and extrapolated to y = 0 with the exponents of its
    small-y expansion (2-2s, 2, 4-2s, 4, ...). The extrapolated multiplier
    is then applied to f^.
    """
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    ys = y0 * 2.0 ** -np.arange(depth + 1)
    exps = _neumann_exponents(sigma, depth)
    rho2 = f.space.rho ** 2

    def multiplier(lam):
        lam = np.asarray(lam, dtype=float)
        s = np.sqrt(lam * lam + rho2)
        samples = np.stack([neumann_symbol(sigma, s, y) for y in ys])
        return richardson_limit(samples, ys, exps)

    out = spectral_multiplier(f, multiplier, r_grid, lambda_grid, radius)
    if return_residual:
        # disagreement with the extrapolation one level shallower
        lam = out.grid if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
        s = np.sqrt(np.asarray(lam) ** 2 + rho2)
        samples = np.stack([neumann_symbol(sigma, s, y) for y in ys])
        shallow = richardson_limit(samples[:-1], ys[:-1], exps[:-1])
        residual = float(np.max(np.abs(multiplier(lam) - shallow) / s ** (2 * sigma)))
        return out, residual
    return out


def pde_residual(slices: Sequence[ExtensionSlice], sigma: float) -> float:
    """Scaled residual of Delta u + ((1-2s)/y) u_y + u_yy at the middle slices.

    y-derivatives use three-point differences on the (possibly uneven)
    y-sequence, the radial Laplacian fourth-order differences on the shared
    uniform r-grid. Returns max |residual| / max |Delta u| over the interior.
    """
    if len(slices) < 3:
        raise ValueError("need at least three slices")
    ys = np.array([s.y for s in slices])
    if np.unique(ys).size != ys.size:
        raise ValueError("slices need distinct y")
    order = np.argsort(ys)
    ys = ys[order]
    profiles = [slices[i].profile for i in order]
    r = profiles[0].grid
    step = r[1] - r[0]
    if r[0] != 0 or not np.allclose(np.diff(r), step):
        raise ValueError("pde_residual needs a uniform r-grid starting at 0")
    u = np.stack([p.values for p in profiles])
    worst_res = 0.0
    worst_lap = 0.0
    for k in range(1, len(ys) - 1):
        h0, h1 = ys[k] - ys[k - 1], ys[k + 1] - ys[k]
        u_y = (-h1 / (h0 * (h0 + h1)) * u[k - 1] + (h1 - h0) / (h0 * h1) * u[k]
               + h0 / (h1 * (h0 + h1)) * u[k + 1])
        u_yy = 2.0 * (u[k - 1] / (h0 * (h0 + h1)) - u[k] / (h0 * h1) + u[k + 1] / (h1 * (h0 + h1)))
        lap = radial_laplacian(profiles[k].space, u[k], step)
        res = lap + (1 - 2 * sigma) / ys[k] * u_y + u_yy
        ok = np.isfinite(res)
        worst_res = max(worst_res, float(np.max(np.abs(res[ok]), initial=0.0)))
        worst_lap = max(worst_lap, float(np.max(np.abs(lap[ok]), initial=0.0)))
    if worst_lap == 0.0:
        return 0.0 if worst_res == 0.0 else math.inf
    return worst_res / worst_lap


# --------------------------------------------------------------------------
# norms

def _radial_integral(f: RadialGridFunction, integrand: Callable, radius: float | None):
    radius = float(f.grid[-1] if radius is None else radius)
    nodes, weights = radial_quadrature(radius, 0.2)
    vals = integrand(np.asarray(f(nodes), dtype=float), nodes)
    return float(np.sum(vals * volume_density(f.space, nodes) * weights))


def lp_norm(f: RadialGridFunction, p: float, radius: float | None = None) -> float:
    """(int |f|^p dx)^{1/p}; p = inf gives the grid maximum of |f|."""
    if p == math.inf:
        return float(np.max(np.abs(f(f.grid))))
    if not p >= 1:
        raise ValueError("p must be at least 1")
    return _radial_integral(f, lambda v, r: np.abs(v) ** p, radius) ** (1.0 / p)


def weighted_l2(f: RadialGridFunction, weight: Callable, radius: float | None = None) -> float:
    """(int |f|^2 w dx)^{1/2} for a radial weight w(r)."""
    return math.sqrt(max(_radial_integral(f, lambda v, r: v * v * weight(r), radius), 0.0))


def plancherel_l2(fhat: SpectralGridFunction, sigma: float = 0.0, cutoff: float | None = None) -> float:
    """(C int |f^|^2 (lambda^2+rho^2)^sigma |c|^{-2} dlambda)^{1/2}."""
    space = fhat.space
    cutoff = float(fhat.grid[-1] if cutoff is None else cutoff)
    nodes, weights = radial_quadrature(cutoff, 0.5, graded_levels=0)
    vals = np.asarray(fhat(nodes), dtype=float)
    dens = plancherel_density(space, nodes) * (nodes * nodes + space.rho ** 2) ** sigma
    return math.sqrt(inversion_constant(space) * float(np.sum(vals * vals * dens * weights)))


def sobolev_norm(f: RadialGridFunction, sigma: float, lambda_grid=None,
                 radius: float | None = None) -> float:
    """H^sigma norm with multiplier (lambda^2 + rho^2)^sigma."""
    return plancherel_l2(spherical_transform(f, lambda_grid, radius), sigma)
