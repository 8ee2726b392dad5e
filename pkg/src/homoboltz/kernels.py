"""Angular collision kernels and sphere quadratures.

The collision kernel g lives on [-1, 1] and is normalized so that its
integral over the unit sphere (against any fixed direction) equals one.
Everything downstream -- the scalar coefficients q and lambda(p), the
spectral collision operators and the particle oracle -- consumes the
normalized kernel together with a product quadrature on S^{d-1}.

Quadrature family: Gauss-Legendre in the polar cosine times a uniform
(trapezoid) azimuth rule for d=3, and the uniform circle rule for d=2.
Both integrate smooth integrands spectrally and are symmetric under
n -> -n, which the collision operators rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import KernelNormalizationError, UnsupportedDimension

#: number of samples used for the cached kernel table and the
#: inverse-CDF sampler table
TABLE_SIZE = 4096


@dataclass(frozen=True)
class SphereQuadrature:
    """Nodes and weights for integrals over S^{d-1}.

    weights sum to the surface measure of the sphere (2*pi for d=2,
    4*pi for d=3); all nodes are unit vectors.
    """

    dim: int
    nodes: np.ndarray    # (Q, d)
    weights: np.ndarray  # (Q,)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]


def build_quadrature(d: int, resolution: int) -> SphereQuadrature:
    """Product quadrature on S^{d-1}.

    d=2: ``resolution`` equispaced angles, each weighted 2*pi/resolution.
    d=3: ``resolution`` Gauss-Legendre nodes in the polar cosine crossed
    with ``2*resolution`` uniform azimuths.
    """
    if resolution < 4:
        raise ValueError(f"resolution must be >= 4, got {resolution}")
    if d == 2:
        theta = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        weights = np.full(resolution, 2.0 * np.pi / resolution)
    elif d == 3:
        x, u = np.polynomial.legendre.leggauss(resolution)
        m = 2 * resolution
        phi = 2.0 * np.pi * np.arange(m) / m
        st = np.sqrt(1.0 - x**2)
        nodes = np.empty((resolution * m, 3))
        weights = np.empty(resolution * m)
        for i in range(resolution):
            sl = slice(i * m, (i + 1) * m)
            nodes[sl, 0] = st[i] * np.cos(phi)
            nodes[sl, 1] = st[i] * np.sin(phi)
            nodes[sl, 2] = x[i]
            weights[sl] = u[i] * (2.0 * np.pi / m)
    else:
        raise UnsupportedDimension(f"d must be 2 or 3, got {d}")
    return SphereQuadrature(d, nodes, weights)


@dataclass
class KernelSpec:
    """Angular kernel g on [-1, 1] with its normalization state.

    ``profile`` is the raw user callable; after :func:`normalize_kernel`
    the effective kernel is ``normalization_constant * profile`` and
    ``g`` evaluates it directly.  A cached table of TABLE_SIZE+1 samples
    supports the numba-side operators, and inverse-CDF tables (built
    lazily) drive the direction sampler.
    """

    dim: int
    profile: Callable[[np.ndarray], np.ndarray]
    normalization_constant: float = float("nan")
    name: str = "custom"
    _table: np.ndarray | None = field(default=None, repr=False)
    _sampler_table: np.ndarray | None = field(default=None, repr=False)

    @property
    def normalized(self) -> bool:
        return np.isfinite(self.normalization_constant)

    def g(self, eta: np.ndarray) -> np.ndarray:
        """Normalized kernel value(s); requires prior normalization."""
        if not self.normalized:
            raise KernelNormalizationError("kernel has not been normalized")
        return self.normalization_constant * np.asarray(self.profile(np.asarray(eta)), dtype=float)

    def table(self) -> np.ndarray:
        """Cached samples of g on the uniform grid over [-1, 1]."""
        if self._table is None:
            eta = np.linspace(-1.0, 1.0, TABLE_SIZE + 1)
            self._table = self.g(eta)
        return self._table

    def sampler_table(self) -> np.ndarray:
        """Dense inverse-CDF table s(u) of the polar cosine, u uniform.

        For d=3 the polar cosine s = u_hat . n has density proportional
        to g(s); for d=2 the angle alpha in [0, pi] has density
        proportional to g(cos alpha) and the table stores cos(alpha(u)).
        """
        if self._sampler_table is None:
            self._sampler_table = _build_sampler_table(self)
        return self._sampler_table


def _build_sampler_table(spec: KernelSpec) -> np.ndarray:
    n = TABLE_SIZE
    if spec.dim == 3:
        s = np.linspace(-1.0, 1.0, n + 1)
        dens = spec.g(s)
    else:
        alpha = np.linspace(0.0, np.pi, n + 1)
        dens = spec.g(np.cos(alpha))
        s = alpha  # parametrize by angle; convert to cosine at the end
    dens = np.clip(dens, 0.0, None)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(s))])
    if cdf[-1] <= 0 or not np.isfinite(cdf[-1]):
        raise KernelNormalizationError("kernel density integrates to zero")
    cdf /= cdf[-1]
    # keep strictly increasing knots only (profiles may vanish on intervals)
    keep = np.concatenate([[True], np.diff(cdf) > 1e-15])
    inv = PchipInterpolator(cdf[keep], s[keep])
    u = np.linspace(0.0, 1.0, n + 1)
    out = inv(u)
    if spec.dim == 2:
        out = np.cos(out)
    return np.clip(out, -1.0, 1.0)


def isotropic_kernel(d: int) -> KernelSpec:
    return KernelSpec(d, lambda eta: np.ones_like(np.asarray(eta, dtype=float)), name="isotropic")


def bump_kernel(d: int, center: float, width: float) -> KernelSpec:
    """Gaussian bump exp(-((eta-center)/width)^2) on [-1, 1]."""
    c, w = float(center), float(width)
    return KernelSpec(d, lambda eta: np.exp(-(((np.asarray(eta, dtype=float) - c) / w) ** 2)),
                      name=f"bump({c},{w})")


def tabulated_kernel(d: int, eta: np.ndarray, values: np.ndarray, name: str = "tabulated") -> KernelSpec:
    """Kernel from sampled (eta, g) pairs, linearly interpolated."""
    eta = np.asarray(eta, dtype=float)
    values = np.asarray(values, dtype=float)
    if eta.ndim != 1 or eta.shape != values.shape:
        raise ValueError("eta and values must be matching 1-D arrays")
    order = np.argsort(eta)
    eta, values = eta[order], values[order]
    if np.any(values < 0):
        raise ValueError("kernel table has negative entries")
    return KernelSpec(d, lambda x: np.interp(np.asarray(x, dtype=float), eta, values), name=name)


def kernel_from_csv(d: int, path: str) -> KernelSpec:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return tabulated_kernel(d, data[:, 0], data[:, 1], name=f"csv:{path}")


def normalize_kernel(spec: KernelSpec, quad: SphereQuadrature) -> KernelSpec:
    """Rescale the profile so the quadrature sum of g(e . n) equals one.

    Idempotent: renormalizing an already normalized spec is a no-op up
    to round-off.  Raises if the quadrature sum is zero or non-finite
    (the non-cutoff case is rejected here).
    """
    if spec.dim != quad.dim:
        raise UnsupportedDimension("kernel and quadrature dimensions differ")
    e = np.zeros(spec.dim)
    e[0] = 1.0
    raw = np.asarray(spec.profile(quad.nodes @ e), dtype=float)
    if np.any(~np.isfinite(raw)) or np.any(raw < 0):
        raise KernelNormalizationError("kernel profile must be finite and nonnegative")
    total = float(quad.weights @ raw)
    if not np.isfinite(total) or total <= 0.0:
        raise KernelNormalizationError(f"kernel quadrature sum is {total}")
    return KernelSpec(spec.dim, spec.profile, normalization_constant=1.0 / total, name=spec.name)


def _check_direction_independence(spec: KernelSpec, quad: SphereQuadrature,
                                  integrand: Callable[[np.ndarray], np.ndarray],
                                  n_dirs: int, tol: float) -> float:
    """Spread of the quadrature sum over random directions; raises if large."""
    rng = np.random.default_rng(0)
    vals = []
    for _ in range(n_dirs):
        w = rng.standard_normal(spec.dim)
        w /= np.linalg.norm(w)
        s = quad.nodes @ w
        vals.append(float(quad.weights @ integrand(s)))
    spread = max(vals) - min(vals)
    if spread > tol:
        raise ValueError(
            f"direction dependence {spread:.3e} exceeds {tol:.1e}; "
            "quadrature resolution is too low for this kernel")
    return spread


def q_coefficient(spec: KernelSpec, quad: SphereQuadrature, *, check_dirs: int = 3,
                  dir_tol: float = 1e-10) -> float:
    """Traceless-tensor coefficient q = int g(e.n) (1 - (e.n)^2) dn.

    Direction independence is verified over ``check_dirs`` random unit
    vectors (spread must stay below ``dir_tol``).
    """
    if not spec.normalized:
        raise KernelNormalizationError("normalize the kernel first")
    integrand = lambda s: spec.g(s) * (1.0 - s**2)
    if check_dirs:
        _check_direction_independence(spec, quad, integrand, check_dirs, dir_tol)
    e = np.zeros(spec.dim)
    e[0] = 1.0
    s = quad.nodes @ e
    return float(quad.weights @ integrand(s))


def lambda_p(spec: KernelSpec, quad: SphereQuadrature, p: float, *, check_dirs: int = 3,
             dir_tol: float = 1e-10) -> float:
    """Eigenvalue lambda(p) of the linearized collision operator on |k|^p.

    lambda(p) = int g(e.n) [1 - ((1+e.n)/2)^{p/2} - ((1-e.n)/2)^{p/2}] dn.
    Monotone increasing in p with lambda(0) = -1 and lambda(2) = 0 for
    every normalized kernel.
    """
    if p < 0:
        raise ValueError(f"p must be nonnegative, got {p}")
    if not spec.normalized:
        raise KernelNormalizationError("normalize the kernel first")
    half = 0.5 * p

    def integrand(s: np.ndarray) -> np.ndarray:
        sp = np.clip((1.0 + s) / 2.0, 0.0, 1.0)
        sm = np.clip((1.0 - s) / 2.0, 0.0, 1.0)
        return spec.g(s) * (1.0 - sp**half - sm**half)

    if check_dirs:
        _check_direction_independence(spec, quad, integrand, check_dirs, dir_tol)
    e = np.zeros(spec.dim)
    e[0] = 1.0
    s = quad.nodes @ e
    return float(quad.weights @ integrand(s))


def orthonormal_frame(u_hat: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal vectors spanning the plane normal to u_hat.

    Returns shape (d-1, d).
    """
    u = np.asarray(u_hat, dtype=float)
    d = u.shape[0]
    if d == 2:
        return np.array([[-u[1], u[0]]])
    # pick the coordinate axis least aligned with u
    a = np.zeros(3)
    a[np.argmin(np.abs(u))] = 1.0
    t1 = np.cross(u, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(u, t1)
    return np.stack([t1, t2])


def sample_direction(spec: KernelSpec, rng: np.random.Generator, u_hat: np.ndarray) -> np.ndarray:
    """Draw one n on S^{d-1} with density g(u_hat . n)."""
    return sample_directions(spec, rng, np.asarray(u_hat, dtype=float)[None, :])[0]


def sample_directions(spec: KernelSpec, rng: np.random.Generator, u_hats: np.ndarray) -> np.ndarray:
    """Vectorized direction sampling: one n per row of ``u_hats``.

    The polar cosine comes from the precomputed inverse-CDF table
    (linear interpolation on TABLE_SIZE knots, uniform in the CDF); the
    azimuth about u_hat is uniform.  Rows with zero u_hat must be
    resolved by the caller before entry (degenerate relative velocity).
    """
    u_hats = np.asarray(u_hats, dtype=float)
    m, d = u_hats.shape
    table = spec.sampler_table()
    u = rng.random(m)
    s = np.interp(u * TABLE_SIZE, np.arange(TABLE_SIZE + 1), table)
    r = np.sqrt(np.clip(1.0 - s**2, 0.0, None))
    if d == 3:
        # tangent frame: cross with the axis least aligned with each u_hat
        a = np.zeros_like(u_hats)
        a[np.arange(m), np.argmin(np.abs(u_hats), axis=1)] = 1.0
        t1 = np.cross(u_hats, a)
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(u_hats, t1)
        psi = 2.0 * np.pi * rng.random(m)
        return (s[:, None] * u_hats
                + (r * np.cos(psi))[:, None] * t1 + (r * np.sin(psi))[:, None] * t2)
    sign = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    t = np.stack([-u_hats[:, 1], u_hats[:, 0]], axis=1)
    return s[:, None] * u_hats + (sign * r)[:, None] * t


def kernel_from_name(d: int, selector: str | dict) -> KernelSpec:
    """Resolve a CLI kernel selector: "isotropic", {"name": "bump", ...}
    or {"csv": path}."""
    if isinstance(selector, str):
        if selector == "isotropic":
            return isotropic_kernel(d)
        raise ValueError(f"unknown kernel name {selector!r}")
    name = selector.get("name")
    if name == "isotropic":
        return isotropic_kernel(d)
    if name == "bump":
        return bump_kernel(d, selector["center"], selector["width"])
    if "csv" in selector:
        return kernel_from_csv(d, selector["csv"])
    raise ValueError(f"cannot resolve kernel selector {selector!r}")
