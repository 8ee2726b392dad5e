"""Sampled characteristic functions on a truncated Cartesian k-grid.

A grid stores complex values at the nodes (i - n//2) * h per axis with
h = 2 R / n, so k = 0 is always a node and the largest node is R - h.
Evaluation between nodes goes through a reference weight:

* characteristic grids carry a Gaussian-phase reference
  exp(-i U.k - k.B k / 2) built from the field's first/second moments
  (B is the tail matrix of the serialized container);
* comparison fields carry the power weight |k|^p;
* plain grids interpolate raw values.

Lookups interpolate the ratio value/weight with multilinear (hence
nonnegative) weights; this is exact whenever the field is proportional
to its reference and keeps pointwise comparison structure between grids
sharing a reference.  An optional analytic core model (phase x Gaussian
x polynomial) replaces interpolation inside a small ball at the origin
where cell interpolation cannot resolve the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..errors import GeometryMismatch, InvariantViolation
from . import _nb

EXP_CLIP = _nb.EXP_CLIP


def _as_exps_coeffs(d: int, terms: Sequence[tuple[Sequence[int], complex]] | None):
    """Normalize a polynomial term list to (exps, coeffs) arrays; default 1."""
    if not terms:
        return np.zeros((1, d), dtype=np.int64), np.ones(1, dtype=np.complex128)
    exps = np.array([t[0] for t in terms], dtype=np.int64).reshape(-1, d)
    coeffs = np.array([t[1] for t in terms], dtype=np.complex128)
    return exps, coeffs


@dataclass(frozen=True)
class GaussPolyModel:
    """Analytic model exp(-i U.k - k.B k/2) * P(k) with P a polynomial.

    P defaults to the constant 1.  Used both as near-origin core model
    and, with P = 1, as the reference weight of characteristic grids.
    """

    U: np.ndarray
    B: np.ndarray
    exps: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def make(cls, U, B, poly_terms=None) -> "GaussPolyModel":
        U = np.asarray(U, dtype=float).copy()
        B = np.asarray(B, dtype=float).copy()
        d = U.shape[0]
        exps, coeffs = _as_exps_coeffs(d, poly_terms)
        return cls(U=U, B=B, exps=exps, coeffs=coeffs)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        quad = np.einsum("mi,ij,mj->m", pts, self.B, pts)
        z = np.exp(np.clip(-0.5 * quad, -EXP_CLIP, None)
                   - 1j * (pts @ self.U))
        poly = np.zeros(pts.shape[0], dtype=complex)
        for e, c in zip(self.exps, self.coeffs):
            poly += c * np.prod(pts ** e[None, :], axis=1)
        return z * poly


@dataclass(frozen=True)
class AbsDiffModel:
    """Core model |m1(k) - m2(k)| for absolute-difference grids."""

    a: GaussPolyModel
    b: GaussPolyModel

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.abs(self.a(pts) - self.b(pts)).astype(complex)


@dataclass(frozen=True)
class CharFnGrid:
    """Complex field on the Cartesian k-grid; see module docstring.

    ref_kind selects the evaluation weight: "char" (Gaussian phase with
    parameters ref_shift/b_tail), "power" (|k|^ref_power) or "plain".
    Values are treated as immutable; operators build new grids.
    """

    dim: int
    n_axis: int
    r_max: float
    values: np.ndarray
    ref_kind: str = "plain"
    ref_shift: np.ndarray | None = None
    b_tail: np.ndarray | None = None
    ref_power: float = 0.0
    core: GaussPolyModel | AbsDiffModel | None = None
    core_radius: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- geometry -----------------------------------------------------------

    @property
    def h(self) -> float:
        return 2.0 * self.r_max / self.n_axis

    @property
    def half(self) -> int:
        return self.n_axis // 2

    def axis(self) -> np.ndarray:
        return (np.arange(self.n_axis) - self.half) * self.h

    def node_coords(self) -> np.ndarray:
        """(N, d) coordinates in node (row-major) order."""
        if "coords" not in self._cache:
            ax = self.axis()
            mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
            self._cache["coords"] = np.stack([m.ravel() for m in mesh], axis=1)
        return self._cache["coords"]

    def node_norms(self) -> np.ndarray:
        if "norms" not in self._cache:
            self._cache["norms"] = np.linalg.norm(self.node_coords(), axis=1)
        return self._cache["norms"]

    @property
    def origin_index(self) -> tuple[int, ...]:
        return (self.half,) * self.dim

    def value_at_origin(self) -> complex:
        return complex(self.values[self.origin_index])

    def same_geometry(self, other: "CharFnGrid") -> bool:
        return (self.dim == other.dim and self.n_axis == other.n_axis
                and self.r_max == other.r_max)

    # -- reference weight ----------------------------------------------------

    def ref_weight(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.ref_kind == "char":
            quad = np.einsum("mi,ij,mj->m", pts, self.b_tail, pts)
            return np.exp(np.clip(-0.5 * quad, -EXP_CLIP, None) - 1j * (pts @ self.ref_shift))
        if self.ref_kind == "power":
            r2 = np.einsum("mi,mi->m", pts, pts)
            return (r2 ** (0.5 * self.ref_power)).astype(complex)
        return np.ones(pts.shape[0], dtype=complex)

    def ratio(self) -> np.ndarray:
        """Flattened values / ref_weight(nodes); cached."""
        if "ratio" not in self._cache:
            flat = self.values.ravel()
            if self.ref_kind == "plain":
                r = flat.astype(np.complex128).copy()
            else:
                w = self.ref_weight(self.node_coords())
                if self.ref_kind == "power":
                    r = np.zeros_like(flat, dtype=np.complex128)
                    nz = w != 0
                    r[nz] = flat[nz] / w[nz]
                    # the origin has no ratio; use the mean of the axis
                    # neighbors so sub-cell lookups stay bounded
                    oi = np.ravel_multi_index(self.origin_index, self.values.shape)
                    neigh = []
                    for axis_ in range(self.dim):
                        for step in (-1, 1):
                            idx = list(self.origin_index)
                            idx[axis_] += step
                            neigh.append(r[np.ravel_multi_index(tuple(idx), self.values.shape)])
                    r[oi] = np.mean(neigh)
                else:
                    r = flat / w
            self._cache["ratio"] = np.ascontiguousarray(r, dtype=np.complex128)
        return self._cache["ratio"]

    def packed(self) -> tuple:
        """Numba-ready argument pack (geometry, reference, core)."""
        if "packed" not in self._cache:
            d = self.dim
            kind = {"plain": _nb.REF_PLAIN, "char": _nb.REF_CHAR, "power": _nb.REF_POWER}[self.ref_kind]
            rU = np.zeros(d) if self.ref_shift is None else np.asarray(self.ref_shift, dtype=float)
            rB = np.zeros((d, d)) if self.b_tail is None else np.asarray(self.b_tail, dtype=float)
            if self.core is None:
                core_kind = _nb.CORE_NONE
                models = []
            elif isinstance(self.core, AbsDiffModel):
                core_kind = _nb.CORE_DIFF
                models = [self.core.a, self.core.b]
            else:
                core_kind = _nb.CORE_MODEL
                models = [self.core]
            mt = max([1] + [m.exps.shape[0] for m in models])
            cU = np.zeros((2, d))
            cB = np.zeros((2, d, d))
            cexps = np.zeros((2, mt, d), dtype=np.int64)
            ccoeffs = np.zeros((2, mt), dtype=np.complex128)
            cnt = np.zeros(2, dtype=np.int64)
            for s, m in enumerate(models):
                cU[s] = m.U
                cB[s] = m.B
                k = m.exps.shape[0]
                cexps[s, :k] = m.exps
                ccoeffs[s, :k] = m.coeffs
                cnt[s] = k
            self._cache["packed"] = (
                np.int64(self.n_axis), np.float64(self.h), np.int64(self.half),
                np.int64(kind), rU, rB, np.float64(self.ref_power),
                np.int64(core_kind), cU, cB, cexps, ccoeffs, cnt,
                np.float64(self.core_radius ** 2),
            )
        return self._cache["packed"]

    def with_values(self, values: np.ndarray, **overrides) -> "CharFnGrid":
        """New grid with the same geometry/reference and fresh values."""
        values = np.ascontiguousarray(values, dtype=np.complex128).reshape(self.values.shape)
        out = replace(self, values=values, _cache={}, **overrides)
        return out

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], dim: int = 3,
                      n_axis: int = 64, r_max: float = 8.0, *,
                      ref_shift=None, b_tail=None, ref_power: float | None = None,
                      core=None, core_radius: float = 0.0) -> "CharFnGrid":
        stub = cls(dim=dim, n_axis=n_axis, r_max=r_max,
                   values=np.zeros((n_axis,) * dim, dtype=np.complex128))
        vals = np.asarray(fn(stub.node_coords()), dtype=np.complex128).reshape((n_axis,) * dim)
        if ref_power is not None:
            return cls(dim=dim, n_axis=n_axis, r_max=r_max, values=vals,
                       ref_kind="power", ref_power=float(ref_power),
                       core=core, core_radius=core_radius)
        if b_tail is not None:
            shift = np.zeros(dim) if ref_shift is None else np.asarray(ref_shift, dtype=float)
            return cls(dim=dim, n_axis=n_axis, r_max=r_max, values=vals,
                       ref_kind="char", ref_shift=shift,
                       b_tail=np.asarray(b_tail, dtype=float),
                       core=core, core_radius=core_radius)
        return cls(dim=dim, n_axis=n_axis, r_max=r_max, values=vals,
                   core=core, core_radius=core_radius)

    @classmethod
    def gaussian(cls, B: np.ndarray, dim: int = 3, n_axis: int = 64, r_max: float = 8.0,
                 *, shift=None, core_radius: float = 0.0) -> "CharFnGrid":
        """exp(-i U.k - k.B k/2): reference and core are the field itself."""
        B = np.asarray(B, dtype=float)
        U = np.zeros(dim) if shift is None else np.asarray(shift, dtype=float)
        model = GaussPolyModel.make(U, B)
        g = cls.from_callable(lambda pts: model(pts), dim, n_axis, r_max,
                              ref_shift=U, b_tail=B,
                              core=model if core_radius > 0 else None,
                              core_radius=core_radius)
        return g

    @classmethod
    def power(cls, p: float, dim: int = 3, n_axis: int = 64, r_max: float = 8.0) -> "CharFnGrid":
        """|k|^p with the matching power reference (comparison fields)."""
        return cls.from_callable(
            lambda pts: (np.einsum("mi,mi->m", pts, pts) ** (0.5 * p)).astype(complex),
            dim, n_axis, r_max, ref_power=p)


def abs_difference(g1: CharFnGrid, g2: CharFnGrid) -> CharFnGrid:
    """|g1 - g2| as a nonnegative grid sharing the pair's reference.

    Requires identical geometry and identical references: with a common
    reference the multilinear lookup of this grid dominates the modulus
    of the lookup difference node-for-node, which is what the pointwise
    Lipschitz bound and the comparison principle test.
    """
    require_same_reference(g1, g2)
    vals = np.abs(g1.values - g2.values).astype(np.complex128)
    core = None
    radius = 0.0
    if (g1.core is None) != (g2.core is None):
        raise GeometryMismatch("both grids must carry a core model, or neither")
    if g1.core is not None:
        if g1.core_radius != g2.core_radius:
            raise GeometryMismatch("core radii differ")
        core = AbsDiffModel(g1.core, g2.core)
        radius = g1.core_radius
    b = None if g1.b_tail is None else g1.b_tail.copy()
    return CharFnGrid(dim=g1.dim, n_axis=g1.n_axis, r_max=g1.r_max, values=vals,
                      ref_kind="char" if g1.ref_kind == "char" else "plain",
                      ref_shift=None if b is None else np.zeros(g1.dim),
                      b_tail=b, core=core, core_radius=radius)


def require_same_reference(g1: CharFnGrid, g2: CharFnGrid) -> None:
    if not g1.same_geometry(g2):
        raise GeometryMismatch("grids have different geometry")
    if g1.ref_kind != g2.ref_kind:
        raise GeometryMismatch("grids have different reference kinds")
    if g1.ref_kind == "char":
        if not (np.array_equal(g1.ref_shift, g2.ref_shift)
                and np.array_equal(g1.b_tail, g2.b_tail)):
            raise GeometryMismatch("grids have different Gaussian references")
    elif g1.ref_kind == "power" and g1.ref_power != g2.ref_power:
        raise GeometryMismatch("grids have different power references")


def rebase(grid: CharFnGrid, *, ref_shift=None, b_tail=None) -> CharFnGrid:
    """Same values, new Gaussian reference (for common-reference comparisons)."""
    d = grid.dim
    shift = np.zeros(d) if ref_shift is None else np.asarray(ref_shift, dtype=float)
    return CharFnGrid(dim=d, n_axis=grid.n_axis, r_max=grid.r_max,
                      values=grid.values, ref_kind="char", ref_shift=shift,
                      b_tail=np.asarray(b_tail, dtype=float),
                      core=grid.core, core_radius=grid.core_radius)


# -- invariants and metrics ---------------------------------------------------

def check_char_invariants(grid: CharFnGrid, *, mod_tol: float = 1e-9,
                          herm_tol: float = 1e-9, where: str = "") -> None:
    """Characteristic-function invariants: value(0)=1, |values|<=1, Hermitian.

    Hermitian symmetry is checked on the sub-grid where -k is also a
    node (the -R boundary layer has no mirror node).
    """
    v0 = grid.value_at_origin()
    if v0 != 1.0 + 0.0j:
        raise InvariantViolation(f"value at k=0 is {v0}, not 1 {where}")
    m = float(np.abs(grid.values).max())
    if m > 1.0 + mod_tol:
        raise InvariantViolation(f"max |value| = {m} exceeds 1 + {mod_tol} {where}")
    sub = grid.values[(slice(1, None),) * grid.dim]
    herm = float(np.abs(sub - np.conj(sub[(slice(None, None, -1),) * grid.dim])).max())
    if herm > herm_tol:
        raise InvariantViolation(f"Hermitian asymmetry {herm} exceeds {herm_tol} {where}")


def fp_distance(g1: CharFnGrid, g2: CharFnGrid, p: float) -> float:
    """sup over nodes k != 0 of |g1 - g2| / |k|^p (profile-space metric)."""
    if not g1.same_geometry(g2):
        raise GeometryMismatch("grids have different geometry")
    norms = g1.node_norms()
    diff = np.abs(g1.values.ravel() - g2.values.ravel())
    mask = norms > 0
    return float((diff[mask] / norms[mask] ** p).max())


def tangency_defect(g1: CharFnGrid, g2: CharFnGrid, n_order: int):
    """Shell profile omega(r) = max_{|k| = r} |g1 - g2| / |k|^n_order.

    Returns (radii, omega) over the distinct node radii; diagnostic for
    omega -> 0 as r -> 0 when moments agree up to order n_order.
    """
    if not g1.same_geometry(g2):
        raise GeometryMismatch("grids have different geometry")
    norms = g1.node_norms()
    diff = np.abs(g1.values.ravel() - g2.values.ravel())
    mask = norms > 0
    r = np.round(norms[mask], 9)
    vals = diff[mask] / norms[mask] ** n_order
    radii, inv = np.unique(r, return_inverse=True)
    omega = np.zeros_like(radii)
    np.maximum.at(omega, inv, vals)
    return radii, omega
