"""Higher-order moment polynomials of the self-similar profile.

The Taylor blocks Q_l of the profile at k = 0 satisfy a triangular
linear system: for each degree l >= 3

    (I - L_l + (A_b k).grad) Q_l = K_l[{Q_j}_{j<l}],

where L_l is the linearized collision operator restricted to the
homogeneous polynomials of degree l and the source K_l couples lower
blocks through the collision splitting k -> k+, k-.  L_l and K_l are
assembled by evaluation and least-squares fit on random unit directions
(sphere quadrature supplies the n-integrals), the drift is assembled
exactly on monomials, and each degree is a small dense solve.

A compatible probability density is reconstructed from the resulting
moments as a truncated-Hermite perturbation of the reference Gaussian
with characteristic function exp(-|k|^2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedFit, NegativeDensity, SingularGram, SingularSystem
from .kernels import KernelSpec, SphereQuadrature, build_quadrature

COND_LIMIT = 1e6


def multi_indices(d: int, degree: int) -> list[tuple[int, ...]]:
    """All multi-indices with |alpha| = degree, graded-lex order."""
    out = []
    for c in itertools.combinations_with_replacement(range(d), degree):
        alpha = [0] * d
        for i in c:
            alpha[i] += 1
        out.append(tuple(alpha))
    return sorted(set(out), reverse=True)


def hom_dim(d: int, degree: int) -> int:
    return math.comb(degree + d - 1, d - 1)


@dataclass
class HomPoly:
    """Homogeneous polynomial of fixed degree, dense complex coefficients."""

    dim: int
    degree: int
    coeffs: np.ndarray  # aligned with multi_indices(dim, degree)
    _exps: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def zero(cls, d: int, degree: int) -> "HomPoly":
        return cls(d, degree, np.zeros(hom_dim(d, degree), dtype=complex))

    @classmethod
    def from_terms(cls, d: int, degree: int, terms: dict) -> "HomPoly":
        idx = {a: i for i, a in enumerate(multi_indices(d, degree))}
        c = np.zeros(hom_dim(d, degree), dtype=complex)
        for alpha, v in terms.items():
            c[idx[tuple(alpha)]] = v
        return cls(d, degree, c)

    def exps(self) -> np.ndarray:
        if self._exps is None:
            self._exps = np.array(multi_indices(self.dim, self.degree), dtype=np.int64)
        return self._exps

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return poly_eval(self, pts)

    def __add__(self, other: "HomPoly") -> "HomPoly":
        assert (self.dim, self.degree) == (other.dim, other.degree)
        return HomPoly(self.dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "HomPoly") -> "HomPoly":
        assert (self.dim, self.degree) == (other.dim, other.degree)
        return HomPoly(self.dim, self.degree, self.coeffs - other.coeffs)

    def __mul__(self, other):
        if np.isscalar(other):
            return HomPoly(self.dim, self.degree, self.coeffs * other)
        prod_terms: dict = {}
        idx_a = multi_indices(self.dim, self.degree)
        idx_b = multi_indices(other.dim, other.degree)
        for a, ca in zip(idx_a, self.coeffs):
            if ca == 0:
                continue
            for b, cb in zip(idx_b, other.coeffs):
                if cb == 0:
                    continue
                g = tuple(x + y for x, y in zip(a, b))
                prod_terms[g] = prod_terms.get(g, 0) + ca * cb
        return HomPoly.from_terms(self.dim, self.degree + other.degree, prod_terms)

    def sup_norm(self, n_dirs: int = 4096, seed: int = 11) -> float:
        """sup over the unit sphere, estimated on a dense direction set."""
        dirs = _unit_directions(self.dim, n_dirs, seed)
        return float(np.abs(self(dirs)).max())


def poly_eval(P: HomPoly, pts: np.ndarray) -> np.ndarray:
    """P(k) = sum_alpha c_alpha k^alpha, vectorized over rows of pts."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    vals = np.zeros(pts.shape[0], dtype=complex)
    for e, c in zip(P.exps(), P.coeffs):
        if c == 0:
            continue
        vals += c * np.prod(pts ** e[None, :], axis=1)
    return vals


def radial_power(d: int, degree: int) -> HomPoly:
    """|k|^degree as a HomPoly (degree must be even)."""
    if degree % 2:
        raise ValueError("radial powers need even degree")
    half = degree // 2
    terms: dict = {}
    for combo in itertools.combinations_with_replacement(range(d), half):
        alpha = [0] * d
        for i in combo:
            alpha[i] += 2
        mult = math.factorial(half)
        for i in range(d):
            mult //= math.factorial(combo.count(i))
        terms[tuple(alpha)] = terms.get(tuple(alpha), 0) + mult
    return HomPoly.from_terms(d, degree, terms)


def _unit_directions(d: int, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _vandermonde(d: int, degree: int, dirs: np.ndarray) -> np.ndarray:
    exps = np.array(multi_indices(d, degree), dtype=np.int64)
    return np.stack([np.prod(dirs ** e[None, :], axis=1) for e in exps], axis=1)


def _fit_coeffs(d: int, degree: int, dirs: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Least-squares recovery of polynomial coefficients from point values."""
    V = _vandermonde(d, degree, dirs)
    cond = np.linalg.cond(V)
    if cond >= COND_LIMIT:
        raise IllConditionedFit(f"coefficient recovery condition number {cond:.3e}")
    coeffs, *_ = np.linalg.lstsq(V, values, rcond=None)
    return coeffs


def _sample_dirs(d: int, degree: int, n_samples: int | None, attempt: int) -> np.ndarray:
    n = n_samples or 2 * hom_dim(d, degree)
    return _unit_directions(d, n, seed=23 + degree + 1000 * attempt)


def _eval_L(P_list: list[HomPoly], dirs: np.ndarray, kernel: KernelSpec,
            quad: SphereQuadrature) -> np.ndarray:
    """Values of L P at unit directions for each basis polynomial P."""
    g = kernel.g(np.clip(dirs @ quad.nodes.T, -1.0, 1.0))        # (S, Q)
    out = np.empty((dirs.shape[0], len(P_list)), dtype=complex)
    kp = 0.5 * (dirs[:, None, :] + quad.nodes[None, :, :])       # (S, Q, d)
    km = dirs[:, None, :] - kp
    flat_p = kp.reshape(-1, dirs.shape[1])
    flat_m = km.reshape(-1, dirs.shape[1])
    for j, P in enumerate(P_list):
        vp = P(flat_p).reshape(g.shape)
        vm = P(flat_m).reshape(g.shape)
        out[:, j] = np.sum(quad.weights[None, :] * g * (vp + vm), axis=1)
    return out


def assemble_L_ell(d: int, ell: int, kernel: KernelSpec, quad: SphereQuadrature,
                   n_samples: int | None = None) -> tuple[np.ndarray, float]:
    """Dense matrix of the degree-l restriction of L in the monomial basis.

    Returns (matrix, fit condition number).  Retries the direction sample
    a few times before raising IllConditionedFit.
    """
    basis = [HomPoly.from_terms(d, ell, {a: 1.0}) for a in multi_indices(d, ell)]
    last = None
    for attempt in range(3):
        dirs = _sample_dirs(d, ell, n_samples, attempt)
        try:
            vals = _eval_L(basis, dirs, kernel, quad)
            V = _vandermonde(d, ell, dirs)
            cond = np.linalg.cond(V)
            if cond >= COND_LIMIT:
                raise IllConditionedFit(f"condition number {cond:.3e}")
            mat, *_ = np.linalg.lstsq(V, vals, rcond=None)
            return mat, float(cond)
        except IllConditionedFit as exc:  # resample and retry
            last = exc
    raise last


def assemble_drift(d: int, ell: int, A_beta: np.ndarray) -> np.ndarray:
    """Exact matrix of (A_b k).grad on degree-l monomials.

    (A_b k).grad k^alpha = sum_j alpha_j (A_b k)_j k^{alpha - e_j}; each
    term re-expands into monomials of the same degree.
    """
    A_beta = np.asarray(A_beta, dtype=float)
    idx = {a: i for i, a in enumerate(multi_indices(d, ell))}
    m = len(idx)
    out = np.zeros((m, m))
    for a, col in idx.items():
        for j in range(d):
            if a[j] == 0:
                continue
            for r in range(d):
                if A_beta[j, r] == 0.0:
                    continue
                b = list(a)
                b[j] -= 1
                b[r] += 1
                out[idx[tuple(b)], col] += a[j] * A_beta[j, r]
    return out


def k_source(Qs: dict[int, HomPoly], ell: int, kernel: KernelSpec,
             quad: SphereQuadrature, n_samples: int | None = None) -> HomPoly:
    """Collision source K_l = sum_{m+j=l, m,j>=2} int g Q_j(k+) Q_m(k-) dn.

    Empty for l <= 3 (no admissible split), which keeps the odd block Q_3
    driven purely by the drift of Q_2... (Q_3 solves a homogeneous system
    unless the drift couples it; K_3 = 0 structurally).
    """
    d = kernel.dim
    pairs = [(j, ell - j) for j in range(2, ell - 1)]
    if not pairs:
        return HomPoly.zero(d, ell)
    last = None
    for attempt in range(3):
        dirs = _sample_dirs(d, ell, n_samples, attempt)
        g = kernel.g(np.clip(dirs @ quad.nodes.T, -1.0, 1.0))
        kp = 0.5 * (dirs[:, None, :] + quad.nodes[None, :, :])
        km = dirs[:, None, :] - kp
        flat_p = kp.reshape(-1, d)
        flat_m = km.reshape(-1, d)
        vals = np.zeros(dirs.shape[0], dtype=complex)
        for j, m in pairs:
            vp = Qs[j](flat_p).reshape(g.shape)
            vm = Qs[m](flat_m).reshape(g.shape)
            vals += np.sum(quad.weights[None, :] * g * vp * vm, axis=1)
        try:
            return HomPoly(d, ell, _fit_coeffs(d, ell, dirs, vals))
        except IllConditionedFit as exc:
            last = exc
    raise last


@dataclass
class HierarchyResult:
    Q: dict[int, HomPoly]
    residuals: dict[int, float]
    condition_numbers: dict[int, float]
    resolvent_norms: dict[int, float]


def solve_hierarchy(A: np.ndarray, q: float, beta: float, N: np.ndarray, M: int,
                    kernel: KernelSpec, quad: SphereQuadrature, *,
                    n_samples: int | None = None) -> HierarchyResult:
    """Solve the moment blocks Q_3..Q_M given the dominant pair (beta, N).

    Q_2 = -N:k k/2 is fixed by the eigenpair; each higher degree is a
    dense solve of (I - L_l + drift) Q_l = K_l in increasing order.
    Residuals are reported in the sup-over-sphere norm relative to K_l,
    and the resolvent norm of (I - L_l + drift) is estimated by random
    sampling for the hierarchy bound diagnostics.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if M > 8:
        raise ValueError("hierarchy degree capped at 8")
    A_beta = A + beta * np.eye(d)
    q2_terms = {}
    for i in range(d):
        for j in range(d):
            a = [0] * d
            a[i] += 1
            a[j] += 1
            q2_terms[tuple(a)] = q2_terms.get(tuple(a), 0.0) - 0.5 * N[i, j]
    Qs = {2: HomPoly.from_terms(d, 2, q2_terms)}
    residuals: dict[int, float] = {}
    conds: dict[int, float] = {}
    resolvents: dict[int, float] = {}
    rng = np.random.default_rng(5)
    for ell in range(3, M + 1):
        L_mat, cond = assemble_L_ell(d, ell, kernel, quad, n_samples)
        D_mat = assemble_drift(d, ell, A_beta)
        sys_mat = np.eye(L_mat.shape[0]) - L_mat + D_mat
        K = k_source(Qs, ell, kernel, quad, n_samples)
        try:
            sol = np.linalg.solve(sys_mat, K.coeffs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"degree-{ell} hierarchy solve failed: {exc}") from exc
        if not np.all(np.isfinite(sol)):
            raise SingularSystem(f"degree-{ell} hierarchy solve returned non-finite values")
        Q = HomPoly(d, ell, sol)
        Qs[ell] = Q
        # residual in the sup norm, relative to the source scale
        dirs = _unit_directions(d, 2048, seed=91 + ell)
        lhs = (Q(dirs) - HomPoly(d, ell, L_mat @ Q.coeffs)(dirs)
               + HomPoly(d, ell, D_mat @ Q.coeffs)(dirs))
        knorm = max(float(np.abs(K(dirs)).max()), 1e-300)
        residuals[ell] = float(np.abs(lhs - K(dirs)).max()) / knorm if knorm > 1e-299 else 0.0
        conds[ell] = cond
        # resolvent norm estimate over random unit-coefficient polynomials
        inv = np.linalg.inv(sys_mat)
        best = 0.0
        for _ in range(64):
            c = rng.standard_normal(inv.shape[0]) + 1j * rng.standard_normal(inv.shape[0])
            P_in = HomPoly(d, ell, c)
            P_out = HomPoly(d, ell, inv @ c)
            nin = P_in.sup_norm(1024, seed=3)
            if nin > 0:
                best = max(best, P_out.sup_norm(1024, seed=3) / nin)
        resolvents[ell] = best
    return HierarchyResult(Q=Qs, residuals=residuals, condition_numbers=conds,
                           resolvent_norms=resolvents)


def gaussian_q_bars(M: int, d: int) -> dict[int, HomPoly]:
    """Taylor blocks of exp(-|k|^2): Q_{2j} = (-1)^j |k|^{2j} / j!, odd zero."""
    out = {}
    for ell in range(2, M + 1):
        if ell % 2:
            out[ell] = HomPoly.zero(d, ell)
        else:
            j = ell // 2
            out[ell] = radial_power(d, ell) * ((-1.0) ** j / math.factorial(j))
    return out


def gaussian_baseline_check(M: int, kernel: KernelSpec, quad: SphereQuadrature) -> dict[int, float]:
    """Residuals of (I - L_l) Qbar_l = Kbar_l for the Gaussian exp(-|k|^2).

    Returns sup-norm residuals (relative to the Qbar_l scale) per even
    degree l in 4..M; degree 3 is zero = zero.
    """
    d = kernel.dim
    bars = gaussian_q_bars(M, d)
    out = {}
    dirs = _unit_directions(d, 2048, seed=17)
    for ell in range(4, M + 1, 2):
        L_mat, _ = assemble_L_ell(d, ell, kernel, quad)
        K = k_source(bars, ell, kernel, quad)
        lhs = bars[ell](dirs) - HomPoly(d, ell, L_mat @ bars[ell].coeffs)(dirs)
        scale = max(float(np.abs(bars[ell](dirs)).max()), 1e-30)
        out[ell] = float(np.abs(lhs - K(dirs)).max()) / scale
    return out


def norm_equivalence_constant(d: int, ell: int, *, n_polys: int = 10_000,
                              n_dirs: int = 2048, seed: int = 29) -> float:
    """Empirical constant C with sup_alpha |c_alpha| <= C sup_{|k|=1} |P|.

    Maximizes the ratio over random unit-coefficient polynomials; a
    certified lower bound on the true equivalence constant.
    """
    if ell > 8:
        raise ValueError("degree capped at 8")
    if ell == 0:
        return 1.0
    rng = np.random.default_rng(seed)
    dirs = _unit_directions(d, n_dirs, seed + 1)
    V = _vandermonde(d, ell, dirs)
    m = V.shape[1]
    c = rng.standard_normal((m, n_polys)) + 1j * rng.standard_normal((m, n_polys))
    c /= np.abs(c).max(axis=0, keepdims=True)
    sup = np.abs(V @ c).max(axis=0)
    return float((np.abs(c).max(axis=0) / sup).max())


# ---------------------------------------------------------------------------
# density reconstruction
# ---------------------------------------------------------------------------

def moments_from_polys(Qs: dict[int, HomPoly], M: int) -> dict[tuple[int, ...], float]:
    """Moments m_alpha from Q_l = (-i)^l sum m_alpha k^alpha / alpha!.

    m_0 = 1 and the first-order moments vanish (the phase has been
    removed); higher blocks must produce real moments.
    """
    d = Qs[2].dim
    out: dict[tuple[int, ...], float] = {tuple([0] * d): 1.0}
    for a in multi_indices(d, 1):
        out[a] = 0.0
    for ell in range(2, M + 1):
        Q = Qs[ell]
        for a, c in zip(multi_indices(d, ell), Q.coeffs):
            fact = np.prod([math.factorial(x) for x in a])
            m = c * fact * (1j ** ell)
            if abs(m.imag) > 1e-8 * max(1.0, abs(m.real)):
                raise ValueError(f"moment {a} is not real: {m}")
            out[a] = float(m.real)
    return out


def _hermite_coeff_triangle(n_max: int) -> np.ndarray:
    """c[n, k]: coefficient of x^k in the Hermite polynomial of degree n,
    orthonormal for the Gaussian weight with variance 2."""
    # probabilists' He_n via recurrence, then rescale: H_n(x) = He_n(x/s)/sqrt(n!)
    s = np.sqrt(2.0)
    he = np.zeros((n_max + 1, n_max + 1))
    he[0, 0] = 1.0
    if n_max >= 1:
        he[1, 1] = 1.0
    for n in range(1, n_max):
        he[n + 1, 1:] += he[n, :-1]
        he[n + 1, :] -= n * he[n - 1, :]
    out = np.zeros_like(he)
    for n in range(n_max + 1):
        norm = 1.0 / np.sqrt(math.factorial(n))
        for k in range(n + 1):
            out[n, k] = he[n, k] * norm / s**k
    return out


def _gaussian_1d_moments(n_max: int) -> np.ndarray:
    """E[x^n] for the centered Gaussian with variance 2."""
    out = np.zeros(n_max + 1)
    out[0] = 1.0
    for n in range(2, n_max + 1, 2):
        out[n] = out[n - 2] * 2.0 * (n - 1)
    return out


@dataclass
class DensityResult:
    xi: dict[tuple[int, ...], float]
    R: float
    M: int
    realized_moments: dict[tuple[int, ...], float]
    gram_condition: float

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self._evaluate(v)


def construct_compatible_density(Qs: dict[int, HomPoly], M: int, R: float, *,
                                 check_points: int = 200_000,
                                 seed: int = 41) -> DensityResult:
    """Probability density with the hierarchy's moments up to order M.

    f(v) = f_g(v) (1 + sum_beta xi_beta Htilde_{beta,R}(v)) with f_g the
    Gaussian whose characteristic function is exp(-|k|^2) and Htilde the
    Hermite family truncated to |v| <= R.  The Gram matrix of the
    truncated family is delta minus an exterior integral evaluated by a
    radial x sphere rule, so its entries are accurate at the exp(-R^2/4)
    scale; xi solves the moment-matching linear system.
    """
    d = Qs[2].dim
    moments = moments_from_polys(Qs, M)
    alphas = [a for deg in range(M + 1) for a in multi_indices(d, deg)]
    n = len(alphas)
    tri = _hermite_coeff_triangle(M)
    gm = _gaussian_1d_moments(2 * M + 1)

    def hermite_tensor_coeffs(alpha):
        """dict beta -> coefficient of v^beta in H_alpha."""
        out: dict[tuple[int, ...], float] = {}
        ranges = [range(alpha[i] + 1) for i in range(d)]
        for beta in itertools.product(*ranges):
            c = 1.0
            for i in range(d):
                c *= tri[alpha[i], beta[i]]
            if c != 0.0:
                out[beta] = c
        return out

    hcoeffs = {a: hermite_tensor_coeffs(a) for a in alphas}

    def P_of(mdict):
        """P_alpha(m) = sum_beta c_{alpha,beta} m_beta for each alpha."""
        vec = np.zeros(n)
        for i, a in enumerate(alphas):
            vec[i] = sum(c * mdict[b] for b, c in hcoeffs[a].items())
        return vec

    gauss_moments = {a: float(np.prod([gm[x] for x in a])) for deg in range(2 * M + 1)
                     for a in multi_indices(d, deg)}

    # exterior integrals over |v| > R by radial Gauss-Legendre x sphere rule
    sq = build_quadrature(d, 32)
    r_nodes, r_w = np.polynomial.legendre.leggauss(96)
    r_hi = R + 30.0
    r = 0.5 * (r_nodes + 1.0) * (r_hi - R) + R
    rw = 0.5 * (r_hi - R) * r_w
    pts = r[:, None, None] * sq.nodes[None, :, :]            # (nr, Q, d)
    flat = pts.reshape(-1, d)
    fg = (4.0 * np.pi) ** (-d / 2.0) * np.exp(-np.einsum("mi,mi->m", flat, flat) / 4.0)
    meas = (rw[:, None] * r[:, None] ** (d - 1) * sq.weights[None, :]).ravel()

    def hermite_values(alpha, v):
        out = np.ones(v.shape[0])
        for i in range(d):
            xi_ = v[:, i]
            acc = np.zeros_like(xi_)
            for kk in range(alpha[i] + 1):
                if tri[alpha[i], kk] != 0.0:
                    acc += tri[alpha[i], kk] * xi_**kk
            out *= acc
        return out

    H_ext = np.stack([hermite_values(a, flat) for a in alphas], axis=1)
    J = np.eye(n) - (H_ext.T * (meas * fg)) @ H_ext
    condJ = float(np.linalg.cond(J))
    if condJ >= COND_LIMIT:
        raise SingularGram(f"truncated Gram matrix condition number {condJ:.3e}")

    rhs = P_of(moments) - P_of(gauss_moments)
    xi = np.linalg.solve(J, rhs)

    # realized moments: full-space Hermite algebra minus the exterior part
    mono_ext = np.stack([np.prod(flat ** np.array(a)[None, :], axis=1) for a in alphas], axis=1)
    T_ext = (mono_ext.T * (meas * fg)) @ H_ext       # int_{|v|>R} v^a H_b f_g
    T_full = np.zeros((n, n))
    for j, b in enumerate(alphas):
        for i, a in enumerate(alphas):
            T_full[i, j] = sum(c * gauss_moments[tuple(x + y for x, y in zip(a, g_))]
                               for g_, c in hcoeffs[b].items())
    T = T_full - T_ext
    realized_vec = np.array([gauss_moments[a] for a in alphas]) + T @ xi
    realized = {a: float(v) for a, v in zip(alphas, realized_vec)}

    # nonnegativity of the perturbation factor inside |v| <= R
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((check_points, d))
    v *= (R * rng.random(check_points) ** (1.0 / d) / np.linalg.norm(v, axis=1))[:, None]
    factor = np.ones(check_points)
    for i, a in enumerate(alphas):
        if xi[i] != 0.0:
            factor += xi[i] * hermite_values(a, v)
    fmin = float(factor.min())
    if fmin < -1e-12:
        raise NegativeDensity(f"perturbation factor reaches {fmin:.3e} inside |v| <= {R}")

    xi_dict = {a: float(x) for a, x in zip(alphas, xi)}

    result = DensityResult(xi=xi_dict, R=R, M=M, realized_moments=realized,
                           gram_condition=condJ)

    def _evaluate(v):
        v = np.atleast_2d(np.asarray(v, dtype=float))
        fgv = (4.0 * np.pi) ** (-d / 2.0) * np.exp(-np.einsum("mi,mi->m", v, v) / 4.0)
        fac = np.ones(v.shape[0])
        inside = np.linalg.norm(v, axis=1) <= R
        for i, a in enumerate(alphas):
            if xi[i] != 0.0:
                fac[inside] += xi[i] * hermite_values(a, v[inside])
        return fgv * fac

    result._evaluate = _evaluate
    return result
