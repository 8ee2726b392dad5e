"""Second-moment matrix ODE, its eigenvalue problem and the scale factor.

Quadratic Taylor data of a characteristic function evolves by the linear
matrix equation

    dB/dt = -(B A_b + (B A_b)^T) - q d / (2(d-1)) * (B - tr(B)/d * I),

with A_b = A + beta*I.  Looking for solutions B exp(2*beta*t) turns this
into a small dense eigenvalue problem on symmetric matrices; its dominant
eigenpair supplies the self-similar exponent beta and the profile matrix
N, and the spectral projection of an initial matrix onto N gives the
scale factor lambda^2.

Symmetric matrices are vectorized with the sqrt(2)-weighted upper
triangle so the dense representation is a similarity transform of the
true generator (Frobenius inner products are preserved).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DominanceViolation, NotPositiveDefinite

_SQRT2 = np.sqrt(2.0)


def operator_norm(A: np.ndarray) -> float:
    """Matrix norm sup_{|k|=1} |A k| (largest singular value)."""
    return float(np.linalg.norm(np.asarray(A, dtype=float), 2))


def sym_index_pairs(d: int) -> list[tuple[int, int]]:
    """Coordinate order of the symmetric vectorization: diagonal first."""
    return [(i, i) for i in range(d)] + [(i, j) for i in range(d) for j in range(i + 1, d)]


def sym_to_vec(B: np.ndarray) -> np.ndarray:
    B = np.asarray(B)
    d = B.shape[0]
    pairs = sym_index_pairs(d)
    v = np.empty(len(pairs), dtype=B.dtype)
    for k, (i, j) in enumerate(pairs):
        v[k] = B[i, j] * (1.0 if i == j else _SQRT2)
    return v

def vec_to_sym(v: np.ndarray, d: int) -> np.ndarray:
    v = np.asarray(v)
    B = np.zeros((d, d), dtype=v.dtype)
    for k, (i, j) in enumerate(sym_index_pairs(d)):
        if i == j:
            B[i, i] = v[k]
        else:
            B[i, j] = B[j, i] = v[k] / _SQRT2
    return B


def generator_matvec(B: np.ndarray, A: np.ndarray, q: float, beta_shift: float) -> np.ndarray:
    """Right-hand side G(B) of the second-moment ODE dB/dt = G(B)."""
    d = B.shape[0]
    Ab = A + beta_shift * np.eye(d)
    c = q * d / (2.0 * (d - 1))
    BA = B @ Ab
    return -(BA + BA.T) - c * (B - np.trace(B) / d * np.eye(d))


def vectorize_generator(A: np.ndarray, q: float, beta_shift: float = 0.0) -> np.ndarray:
    """Dense matrix of G on the sqrt(2)-weighted symmetric coordinates."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    pairs = sym_index_pairs(d)
    m = len(pairs)
    G = np.empty((m, m))
    for col, (i, j) in enumerate(pairs):
        E = np.zeros((d, d))
        if i == j:
            E[i, i] = 1.0
        else:
            E[i, j] = E[j, i] = 1.0 / _SQRT2
        G[:, col] = sym_to_vec(generator_matvec(E, A, q, beta_shift))
    return G


@dataclass(frozen=True)
class EigenPair:
    """Dominant eigenpair of the second-moment problem.

    beta is half the dominant eigenvalue of the vectorized generator, N
    the corresponding positive definite matrix normalized so that
    tr(N^T N)/d = 1 with tr(N) > 0, and spectral_gap the distance from
    2*beta to the real part of the next eigenvalue.
    """

    beta: float
    N: np.ndarray
    spectral_gap: float


def eigen_residual(A: np.ndarray, q: float, beta: float, N: np.ndarray) -> float:
    """Frobenius residual of 2 beta N + (NA + (NA)^T) + c (N - tr N/d I)."""
    d = N.shape[0]
    c = q * d / (2.0 * (d - 1))
    NA = N @ A
    R = 2.0 * beta * N + NA + NA.T + c * (N - np.trace(N) / d * np.eye(d))
    return float(np.linalg.norm(R))


def dominant_eigenpair(A: np.ndarray, q: float, *, gap_tol: float = 1e-9,
                       warn_threshold: float = 0.05) -> EigenPair:
    """Solve the eigenvalue problem for (beta, N) by a dense eigensolve.

    Raises DominanceViolation if the top eigenvalue is complex or its
    gap to the rest of the spectrum is below ``gap_tol``, and
    NotPositiveDefinite if the normalized eigenvector fails to be a
    definite matrix.  Warns when ||A|| exceeds ``warn_threshold * q``
    (operational stand-in for the perturbative smallness condition).
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if operator_norm(A) > warn_threshold * q:
        warnings.warn(
            f"||A|| = {operator_norm(A):.3g} exceeds {warn_threshold:g}*q = "
            f"{warn_threshold * q:.3g}; dominance is not guaranteed", stacklevel=2)
    G = vectorize_generator(A, q, 0.0)
    vals, vecs = np.linalg.eig(G)
    order = np.argsort(vals.real)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    top = vals[0]
    scale = max(1.0, float(np.abs(vals).max()))
    if abs(top.imag) > 1e-12 * scale:
        raise DominanceViolation(f"dominant eigenvalue {top} is not real")
    gap = float(top.real - vals[1].real)
    if gap <= gap_tol:
        raise DominanceViolation(f"spectral gap {gap:.3e} below {gap_tol:.1e}")
    v = vecs[:, 0]
    # rotate the eigenvector to the real axis before discarding phase
    phase = v[np.argmax(np.abs(v))]
    v = (v * np.conj(phase) / abs(phase)).real
    N = vec_to_sym(v, d)
    N = 0.5 * (N + N.T)
    N *= np.sqrt(d) / np.linalg.norm(N)
    if np.trace(N) < 0:
        N = -N
    eigs = np.linalg.eigvalsh(N)
    if eigs.min() <= 0:
        raise NotPositiveDefinite(f"normalized eigenvector has spectrum {eigs}")
    return EigenPair(beta=float(top.real) / 2.0, N=N, spectral_gap=gap)


@dataclass(frozen=True)
class MomentTrajectory:
    times: np.ndarray
    matrices: np.ndarray  # (len(times), d, d)


def evolve_B(A: np.ndarray, q: float, beta: float, B0: np.ndarray,
             t_grid: np.ndarray) -> MomentTrajectory:
    """Exact solution of the (possibly beta-shifted) second-moment ODE.

    Uses the eigendecomposition of the vectorized generator, so the only
    error is the dense eigensolve itself; no time stepping.
    """
    B0 = np.asarray(B0, dtype=float)
    d = B0.shape[0]
    t_grid = np.asarray(t_grid, dtype=float)
    G = vectorize_generator(np.asarray(A, dtype=float), q, beta)
    vals, vecs = np.linalg.eig(G)
    coeff = np.linalg.solve(vecs, sym_to_vec(B0).astype(complex))
    mats = np.empty((t_grid.size, d, d))
    for i, t in enumerate(t_grid):
        v = vecs @ (np.exp(vals * t) * coeff)
        if np.abs(v.imag).max() > 1e-9 * max(1.0, np.abs(v.real).max()):
            raise ArithmeticError("moment trajectory acquired an imaginary part")
        mats[i] = vec_to_sym(v.real, d)
    return MomentTrajectory(times=t_grid, matrices=mats)


def expm_generator(A: np.ndarray, q: float, beta: float, t: float) -> np.ndarray:
    """One-step propagator exp(G t) on symmetric coordinates."""
    from scipy.linalg import expm

    return expm(vectorize_generator(np.asarray(A, dtype=float), q, beta) * t)


def extract_lambda_scale(A: np.ndarray, q: float, beta: float, N: np.ndarray,
                         B0: np.ndarray) -> float:
    """Scale factor lambda >= 0 with B(t) -> lambda^2 N.

    Spectral projection of B0 on the dominant eigendirection through the
    left eigenvector of the unshifted generator; lambda = 0 iff B0 has
    no component on N (the Dirac-mass case).
    """
    A = np.asarray(A, dtype=float)
    B0 = np.asarray(B0, dtype=float)
    G = vectorize_generator(A, q, 0.0)
    target = 2.0 * beta
    vals, vecs = np.linalg.eig(G.T)
    idx = int(np.argmin(np.abs(vals - target)))
    if abs(vals[idx] - target) > 1e-8 * max(1.0, abs(target)):
        raise DominanceViolation("left eigenvector for 2*beta not found")
    w = vecs[:, idx]
    denom = np.vdot(w, sym_to_vec(N).astype(complex))
    if abs(denom) < 1e-14:
        raise DominanceViolation("left/right eigenvector pairing is degenerate")
    c = np.vdot(w, sym_to_vec(B0).astype(complex)) / denom
    if abs(c.imag) > 1e-10 * max(1.0, abs(c.real)):
        raise DominanceViolation(f"projection coefficient {c} is not real")
    cr = float(c.real)
    if cr < -1e-10 * max(1.0, float(np.linalg.norm(B0))):
        raise NotPositiveDefinite(f"projection of B0 on N is negative: {cr}")
    return float(np.sqrt(max(cr, 0.0)))
