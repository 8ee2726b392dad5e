"""Stochastic particle oracle: drift along dv/dt = -Av plus binary
Maxwell-molecule collisions at unit rate per particle.

One time step of length dt is a Strang splitting: half drift, a
collision sweep with Poisson(N dt / 2) uniformly drawn unordered pairs,
half drift.  Each collision replaces (v, w) by

    v' = (v + w + |u| n) / 2,   w' = (v + w - |u| n) / 2,   u = v - w,

with n drawn from the density g(u^ . n); momentum and energy are
conserved to round-off per collision.  All randomness comes from
counter-based Philox streams keyed by (seed, step), so runs are
reproducible regardless of scheduling; collisions apply sequentially in
draw order, which also resolves repeated-particle conflicts
deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import expm

from .kernels import KernelSpec, SphereQuadrature

N_BATCHES = 16


@dataclass
class ParticleEnsemble:
    dim: int
    velocities: np.ndarray  # (N_p, d)
    seed: int
    step: int = 0
    time: float = 0.0

    @property
    def count(self) -> int:
        return self.velocities.shape[0]


@dataclass
class MomentEstimate:
    """Sample moments with batch-means standard errors.

    ``second_raw`` is the plain second-moment matrix <v v>, the quantity
    the moment ODE evolves; ``second_doubled`` = 2 <(v-U)(v-U)> follows
    the doubled reporting convention for direct comparison against the
    self-similar scale; both are derived from the same sweep.
    """

    t: float
    mean: np.ndarray
    mean_se: np.ndarray
    second_raw: np.ndarray
    second_raw_se: np.ndarray
    second_central: np.ndarray
    second_doubled: np.ndarray
    fourth: dict
    fourth_se: dict


def init_gaussian(n_particles: int, U: np.ndarray, covariance: np.ndarray,
                  seed: int, dim: int | None = None) -> ParticleEnsemble:
    """IID Gaussian ensemble with the given mean and covariance."""
    U = np.asarray(U, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    d = dim or U.shape[0]
    if n_particles % 2:
        raise ValueError("particle count must be even (collision pairing)")
    eigs = np.linalg.eigvalsh(cov)
    if eigs.min() < -1e-12 * max(1.0, abs(eigs).max()):
        raise ValueError(f"covariance is not positive semidefinite: spectrum {eigs}")
    rng = np.random.default_rng(np.random.Philox(key=seed))
    if np.allclose(cov, 0.0):
        v = np.tile(U, (n_particles, 1))
    else:
        # symmetric square root handles the semidefinite case
        w, Q = np.linalg.eigh(cov)
        root = Q @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ Q.T
        v = U[None, :] + rng.standard_normal((n_particles, d)) @ root.T
    return ParticleEnsemble(dim=d, velocities=v, seed=seed)


def drift_step(ens: ParticleEnsemble, A: np.ndarray, dt: float) -> ParticleEnsemble:
    """Exact transport v <- exp(-A dt) v."""
    M = expm(-np.asarray(A, dtype=float) * dt)
    return ParticleEnsemble(dim=ens.dim, velocities=ens.velocities @ M.T,
                            seed=ens.seed, step=ens.step, time=ens.time + dt)


@njit(cache=True)
def _collide_seq(v, pairs, s_vals, psi, signs, d):
    """Apply collisions sequentially; direction built about the current u^."""
    for c in range(pairs.shape[0]):
        i = pairs[c, 0]
        j = pairs[c, 1]
        if i == j:
            continue
        ux = v[i, 0] - v[j, 0]
        uy = v[i, 1] - v[j, 1]
        uz = v[i, 2] - v[j, 2] if d == 3 else 0.0
        umag = np.sqrt(ux * ux + uy * uy + uz * uz)
        if umag == 0.0:
            continue  # collision acts trivially in distribution
        ux /= umag
        uy /= umag
        uz /= umag
        s = s_vals[c]
        r = np.sqrt(max(0.0, 1.0 - s * s))
        if d == 3:
            # orthonormal frame about u^: pick the axis least aligned with u^
            ax, ay, az = 1.0, 0.0, 0.0
            if abs(uy) <= abs(ux) and abs(uy) <= abs(uz):
                ax, ay, az = 0.0, 1.0, 0.0
            elif abs(uz) <= abs(ux) and abs(uz) <= abs(uy):
                ax, ay, az = 0.0, 0.0, 1.0
            t1x = uy * az - uz * ay
            t1y = uz * ax - ux * az
            t1z = ux * ay - uy * ax
            tn = np.sqrt(t1x * t1x + t1y * t1y + t1z * t1z)
            t1x /= tn
            t1y /= tn
            t1z /= tn
            t2x = uy * t1z - uz * t1y
            t2y = uz * t1x - ux * t1z
            t2z = ux * t1y - uy * t1x
            cp = np.cos(psi[c])
            sp = np.sin(psi[c])
            nx = s * ux + r * (cp * t1x + sp * t2x)
            ny = s * uy + r * (cp * t1y + sp * t2y)
            nz = s * uz + r * (cp * t1z + sp * t2z)
        else:
            sg = signs[c]
            nx = s * ux - sg * r * uy
            ny = s * uy + sg * r * ux
            nz = 0.0
        cx = v[i, 0] + v[j, 0]
        cy = v[i, 1] + v[j, 1]
        v[i, 0] = 0.5 * (cx + umag * nx)
        v[j, 0] = 0.5 * (cx - umag * nx)
        v[i, 1] = 0.5 * (cy + umag * ny)
        v[j, 1] = 0.5 * (cy - umag * ny)
        if d == 3:
            cz = v[i, 2] + v[j, 2]
            v[i, 2] = 0.5 * (cz + umag * nz)
            v[j, 2] = 0.5 * (cz - umag * nz)


def collide_step(ens: ParticleEnsemble, kernel: KernelSpec,
                 quad: SphereQuadrature | None, dt: float,
                 rng: np.random.Generator | None = None) -> ParticleEnsemble:
    """Poisson(N dt / 2) collisions with kernel-distributed directions.

    The per-step RNG stream is Philox keyed by (seed, step) when ``rng``
    is not supplied, so trajectories are reproducible bit-for-bit.
    """
    if dt > 0.2:
        raise ValueError(f"dt must be <= 0.2, got {dt}")
    if not kernel.normalized:
        raise ValueError("kernel must be normalized")
    n = ens.count
    if rng is None:
        rng = np.random.default_rng(np.random.Philox(key=(ens.seed << 20) + ens.step + 1))
    m = rng.poisson(n * dt / 2.0)
    v = ens.velocities.copy()
    if m > 0:
        pairs = rng.integers(0, n, size=(m, 2))
        table = kernel.sampler_table()
        u = rng.random(m)
        s_vals = np.interp(u * (table.size - 1), np.arange(table.size), table)
        psi = 2.0 * np.pi * rng.random(m)
        signs = np.where(rng.random(m) < 0.5, 1.0, -1.0)
        _collide_seq(v, pairs.astype(np.int64), s_vals, psi, signs, ens.dim)
    return ParticleEnsemble(dim=ens.dim, velocities=v, seed=ens.seed,
                            step=ens.step + 1, time=ens.time)


def estimate_moments(ens: ParticleEnsemble, *, fourth_orders=True) -> MomentEstimate:
    """Batch-means moment estimates (N_BATCHES fixed index batches)."""
    v = ens.velocities
    n, d = v.shape
    bsz = n // N_BATCHES
    batches = v[: bsz * N_BATCHES].reshape(N_BATCHES, bsz, d)

    bm = batches.mean(axis=1)
    mean = v.mean(axis=0)
    mean_se = bm.std(axis=0, ddof=1) / np.sqrt(N_BATCHES)

    raw_b = np.einsum("bni,bnj->bij", batches, batches) / bsz
    raw = np.einsum("ni,nj->ij", v, v) / n
    raw_se = raw_b.std(axis=0, ddof=1) / np.sqrt(N_BATCHES)

    c = v - mean[None, :]
    central = np.einsum("ni,nj->ij", c, c) / n

    fourth: dict = {}
    fourth_se: dict = {}
    if fourth_orders:
        from .hierarchy import multi_indices

        cb = batches - bm[:, None, :]
        for a in multi_indices(d, 4):
            mono = np.ones(n)
            monob = np.ones((N_BATCHES, bsz))
            for i in range(d):
                if a[i]:
                    mono *= c[:, i] ** a[i]
                    monob *= cb[:, :, i] ** a[i]
            fourth[a] = float(mono.mean())
            fourth_se[a] = float(monob.mean(axis=1).std(ddof=1) / np.sqrt(N_BATCHES))
    return MomentEstimate(t=ens.time, mean=mean, mean_se=mean_se,
                          second_raw=raw, second_raw_se=raw_se,
                          second_central=central, second_doubled=2.0 * central,
                          fourth=fourth, fourth_se=fourth_se)


def run(ens: ParticleEnsemble, A: np.ndarray, kernel: KernelSpec,
        quad: SphereQuadrature | None, t_final: float, dt: float, *,
        record_every: int = 1, fourth_orders: bool = False) -> list[MomentEstimate]:
    """Strang-split evolution recording moment estimates on a schedule.

    Returns estimates at t = 0 and after every ``record_every`` steps.
    """
    A = np.asarray(A, dtype=float)
    n_steps = int(round(t_final / dt))
    out = [estimate_moments(ens, fourth_orders=fourth_orders)]
    half = expm(-A * dt / 2.0)
    for step in range(n_steps):
        ens = ParticleEnsemble(dim=ens.dim, velocities=ens.velocities @ half.T,
                               seed=ens.seed, step=ens.step, time=ens.time + dt / 2)
        ens = collide_step(ens, kernel, quad, dt)
        ens = ParticleEnsemble(dim=ens.dim, velocities=ens.velocities @ half.T,
                               seed=ens.seed, step=ens.step, time=ens.time + dt / 2)
        if (step + 1) % record_every == 0:
            out.append(estimate_moments(ens, fourth_orders=fourth_orders))
    return out
