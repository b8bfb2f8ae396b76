"""Benchmark trajectory generator: velocity-Verlet N-body run in a soft well.

Pair potential ``U(r) = sin(min(r, pi/2))**2``: harmonic near contact, flat
beyond ``pi/2``. No periodic boundaries; particles start uniformly inside the
box at rest and the equilibration steps are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

CUTOFF = np.pi / 2


@dataclass(frozen=True)
class SimConfig:
    n_particles: int = 512
    mass: float = 2.0
    dt: float = 2e-4
    box: tuple = (15.0, 16.0, 17.0)
    equil_steps: int = 100_000
    run_steps: int = 10_000_000
    seed: int = 42
    subsample: int = 1

    def __post_init__(self):
        if self.n_particles < 1 or self.mass <= 0 or self.dt <= 0:
            raise ValueError("n_particles, mass and dt must be positive")
        if self.equil_steps < 0 or self.run_steps < 1 or self.subsample < 1:
            raise ValueError("invalid step counts")
        if len(self.box) != 3 or min(self.box) <= 0:
            raise ValueError("box must be three positive edge lengths")

    @property
    def n_frames(self) -> int:
        return self.run_steps // self.subsample


def pair_potential(r):
    return np.sin(np.minimum(r, CUTOFF)) ** 2


def pair_force(delta) -> np.ndarray:
    """Force on a particle displaced by ``delta`` from its partner.

    Zero beyond the cutoff and, by convention, at ``r = 0``.
    """
    delta = np.asarray(delta, dtype=np.float64)
    r = float(np.linalg.norm(delta))
    if r == 0.0 or r >= CUTOFF:
        return np.zeros(3)
    return -np.sin(2.0 * r) / r * delta


def forces(pos: np.ndarray) -> np.ndarray:
    """Total pair force on every particle, shape ``(n, 3)``."""
    delta = pos[:, None, :] - pos[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", delta, delta))
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.where((r > 0) & (r < CUTOFF), -np.sin(2.0 * r) / r, 0.0)
    return np.einsum("ij,ijk->ik", mag, delta)


@numba.njit(cache=True)
def _forces_into(pos, out):
    # i < j pair order fixes the summation order
    n = pos.shape[0]
    out[:] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 >= CUTOFF * CUTOFF or r2 == 0.0:
                continue
            r = np.sqrt(r2)
            m = -np.sin(2.0 * r) / r
            out[i, 0] += m * dx
            out[i, 1] += m * dy
            out[i, 2] += m * dz
            out[j, 0] -= m * dx
            out[j, 1] -= m * dy
            out[j, 2] -= m * dz


@numba.njit(cache=True)
def _verlet(pos, vel, acc, h, inv_m, steps, every, frames):
    n_out = 0
    for step in range(1, steps + 1):
        vel += 0.5 * h * acc
        pos += h * vel
        _forces_into(pos, acc)
        acc *= inv_m
        vel += 0.5 * h * acc
        if every > 0 and step % every == 0:
            frames[n_out] = pos.ravel()
            n_out += 1
    return n_out


def potential_energy(pos: np.ndarray) -> float:
    delta = pos[:, None, :] - pos[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", delta, delta))
    iu = np.triu_indices(len(pos), 1)
    return float(pair_potential(r[iu]).sum())


def kinetic_energy(vel: np.ndarray, mass: float) -> float:
    return 0.5 * mass * float(np.sum(vel * vel))


def initial_state(config: SimConfig):
    rng = np.random.default_rng(config.seed)
    pos = rng.uniform(0.0, 1.0, (config.n_particles, 3)) * np.asarray(config.box)
    return pos, np.zeros_like(pos)


def integrate(pos, vel, config: SimConfig, steps: int, every: int = 0) -> np.ndarray:
    """Advance ``steps`` velocity-Verlet steps in place.

    Returns the positions after every ``every``-th step as rows of a float32
    array (empty when ``every`` is 0).
    """
    acc = np.empty_like(pos)
    _forces_into(pos, acc)
    acc /= config.mass
    n = steps // every if every else 0
    frames = np.empty((n, pos.size), dtype=np.float32)
    _verlet(pos, vel, acc, config.dt, 1.0 / config.mass, steps, every, frames)
    return frames


def run(config: SimConfig) -> np.ndarray:
    """Trajectory after equilibration as ``(n_frames, 3 * n_particles)`` float32."""
    pos, vel = initial_state(config)
    integrate(pos, vel, config, config.equil_steps)
    return integrate(pos, vel, config, config.n_frames * config.subsample, config.subsample)
