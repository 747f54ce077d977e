"""Stochastic integration of the measurement master equation.

Two step schemes are provided:

* ``"euler"``: the textbook Euler-Maruyama update
  ``rho' = rho + drift*dt + innovation*gamma*sqrt(eta)*dW`` followed by
  Hermitian projection and trace renormalization.  Cheap and transparent, but
  it pushes the smallest eigenvalue of the state negative by O(dt * xi^2) on
  every step taken near a pure state, which trips the positivity monitor at
  production step sizes.

* ``"kraus"`` (default): a factorized update
  ``rho' ~ M rho M† + sum_a L_a rho L_a† dt + (1-eta) g^2 N rho N† dt`` with
  ``M = 1 + (-iH - G/2) dt + g sqrt(eta) N dy`` driven by the simulated
  detector record ``dy = sqrt(eta) g tr(O rho) dt + dW``.  Every term is a
  positive sandwich, so the state stays positive semidefinite to rounding at
  any admissible dt, with the same weak first-order accuracy as Euler.

Both schemes share the stability guard ``dt * gamma^2 <= 0.05`` and the
per-trajectory noise streams: trajectory ``n`` of an ensemble draws from a
generator seeded by ``(master_seed, n)``, so ensembles are reproducible
regardless of worker count or execution order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .decompose import SuperoperatorTensors
from .errors import (
    DimensionMismatchError,
    PositivityBreachError,
    StabilityGuardError,
)
from .model import MeasurementSetup, ValidatedModel
from .rates import delta_matrix

STABILITY_LIMIT = 0.05
POSITIVITY_THRESHOLD = -1e-6
MAX_STEPS = 10**9

_NOISE_CHUNK = 4096
_BLOCK_SIZE = 128

DEFAULT_SCHEME = "kraus"


@dataclass
class Trajectory:
    """Decimated sample path of the conditioned state and detector record."""

    times: np.ndarray      # (nsamp,)
    q: np.ndarray          # (nsamp, d) populations
    record: np.ndarray     # (nsamp,) cumulative detector output x_t
    seed: object
    gamma: float
    u: np.ndarray | None = None  # (nsamp, d, d) off-diagonal part, if stored
    max_trace_defect: float = 0.0

    @property
    def dim(self) -> int:
        return self.q.shape[1]


@dataclass
class QYTrajectory:
    """Sample path of the rescaled population/phase system."""

    times: np.ndarray      # (nsamp,)
    q: np.ndarray          # (nsamp, d)
    y: np.ndarray          # (nsamp, d, d) complex, zero diagonal
    seed: object
    gamma: float

    @property
    def dim(self) -> int:
        return self.q.shape[1]


@dataclass
class LindbladPath:
    """Deterministic (noise-averaged) state path."""

    times: np.ndarray
    rho: np.ndarray        # (nsamp, d, d)

    def q(self) -> np.ndarray:
        return np.einsum("nkk->nk", self.rho).real


def check_stability(dt: float, gamma: float) -> None:
    if dt <= 0:
        raise StabilityGuardError(f"dt must be positive, got {dt}")
    if dt * gamma * gamma > STABILITY_LIMIT + 1e-12:
        raise StabilityGuardError(
            f"dt * gamma^2 = {dt * gamma * gamma:.4g} exceeds {STABILITY_LIMIT}"
        )


def trajectory_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Deterministic per-trajectory stream key, independent of worker layout."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("JUMPLAB_THREADS")
    return max(1, int(env)) if env else 1


def _vec_kron(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Superoperator matrix of rho -> left @ rho @ right on row-major vec."""
    return np.kron(left, right.T)


def _lindblad_superop(op: np.ndarray) -> np.ndarray:
    d = op.shape[0]
    eye = np.eye(d)
    odo = op.conj().T @ op
    return (
        _vec_kron(op, op.conj().T)
        - 0.5 * _vec_kron(odo, eye)
        - 0.5 * _vec_kron(eye, odo)
    )


def drift_superop(vm: ValidatedModel) -> np.ndarray:
    """(d^2, d^2) matrix of the full deterministic generator on vec(rho)."""
    d = vm.dim
    g2 = vm.gamma * vm.gamma
    eye = np.eye(d)
    h = vm.hamiltonian()
    out = -1j * (_vec_kron(h, eye) - _vec_kron(eye, h))
    for a in vm.na_ops:
        out = out + _lindblad_superop(a)
    for b in vm.nb_diags:
        out = out + g2 * _lindblad_superop(np.diag(b))
    out = out + g2 * _lindblad_superop(vm.n_op())
    return out


class _SmePropagator:
    """Precomputed step operators for a fixed (model, dt, scheme)."""

    def __init__(self, vm: ValidatedModel, dt: float, scheme: str):
        if scheme not in ("kraus", "euler"):
            raise DimensionMismatchError(f"unknown scheme {scheme!r}")
        check_stability(dt, vm.gamma)
        self.scheme = scheme
        self.dt = dt
        self.dim = vm.dim
        self.gamma = vm.gamma
        self.eta = vm.eta
        self.lam = vm.lam.copy()
        self.noise_gain = vm.gamma * np.sqrt(vm.eta)
        self.record_gain = 1.0 / np.sqrt(vm.eta)

        d = vm.dim
        g2 = vm.gamma * vm.gamma
        n_op = vm.n_op()
        if scheme == "euler":
            self.drift_mat_t = drift_superop(vm).T.copy()
            self.s_matrix = vm.nu[:, None] + vm.nu.conj()[None, :]
        else:
            gram = g2 * (n_op.conj().T @ n_op)
            jump = (1.0 - vm.eta) * g2 * _vec_kron(n_op, n_op.conj().T)
            for a in vm.na_ops:
                gram = gram + a.conj().T @ a
                jump = jump + _vec_kron(a, a.conj().T)
            for b in vm.nb_diags:
                bop = np.diag(b)
                gram = gram + g2 * (bop.conj().T @ bop)
                jump = jump + g2 * _vec_kron(bop, bop.conj().T)
            self.m_const = np.eye(d) + (-1j * vm.hamiltonian() - 0.5 * gram) * dt
            self.m_noise = self.noise_gain * n_op
            self.jump_mat_t = (jump * dt).T.copy()
            self.has_jump = bool(np.abs(jump).max() > 0)

    def tr_obs(self, rho: np.ndarray) -> np.ndarray:
        """tr(O rho) for a stacked batch (n, d, d)."""
        return np.einsum("nkk,k->n", rho, self.lam).real

    def step_batch(self, rho: np.ndarray, dw: np.ndarray, tr_o: np.ndarray):
        """Advance a stacked batch one step; returns (rho', trace defect)."""
        n, d, _ = rho.shape
        if self.scheme == "euler":
            flat = rho.reshape(n, d * d)
            drift = (flat @ self.drift_mat_t).reshape(n, d, d)
            inn = rho * self.s_matrix[None, :, :] - rho * tr_o[:, None, None]
            out = rho + drift * self.dt + inn * (self.noise_gain * dw)[:, None, None]
            defect = float(np.abs(np.einsum("nkk->n", out).real - 1.0).max())
        else:
            dy = np.sqrt(self.eta) * self.gamma * tr_o * self.dt + dw
            m = self.m_const[None, :, :] + dy[:, None, None] * self.m_noise[None, :, :]
            out = m @ rho @ m.conj().transpose(0, 2, 1)
            if self.has_jump:
                out = out + (rho.reshape(n, d * d) @ self.jump_mat_t).reshape(n, d, d)
            defect = 0.0
        out = 0.5 * (out + out.conj().transpose(0, 2, 1))
        tr = np.einsum("nkk->n", out).real
        return out / tr[:, None, None], defect


def _positivity_check(rho: np.ndarray, t: float, base_index: int) -> None:
    mins = np.linalg.eigvalsh(rho)[:, 0]
    worst = int(mins.argmin())
    if mins[worst] < POSITIVITY_THRESHOLD:
        raise PositivityBreachError(
            f"min eigenvalue {mins[worst]:.3e} below {POSITIVITY_THRESHOLD:g} "
            f"at t={t:.6g} in trajectory {base_index + worst}"
        )


def _n_steps(horizon: float, dt: float) -> int:
    if horizon <= 0:
        raise DimensionMismatchError(f"horizon must be positive, got {horizon}")
    n = int(round(horizon / dt))
    if n < 1 or n > MAX_STEPS:
        raise DimensionMismatchError(f"horizon/dt = {horizon / dt:.3g} outside 1..{MAX_STEPS:g}")
    return n


def _run_sme_block(
    prop: _SmePropagator,
    rho0: np.ndarray,
    rngs: list,
    nsteps: int,
    decimation: int,
    store_offdiag: bool,
    base_index: int,
):
    n = len(rngs)
    d = prop.dim
    dt = prop.dt
    sqrt_dt = np.sqrt(dt)
    rho = np.broadcast_to(rho0, (n, d, d)).astype(complex).copy()
    x = np.zeros(n)

    n_samples = nsteps // decimation + 1
    qs = np.empty((n_samples, n, d))
    xs = np.empty((n_samples, n))
    us = np.empty((n_samples, n, d, d), dtype=complex) if store_offdiag else None
    times = np.empty(n_samples)

    def store(slot: int, k: int):
        times[slot] = k * dt
        qs[slot] = np.einsum("nkk->nk", rho).real
        xs[slot] = x
        if us is not None:
            off = rho.copy()
            off[:, np.arange(d), np.arange(d)] = 0.0
            us[slot] = off

    store(0, 0)
    slot = 1
    max_defect = 0.0
    k = 0
    while k < nsteps:
        m = min(_NOISE_CHUNK, nsteps - k)
        dw = np.empty((n, m))
        for i, rng in enumerate(rngs):
            dw[i] = rng.normal(0.0, sqrt_dt, size=m)
        for j in range(m):
            w = dw[:, j]
            tr_o = prop.tr_obs(rho)
            x = x + prop.gamma * tr_o * dt + prop.record_gain * w
            rho, defect = prop.step_batch(rho, w, tr_o)
            max_defect = max(max_defect, defect)
            k += 1
            if k % decimation == 0:
                store(slot, k)
                _positivity_check(rho, k * dt, base_index)
                slot += 1

    out = []
    for i in range(n):
        out.append(
            Trajectory(
                times=times.copy(),
                q=qs[:, i, :].copy(),
                record=xs[:, i].copy(),
                seed=None,
                gamma=prop.gamma,
                u=us[:, i].copy() if us is not None else None,
                max_trace_defect=max_defect,
            )
        )
    return out


def simulate_sme(
    vm: ValidatedModel,
    rho0: np.ndarray,
    dt: float,
    horizon: float,
    seed,
    decimation: int = 100,
    scheme: str = DEFAULT_SCHEME,
    store_offdiag: bool = False,
) -> Trajectory:
    """Integrate one conditioned trajectory with its measurement record."""
    if decimation < 1:
        raise DimensionMismatchError("decimation must be >= 1")
    nsteps = _n_steps(horizon, dt)
    prop = _SmePropagator(vm, dt, scheme)
    rng = np.random.default_rng(seed)
    traj = _run_sme_block(prop, np.asarray(rho0, complex), [rng], nsteps, decimation, store_offdiag, 0)[0]
    traj.seed = seed
    return traj


def run_sme_ensemble(
    vm: ValidatedModel,
    rho0: np.ndarray,
    dt: float,
    horizon: float,
    n_trajectories: int,
    master_seed: int,
    decimation: int = 100,
    scheme: str = DEFAULT_SCHEME,
    workers: int | None = None,
    store_offdiag: bool = False,
) -> list:
    """Independent trajectories with streams derived from (master_seed, index).

    Trajectories are integrated in fixed-size stacked blocks; the block layout
    is a function of ``n_trajectories`` alone, so results are bit-identical
    for any worker count.
    """
    if n_trajectories < 1:
        raise DimensionMismatchError("n_trajectories must be >= 1")
    if decimation < 1:
        raise DimensionMismatchError("decimation must be >= 1")
    nsteps = _n_steps(horizon, dt)
    prop = _SmePropagator(vm, dt, scheme)
    rho0 = np.asarray(rho0, complex)

    blocks = []
    for start in range(0, n_trajectories, _BLOCK_SIZE):
        stop = min(start + _BLOCK_SIZE, n_trajectories)
        rngs = [np.random.default_rng(trajectory_seed(master_seed, i)) for i in range(start, stop)]
        blocks.append((start, rngs))

    def run_block(block):
        start, rngs = block
        return start, _run_sme_block(prop, rho0, rngs, nsteps, decimation, store_offdiag, start)

    n_workers = resolve_workers(workers)
    if n_workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_block, blocks))
    else:
        results = [run_block(b) for b in blocks]

    results.sort(key=lambda item: item[0])
    out = []
    for start, trajs in results:
        for offset, traj in enumerate(trajs):
            traj.seed = (master_seed, start + offset)
            out.append(traj)
    return out


def step_sme(
    rho: np.ndarray,
    vm: ValidatedModel,
    dt: float,
    dw: float,
    scheme: str = DEFAULT_SCHEME,
) -> np.ndarray:
    """One integration step with full positivity monitoring."""
    prop = _SmePropagator(vm, dt, scheme)
    batch = np.asarray(rho, complex)[None, :, :]
    out, _ = prop.step_batch(batch, np.array([dw]), prop.tr_obs(batch))
    _positivity_check(out, dt, 0)
    return out[0]


# -- rescaled population/phase system -----------------------------------------

class _QyPropagator:
    def __init__(self, tensors: SuperoperatorTensors, setup: MeasurementSetup, dt: float):
        check_stability(dt, setup.gamma)
        self.dt = dt
        self.dim = tensors.dim
        self.gamma = setup.gamma
        self.eta = setup.eta
        self.lam = setup.lam.copy()
        self.noise_gain = setup.gamma * np.sqrt(setup.eta)
        d = tensors.dim
        self.a = tensors.a
        self.b_flat = tensors.b.reshape(d * d, d)
        self.c_flat = tensors.c.reshape(d, d * d)
        self.delta = delta_matrix(tensors, setup)
        self.s_matrix = setup.nu[:, None] + setup.nu.conj()[None, :]

    def step_batch(self, q: np.ndarray, y: np.ndarray, dw: np.ndarray):
        n, d = q.shape
        g2 = self.gamma * self.gamma
        lbar = q @ self.lam
        by = (y.reshape(n, d * d) @ self.b_flat).real
        cq = (q.astype(complex) @ self.c_flat).reshape(n, d, d)
        q_noise = self.noise_gain * q * (self.lam[None, :] - lbar[:, None])
        y_noise = self.noise_gain * y * (self.s_matrix[None, :, :] - lbar[:, None, None])
        q_new = q + (q @ self.a + by) * self.dt + q_noise * dw[:, None]
        y_new = y + g2 * (cq - self.delta[None, :, :] * y) * self.dt + y_noise * dw[:, None, None]
        q_new = q_new / q_new.sum(axis=1, keepdims=True)
        return q_new, y_new


def _run_qy_block(prop: _QyPropagator, q0, y0, rngs, nsteps, decimation):
    n = len(rngs)
    d = prop.dim
    dt = prop.dt
    sqrt_dt = np.sqrt(dt)
    q = np.broadcast_to(np.asarray(q0, float), (n, d)).copy()
    y = np.broadcast_to(np.asarray(y0, complex), (n, d, d)).copy()

    n_samples = nsteps // decimation + 1
    qs = np.empty((n_samples, n, d))
    ys = np.empty((n_samples, n, d, d), dtype=complex)
    times = np.empty(n_samples)
    qs[0], ys[0], times[0] = q, y, 0.0

    slot = 1
    k = 0
    while k < nsteps:
        m = min(_NOISE_CHUNK, nsteps - k)
        dw = np.empty((n, m))
        for i, rng in enumerate(rngs):
            dw[i] = rng.normal(0.0, sqrt_dt, size=m)
        for j in range(m):
            q, y = prop.step_batch(q, y, dw[:, j])
            k += 1
            if k % decimation == 0:
                times[slot] = k * dt
                qs[slot] = q
                ys[slot] = y
                slot += 1
    return times, qs, ys


def simulate_qy(
    tensors: SuperoperatorTensors,
    setup: MeasurementSetup,
    q0,
    dt: float,
    horizon: float,
    seed,
    decimation: int = 100,
    u0: np.ndarray | None = None,
) -> QYTrajectory:
    """Integrate the rescaled system; phases start at gamma * u0 (default 0)."""
    if decimation < 1:
        raise DimensionMismatchError("decimation must be >= 1")
    nsteps = _n_steps(horizon, dt)
    prop = _QyPropagator(tensors, setup, dt)
    y0 = np.zeros((prop.dim, prop.dim), complex) if u0 is None else setup.gamma * np.asarray(u0, complex)
    np.fill_diagonal(y0, 0.0)
    rng = np.random.default_rng(seed)
    times, qs, ys = _run_qy_block(prop, q0, y0, [rng], nsteps, decimation)
    return QYTrajectory(times=times, q=qs[:, 0, :], y=ys[:, 0], seed=seed, gamma=setup.gamma)


def run_qy_ensemble(
    tensors: SuperoperatorTensors,
    setup: MeasurementSetup,
    q0,
    dt: float,
    horizon: float,
    n_trajectories: int,
    master_seed: int,
    decimation: int = 100,
    workers: int | None = None,
    u0: np.ndarray | None = None,
) -> list:
    if n_trajectories < 1:
        raise DimensionMismatchError("n_trajectories must be >= 1")
    if decimation < 1:
        raise DimensionMismatchError("decimation must be >= 1")
    nsteps = _n_steps(horizon, dt)
    prop = _QyPropagator(tensors, setup, dt)
    y0 = np.zeros((prop.dim, prop.dim), complex) if u0 is None else setup.gamma * np.asarray(u0, complex)
    np.fill_diagonal(y0, 0.0)

    blocks = []
    for start in range(0, n_trajectories, _BLOCK_SIZE):
        stop = min(start + _BLOCK_SIZE, n_trajectories)
        rngs = [np.random.default_rng(trajectory_seed(master_seed, i)) for i in range(start, stop)]
        blocks.append((start, rngs))

    def run_block(block):
        start, rngs = block
        return start, _run_qy_block(prop, q0, y0, rngs, nsteps, decimation)

    n_workers = resolve_workers(workers)
    if n_workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_block, blocks))
    else:
        results = [run_block(b) for b in blocks]

    results.sort(key=lambda item: item[0])
    out = []
    for start, (times, qs, ys) in results:
        for i in range(qs.shape[1]):
            out.append(
                QYTrajectory(
                    times=times.copy(),
                    q=qs[:, i, :].copy(),
                    y=ys[:, i].copy(),
                    seed=(master_seed, start + i),
                    gamma=setup.gamma,
                )
            )
    return out


# -- deterministic noise average ----------------------------------------------

def integrate_lindblad(
    vm: ValidatedModel,
    rho0: np.ndarray,
    dt: float,
    horizon: float,
    decimation: int = 1,
) -> LindbladPath:
    """Classic fixed-step fourth-order integration of the deterministic part."""
    check_stability(dt, vm.gamma)
    if decimation < 1:
        raise DimensionMismatchError("decimation must be >= 1")
    nsteps = _n_steps(horizon, dt)
    d = vm.dim
    lt = drift_superop(vm).T.copy()

    def f(vec):
        return vec @ lt

    vec = np.asarray(rho0, complex).reshape(d * d)
    n_samples = nsteps // decimation + 1
    rhos = np.empty((n_samples, d, d), complex)
    times = np.empty(n_samples)
    rhos[0] = vec.reshape(d, d)
    times[0] = 0.0
    slot = 1
    for k in range(1, nsteps + 1):
        k1 = f(vec)
        k2 = f(vec + 0.5 * dt * k1)
        k3 = f(vec + 0.5 * dt * k2)
        k4 = f(vec + dt * k3)
        vec = vec + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if k % decimation == 0:
            rhos[slot] = vec.reshape(d, d)
            times[slot] = k * dt
            slot += 1

    drift_tr = float(abs(np.trace(rhos[-1]).real - 1.0))
    if drift_tr > 1e-10:
        raise StabilityGuardError(f"trace drift {drift_tr:.3e} over the horizon")
    return LindbladPath(times=times, rho=rhos)


# -- CSV serialization ---------------------------------------------------------

def write_trajectory_csv(traj: Trajectory, path) -> None:
    d = traj.dim
    header = "t," + ",".join(f"Q_{i}" for i in range(d)) + ",x"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for k in range(len(traj.times)):
            cells = [f"{traj.times[k]:.15g}"]
            cells += [f"{v:.15g}" for v in traj.q[k]]
            cells.append(f"{traj.record[k]:.15g}")
            fh.write(",".join(cells) + "\n")


def write_qy_csv(traj: QYTrajectory, path) -> None:
    d = traj.dim
    pairs = [(k, l) for k in range(d) for l in range(d) if k != l]
    header = (
        "t,"
        + ",".join(f"Q_{i}" for i in range(d))
        + ","
        + ",".join(f"ReY_{k}{l},ImY_{k}{l}" for k, l in pairs)
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for s in range(len(traj.times)):
            cells = [f"{traj.times[s]:.15g}"]
            cells += [f"{v:.15g}" for v in traj.q[s]]
            for k, l in pairs:
                z = traj.y[s, k, l]
                cells += [f"{z.real:.15g}", f"{z.imag:.15g}"]
            fh.write(",".join(cells) + "\n")
