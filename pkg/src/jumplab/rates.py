"""Analytic jump-rate generator in the strong-measurement limit.

The off-diagonal rate for a transition i -> j combines the dissipative
population flow with a Hamiltonian second-order channel mediated by the
phases:

    m[i, j] = a[i, j] + 2 Re sum_{k < l} c[i, k, l] * b[k, l, j] / delta(k, l)

where ``delta(k, l)`` is the effective phase-damping rate of the (k, l)
coherence, combining measurement-induced dephasing and the intrinsic
phase-damping coefficients.  Row sums vanish identically; the diagonal of the
returned generator is fixed by that constraint and cross-checked against the
direct evaluation of the same formula at i == j.

``markov_sample`` provides exact continuous-time sampling of a generator and
serves as the comparison oracle for trajectory-ensemble estimates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .decompose import SuperoperatorTensors
from .errors import (
    DimensionMismatchError,
    NegativeRateError,
    ReducibleError,
    VanishingDeltaError,
)
from .model import MeasurementSetup

NEGATIVE_RATE_TOL = 1e-9
ROW_SUM_TOL = 1e-10
VANISHING_DELTA_TOL = 1e-12


@dataclass(frozen=True)
class RateGenerator:
    """Finite-state Markov generator: m[i, j] >= 0 for i != j, zero row sums."""

    dim: int
    m: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.m.sum(axis=1)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "m": [[float(x) for x in row] for row in self.m]}


@dataclass(frozen=True)
class StatePath:
    """Piecewise-constant state path: state ``states[k]`` is occupied from
    ``times[k]`` until the next entry (or the horizon)."""

    dim: int
    times: np.ndarray
    states: np.ndarray
    horizon: float

    @property
    def collapsed(self) -> bool:
        return len(self.states) > 0

    def dwell_totals(self) -> np.ndarray:
        """Total time attributed to each state (last segment runs to horizon)."""
        out = np.zeros(self.dim)
        t = self.times
        for k in range(len(t)):
            end = self.horizon if k + 1 == len(t) else t[k + 1]
            out[self.states[k]] += end - t[k]
        return out

    def transition_counts(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.int64)
        s = self.states
        for k in range(len(s) - 1):
            out[s[k], s[k + 1]] += 1
        return out


def delta(k: int, l: int, tensors: SuperoperatorTensors, setup: MeasurementSetup) -> complex:
    """Effective damping rate of the (k, l) phase.

    Measurement part (|nu_k|^2 + |nu_l|^2 - 2 nu_k conj(nu_l)) / 2 plus the
    intrinsic phase-damping coefficient d[k, l].
    """
    if k == l:
        raise DimensionMismatchError("delta requires two distinct indices")
    nu = setup.nu
    meas = 0.5 * (abs(nu[k]) ** 2 + abs(nu[l]) ** 2 - 2.0 * nu[k] * np.conj(nu[l]))
    return complex(meas + tensors.d[k, l])


def delta_matrix(tensors: SuperoperatorTensors, setup: MeasurementSetup) -> np.ndarray:
    """All pairwise damping rates as a (d, d) table with zero diagonal."""
    d = tensors.dim
    out = np.zeros((d, d), dtype=complex)
    for k in range(d):
        for l in range(d):
            if k != l:
                out[k, l] = delta(k, l, tensors, setup)
    return out


def jump_rates(tensors: SuperoperatorTensors, setup: MeasurementSetup) -> RateGenerator:
    """Evaluate the limiting generator from the decomposition tensors.

    The detector efficiency never enters.  Raises ``VanishingDeltaError`` when
    an active phase pair has no damping (the limit is then ill-defined) and
    ``NegativeRateError`` for off-diagonal rates below -1e-9.
    """
    d = tensors.dim
    dm = delta_matrix(tensors, setup)

    # Full formula at every (i, j), diagonal included, for the consistency check.
    m_full = tensors.a.astype(float).copy()
    for k in range(d):
        for l in range(k + 1, d):
            prod = tensors.c[:, k, l][:, None] * tensors.b[k, l, :][None, :]
            if np.abs(prod).max() <= 0.0:
                continue
            if dm[k, l].real <= VANISHING_DELTA_TOL:
                raise VanishingDeltaError(
                    f"phase pair ({k}, {l}) is active but Re delta = {dm[k, l].real:.3e}"
                )
            m_full += 2.0 * (prod / dm[k, l]).real

    m = m_full.copy()
    off = ~np.eye(d, dtype=bool)
    worst = m[off].min() if d > 1 else 0.0
    if worst < -NEGATIVE_RATE_TOL:
        i, j = divmod(int(np.where(off, m, np.inf).argmin()), d)
        raise NegativeRateError(f"rate m[{i}, {j}] = {worst:.3e} is negative")
    m[off & (m < 0)] = 0.0
    np.fill_diagonal(m, 0.0)
    diag = -m.sum(axis=1)

    # Row sums of the raw formula vanish analytically; verify numerically.
    mismatch = np.abs(np.diag(m_full) - diag).max()
    if mismatch > ROW_SUM_TOL:
        raise NegativeRateError(
            f"diagonal inconsistency {mismatch:.3e}: generator rows do not balance"
        )
    np.fill_diagonal(m, diag)
    return RateGenerator(dim=d, m=m)


def stationary(gen: RateGenerator) -> np.ndarray:
    """Unique stationary distribution pi with pi @ m = 0, sum(pi) = 1.

    Raises ``ReducibleError`` when the kernel of the transposed generator has
    dimension above one (multiple stationary distributions).
    """
    mt = gen.m.T
    u, s, vh = np.linalg.svd(mt)
    scale = max(1.0, float(s.max()) if len(s) else 1.0)
    null_dim = int(np.sum(s <= 1e-12 * scale))
    if null_dim > 1:
        raise ReducibleError(f"{null_dim}-dimensional stationary space")
    pi = vh[-1].real
    total = pi.sum()
    if abs(total) < 1e-12:
        raise ReducibleError("stationary vector has vanishing mass")
    pi = pi / total
    pi = np.where(np.abs(pi) < 1e-13, 0.0, pi)
    if pi.min() < -1e-10:
        raise ReducibleError(f"stationary vector not nonnegative: {pi}")
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = float(np.abs(pi @ gen.m).max())
    if residual > 1e-10:
        raise ReducibleError(f"stationary residual {residual:.3e} too large")
    return pi


def markov_sample(gen: RateGenerator, q0, horizon: float, seed) -> StatePath:
    """Exact jump-chain sampling: exponential dwells, categorical successors.

    Deterministic given the seed.  Absorbing states (zero exit rate) hold for
    the remaining horizon.
    """
    if horizon <= 0:
        raise DimensionMismatchError("horizon must be positive")
    q0 = np.asarray(q0, dtype=float)
    if q0.min() < 0 or abs(q0.sum() - 1.0) > 1e-9:
        raise DimensionMismatchError("q0 must be a probability vector")
    rng = np.random.default_rng(seed)
    d = gen.dim

    times = [0.0]
    states = [int(rng.choice(d, p=q0 / q0.sum()))]
    t = 0.0
    while True:
        i = states[-1]
        exit_rate = -gen.m[i, i]
        if exit_rate <= 0:
            break
        t = t + rng.exponential(1.0 / exit_rate)
        if t >= horizon:
            break
        probs = np.clip(gen.m[i], 0.0, None)
        probs[i] = 0.0
        probs = probs / probs.sum()
        j = int(rng.choice(d, p=probs))
        times.append(t)
        states.append(j)
    return StatePath(
        dim=d,
        times=np.asarray(times),
        states=np.asarray(states, dtype=np.int64),
        horizon=float(horizon),
    )


def generator_to_json(
    gen: RateGenerator,
    pi: np.ndarray | None = None,
    mechanisms=None,
) -> dict:
    doc = {
        "dim": gen.dim,
        "m": [[float(x) for x in row] for row in gen.m],
        "stationary": None if pi is None else [float(x) for x in pi],
    }
    if mechanisms is not None:
        doc["mechanisms"] = [list(row) for row in mechanisms]
    return doc
