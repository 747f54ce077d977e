"""Jump statistics from trajectory ensembles.

The telegraph extraction is a single-threshold assignment: the path is "in
state i" from the first sample with ``Q_i >= 1 - epsilon`` until some other
state reaches its own threshold; the crossing samples in between count toward
the previously assigned state.  Rate estimation is the standard count/time
maximum-likelihood ratio for a continuous-time chain, with Wald 95% intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyEnsembleError,
    InsufficientSamplesError,
    NoCollapseError,
)
from .rates import RateGenerator, StatePath

DEFAULT_EPSILON = 0.1


@dataclass
class JumpStats:
    """Aggregate transition counts, dwell totals, and the estimated generator."""

    dim: int
    transition_counts: np.ndarray   # (d, d) int, zero diagonal
    dwell_time_totals: np.ndarray   # (d,)
    m_hat: np.ndarray               # (d, d), diagonal = -row sum
    ci_halfwidth: np.ndarray        # (d, d) 95% half-widths
    n_trajectories: int

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "transition_counts": [[int(x) for x in row] for row in self.transition_counts],
            "dwell_time_totals": [float(x) for x in self.dwell_time_totals],
            "m_hat": [[float(x) for x in row] for row in self.m_hat],
            "ci_halfwidth": [[float(x) for x in row] for row in self.ci_halfwidth],
            "n_trajectories": self.n_trajectories,
        }


def detect_jumps(times: np.ndarray, q: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> StatePath:
    """Extract the telegraph path from a population time series.

    A path that never reaches any threshold comes back with no entries
    (``collapsed`` is False); downstream consumers decide whether that is an
    error.
    """
    if not 0 < epsilon < 0.5:
        raise DimensionMismatchError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    times = np.asarray(times, float)
    q = np.asarray(q, float)
    if q.ndim != 2 or len(times) != len(q):
        raise DimensionMismatchError("times and q must have matching leading length")
    d = q.shape[1]

    top = q.argmax(axis=1)
    assigned = q[np.arange(len(q)), top] >= 1.0 - epsilon

    entry_times = []
    entry_states = []
    current = -1
    for k in range(len(times)):
        if not assigned[k]:
            continue
        s = int(top[k])
        if s != current:
            entry_times.append(float(times[k]))
            entry_states.append(s)
            current = s
    return StatePath(
        dim=d,
        times=np.asarray(entry_times),
        states=np.asarray(entry_states, dtype=np.int64),
        horizon=float(times[-1]) if len(times) else 0.0,
    )


def detect_jumps_trajectory(traj, epsilon: float = DEFAULT_EPSILON) -> StatePath:
    return detect_jumps(traj.times, traj.q, epsilon)


def estimate_generator(paths: list) -> JumpStats:
    """Count/time maximum-likelihood estimate of the generator.

    ``m_hat[i, j] = N(i -> j) / T_i`` with 95% half-width
    ``1.96 sqrt(N) / T_i``; diagonal entries balance the rows, and their
    half-width combines the row in quadrature.
    """
    if not paths:
        raise EmptyEnsembleError("no paths supplied")
    dim = paths[0].dim
    counts = np.zeros((dim, dim), dtype=np.int64)
    dwell = np.zeros(dim)
    for p in paths:
        if p.dim != dim:
            raise DimensionMismatchError("paths have inconsistent dimensions")
        if not p.collapsed:
            continue
        counts += p.transition_counts()
        dwell += p.dwell_totals()
    if counts.sum() == 0:
        raise EmptyEnsembleError("no transitions in the aggregate ensemble")

    m_hat = np.zeros((dim, dim))
    ci = np.zeros((dim, dim))
    for i in range(dim):
        if dwell[i] > 0:
            m_hat[i] = counts[i] / dwell[i]
            ci[i] = 1.96 * np.sqrt(counts[i]) / dwell[i]
        m_hat[i, i] = 0.0
        ci[i, i] = 0.0
    np.fill_diagonal(m_hat, -m_hat.sum(axis=1))
    np.fill_diagonal(ci, np.sqrt((ci**2).sum(axis=1)))
    return JumpStats(
        dim=dim,
        transition_counts=counts,
        dwell_time_totals=dwell,
        m_hat=m_hat,
        ci_halfwidth=ci,
        n_trajectories=len(paths),
    )


def collapse_frequencies(paths: list, window: float) -> np.ndarray:
    """Frequency of the first assigned state across the ensemble.

    Every path must reach a threshold within ``window``; the result sums to
    one exactly.
    """
    if not paths:
        raise EmptyEnsembleError("no paths supplied")
    dim = paths[0].dim
    counts = np.zeros(dim, dtype=np.int64)
    for k, p in enumerate(paths):
        if not p.collapsed or p.times[0] > window:
            raise NoCollapseError(f"path {k} has no state assignment within window {window}")
        counts[p.states[0]] += 1
    freq = counts / counts.sum()
    freq[-1] = 1.0 - freq[:-1].sum()
    return freq


def no_collapse_fraction(paths: list) -> float:
    """Fraction of paths that never reached any assignment threshold."""
    if not paths:
        raise EmptyEnsembleError("no paths supplied")
    return sum(1 for p in paths if not p.collapsed) / len(paths)


@dataclass
class ConditionalPhaseMean:
    """Conditioned time-and-ensemble averages of the rescaled phases."""

    dim: int
    mean: np.ndarray        # (d, d) complex, zero diagonal
    se: np.ndarray          # (d, d) combined standard error
    n_samples: int


def conditional_phase_mean(
    qy_trajectories: list,
    state: int,
    epsilon: float = DEFAULT_EPSILON,
    burn_in: float = 0.0,
) -> ConditionalPhaseMean:
    """Average the phases over samples parked in a given telegraph state.

    Qualifying samples satisfy ``Q_state >= 1 - epsilon`` and sit at least
    ``burn_in`` after the segment's first assignment.  Standard errors come
    from the spread of per-trajectory means, which is robust to the strong
    autocorrelation along a single path.
    """
    if burn_in < 0:
        raise DimensionMismatchError("burn_in must be nonnegative")
    if not qy_trajectories:
        raise EmptyEnsembleError("no trajectories supplied")
    d = qy_trajectories[0].dim

    traj_means = []
    traj_weights = []
    total = 0
    sum_all = np.zeros((d, d), complex)
    for traj in qy_trajectories:
        path = detect_jumps(traj.times, traj.q, epsilon)
        if not path.collapsed:
            continue
        seg_starts = path.times
        seg_states = path.states
        seg_idx = np.searchsorted(seg_starts, traj.times, side="right") - 1
        valid = seg_idx >= 0
        in_state = np.zeros(len(traj.times), dtype=bool)
        in_state[valid] = seg_states[seg_idx[valid]] == state
        aged = np.zeros(len(traj.times), dtype=bool)
        aged[valid] = traj.times[valid] - seg_starts[seg_idx[valid]] >= burn_in
        near = traj.q[:, state] >= 1.0 - epsilon
        mask = in_state & aged & near
        n_here = int(mask.sum())
        if n_here == 0:
            continue
        block = traj.y[mask]
        sum_all += block.sum(axis=0)
        traj_means.append(block.mean(axis=0))
        traj_weights.append(n_here)
        total += n_here

    if total < 100:
        raise InsufficientSamplesError(
            f"only {total} qualifying samples (need >= 100)"
        )
    mean = sum_all / total
    np.fill_diagonal(mean, 0.0)

    stack = np.asarray(traj_means)
    n_b = len(traj_means)
    if n_b > 1:
        var = stack.real.var(axis=0, ddof=1) + stack.imag.var(axis=0, ddof=1)
        se = np.sqrt(var / n_b)
    else:
        se = np.full((d, d), np.inf)
    np.fill_diagonal(se, 0.0)
    return ConditionalPhaseMean(dim=d, mean=mean, se=se, n_samples=total)


@dataclass
class MeanQ:
    times: np.ndarray
    mean: np.ndarray   # (nsamp, d)
    se: np.ndarray     # (nsamp, d)
    n_trajectories: int


def ensemble_mean_q(trajectories: list) -> MeanQ:
    """Pointwise ensemble mean and standard error of the populations."""
    if not trajectories:
        raise EmptyEnsembleError("no trajectories supplied")
    times = trajectories[0].times
    for t in trajectories[1:]:
        if len(t.times) != len(times) or not np.array_equal(t.times, times):
            raise DimensionMismatchError("trajectories do not share a time grid")
    stack = np.stack([t.q for t in trajectories])
    n = stack.shape[0]
    mean = stack.mean(axis=0)
    if n > 1:
        se = stack.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        se = np.zeros_like(mean)
    return MeanQ(times=times, mean=mean, se=se, n_trajectories=n)


def z_scores(stats: JumpStats, gen: RateGenerator) -> np.ndarray:
    """(m_hat - m) / SE entrywise for the off-diagonal rates."""
    z = np.zeros((stats.dim, stats.dim))
    se = stats.ci_halfwidth / 1.96
    for i in range(stats.dim):
        for j in range(stats.dim):
            if i == j:
                continue
            if se[i, j] > 0:
                z[i, j] = (stats.m_hat[i, j] - gen.m[i, j]) / se[i, j]
            elif abs(stats.m_hat[i, j] - gen.m[i, j]) > 0:
                z[i, j] = np.inf
    return z
