"""Monte Carlo sampling of sequential measurement trajectories.

A measurement instrument is a pair of completely positive HS-space maps
(E0, E1) summing to a trace-preserving channel; the ideal cycle instrument is
E_alpha = M_alpha x M_alpha*.  Outcome alpha occurs with probability
p_alpha = <<I|E_alpha|rho>> and updates the state to E_alpha(rho)/p_alpha.

Reproducibility: every trajectory draws its uniforms from its own
counter-based stream keyed by (master seed, trajectory index), so results are
bit-for-bit identical regardless of how trajectories are chunked over worker
threads.  Worker chunks are merged in trajectory-index order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidState, NotAChannel, TooLarge, ZeroProbabilityBranch
from .linalg import dagger, devec, identity_bra, vec
from .channel import KrausPair
from .tolerances import ATOL_STRUCTURAL, PROBABILITY_FLOOR, STATE_PSD_FLOOR

__all__ = [
    "MeasurementInstrument",
    "StepResult",
    "step",
    "TrajectoryRecord",
    "run_trajectory",
    "BinStatistics",
    "TrajectoryEnsemble",
    "run_ensemble",
    "channel_power_state",
    "BruteForceDistribution",
    "brute_force_distribution",
    "default_class_edges",
    "total_variation",
]

MAX_ENUMERATION_STEPS = 16

# uniform-draw buffer budget per worker chunk, in doubles
_RNG_BLOCK_BUDGET = 8_000_000


@dataclass(frozen=True)
class MeasurementInstrument:
    """Two-outcome instrument as a pair of HS-space CP maps."""

    e0: np.ndarray
    e1: np.ndarray

    def __post_init__(self):
        e0 = np.asarray(self.e0, dtype=complex)
        e1 = np.asarray(self.e1, dtype=complex)
        if e0.shape != e1.shape or e0.ndim != 2 or e0.shape[0] != e0.shape[1]:
            raise DimensionMismatch("instrument maps must be equal square matrices")
        d = int(round(math.sqrt(e0.shape[0])))
        if d * d != e0.shape[0]:
            raise DimensionMismatch("instrument maps must act on a d^2 space")
        bra = identity_bra(d)
        resid = float(np.linalg.norm(bra @ (e0 + e1) - bra))
        if resid > 1e-8:
            raise NotAChannel(f"instrument sum is not trace preserving: residual {resid:.3e}")
        object.__setattr__(self, "e0", e0)
        object.__setattr__(self, "e1", e1)

    @classmethod
    def from_kraus_pair(cls, pair: KrausPair) -> "MeasurementInstrument":
        return cls(
            e0=np.kron(pair.m0, pair.m0.conj()),
            e1=np.kron(pair.m1, pair.m1.conj()),
        )

    @property
    def dim(self) -> int:
        return int(round(math.sqrt(self.e0.shape[0])))

    @property
    def channel(self) -> np.ndarray:
        return self.e0 + self.e1


@dataclass(frozen=True)
class StepResult:
    outcome: int
    state: np.ndarray
    probability: float


def _normalize_state(rho: np.ndarray, psd_floor: float, context: str) -> np.ndarray:
    """Re-Hermitize, check positivity, renormalize the trace."""
    rho = 0.5 * (rho + dagger(rho))
    w = np.linalg.eigvalsh(rho)
    if w.min() < psd_floor:
        raise InvalidState(f"{context}: state eigenvalue {w.min():.3e} below {psd_floor:.1e}")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-9 * max(1.0, abs(tr)):
        rho = rho / tr
    return rho


def step(
    rho: np.ndarray,
    instrument: MeasurementInstrument,
    u: float,
    psd_floor: float = STATE_PSD_FLOOR,
) -> StepResult:
    """One measurement: draw the outcome from u in [0,1) and update the state."""
    rv = vec(np.asarray(rho, dtype=complex))
    bra = identity_bra(instrument.dim)
    v0 = instrument.e0 @ rv
    p0 = float((bra @ v0).real)
    if u < p0:
        outcome, branch, p = 0, v0, p0
    else:
        outcome, branch, p = 1, instrument.e1 @ rv, 1.0 - p0
    if p < PROBABILITY_FLOOR:
        raise ZeroProbabilityBranch(
            f"outcome {outcome} selected with probability {p:.3e}"
        )
    rho_next = _normalize_state(devec(branch / p), psd_floor, "measurement update")
    return StepResult(outcome=outcome, state=rho_next, probability=p)


@dataclass(frozen=True)
class TrajectoryRecord:
    """One realized outcome sequence with its conditional-state endpoint."""

    outcomes: np.ndarray          # uint8, length m
    f1: float
    final_state: np.ndarray
    log_probability: float
    states: tuple[np.ndarray, ...] | None = None   # per-step states, debug only

    @property
    def x(self) -> float:
        return self.f1 - 0.5


def run_trajectory(
    rho0: np.ndarray,
    instrument: MeasurementInstrument,
    m: int,
    rng: np.random.Generator,
    record_states: bool = False,
) -> TrajectoryRecord:
    """Sample one trajectory of m sequential measurements.

    The summed per-step log probabilities reproduce the probability of the
    realized sequence, <<I| E_{a_m} ... E_{a_1} |rho0>>.
    """
    if m < 1:
        raise ValueError("trajectory length m must be >= 1")
    rho = np.asarray(rho0, dtype=complex)
    outcomes = np.empty(m, dtype=np.uint8)
    log_p = 0.0
    states = [] if record_states else None
    for n in range(m):
        result = step(rho, instrument, float(rng.random()))
        outcomes[n] = result.outcome
        log_p += math.log(result.probability)
        rho = result.state
        if states is not None:
            states.append(rho.copy())
    return TrajectoryRecord(
        outcomes=outcomes,
        f1=float(outcomes.sum()) / m,
        final_state=rho,
        log_probability=log_p,
        states=tuple(states) if states is not None else None,
    )


# --------------------------------------------------------------------------
# Batched ensemble
# --------------------------------------------------------------------------

def default_class_edges(n_spins: int) -> np.ndarray:
    """Interior X-axis boundaries of the trajectory classes used for fidelity curves.

    One bath spin: two classes split at 0.  Two spins: four classes with
    boundaries at -0.2, 0, 0.2.  Beyond that, 2^K uniform classes.
    """
    if n_spins == 1:
        return np.array([0.0])
    if n_spins == 2:
        return np.array([-0.2, 0.0, 0.2])
    k = 2**n_spins
    return np.linspace(-0.5, 0.5, k + 1)[1:-1]


@dataclass(frozen=True)
class BinStatistics:
    """Accumulated statistics of one trajectory class."""

    label: str
    lo: float
    hi: float
    count: int
    sample_ratio: float
    mean_state: np.ndarray | None
    fidelity_mean: np.ndarray    # one entry per target; NaN when the class is empty
    fidelity_stderr: np.ndarray


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Outcome statistics of a seeded ensemble of trajectories."""

    m: int
    samples: int
    seed: int
    f1: np.ndarray
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray
    class_stats: tuple[BinStatistics, ...]
    mean_state: np.ndarray
    final_states: np.ndarray | None
    targets: tuple[np.ndarray, ...]
    outcomes: np.ndarray | None = None

    @property
    def x(self) -> np.ndarray:
        return self.f1 - 0.5


def _chunk_ranges(n: int, workers: int) -> list[tuple[int, int]]:
    size = (n + workers - 1) // workers
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _batch_fidelity(targets, states: np.ndarray) -> np.ndarray:
    """(n_targets, n_states) fidelities F(target, state) for batches of states."""
    n = states.shape[0]
    out = np.empty((len(targets), n))
    for j, target in enumerate(targets):
        w, v = np.linalg.eigh(target)
        rank = int(np.sum(w > 1e-12))
        if rank == 1:
            psi = v[:, -1]
            p = np.einsum("i,nij,j->n", psi.conj(), states, psi).real * w[-1]
            out[j] = np.sqrt(np.clip(p, 0.0, None))
        else:
            s = (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)
            inner = np.einsum("ab,nbc,cd->nad", s, states, s)
            ev = np.linalg.eigvalsh(0.5 * (inner + np.conj(np.transpose(inner, (0, 2, 1)))))
            out[j] = np.sqrt(np.clip(ev, 0.0, None)).sum(axis=1)
    return out


def _run_chunk(
    instrument: MeasurementInstrument,
    rho0_vec: np.ndarray,
    m: int,
    seed: int,
    start: int,
    stop: int,
    psd_check_interval: int,
    keep_outcomes: bool,
):
    n = stop - start
    d = instrument.dim
    d2 = d * d
    e0t = instrument.e0.T.copy()
    e1t = instrument.e1.T.copy()
    bra = identity_bra(d)
    states = np.tile(rho0_vec, (n, 1))
    gens = [
        np.random.Generator(np.random.Philox(key=[seed % 2**64, idx]))
        for idx in range(start, stop)
    ]
    n1 = np.zeros(n, dtype=np.int64)
    outcomes = np.empty((n, m), dtype=np.uint8) if keep_outcomes else None

    block = max(1, min(m, _RNG_BLOCK_BUDGET // max(n, 1)))
    done = 0
    while done < m:
        take = min(block, m - done)
        uniforms = np.empty((n, take))
        for i, g in enumerate(gens):
            uniforms[i] = g.random(take)
        for s in range(take):
            branch0 = states @ e0t
            branch1 = states @ e1t
            p0 = np.clip((branch0 @ bra).real, 0.0, 1.0)
            pick1 = uniforms[:, s] >= p0
            p = np.where(pick1, 1.0 - p0, p0)
            if np.any(p < PROBABILITY_FLOOR):
                idx = int(np.argmin(p))
                raise ZeroProbabilityBranch(
                    f"trajectory {start + idx}, cycle {done + s}: branch probability {p[idx]:.3e}"
                )
            states = np.where(pick1[:, None], branch1, branch0) / p[:, None]
            mats = states.reshape(n, d, d)
            mats = 0.5 * (mats + np.conj(np.transpose(mats, (0, 2, 1))))
            traces = np.einsum("nii->n", mats).real
            states = (mats / traces[:, None, None]).reshape(n, d2)
            n1 += pick1
            if outcomes is not None:
                outcomes[:, done + s] = pick1
            cycle = done + s + 1
            if cycle % psd_check_interval == 0 or cycle == m:
                min_eig = np.linalg.eigvalsh(states.reshape(n, d, d)).min(axis=1)
                if min_eig.min() < STATE_PSD_FLOOR:
                    idx = int(np.argmin(min_eig))
                    raise InvalidState(
                        f"trajectory {start + idx}, cycle {cycle}: "
                        f"state eigenvalue {min_eig[idx]:.3e}"
                    )
        done += take
    return n1 / m, states.reshape(n, d, d), outcomes


def run_ensemble(
    rho0: np.ndarray,
    instrument: MeasurementInstrument,
    m: int,
    samples: int,
    seed: int,
    bins: int = 101,
    class_edges=None,
    targets=None,
    workers: int = 1,
    keep_final_states: bool = True,
    keep_outcomes: bool = False,
    psd_check_interval: int = 64,
) -> TrajectoryEnsemble:
    """Sample an ensemble of trajectories and accumulate binned statistics.

    Parameters
    ----------
    rho0 : initial environment state (density matrix).
    m : measurements per trajectory.
    samples : number of trajectories.
    seed : master seed; combined with each trajectory index it fixes that
        trajectory's uniform stream, so the result is identical for any
        ``workers`` value.
    bins : histogram bin count over X = f1 - 1/2 in [-1/2, 1/2].
    class_edges : interior X boundaries of the trajectory classes used for
        state averaging and fidelity; defaults to a single split at 0.
    targets : states against which per-trajectory fidelities are evaluated
        (typically polarization targets or channel fixed points).
    workers : worker threads; purely a throughput knob.
    psd_check_interval : cycles between positivity sweeps of the conditional
        states (every state is re-Hermitized and renormalized every cycle).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rho0 = np.asarray(rho0, dtype=complex)
    d = instrument.dim
    if rho0.shape != (d, d):
        raise DimensionMismatch(f"initial state shape {rho0.shape} does not match dim {d}")
    rho0_vec = vec(rho0)

    if class_edges is None:
        class_edges = np.array([0.0])
    class_edges = np.asarray(class_edges, dtype=float)
    targets = tuple(np.asarray(t, dtype=complex) for t in (targets or ()))

    f1 = np.empty(samples)
    finals = np.empty((samples, d, d), dtype=complex)
    outcome_store = np.empty((samples, m), dtype=np.uint8) if keep_outcomes else None

    ranges = _chunk_ranges(samples, max(1, workers))

    def work(rng_range):
        start, stop = rng_range
        return start, stop, _run_chunk(
            instrument, rho0_vec, m, seed, start, stop, psd_check_interval, keep_outcomes
        )

    if len(ranges) == 1:
        results = [work(ranges[0])]
    else:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = list(pool.map(work, ranges))
    for start, stop, (f1_chunk, states_chunk, outc) in sorted(results, key=lambda r: r[0]):
        f1[start:stop] = f1_chunk
        finals[start:stop] = states_chunk
        if outcome_store is not None:
            outcome_store[start:stop] = outc

    x = f1 - 0.5
    hist_edges = np.linspace(-0.5, 0.5, bins + 1)
    hist_counts, _ = np.histogram(x, bins=hist_edges)

    all_edges = np.concatenate([[-0.5], class_edges, [0.5]])
    fid_all = _batch_fidelity(targets, finals) if targets else np.empty((0, samples))
    class_stats = []
    for i in range(len(all_edges) - 1):
        lo, hi = all_edges[i], all_edges[i + 1]
        last = i == len(all_edges) - 2
        sel = (x >= lo) & ((x <= hi) if last else (x < hi))
        count = int(sel.sum())
        label = f"[{lo:g},{hi:g}" + ("]" if last else ")")
        if count:
            mean_state = finals[sel].mean(axis=0)
            fmean = fid_all[:, sel].mean(axis=1) if targets else np.empty(0)
            if count > 1 and targets:
                fse = fid_all[:, sel].std(axis=1, ddof=1) / math.sqrt(count)
            else:
                fse = np.zeros(len(targets))
        else:
            mean_state = None
            fmean = np.full(len(targets), np.nan)
            fse = np.full(len(targets), np.nan)
        class_stats.append(
            BinStatistics(
                label=label,
                lo=float(lo),
                hi=float(hi),
                count=count,
                sample_ratio=count / samples,
                mean_state=mean_state,
                fidelity_mean=np.asarray(fmean),
                fidelity_stderr=np.asarray(fse),
            )
        )

    return TrajectoryEnsemble(
        m=m,
        samples=samples,
        seed=seed,
        f1=f1,
        histogram_counts=hist_counts,
        histogram_edges=hist_edges,
        class_stats=tuple(class_stats),
        mean_state=finals.mean(axis=0),
        final_states=finals if keep_final_states else None,
        targets=targets,
        outcomes=outcome_store,
    )


# --------------------------------------------------------------------------
# Deterministic references
# --------------------------------------------------------------------------

def channel_power_state(rho0: np.ndarray, phi_hat: np.ndarray, m: int) -> np.ndarray:
    """Unconditional state after m cycles, Phi^m applied by repeated squaring."""
    if m < 0:
        raise ValueError("m must be non-negative")
    rho0 = np.asarray(rho0, dtype=complex)
    if m == 0:
        return rho0.copy()
    return devec(np.linalg.matrix_power(phi_hat, m) @ vec(rho0))


@dataclass(frozen=True)
class BruteForceDistribution:
    """Exact joint outcome-sequence probabilities for small m."""

    m: int
    sequence_probs: dict
    f1_grid: np.ndarray
    f1_probs: np.ndarray


def brute_force_distribution(
    rho0: np.ndarray,
    instrument: MeasurementInstrument,
    m: int,
    cap: int = MAX_ENUMERATION_STEPS,
) -> BruteForceDistribution:
    """Enumerate all 2^m outcome sequences exactly.

    The probability of a sequence is the repeated instrument product
    contracted with <<I|; the aggregated frequency distribution p(F) is
    returned on the admissible grid f1 = k/m.
    """
    if m > cap:
        raise TooLarge(f"enumeration of 2^{m} sequences exceeds the cap m <= {cap}")
    if m < 1:
        raise ValueError("m must be >= 1")
    d = instrument.dim
    bra = identity_bra(d)
    seq_probs: dict[tuple[int, ...], float] = {}
    f1_probs = np.zeros(m + 1)

    def descend(state_vec, prefix):
        depth = len(prefix)
        if depth == m:
            p = float((bra @ state_vec).real)
            seq_probs[prefix] = p
            f1_probs[sum(prefix)] += p
            return
        descend(instrument.e0 @ state_vec, prefix + (0,))
        descend(instrument.e1 @ state_vec, prefix + (1,))

    descend(vec(np.asarray(rho0, dtype=complex)), ())
    total = f1_probs.sum()
    if abs(total - 1.0) > 1e-10:
        raise NotAChannel(f"enumerated probabilities sum to {total:.12f}")
    return BruteForceDistribution(
        m=m,
        sequence_probs=seq_probs,
        f1_grid=np.arange(m + 1) / m,
        f1_probs=f1_probs,
    )


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance (1/2) sum |p - q| between two distributions."""
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())
