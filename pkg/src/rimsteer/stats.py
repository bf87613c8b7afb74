"""Closed-form measurement statistics for sequential probing.

Everything here is deterministic: finite-m expectation of the outcome
frequency split into its fixed-sector and transient parts, per-sector peak
centers and variances, the relative-entropy peak distribution of commuting
models, the single-cycle coherence, and i.i.d. baselines for comparison.

Outcome labels are fixed as a0 = 0, a1 = 1, so the trajectory average of
outcomes coincides with the frequency f1 of outcome 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .channel import ChannelAnalysis, FixedPointDecomposition, asymptotic_projector
from .errors import NotCommuting, SingularResolvent
from .linalg import expm_hermitian, identity_bra, vec
from .models import ModelOperators
from .tolerances import COMMUTE_TOL
from .trajectories import MeasurementInstrument

__all__ = [
    "ExpectationReport",
    "analytic_expectation_f1",
    "fixed_point_peak_centers",
    "analytic_variance_fixed",
    "PeakDistribution",
    "commuting_peak_distribution",
    "coherence",
    "iid_binomial_baseline",
    "asymptotic_tail_vanishing",
    "PeakReport",
    "PeakEntry",
    "peak_report",
]


@dataclass(frozen=True)
class ExpectationReport:
    """<f1> at finite m, split into fixed-sector and transient contributions."""

    total: float
    fixed_term: float
    tail_term: float


def analytic_expectation_f1(
    rho0: np.ndarray,
    instrument: MeasurementInstrument,
    m: int,
    projector: np.ndarray,
) -> ExpectationReport:
    """Exact finite-m expectation of the outcome frequency.

    total      = (1/m) <<I| E1 sum_{n=1}^m Phi^{n-1} |rho0>>
    fixed_term = <<I| E1 P |rho0>>              (m-independent)
    tail_term  = (1/m) <<I| E1 sum PhiD^{n-1} Q |rho0>>

    with P the fixed-sector projector, Q = 1 - P and PhiD = Phi - P.  The
    identity total = fixed_term + tail_term holds exactly.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    d = instrument.dim
    bra = identity_bra(d)
    phi = instrument.channel
    rv = vec(np.asarray(rho0, dtype=complex))

    acc = np.zeros_like(rv)
    v = rv.copy()
    for _ in range(m):
        acc += v
        v = phi @ v
    total = float((bra @ (instrument.e1 @ acc)).real) / m

    fixed_term = float((bra @ (instrument.e1 @ (projector @ rv))).real)

    q = np.eye(d * d) - projector
    phi_d = phi - projector
    acc_d = np.zeros_like(rv)
    w = q @ rv
    for _ in range(m):
        acc_d += w
        w = phi_d @ w
    tail_term = float((bra @ (instrument.e1 @ acc_d)).real) / m
    return ExpectationReport(total=total, fixed_term=fixed_term, tail_term=tail_term)


def fixed_point_peak_centers(
    fixed: FixedPointDecomposition, instrument: MeasurementInstrument
) -> np.ndarray:
    """Per-sector peak centers <f1_j>* = <<I| E1 |state_j>>, each in [0, 1]."""
    bra = identity_bra(instrument.dim)
    centers = [
        float((bra @ (instrument.e1 @ vec(state))).real) for state in fixed.states
    ]
    return np.clip(np.asarray(centers), 0.0, 1.0)


def _centered_maps(instrument: MeasurementInstrument, center: float):
    e1c = (0.0 - center) * instrument.e0 + (1.0 - center) * instrument.e1
    e2c = (0.0 - center) ** 2 * instrument.e0 + (1.0 - center) ** 2 * instrument.e1
    return e1c, e2c


def analytic_variance_fixed(
    j: int,
    instrument: MeasurementInstrument,
    fixed: FixedPointDecomposition,
    m: int,
    projector: np.ndarray | None = None,
    unit_leak_tol: float = 1e-10,
) -> float:
    """Exact variance of f1 over trajectories started in fixed sector j.

    Var[f1_j] = sigma_j^2 / m
              - (2/m^2) <<I| E1c (PhiD - PhiD^m) (1 - PhiD)^{-2} Q E1c |state_j>>,
    sigma_j^2 = <<I| E2c |state_j>> + 2 <<I| E1c (1 - PhiD)^{-1} Q E1c |state_j>>,

    with E1c/E2c the first/second outcome-centered instrument moments.  The
    resolvent is evaluated on the range of Q by least squares; at a rank-one
    commuting sector everything past the Bernoulli term vanishes.

    Raises
    ------
    SingularResolvent
        If the decaying part of the channel still carries a unit eigenvalue.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    d = instrument.dim
    d2 = d * d
    bra = identity_bra(d)
    if projector is None:
        projector, _ = asymptotic_projector(fixed)
    phi_d = instrument.channel - projector
    leak = np.abs(np.linalg.eigvals(phi_d) - 1.0).min()
    if leak < unit_leak_tol:
        raise SingularResolvent(
            f"decaying channel part has an eigenvalue within {leak:.3e} of 1"
        )
    rho_vec = vec(fixed.states[j])
    center = float((bra @ (instrument.e1 @ rho_vec)).real)
    e1c, e2c = _centered_maps(instrument, center)

    q = np.eye(d2) - projector
    rhs = q @ (e1c @ rho_vec)
    one_minus = np.eye(d2) - phi_d
    x_inf, *_ = np.linalg.lstsq(one_minus, rhs, rcond=None)
    sigma_sq = float((bra @ (e2c @ rho_vec)).real) + 2.0 * float((bra @ (e1c @ x_inf)).real)

    finite_rhs = (phi_d - np.linalg.matrix_power(phi_d, m)) @ rhs
    y, *_ = np.linalg.lstsq(one_minus @ one_minus, finite_rhs, rcond=None)
    correction = (2.0 / m**2) * float((bra @ (e1c @ y)).real)
    return sigma_sq / m - correction


# --------------------------------------------------------------------------
# Commuting-case peak distribution
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PeakDistribution:
    """p(F) over the admissible grid f1 = k/m, as a mixture of sector kernels."""

    m: int
    f1_grid: np.ndarray
    probs: np.ndarray
    sector_values: np.ndarray     # eigenvalue of the noise operator per sector
    sector_weights: np.ndarray    # Tr(P_k rho0)
    sector_centers: np.ndarray    # p_{1k}


def _relative_entropy_kernel(f1_grid: np.ndarray, p1: float, m: int) -> np.ndarray:
    """exp(-m S(F || F_k)) on the grid, normalized to unit mass."""
    f1 = f1_grid
    f0 = 1.0 - f1
    p1 = min(max(p1, 0.0), 1.0)
    p0 = 1.0 - p1
    log_kernel = np.full_like(f1, -np.inf)
    ok = np.ones_like(f1, dtype=bool)
    s = np.zeros_like(f1)
    for fa, pa in ((f0, p0), (f1, p1)):
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(fa > 0, fa * (np.log(np.maximum(fa, 1e-300)) - math.log(max(pa, 1e-300))), 0.0)
        impossible = (fa > 0) & (pa == 0.0)
        ok &= ~impossible
        s += term
    log_kernel = np.where(ok, -m * s, -np.inf)
    kernel = np.exp(log_kernel - log_kernel.max())
    return kernel / kernel.sum()


def _noise_sectors(ops: ModelOperators, tol: float = 1e-9):
    """Eigenvalue sectors of the noise operator: (value, projector) pairs."""
    w, v = np.linalg.eigh(ops.b)
    scale = max(float(np.abs(w).max()), 1.0)
    sectors = []
    i = 0
    while i < len(w):
        j = i
        while j + 1 < len(w) and abs(w[j + 1] - w[j]) < tol * scale:
            j += 1
        block = v[:, i : j + 1]
        sectors.append((float(np.mean(w[i : j + 1])), block @ block.conj().T))
        i = j + 1
    return sectors


def commuting_peak_distribution(
    rho0: np.ndarray,
    ops: ModelOperators,
    t: float,
    delta_phi: float,
    m: int,
    tol_commute: float = COMMUTE_TOL,
) -> PeakDistribution:
    """Closed-form p(F) for a commuting model.

    p(F) = sum_k w_k exp(-m S(F || F_k)), with one kernel per eigenvalue
    sector of the noise operator, each normalized over the admissible grid,
    F_k = (p_{0k}, p_{1k}), p_{1k} = [1 + cos(2 b_k t + dphi)] / 2 and
    w_k = Tr(P_k rho0).  Sectors with coincident centers merge automatically.

    Raises
    ------
    NotCommuting
        If [b, h_env] is not numerically zero.
    """
    comm = ops.b @ ops.h_env - ops.h_env @ ops.b
    scale = np.linalg.norm(ops.b) * np.linalg.norm(ops.h_env) + 1e-300
    if np.linalg.norm(comm) / scale > tol_commute:
        raise NotCommuting(
            f"relative commutator {np.linalg.norm(comm) / scale:.3e} exceeds {tol_commute:.1e}"
        )
    rho0 = np.asarray(rho0, dtype=complex)
    f1_grid = np.arange(m + 1) / m
    probs = np.zeros(m + 1)
    values, weights, centers = [], [], []
    for b_k, p_k in _noise_sectors(ops):
        w_k = float(np.trace(p_k @ rho0).real)
        p1k = 0.5 * (1.0 + math.cos(2.0 * b_k * t + delta_phi))
        values.append(b_k)
        weights.append(w_k)
        centers.append(p1k)
        if w_k > 0:
            probs += w_k * _relative_entropy_kernel(f1_grid, p1k, m)
    probs = probs / probs.sum()
    return PeakDistribution(
        m=m,
        f1_grid=f1_grid,
        probs=probs,
        sector_values=np.asarray(values),
        sector_weights=np.asarray(weights),
        sector_centers=np.asarray(centers),
    )


# --------------------------------------------------------------------------
# Coherence and baselines
# --------------------------------------------------------------------------

def coherence(rho: np.ndarray, ops: ModelOperators, t: float, delta_phi: float) -> float:
    """Single-cycle qubit coherence -Re{ Tr[U1 rho U0^dag] e^{i dphi} }.

    Equal to p0 - p1 of the matching instrument, and in [-1, 1].
    """
    u0 = expm_hermitian(ops.h_env + ops.b, t)
    u1 = expm_hermitian(ops.h_env - ops.b, t)
    val = np.trace(u1 @ np.asarray(rho, dtype=complex) @ u0.conj().T) * np.exp(1j * delta_phi)
    return float(-val.real)


def iid_binomial_baseline(p1: float, m: int) -> np.ndarray:
    """Binomial p(F) over f1 = k/m: the i.i.d. prediction for a fixed p1."""
    if not 0.0 <= p1 <= 1.0:
        raise ValueError("p1 must lie in [0, 1]")
    return scipy.stats.binom.pmf(np.arange(m + 1), m, p1)


def asymptotic_tail_vanishing(
    rho0: np.ndarray,
    instrument: MeasurementInstrument,
    m_list,
    projector: np.ndarray,
) -> np.ndarray:
    """|transient term of <f1>| at each m; decays to zero (Cesaro for rotating points)."""
    m_list = list(m_list)
    if any(m < 1 for m in m_list):
        raise ValueError("all m must be >= 1")
    d = instrument.dim
    bra = identity_bra(d)
    q = np.eye(d * d) - projector
    phi_d = instrument.channel - projector
    wanted = {}
    w = q @ vec(np.asarray(rho0, dtype=complex))
    acc = np.zeros_like(w)
    for n in range(1, max(m_list) + 1):
        acc += w
        w = phi_d @ w
        if n in set(m_list):
            wanted[n] = abs(float((bra @ (instrument.e1 @ acc)).real)) / n
    return np.asarray([wanted[m] for m in m_list])


# --------------------------------------------------------------------------
# Combined per-model report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PeakEntry:
    rank: int
    weight: float          # Tr(observable_j rho0)
    center_f1: float       # <f1_j>*
    center_x: float
    coherence: float       # <sigma_q^z>_j* = 1 - 2 <f1_j>*
    variance: float        # Var[f1_j]* at the reported m


@dataclass(frozen=True)
class PeakReport:
    m: int
    entries: tuple[PeakEntry, ...]

    @property
    def weights(self) -> np.ndarray:
        return np.asarray([e.weight for e in self.entries])


def peak_report(rho0: np.ndarray, analysis: ChannelAnalysis, m: int) -> PeakReport:
    """Analytic peak weights, centers, widths and coherences for one model."""
    instrument = MeasurementInstrument.from_kraus_pair(analysis.kraus)
    centers = fixed_point_peak_centers(analysis.fixed, instrument)
    rho0 = np.asarray(rho0, dtype=complex)
    entries = []
    for j, (obs, rank) in enumerate(zip(analysis.fixed.observables, analysis.fixed.ranks)):
        weight = float(np.trace(obs @ rho0).real)
        var = analytic_variance_fixed(j, instrument, analysis.fixed, m, analysis.projector)
        entries.append(
            PeakEntry(
                rank=rank,
                weight=weight,
                center_f1=float(centers[j]),
                center_x=float(centers[j] - 0.5),
                coherence=float(1.0 - 2.0 * centers[j]),
                variance=var,
            )
        )
    return PeakReport(m=m, entries=tuple(entries))
