"""Measurement-induced channel on the environment: construction and analysis.

One probe cycle (prepare superposition, conditional evolution for time t,
second rotation, projective readout) induces a two-outcome instrument on the
environment with Kraus operators

    M_0 = (U_0 - e^{i dphi} U_1) / 2,      M_1 = (U_0 + e^{i dphi} U_1) / 2,
    U_alpha = exp(-i (h_env + (-1)^alpha b) t),

whose unconditional channel Phi = M_0 . M_0^dag + M_1 . M_1^dag is unital and
independent of the readout phase.  This module builds the channel in Kraus,
natural (HS-matrix) and dilation form, validates CPTP structure, and analyzes
what repeated application does: spectrum, fixed points (via the commutant of
the Kraus pair), the long-run projector, and the metastable window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, NotAChannel, NumericalDegeneracy, ZeroOperator
from .linalg import (
    SpectralDecomposition,
    conjugation_superop,
    dagger,
    devec,
    eig_general,
    expm_hermitian,
    identity_bra,
    vec,
)
from .models import ModelOperators, noncommutativity_eta
from .tolerances import (
    ATOL_ALGEBRAIC,
    ATOL_STRUCTURAL,
    COMMUTE_TOL,
    FIXED_POINT_COMMUTATOR_TOL,
    PSD_FLOOR,
    WINDOW_MIN_LIFETIME,
    WINDOW_SEPARATION,
)

__all__ = [
    "KrausPair",
    "kraus_from_model",
    "natural_representation",
    "stinespring_channel",
    "CPTPReport",
    "validate_cptp",
    "choi_matrix",
    "FixedPointDecomposition",
    "fixed_points",
    "fixed_subspace_basis",
    "asymptotic_projector",
    "MetastableWindow",
    "metastable_window",
    "Steering",
    "classify_steering",
    "ChannelAnalysis",
    "analyze_channel",
]


# --------------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KrausPair:
    """The two-outcome Kraus pair of one probe cycle."""

    m0: np.ndarray
    m1: np.ndarray
    t: float
    delta_phi: float

    def __post_init__(self):
        m0 = np.asarray(self.m0, dtype=complex)
        m1 = np.asarray(self.m1, dtype=complex)
        if m0.shape != m1.shape or m0.ndim != 2 or m0.shape[0] != m0.shape[1]:
            raise DimensionMismatch("Kraus operators must be square and equally sized")
        resid = np.abs(dagger(m0) @ m0 + dagger(m1) @ m1 - np.eye(m0.shape[0])).max()
        if resid > 100 * ATOL_ALGEBRAIC:
            raise NotAChannel(f"Kraus completeness violated by {resid:.3e}")
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "m1", m1)

    @property
    def dim(self) -> int:
        return self.m0.shape[0]


def kraus_from_model(ops: ModelOperators, t: float, delta_phi: float) -> KrausPair:
    """Kraus pair of one cycle from the (b, h_env) operator pair."""
    u0 = expm_hermitian(ops.h_env + ops.b, t)
    u1 = expm_hermitian(ops.h_env - ops.b, t)
    phase = np.exp(1j * delta_phi)
    return KrausPair(
        m0=0.5 * (u0 - phase * u1),
        m1=0.5 * (u0 + phase * u1),
        t=t,
        delta_phi=delta_phi,
    )


def natural_representation(pair: KrausPair) -> np.ndarray:
    """HS-space matrix of the unconditional channel: M0 x M0* + M1 x M1*."""
    return conjugation_superop(pair.m0) + conjugation_superop(pair.m1)


# ancilla (probe qubit) is the FIRST tensor factor in all dilation helpers

def _embed_superop(anc_state: np.ndarray, dim: int) -> np.ndarray:
    """HS map |rho>> -> |anc_state x rho>> as an explicit matrix."""
    a = np.asarray(anc_state, dtype=complex)
    na = a.shape[0]
    total = na * dim
    out = np.zeros((total * total, dim * dim), dtype=complex)
    for q in range(na):
        for qp in range(na):
            if a[q, qp] == 0:
                continue
            for i in range(dim):
                for ip in range(dim):
                    out[(q * dim + i) * total + (qp * dim + ip), i * dim + ip] = a[q, qp]
    return out


def _block_superop(alpha: int, na: int, dim: int) -> np.ndarray:
    """HS map extracting the (alpha, alpha) ancilla block: X -> <alpha|X|alpha>."""
    total = na * dim
    out = np.zeros((dim * dim, total * total), dtype=complex)
    for i in range(dim):
        for ip in range(dim):
            out[i * dim + ip, (alpha * dim + i) * total + (alpha * dim + ip)] = 1.0
    return out


def _ancilla_trace_superop(na: int, dim: int) -> np.ndarray:
    return sum(_block_superop(a, na, dim) for a in range(na))


def stinespring_channel(ops: ModelOperators, t: float, delta_phi: float) -> np.ndarray:
    """Channel built through the qubit dilation instead of the Kraus pair.

    Prepares the probe superposition, applies the conditional unitary
    sum_alpha |alpha><alpha| x U_alpha, and traces the probe out.  Used as a
    cross-validation path: it must match :func:`natural_representation`.
    """
    d = ops.dim
    u0 = expm_hermitian(ops.h_env + ops.b, t)
    u1 = expm_hermitian(ops.h_env - ops.b, t)
    psi = np.array([1.0, -1j * np.exp(1j * delta_phi)], dtype=complex) / math.sqrt(2)
    rho_q = np.outer(psi, psi.conj())
    u_cond = np.zeros((2 * d, 2 * d), dtype=complex)
    u_cond[:d, :d] = u0
    u_cond[d:, d:] = u1
    return (
        _ancilla_trace_superop(2, d)
        @ conjugation_superop(u_cond)
        @ _embed_superop(rho_q, d)
    )


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------

def choi_matrix(phi_hat: np.ndarray) -> np.ndarray:
    """Choi matrix by reshuffling the natural representation.

    With row-stacking, a Kraus-sum channel reshuffles to
    sum_alpha |M_alpha>><<M_alpha|, so complete positivity is equivalent to
    this matrix being PSD.
    """
    d2 = phi_hat.shape[0]
    d = int(round(math.sqrt(d2)))
    if d * d != d2 or phi_hat.shape != (d2, d2):
        raise DimensionMismatch(f"natural representation must be d^2 x d^2, got {phi_hat.shape}")
    return phi_hat.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d2, d2)


@dataclass(frozen=True)
class CPTPReport:
    """Residuals of the structural channel checks."""

    trace_preservation: float    # || <<I| Phi - <<I| ||
    unitality: float             # || Phi |I>> - |I>> ||
    min_choi_eigenvalue: float
    max_eigenvalue_modulus: float

    def ok(self, tp_tol: float = 1e-8, cp_floor: float = PSD_FLOOR) -> bool:
        return self.trace_preservation <= tp_tol and self.min_choi_eigenvalue >= cp_floor


def validate_cptp(
    phi_hat: np.ndarray,
    tp_tol: float = 1e-8,
    cp_floor: float = PSD_FLOOR,
    raise_on_failure: bool = True,
) -> CPTPReport:
    """Check trace preservation, unitality and complete positivity.

    Unitality is reported but not enforced (dissipative instruments are not
    unital); TP or CP failures raise :class:`NotAChannel` unless suppressed.
    """
    d2 = phi_hat.shape[0]
    d = int(round(math.sqrt(d2)))
    bra_i = identity_bra(d)
    ket_i = np.eye(d, dtype=complex).reshape(-1)
    tp = float(np.linalg.norm(bra_i @ phi_hat - bra_i))
    unital = float(np.linalg.norm(phi_hat @ ket_i - ket_i))
    choi = choi_matrix(phi_hat)
    w = np.linalg.eigvalsh(0.5 * (choi + dagger(choi)))
    spec = np.linalg.eigvals(phi_hat)
    report = CPTPReport(
        trace_preservation=tp,
        unitality=unital,
        min_choi_eigenvalue=float(w.min()),
        max_eigenvalue_modulus=float(np.abs(spec).max()),
    )
    if raise_on_failure and not report.ok(tp_tol, cp_floor):
        raise NotAChannel(
            f"TP residual {tp:.3e} (tol {tp_tol:.1e}), "
            f"min Choi eigenvalue {report.min_choi_eigenvalue:.3e} (floor {cp_floor:.1e})"
        )
    return report


# --------------------------------------------------------------------------
# Fixed points
# --------------------------------------------------------------------------

def fixed_subspace_basis(kraus_ops: list[np.ndarray], tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows, vectorized) of the joint commutant of the Kraus set.

    For a unital channel the commutant of its Kraus operators is exactly the
    space of operators the channel leaves fixed, so this doubles as the
    eigenvalue-1 eigenspace without running a general eigensolver.
    """
    d = kraus_ops[0].shape[0]
    eye = np.eye(d)
    rows = [np.kron(m, eye) - np.kron(eye, m.T) for m in kraus_ops]
    stacked = np.vstack(rows)
    _, s, vh = np.linalg.svd(stacked)
    cutoff = tol * max(float(s.max()), 1.0)
    n_null = int(np.sum(s < cutoff)) + (vh.shape[0] - len(s))
    if n_null == 0:
        raise NumericalDegeneracy(
            f"no fixed point found; smallest singular value {s.min():.3e} exceeds cutoff"
        )
    return vh[-n_null:].conj()


@dataclass(frozen=True)
class FixedPointDecomposition:
    """Minimal fixed projectors of the cycle channel.

    ``projectors`` are orthogonal projectors commuting with both Kraus
    operators and summing to the identity; ``states`` are the associated
    maximally mixed fixed states Pi_j / rank_j and ``observables`` the dual
    observables (the projectors themselves), normalized so
    <<observable_i | state_j>> = delta_ij.  ``commutant_dim`` is the full
    dimension of the fixed-operator space, which exceeds ``len(projectors)``
    exactly when some sector carries internal degeneracy.
    """

    projectors: tuple[np.ndarray, ...]
    states: tuple[np.ndarray, ...]
    observables: tuple[np.ndarray, ...]
    ranks: tuple[int, ...]
    commutant_dim: int
    basis: np.ndarray   # orthonormal rows spanning the fixed-operator space

    @property
    def count(self) -> int:
        return len(self.projectors)


def _partition_from_draw(
    basis: np.ndarray, d: int, rng: np.random.Generator, cluster_tol: float
) -> list[np.ndarray]:
    coef = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    raw = sum(c * v.reshape(d, d) for c, v in zip(coef, basis))
    herm = 0.5 * (raw + dagger(raw))
    w, v = np.linalg.eigh(herm)
    scale = max(float(np.abs(w).max()), 1.0)
    projectors = []
    i = 0
    while i < d:
        j = i
        while j + 1 < d and abs(w[j + 1] - w[j]) < cluster_tol * scale:
            j += 1
        block = v[:, i : j + 1]
        projectors.append(block @ dagger(block))
        i = j + 1
    return projectors


def fixed_points(
    pair: KrausPair,
    tol: float = 1e-10,
    commutator_tol: float = FIXED_POINT_COMMUTATOR_TOL,
    draws: int = 3,
    seed: int = 2023,
) -> FixedPointDecomposition:
    """Minimal fixed projectors via the commutant of the Kraus pair.

    The fixed-operator space is the nullspace of X -> ([X, M0], [X, M1]).  A
    random Hermitian element of that space is eigendecomposed; its spectral
    projectors are the minimal projectors of the fixed algebra for generic
    coefficients.  ``draws`` independent draws must agree on the sector count
    and ranks (majority vote), guarding against an accidental eigenvalue
    collision in one draw.

    Raises
    ------
    NumericalDegeneracy
        If the draws cannot agree on a block structure, or a candidate
        projector fails the commutation check.
    """
    d = pair.dim
    basis = fixed_subspace_basis([pair.m0, pair.m1], tol)
    rng = np.random.default_rng(seed)
    candidates = [_partition_from_draw(basis, d, rng, 1e-7) for _ in range(draws)]
    signatures = [tuple(sorted(int(round(np.trace(p).real)) for p in parts)) for parts in candidates]
    counts = {sig: signatures.count(sig) for sig in set(signatures)}
    best_sig, best_count = max(counts.items(), key=lambda kv: kv[1])
    if best_count * 2 <= draws:
        raise NumericalDegeneracy(f"fixed-point draws disagree on sector ranks: {signatures}")
    chosen = candidates[signatures.index(best_sig)]

    # deterministic ordering: descending rank, then lexicographic diagonal
    def _key(p):
        return (-round(np.trace(p).real), tuple(np.round(np.diag(p).real, 9)))

    chosen = sorted(chosen, key=_key)
    for proj in chosen:
        for m in (pair.m0, pair.m1):
            resid = float(np.linalg.norm(proj @ m - m @ proj))
            if resid > commutator_tol:
                raise NumericalDegeneracy(
                    f"candidate projector fails commutation check by {resid:.3e}"
                )
    total = sum(chosen)
    if np.abs(total - np.eye(d)).max() > ATOL_STRUCTURAL:
        raise NumericalDegeneracy("fixed projectors do not resolve the identity")
    ranks = tuple(int(round(np.trace(p).real)) for p in chosen)
    states = tuple(p / r for p, r in zip(chosen, ranks))
    return FixedPointDecomposition(
        projectors=tuple(chosen),
        states=states,
        observables=tuple(chosen),
        ranks=ranks,
        commutant_dim=len(basis),
        basis=basis,
    )


def asymptotic_projector(
    fixed: FixedPointDecomposition,
    spectrum: np.ndarray | None = None,
    peripheral_tol: float = ATOL_STRUCTURAL,
) -> tuple[np.ndarray, bool]:
    """HS projector the channel powers converge to, plus a rotating-point flag.

    Built as sum_i |x_i>><<x_i| over an orthonormal basis of the fixed
    space, which is the orthogonal projector onto it (left and right unit
    eigenspaces of a unital channel coincide).  When the fixed sectors are
    non-degenerate this equals sum_j |state_j>><<observable_j|.

    If ``spectrum`` is supplied and contains unit-modulus eigenvalues away
    from 1 (rotating points), the strict power limit does not exist; the
    returned matrix is then the long-run time average and the flag is True.
    """
    p_hat = sum(np.outer(v, v.conj()) for v in fixed.basis)
    has_rotating = False
    if spectrum is not None:
        mods = np.abs(spectrum)
        peripheral = mods >= 1 - peripheral_tol
        has_rotating = bool(np.any(peripheral & (np.abs(spectrum - 1) > peripheral_tol)))
    return p_hat, has_rotating


# --------------------------------------------------------------------------
# Metastability and classification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MetastableWindow:
    """Repetition-count window (m_lo, m_hi) where near-unit eigenvalues mimic fixed points.

    ``q`` is the 1-based index of the slowest eigenvalue inside the
    metastable band (eigenvalues sorted by descending modulus); the window is
    m_lo = 1/|ln|lambda_{q+1}||, m_hi = 1/|ln|lambda_q||.  ``empty`` flags a
    separation below the heuristic factor.
    """

    m_lo: float
    m_hi: float
    q: int
    empty: bool

    @property
    def separation(self) -> float:
        if self.m_lo == 0:
            return math.inf
        return self.m_hi / self.m_lo


def metastable_window(
    spectrum: np.ndarray,
    q: int,
    separation_factor: float = WINDOW_SEPARATION,
) -> MetastableWindow:
    """Evaluate the window boundaries for a given band index q (1-based).

    |lambda_q| = 1 gives an unbounded window (true fixed-point sector).
    """
    mods = np.abs(np.asarray(spectrum))
    if not np.all(mods[:-1] >= mods[1:] - 1e-15):
        mods = np.sort(mods)[::-1]
    if q < 1 or q >= len(mods):
        raise IndexError(f"band index q={q} out of range for {len(mods)} eigenvalues")
    lam_q, lam_next = float(mods[q - 1]), float(mods[q])
    m_hi = math.inf if lam_q >= 1.0 else 1.0 / abs(math.log(lam_q))
    if lam_next <= 0.0:
        m_lo = 0.0
    elif lam_next >= 1.0:
        m_lo = math.inf
    else:
        m_lo = 1.0 / abs(math.log(lam_next))
    sep = math.inf if m_lo == 0 else m_hi / m_lo
    return MetastableWindow(m_lo=m_lo, m_hi=m_hi, q=q, empty=bool(sep < separation_factor))


class Steering(Enum):
    """Long-run effect of repeated probing on the environment."""

    POLARIZATION = "polarization"
    DEPOLARIZATION = "depolarization"
    METASTABLE_POLARIZATION = "metastable_polarization"


def _best_window(
    spectrum: np.ndarray,
    separation_factor: float,
    min_lifetime: float,
    peripheral_tol: float = ATOL_STRUCTURAL,
) -> MetastableWindow | None:
    """Widest admissible window beyond the peripheral sector, if any."""
    mods = np.abs(np.asarray(spectrum))
    mods = np.sort(mods)[::-1]
    n_peripheral = int(np.sum(mods >= 1 - peripheral_tol))
    best = None
    for q in range(max(n_peripheral, 1) + 1, len(mods)):
        win = metastable_window(mods, q, separation_factor)
        if win.empty or not math.isfinite(win.m_hi) or win.m_hi < min_lifetime:
            continue
        if best is None or win.separation > best.separation:
            best = win
    return best


def _relative_commutator(ops: ModelOperators) -> float:
    """||[b, h_env]|| / (||b|| ||h_env|| + eps); equals eta/2 up to normalization."""
    comm = ops.b @ ops.h_env - ops.h_env @ ops.b
    scale = np.linalg.norm(ops.b) * np.linalg.norm(ops.h_env) + 1e-300
    return float(np.linalg.norm(comm) / scale)


def classify_steering(
    ops: ModelOperators,
    spectrum: np.ndarray,
    tol_commute: float = COMMUTE_TOL,
    separation_factor: float = WINDOW_SEPARATION,
    min_lifetime: float = WINDOW_MIN_LIFETIME,
) -> tuple[Steering, MetastableWindow | None]:
    """Classify the steering phenotype of a cycle channel.

    Commuting pair (relative commutator below ``tol_commute``): polarization.
    Otherwise the spectrum is scanned for a metastable band: a gap whose
    window spans at least ``separation_factor`` in m and whose slow edge
    survives at least ``min_lifetime`` cycles (the quantitative reading of
    "eigenvalues close to the unit circle").  Such a band means metastable
    polarization; none means depolarization.
    """
    if _relative_commutator(ops) < tol_commute:
        return Steering.POLARIZATION, None
    window = _best_window(spectrum, separation_factor, min_lifetime)
    if window is not None:
        return Steering.METASTABLE_POLARIZATION, window
    return Steering.DEPOLARIZATION, None


# --------------------------------------------------------------------------
# One-call analysis
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelAnalysis:
    """Everything the spectrum/fixed-point pipeline produces for one model."""

    kraus: KrausPair
    phi_hat: np.ndarray
    spectrum: np.ndarray
    decomposition: SpectralDecomposition
    cptp: CPTPReport
    fixed: FixedPointDecomposition
    projector: np.ndarray
    has_rotating_points: bool
    eta: float
    classification: Steering
    window: MetastableWindow | None


def analyze_channel(
    ops: ModelOperators,
    t: float,
    delta_phi: float,
    separation_factor: float = WINDOW_SEPARATION,
    min_lifetime: float = WINDOW_MIN_LIFETIME,
    tol_commute: float = COMMUTE_TOL,
) -> ChannelAnalysis:
    """Build the cycle channel for a model and run the full analysis."""
    pair = kraus_from_model(ops, t, delta_phi)
    phi_hat = natural_representation(pair)
    report = validate_cptp(phi_hat)
    decomp = eig_general(phi_hat)
    fixed = fixed_points(pair)
    projector, rotating = asymptotic_projector(fixed, decomp.eigenvalues)
    classification, window = classify_steering(
        ops,
        decomp.eigenvalues,
        tol_commute=tol_commute,
        separation_factor=separation_factor,
        min_lifetime=min_lifetime,
    )
    try:
        eta = noncommutativity_eta(ops)
    except ZeroOperator:
        eta = 0.0
    return ChannelAnalysis(
        kraus=pair,
        phi_hat=phi_hat,
        spectrum=decomp.eigenvalues,
        decomposition=decomp,
        cptp=report,
        fixed=fixed,
        projector=projector,
        has_rotating_points=rotating,
        eta=eta,
        classification=classification,
        window=window,
    )
