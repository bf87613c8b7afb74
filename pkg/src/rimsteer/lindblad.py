"""Dissipative bath dynamics and the noisy cycle instrument.

During the free-evolution window of each probe cycle the composite
(qubit x bath) state evolves under a Lindblad generator whose dissipators act
on the bath spins only; the qubit rotations and readout stay ideal and
instantaneous.  Contracting the propagated composite map with the qubit
preparation, rotations and each readout projector yields a two-outcome
instrument on the bath alone, which plugs directly into the trajectory
sampler.  At zero rates it reduces to the ideal Kraus instrument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionCap, NegativeRate
from .linalg import conjugation_superop, expm_general, expm_hermitian, left_right_superop
from .channel import _ancilla_trace_superop, _block_superop, _embed_superop
from .models import SIGMA_X, SIGMA_Y, SIGMA_Z, ModelOperators
from .trajectories import MeasurementInstrument, TrajectoryEnsemble, run_ensemble

__all__ = [
    "NoiseSpec",
    "liouvillian",
    "local_dissipators",
    "noisy_rim_instrument",
    "run_noisy_ensemble",
    "MAX_COMPOSITE_DIM",
]

# largest composite (qubit x bath) Hilbert space handled densely
MAX_COMPOSITE_DIM = 32


@dataclass(frozen=True)
class NoiseSpec:
    """Per-spin dissipation rates in 1/s.

    Each sequence has one entry per bath spin; scalars broadcast.  The three
    channels per spin are dephasing (sigma_z), jump-down (sigma_-) and
    jump-up (sigma_+), all expressed in that spin's local quantization basis.
    """

    dephasing: tuple[float, ...] = ()
    jump_down: tuple[float, ...] = ()
    jump_up: tuple[float, ...] = ()

    @classmethod
    def uniform(cls, n_spins: int, dephasing=0.0, jump_down=0.0, jump_up=0.0) -> "NoiseSpec":
        return cls(
            dephasing=(float(dephasing),) * n_spins,
            jump_down=(float(jump_down),) * n_spins,
            jump_up=(float(jump_up),) * n_spins,
        )

    def validate(self, n_spins: int) -> "NoiseSpec":
        def norm(seq, name):
            seq = tuple(float(x) for x in seq) or (0.0,) * n_spins
            if len(seq) == 1 and n_spins > 1:
                seq = seq * n_spins
            if len(seq) != n_spins:
                raise ValueError(f"{name} needs {n_spins} rates, got {len(seq)}")
            if any(not math.isfinite(x) or x < 0 for x in seq):
                raise NegativeRate(f"{name} rates must be finite and non-negative: {seq}")
            return seq

        return NoiseSpec(
            dephasing=norm(self.dephasing, "dephasing"),
            jump_down=norm(self.jump_down, "jump_down"),
            jump_up=norm(self.jump_up, "jump_up"),
        )

    def is_trivial(self) -> bool:
        return all(r == 0 for r in self.dephasing + self.jump_down + self.jump_up)


def liouvillian(h: np.ndarray, dissipators) -> np.ndarray:
    """HS-space Lindblad generator.

    L = -i (H x 1 - 1 x H^T)
        + sum_k Gamma_k [ L_k x L_k* - (1/2)(L_k^dag L_k x 1 + 1 x (L_k^dag L_k)^T) ]

    Trace is conserved (<<I| L = 0) and exp(L t) is a channel for t >= 0.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    eye = np.eye(n)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in dissipators:
        if rate < 0:
            raise NegativeRate(f"dissipator rate {rate} is negative")
        if rate == 0:
            continue
        op = np.asarray(op, dtype=complex)
        opdop = op.conj().T @ op
        gen = gen + rate * (
            np.kron(op, op.conj())
            - 0.5 * (np.kron(opdop, eye) + np.kron(eye, opdop.T))
        )
    return gen


def _local_basis(axis) -> np.ndarray:
    """Eigenbasis (columns: down, up) of the spin-1/2 operator along axis."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    op = 0.5 * (n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z)
    _, v = np.linalg.eigh(op)
    return v


def local_dissipators(ops: ModelOperators, noise: NoiseSpec):
    """Bath-space dissipator list [(L, Gamma)] for a spin register.

    Each spin's sigma_z / sigma_- / sigma_+ are written in the eigenbasis of
    that spin's coupling direction (its entry of ``local_axes``), then
    embedded with identities on the other spins.
    """
    d = ops.dim
    n_spins = max(1, int(round(math.log2(d))))
    if 2**n_spins != d:
        raise DimensionCap("local dissipators need a spin register (power-of-two dim)")
    axes = ops.local_axes or ((0.0, 0.0, 1.0),) * n_spins
    noise = noise.validate(n_spins)
    out = []
    for k in range(n_spins):
        v = _local_basis(axes[k])
        down, up = v[:, 0], v[:, 1]
        sz = np.outer(up, up.conj()) - np.outer(down, down.conj())
        sm = np.outer(down, up.conj())
        sp = np.outer(up, down.conj())
        for local, rate in ((sz, noise.dephasing[k]), (sm, noise.jump_down[k]), (sp, noise.jump_up[k])):
            if rate == 0:
                continue
            full = np.array([[1.0 + 0j]])
            for j in range(n_spins):
                full = np.kron(full, local if j == k else np.eye(2, dtype=complex))
            out.append((full, rate))
    return out


def _qubit_rotation(phi: float) -> np.ndarray:
    """pi/2 rotation about the equatorial axis at azimuth phi."""
    axis = math.cos(phi) * SIGMA_X + math.sin(phi) * SIGMA_Y
    return expm_hermitian(axis, math.pi / 4)


def noisy_rim_instrument(
    ops: ModelOperators,
    noise: NoiseSpec,
    t: float,
    delta_phi: float,
) -> MeasurementInstrument:
    """Two-outcome bath instrument for one cycle with dissipative free evolution.

    The composite generator uses H = sigma_q^z x b + 1 x h_env with the bath
    dissipators of ``noise``; preparation, the two pi/2 rotations and the
    projective qubit readout are ideal.  With all rates zero this equals the
    ideal instrument built from the Kraus pair (up to rounding).
    """
    d = ops.dim
    if 2 * d > MAX_COMPOSITE_DIM:
        raise DimensionCap(
            f"composite dimension {2 * d} exceeds the cap {MAX_COMPOSITE_DIM}"
        )
    eye_q = np.eye(2, dtype=complex)
    eye_b = np.eye(d, dtype=complex)
    h_comp = np.kron(SIGMA_Z, ops.b) + np.kron(eye_q, ops.h_env)
    dissipators = [
        (np.kron(eye_q, op), rate) for op, rate in local_dissipators(ops, noise)
    ]
    propagator = expm_general(liouvillian(h_comp, dissipators) * t)

    r1 = np.kron(_qubit_rotation(delta_phi), eye_b)
    r2 = np.kron(_qubit_rotation(0.0), eye_b)
    prep = _embed_superop(np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex), d)
    pipeline = conjugation_superop(r2) @ propagator @ conjugation_superop(r1) @ prep
    e0 = _block_superop(0, 2, d) @ pipeline
    e1 = _block_superop(1, 2, d) @ pipeline
    return MeasurementInstrument(e0=e0, e1=e1)


def run_noisy_ensemble(
    rho0: np.ndarray,
    instrument: MeasurementInstrument,
    m: int,
    samples: int,
    seed: int,
    **ensemble_kwargs,
) -> TrajectoryEnsemble:
    """Trajectory ensemble under a noisy instrument; delegates to the sampler."""
    return run_ensemble(rho0, instrument, m, samples, seed, **ensemble_kwargs)
