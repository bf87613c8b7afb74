"""Central-spin model builders.

Every builder returns a pair of Hermitian environment operators: the noise
operator ``b`` that conditions the environment evolution on the probe qubit
state, and the free environment Hamiltonian ``h_env``.  Both are in angular
frequency units (rad/s); spin operators are I = sigma/2 throughout.

Scenarios covered:

* a single bath spin probed by plain Ramsey cycles (hyperfine vector + Larmor
  precession in an external field along z),
* the rotating-wave effective pair for an even-N CPMG train (first Fourier
  harmonic only, coefficient 4/pi),
* K <= 4 bath spins, optionally dipolar-coupled, optionally reduced to the
  strong-field secular form that conserves total I_z,
* arbitrary user-supplied Hermitian pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonHermitianInput, TooManySpins, ZeroDisplacement, ZeroOperator
from .linalg import dagger, frobenius_norm, is_hermitian
from .tolerances import ATOL_ALGEBRAIC, ATOL_STRUCTURAL

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "MU0",
    "HBAR",
    "MAX_BATH_SPINS",
    "CPMG_FIRST_HARMONIC",
    "spin_component",
    "spin_vector",
    "ModelOperators",
    "ModelSpec",
    "build_single_spin",
    "build_dd_effective",
    "build_multi_spin",
    "build_explicit",
    "build_model",
    "evolution_time",
    "cpmg_cycle_time",
    "dipolar_tensor",
    "dipolar_coupling_strength",
    "noncommutativity_eta",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)

MU0 = 4e-7 * math.pi          # vacuum permeability, T m / A
HBAR = 1.054571817e-34        # reduced Planck constant, J s

# desk-scale cap: 4 bath spins -> 16-dim bath, 1024-dim composite HS space
MAX_BATH_SPINS = 4

# first Fourier coefficient of the even-N CPMG modulation function
CPMG_FIRST_HARMONIC = 4.0 / math.pi


def spin_component(n_spins: int, k: int, axis: int) -> np.ndarray:
    """Spin-1/2 operator I_k^axis embedded in an n_spins register."""
    out = np.array([[1.0 + 0j]])
    for j in range(n_spins):
        factor = _PAULI[axis] / 2 if j == k else np.eye(2, dtype=complex)
        out = np.kron(out, factor)
    return out


def spin_vector(n_spins: int, k: int) -> list[np.ndarray]:
    """[I_k^x, I_k^y, I_k^z] for spin k of an n_spins register."""
    return [spin_component(n_spins, k, a) for a in range(3)]


@dataclass(frozen=True)
class ModelOperators:
    """Hermitian (noise operator, environment Hamiltonian) pair in rad/s.

    ``local_axes`` carries one unit 3-vector per bath spin: the quantization
    axis used to build local dephasing/relaxation dissipators for that spin
    (the direction of its coupling to the probe).
    """

    b: np.ndarray
    h_env: np.ndarray
    local_axes: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        b = np.asarray(self.b, dtype=complex)
        h = np.asarray(self.h_env, dtype=complex)
        if b.shape != h.shape or b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise DimensionMismatch(f"operator shapes {b.shape} and {h.shape} do not match")
        for name, op in (("b", b), ("h_env", h)):
            if not is_hermitian(op, ATOL_STRUCTURAL):
                raise NonHermitianInput(f"{name} is not Hermitian within tolerance")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "h_env", h)

    @property
    def dim(self) -> int:
        return self.b.shape[0]


@dataclass
class ModelSpec:
    """Declarative model description (the deserialization target of configs).

    All frequencies are angular (rad/s) and times are seconds by the time a
    spec is constructed; unit conversion happens in the config layer.

    ``dipolar`` entries are (j, k, coupling, axis) with a scalar coupling in
    rad/s and a unit displacement axis; alternatively give ``positions`` in
    meters plus ``gyromagnetic`` in rad/s/T and the couplings are derived
    geometrically.
    """

    kind: str = "single_spin"                       # single_spin | dd_effective | multi_spin | explicit
    hyperfine: list = field(default_factory=list)   # one 3-vector per bath spin, rad/s
    larmor: float = 0.0                             # rad/s
    detuning: float = 0.0                           # rad/s (dd_effective only)
    dipolar: list = field(default_factory=list)     # (j, k, coupling_rad_s, axis 3-vector)
    positions: list | None = None                   # meters, one 3-vector per spin
    gyromagnetic: float = 0.0                       # rad/s/T, used with positions
    secular: bool = False
    b_matrix: np.ndarray | None = None              # explicit models
    h_matrix: np.ndarray | None = None
    sequence: str = "rim"                           # rim | cpmg
    tau: float = 0.0                                # s, CPMG inter-pulse spacing unit
    n_pulses: int = 0                               # even
    t: float = 0.0                                  # s, free evolution per cycle (rim)
    delta_phi: float = math.pi / 2                  # rad


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise ZeroOperator("zero-length axis vector")
    return v / n


def build_single_spin(a_vec, larmor: float) -> ModelOperators:
    """Single bath spin under plain Ramsey probing.

    b = A . I with the hyperfine vector A, h_env = larmor * I_z.  The pair
    commutes iff the transverse hyperfine components vanish or larmor = 0.
    """
    a_vec = np.asarray(a_vec, dtype=float)
    iv = spin_vector(1, 0)
    b = sum(a * op for a, op in zip(a_vec, iv))
    h = larmor * iv[2]
    axis = tuple(_unit(a_vec)) if np.linalg.norm(a_vec) > 0 else (0.0, 0.0, 1.0)
    return ModelOperators(b=b, h_env=h, local_axes=(axis,))


def build_dd_effective(a_vec, detuning: float) -> ModelOperators:
    """Rotating-frame pair for an even-N CPMG train on a single bath spin.

    Keeps only the first harmonic of the pulse modulation (coefficient 4/pi;
    the half factor from cos -> rotating frame gives 2/pi on I_perp):

        b' = (2/pi) * A_perp * (cos(xi) I_x + sin(xi) I_y),
        h' = detuning * I_z,

    with A_perp the transverse hyperfine magnitude and xi its azimuth.  The
    weak-coupling assumption (A much below the pulse rate) is the caller's
    responsibility.
    """
    a_vec = np.asarray(a_vec, dtype=float)
    a_perp = math.hypot(a_vec[0], a_vec[1])
    xi = math.atan2(a_vec[1], a_vec[0]) if a_perp > 0 else 0.0
    iv = spin_vector(1, 0)
    i_perp = math.cos(xi) * iv[0] + math.sin(xi) * iv[1]
    b = (2.0 / math.pi) * a_perp * i_perp
    h = detuning * iv[2]
    axis = (math.cos(xi), math.sin(xi), 0.0)
    return ModelOperators(b=b, h_env=h, local_axes=(axis,))


def cpmg_cycle_time(tau: float, n_pulses: int) -> float:
    """Total free-evolution time of one even-N CPMG train: (tau pi 2tau pi tau) x N/2."""
    if n_pulses % 2 != 0 or n_pulses <= 0:
        raise ValueError(f"CPMG pulse number must be a positive even integer, got {n_pulses}")
    return 4.0 * tau * (n_pulses // 2)


def dipolar_coupling_strength(r: float, gamma_n: float) -> float:
    """Scalar dipolar coupling mu0 hbar gamma^2 / (4 pi r^3) in rad/s."""
    if r <= 0:
        raise ZeroDisplacement("spins must be separated by a positive distance")
    return MU0 * HBAR * gamma_n**2 / (4 * math.pi * r**3)


def dipolar_tensor(r_vec, gamma_n: float) -> np.ndarray:
    """3x3 dipolar tensor D * (1 - 3 rhat rhat^T) in rad/s; symmetric, traceless."""
    r_vec = np.asarray(r_vec, dtype=float)
    r = np.linalg.norm(r_vec)
    if r == 0:
        raise ZeroDisplacement("dipolar tensor requested for coincident spins")
    d = dipolar_coupling_strength(r, gamma_n)
    rhat = r_vec / r
    return d * (np.eye(3) - 3.0 * np.outer(rhat, rhat))


def _dipolar_pairs(spec: ModelSpec) -> list[tuple[int, int, float, np.ndarray]]:
    """Normalize the two dipolar input routes to (j, k, coupling, axis) tuples."""
    if spec.positions is not None:
        pos = [np.asarray(p, dtype=float) for p in spec.positions]
        pairs = []
        for j in range(len(pos)):
            for k in range(j + 1, len(pos)):
                rv = pos[k] - pos[j]
                r = np.linalg.norm(rv)
                if r == 0:
                    raise ZeroDisplacement(f"spins {j} and {k} coincide")
                pairs.append((j, k, dipolar_coupling_strength(r, spec.gyromagnetic), rv / r))
        return pairs
    out = []
    for entry in spec.dipolar:
        j, k, coupling = entry[0], entry[1], float(entry[2])
        axis = np.asarray(entry[3], dtype=float) if len(entry) > 3 else np.array([0.0, 0.0, 1.0])
        out.append((int(j), int(k), coupling, _unit(axis)))
    return out


def build_multi_spin(spec: ModelSpec) -> ModelOperators:
    """K-spin bath, optionally dipolar-coupled, optionally secular.

    Full form:  b = sum_k A_k . I_k,
                h = larmor sum_k I_k^z + sum_{j<k} I_j . Dten_jk . I_k.

    With ``secular=True`` only the energy-preserving terms of the strong-field
    limit survive: the hyperfine keeps its z components (b = sum_k A_k^z I_k^z)
    and each dipolar tensor reduces to the flip-flop form
    (D/2)(I+I- + I-I+ - 4 Iz Iz), so h commutes with total I_z exactly.
    """
    n = len(spec.hyperfine)
    if n == 0:
        raise ValueError("multi_spin model needs at least one hyperfine vector")
    if n > MAX_BATH_SPINS:
        raise TooManySpins(f"{n} bath spins exceeds the cap of {MAX_BATH_SPINS}")
    dim = 2**n
    vecs = [np.asarray(a, dtype=float) for a in spec.hyperfine]
    spins = [spin_vector(n, k) for k in range(n)]

    b = np.zeros((dim, dim), dtype=complex)
    for a_vec, iv in zip(vecs, spins):
        if spec.secular:
            b += a_vec[2] * iv[2]
        else:
            b += sum(a * op for a, op in zip(a_vec, iv))

    h = spec.larmor * sum(iv[2] for iv in spins)
    for j, k, coupling, axis in _dipolar_pairs(spec):
        ij, ik = spins[j], spins[k]
        if spec.secular:
            ip_j, im_j = ij[0] + 1j * ij[1], ij[0] - 1j * ij[1]
            ip_k, im_k = ik[0] + 1j * ik[1], ik[0] - 1j * ik[1]
            h = h + (coupling / 2.0) * (ip_j @ im_k + im_j @ ip_k - 4.0 * ij[2] @ ik[2])
        else:
            tensor = coupling * (np.eye(3) - 3.0 * np.outer(axis, axis))
            for p in range(3):
                for q in range(3):
                    if tensor[p, q] != 0.0:
                        h = h + tensor[p, q] * ij[p] @ ik[q]

    axes = []
    for a_vec in vecs:
        if spec.secular:
            axes.append((0.0, 0.0, 1.0))
        elif np.linalg.norm(a_vec) > 0:
            axes.append(tuple(_unit(a_vec)))
        else:
            axes.append((0.0, 0.0, 1.0))
    h = 0.5 * (h + dagger(h))   # scrub rounding asymmetry from the tensor sum
    return ModelOperators(b=b, h_env=h, local_axes=tuple(axes))


def build_explicit(b_matrix, h_matrix, local_axes=None) -> ModelOperators:
    """Wrap arbitrary user-supplied Hermitian operators."""
    b = np.asarray(b_matrix, dtype=complex)
    h = np.asarray(h_matrix, dtype=complex)
    if local_axes is None:
        n_spins = max(1, int(round(math.log2(b.shape[0]))))
        local_axes = ((0.0, 0.0, 1.0),) * n_spins
    return ModelOperators(b=b, h_env=h, local_axes=tuple(tuple(a) for a in local_axes))


def build_model(spec: ModelSpec) -> ModelOperators:
    """Dispatch a :class:`ModelSpec` to the matching builder."""
    if spec.kind == "single_spin":
        return build_single_spin(spec.hyperfine[0], spec.larmor)
    if spec.kind == "dd_effective":
        return build_dd_effective(spec.hyperfine[0], spec.detuning)
    if spec.kind == "multi_spin":
        return build_multi_spin(spec)
    if spec.kind == "explicit":
        return build_explicit(spec.b_matrix, spec.h_matrix)
    raise ValueError(f"unknown model kind {spec.kind!r}")


def evolution_time(spec: ModelSpec) -> float:
    """Free-evolution time of one probe cycle for this spec."""
    if spec.sequence == "cpmg":
        return cpmg_cycle_time(spec.tau, spec.n_pulses)
    return spec.t


def noncommutativity_eta(ops: ModelOperators) -> float:
    """Normalized non-commutativity ||[H+, H-]|| / (||H+|| ||H-||), H+- = h_env +- b.

    Zero iff [b, h_env] = 0; the Frobenius norm is used throughout.
    """
    h_plus = ops.h_env + ops.b
    h_minus = ops.h_env - ops.b
    n_plus, n_minus = frobenius_norm(h_plus), frobenius_norm(h_minus)
    if n_plus < ATOL_ALGEBRAIC or n_minus < ATOL_ALGEBRAIC:
        raise ZeroOperator("eta undefined: one of h_env +- b has zero norm")
    comm = h_plus @ h_minus - h_minus @ h_plus
    return frobenius_norm(comm) / (n_plus * n_minus)
