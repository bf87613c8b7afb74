import math

import numpy as np
import pytest

from rimsteer import channel as ch
from rimsteer import models
from rimsteer.errors import NotAChannel
from rimsteer.linalg import conjugation_superop, devec, eig_general, expm_hermitian, vec

TWO_PI = 2 * math.pi
RNG = np.random.default_rng(314159)

SX, SY, SZ = models.SIGMA_X, models.SIGMA_Y, models.SIGMA_Z


def random_hermitian(d, rng=RNG, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_density(d, rng=RNG):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def match_spectra(got, expected, tol):
    """Greedy multiset matching of two complex spectra."""
    got = list(got)
    for target in expected:
        dists = [abs(g - target) for g in got]
        i = int(np.argmin(dists))
        assert dists[i] < tol, f"no eigenvalue within {tol} of {target}: residual {dists[i]}"
        got.pop(i)
    assert not got


def joint_sectors(b, h, t_probe=1.0, rng=RNG):
    """(b_k, eps_k, P_k) joint eigensectors of a commuting Hermitian pair."""
    mix = b + rng.normal() * h if np.abs(h).max() > 0 else b
    w, v = np.linalg.eigh(mix)
    bd = v.conj().T @ b @ v
    hd = v.conj().T @ h @ v
    assert np.abs(bd - np.diag(np.diag(bd))).max() < 1e-8 * max(np.abs(b).max(), 1)
    pairs = {}
    for i in range(len(w)):
        key = (round(bd[i, i].real, 6), round(hd[i, i].real, 6))
        pairs.setdefault(key, []).append(i)
    sectors = []
    for (bk, ek), idx in pairs.items():
        block = v[:, idx]
        sectors.append((bk, ek, block @ block.conj().T))
    return sectors


def kraus_vectors(bk, ek, t, dphi):
    """Per-sector pair of Kraus eigenvalues (lambda_tilde_0k, lambda_tilde_1k)."""
    lam = []
    for alpha in (0, 1):
        lam.append(
            np.exp(-1j * ek * t)
            * (np.exp(-1j * bk * t) - (-1) ** alpha * np.exp(1j * (dphi + bk * t)))
            / 2
        )
    return np.asarray(lam)


# ---------------------------------------------------------------- Kraus construction

def test_kraus_at_zero_time():
    ops = models.build_single_spin([0, 0, 1e4], larmor=0.0)
    for dphi in (0.3, np.pi / 2, 2.1):
        pair = ch.kraus_from_model(ops, 0.0, dphi)
        phase = np.exp(1j * dphi)
        assert np.abs(pair.m0 - (1 - phase) / 2 * np.eye(2)).max() < 1e-14
        assert np.abs(pair.m1 - (1 + phase) / 2 * np.eye(2)).max() < 1e-14


def test_kraus_zero_time_quarter_phase_probability():
    ops = models.build_single_spin([0, 0, 1e4], larmor=0.0)
    pair = ch.kraus_from_model(ops, 0.0, np.pi / 2)
    rho = random_density(2)
    p1 = np.trace(pair.m1 @ rho @ pair.m1.conj().T).real
    assert abs(p1 - 0.5) < 1e-12


def test_kraus_completeness_random_models():
    for _ in range(10):
        d = int(RNG.choice([2, 3, 4]))
        ops = models.build_explicit(random_hermitian(d), random_hermitian(d))
        pair = ch.kraus_from_model(ops, float(RNG.uniform(0.1, 2.0)), float(RNG.uniform(0, np.pi)))
        resid = pair.m0.conj().T @ pair.m0 + pair.m1.conj().T @ pair.m1 - np.eye(d)
        assert np.abs(resid).max() < 1e-12


def test_kraus_eigenvalues_commuting_recast():
    # eigenvalues of M_alpha in the joint eigenbasis match the sector formula
    a = TWO_PI * 37.7e3
    ops = models.build_single_spin([0, 0, a], larmor=0.4 * a)
    t, dphi = 1e-6, np.pi / 2
    pair = ch.kraus_from_model(ops, t, dphi)
    expected0, expected1 = [], []
    for bk, ek, _ in joint_sectors(ops.b, ops.h_env):
        lam = kraus_vectors(bk, ek, t, dphi)
        expected0.append(lam[0])
        expected1.append(lam[1])
    match_spectra(np.linalg.eigvals(pair.m0), expected0, 1e-10)
    match_spectra(np.linalg.eigvals(pair.m1), expected1, 1e-10)


# ---------------------------------------------------------------- natural representation

def test_natural_rep_zero_time_is_identity():
    ops = models.build_single_spin([0, 0, 1e4], larmor=0.0)
    pair = ch.kraus_from_model(ops, 0.0, np.pi / 2)
    assert np.abs(ch.natural_representation(pair) - np.eye(4)).max() < 1e-14


def test_natural_rep_equals_unitary_average():
    ops = models.build_explicit(random_hermitian(3), random_hermitian(3))
    t, dphi = 0.8, 1.1
    pair = ch.kraus_from_model(ops, t, dphi)
    u0 = expm_hermitian(ops.h_env + ops.b, t)
    u1 = expm_hermitian(ops.h_env - ops.b, t)
    direct = 0.5 * (conjugation_superop(u0) + conjugation_superop(u1))
    assert np.abs(ch.natural_representation(pair) - direct).max() < 1e-13


def test_natural_rep_action_matches_kraus_sum():
    ops = models.build_explicit(random_hermitian(4), random_hermitian(4))
    pair = ch.kraus_from_model(ops, 0.5, 0.7)
    phi = ch.natural_representation(pair)
    rho = random_density(4)
    acted = devec(phi @ vec(rho))
    kraus_sum = pair.m0 @ rho @ pair.m0.conj().T + pair.m1 @ rho @ pair.m1.conj().T
    assert np.abs(acted - kraus_sum).max() < 1e-12


# ---------------------------------------------------------------- dilation cross-check

def test_stinespring_zero_time_identity():
    ops = models.build_single_spin([0, 0, 1e4], larmor=0.0)
    assert np.abs(ch.stinespring_channel(ops, 0.0, 0.9) - np.eye(4)).max() < 1e-13


@pytest.mark.parametrize("d", [2, 3, 4])
def test_stinespring_equals_kraus_path(d):
    ops = models.build_explicit(random_hermitian(d), random_hermitian(d))
    t, dphi = float(RNG.uniform(0.1, 1.5)), float(RNG.uniform(0, 2 * np.pi))
    phi_kraus = ch.natural_representation(ch.kraus_from_model(ops, t, dphi))
    phi_dilated = ch.stinespring_channel(ops, t, dphi)
    assert np.abs(phi_kraus - phi_dilated).max() < 1e-12


def test_stinespring_trace_preserving_action():
    ops = models.build_explicit(random_hermitian(3), random_hermitian(3))
    phi = ch.stinespring_channel(ops, 0.7, 0.2)
    rho = random_density(3)
    assert abs(np.trace(devec(phi @ vec(rho))) - 1.0) < 1e-12


# ---------------------------------------------------------------- CPTP validation

def test_validate_cptp_accepts_kraus_built():
    ops = models.build_explicit(random_hermitian(4), random_hermitian(4))
    phi = ch.natural_representation(ch.kraus_from_model(ops, 1.0, 0.4))
    report = ch.validate_cptp(phi)
    assert report.trace_preservation < 1e-12
    assert report.unitality < 1e-12
    assert report.min_choi_eigenvalue > -1e-12
    assert report.max_eigenvalue_modulus < 1 + 1e-10


def test_validate_cptp_rejects_scaled_channel():
    ops = models.build_explicit(random_hermitian(2), random_hermitian(2))
    phi = ch.natural_representation(ch.kraus_from_model(ops, 1.0, 0.4))
    with pytest.raises(NotAChannel):
        ch.validate_cptp(1.01 * phi)


def test_validate_cptp_flags_cp_but_not_tp():
    # unnormalized random Kraus operator: CP map, wrong normalization
    k = RNG.normal(size=(3, 3)) + 1j * RNG.normal(size=(3, 3))
    phi = np.kron(k, k.conj())
    report = ch.validate_cptp(phi, raise_on_failure=False)
    assert report.trace_preservation > 1e-3
    assert report.min_choi_eigenvalue > -1e-10


def test_choi_of_kraus_channel_is_gram_of_kraus_vectors():
    ops = models.build_explicit(random_hermitian(3), random_hermitian(3))
    pair = ch.kraus_from_model(ops, 0.9, 1.3)
    choi = ch.choi_matrix(ch.natural_representation(pair))
    expected = sum(np.outer(vec(m), vec(m).conj()) for m in (pair.m0, pair.m1))
    assert np.abs(choi - expected).max() < 1e-13


# ---------------------------------------------------------------- fixed points

def test_fixed_points_commuting_nondegenerate():
    # distinct eigenvalues of b: the d rank-one eigenprojectors of b are fixed
    a = TWO_PI * 37.7e3
    ops = models.build_single_spin([0, 0, a], larmor=0.31 * a)
    pair = ch.kraus_from_model(ops, 1e-6, np.pi / 2)
    fixed = ch.fixed_points(pair)
    assert fixed.ranks == (1, 1)
    w, v = np.linalg.eigh(ops.b)
    eigprojs = [np.outer(v[:, k], v[:, k].conj()) for k in range(2)]
    for proj in fixed.projectors:
        assert min(np.abs(proj - ep).max() for ep in eigprojs) < 1e-9


def test_fixed_points_depolarizing_single_sector():
    ops = models.build_explicit(SZ, 0.1 * SX)
    pair = ch.kraus_from_model(ops, 1.0, np.pi / 2)
    fixed = ch.fixed_points(pair)
    assert fixed.ranks == (2,)
    assert np.abs(fixed.states[0] - np.eye(2) / 2).max() < 1e-12


def secular_pair_model():
    spec = models.ModelSpec(
        kind="multi_spin",
        hyperfine=[[0, 0, TWO_PI * 37.7e3], [0, 0, TWO_PI * 29.9e3]],
        larmor=TWO_PI * 750e3,
        dipolar=[(0, 1, TWO_PI * 4.1e3, [0, 0, 1])],
        secular=True,
    )
    return models.build_multi_spin(spec)


def test_fixed_points_secular_pair_sector_ranks():
    ops = secular_pair_model()
    pair = ch.kraus_from_model(ops, 2e-6, np.pi / 2)
    fixed = ch.fixed_points(pair)
    assert sorted(fixed.ranks) == [1, 1, 2]
    assert fixed.commutant_dim == 3
    total = sum(fixed.projectors)
    assert np.abs(total - np.eye(4)).max() < 1e-10


def test_fixed_points_agree_with_unit_eigenspace():
    # independent route: eigenvalue-1 spectral projector of the channel
    ops = secular_pair_model()
    pair = ch.kraus_from_model(ops, 2e-6, np.pi / 2)
    fixed = ch.fixed_points(pair)
    phi = ch.natural_representation(pair)
    dec = eig_general(phi)
    unit = [i for i, lam in enumerate(dec.eigenvalues) if abs(lam - 1) < 1e-8]
    assert len(unit) == fixed.commutant_dim
    spectral = sum(
        np.outer(dec.right_vectors[:, i], dec.left_vectors[:, i].conj()) for i in unit
    )
    p_hat, _ = ch.asymptotic_projector(fixed)
    assert np.abs(spectral - p_hat).max() < 1e-6


def test_fixed_point_commutator_invariant():
    for build in (
        lambda: models.build_single_spin([0, 0, TWO_PI * 37.7e3], 0.0),
        lambda: models.build_explicit(SZ, 0.025 * SX),
        secular_pair_model,
    ):
        ops = build()
        pair = ch.kraus_from_model(ops, 1e-6 if ops.dim > 2 else 1.0, np.pi / 2)
        fixed = ch.fixed_points(pair)
        for proj in fixed.projectors:
            for m in (pair.m0, pair.m1):
                assert np.linalg.norm(proj @ m - m @ proj) < 1e-9
        assert np.abs(sum(fixed.projectors) - np.eye(ops.dim)).max() < 1e-10
        for i, si in enumerate(fixed.states):
            for j, oj in enumerate(fixed.observables):
                overlap = np.trace(oj.conj().T @ si).real
                assert abs(overlap - (1.0 if i == j else 0.0)) < 1e-10


# ---------------------------------------------------------------- asymptotic projector

def test_asymptotic_projector_identity_channel():
    ops = models.build_single_spin([0, 0, 1e4], larmor=0.0)
    pair = ch.kraus_from_model(ops, 0.0, np.pi / 2)
    fixed = ch.fixed_points(pair)
    p_hat, rotating = ch.asymptotic_projector(fixed)
    assert not rotating
    assert np.abs(p_hat - np.eye(4)).max() < 1e-10


def test_asymptotic_projector_depolarizing():
    ops = models.build_explicit(SZ, 0.1 * SX)
    pair = ch.kraus_from_model(ops, 1.0, np.pi / 2)
    fixed = ch.fixed_points(pair)
    p_hat, _ = ch.asymptotic_projector(fixed)
    expected = np.outer(vec(np.eye(2) / 2), vec(np.eye(2)).conj())
    assert np.abs(p_hat - expected).max() < 1e-10


def test_asymptotic_projector_structure():
    ops = models.build_explicit(SZ, 0.1 * SX)
    pair = ch.kraus_from_model(ops, 1.0, np.pi / 2)
    phi = ch.natural_representation(pair)
    p_hat, _ = ch.asymptotic_projector(ch.fixed_points(pair))
    assert np.abs(p_hat @ p_hat - p_hat).max() < 1e-9
    assert np.abs(p_hat @ phi - p_hat).max() < 1e-9
    assert np.abs(phi @ p_hat - p_hat).max() < 1e-9


def test_powers_converge_to_projector_by_repeated_squaring():
    ops = models.build_explicit(SZ, 0.1 * SX)
    pair = ch.kraus_from_model(ops, 1.0, np.pi / 2)
    phi = ch.natural_representation(pair)
    p_hat, _ = ch.asymptotic_projector(ch.fixed_points(pair))
    power = phi.copy()
    dists = []
    for _ in range(12):            # m = 2, 4, ..., 2^12
        power = power @ power
        dists.append(np.linalg.norm(power - p_hat))
    assert dists[-1] < 1e-10
    peak = int(np.argmax(dists))
    # monotone decrease past the transient, until the rounding floor
    for i in range(peak, len(dists) - 1):
        if dists[i] < 1e-11:
            break
        assert dists[i + 1] <= dists[i] + 1e-12


def test_degenerate_commuting_sector_keeps_coherences():
    # equal axial couplings: the zero-eigenvalue sector of b is 2-dimensional
    # and the long-run projector must pinch onto it, not resolve it
    a = TWO_PI * 20e3
    spec = models.ModelSpec(kind="multi_spin", hyperfine=[[0, 0, a], [0, 0, a]], larmor=TWO_PI * 5e3)
    ops = models.build_multi_spin(spec)
    pair = ch.kraus_from_model(ops, 1e-6, np.pi / 2)
    fixed = ch.fixed_points(pair)
    assert fixed.commutant_dim == 6      # 1 + 2^2 + 1
    p_hat, _ = ch.asymptotic_projector(fixed)
    pinching = np.zeros_like(p_hat)
    for _, _, proj in joint_sectors(ops.b, ops.h_env):
        pinching += np.kron(proj, proj.conj())
    assert np.abs(p_hat - pinching).max() < 1e-9


# ---------------------------------------------------------------- commuting-case spectrum

def test_commuting_channel_is_diagonal_with_inner_products():
    a = TWO_PI * 37.7e3
    ops = models.build_single_spin([0, 0, a], larmor=0.17 * a)
    t, dphi = 1e-6, np.pi / 2
    phi = ch.natural_representation(ch.kraus_from_model(ops, t, dphi))
    sectors = joint_sectors(ops.b, ops.h_env)
    d = ops.dim
    expected = np.zeros((d * d, d * d), dtype=complex)
    for bk, ek, pk in sectors:
        for bl, el, pl in sectors:
            lam_k = kraus_vectors(bk, ek, t, dphi)
            lam_l = kraus_vectors(bl, el, t, dphi)
            inner = np.vdot(lam_l, lam_k)
            assert abs(inner) <= 1 + 1e-12          # Cauchy-Schwarz bound
            expected += inner * np.kron(pk, pl.conj())
    assert np.abs(phi - expected).max() < 1e-12


def test_commuting_spectrum_matches_inner_product_formula():
    a = TWO_PI * 37.7e3
    ops = models.build_single_spin([0, 0, a], larmor=0.0)
    t, dphi = 1e-6, np.pi / 2
    phi = ch.natural_representation(ch.kraus_from_model(ops, t, dphi))
    sectors = joint_sectors(ops.b, ops.h_env)
    expected = []
    for bk, ek, _ in sectors:
        for bl, el, _ in sectors:
            expected.append(
                np.vdot(kraus_vectors(bl, el, t, dphi), kraus_vectors(bk, ek, t, dphi))
            )
    match_spectra(np.linalg.eigvals(phi), expected, 1e-10)


def test_commuting_asymptotics_projective():
    a = TWO_PI * 37.7e3
    ops = models.build_single_spin([0, 0, a], larmor=0.0)
    phi = ch.natural_representation(ch.kraus_from_model(ops, 1e-6, np.pi / 2))
    limit = np.linalg.matrix_power(phi, 2**14)
    expected = np.zeros_like(phi)
    for _, _, proj in joint_sectors(ops.b, ops.h_env):
        expected += np.kron(proj, proj.conj())
    assert np.abs(limit - expected).max() < 1e-8


# ---------------------------------------------------------------- window and classification

def test_metastable_window_values():
    spectrum = np.array([1.0, 0.999, 0.5, 0.1])
    win = ch.metastable_window(spectrum, q=2)
    assert abs(win.m_lo - 1 / abs(math.log(0.5))) < 1e-12
    assert abs(win.m_hi - 1 / abs(math.log(0.999))) < 1e-12
    assert abs(win.m_lo - 1.4427) < 1e-4 and abs(win.m_hi - 999.5) < 0.1
    assert not win.empty


def test_metastable_window_unbounded_at_unit_modulus():
    win = ch.metastable_window(np.array([1.0, 1.0, 0.5, 0.1]), q=2)
    assert math.isinf(win.m_hi)


def test_metastable_window_empty_flag():
    win = ch.metastable_window(np.array([1.0, 0.9, 0.85, 0.1]), q=2)
    assert win.empty


def test_metastable_window_index_errors():
    with pytest.raises(IndexError):
        ch.metastable_window(np.array([1.0, 0.5]), q=5)


def illustrative(gamma):
    ops = models.build_explicit(SZ, gamma * SX)
    analysis = ch.analyze_channel(ops, 1.0, np.pi / 2)
    return analysis


def test_classify_illustrative_polarization():
    assert illustrative(0.0).classification is ch.Steering.POLARIZATION


def test_classify_illustrative_depolarization():
    assert illustrative(0.1).classification is ch.Steering.DEPOLARIZATION


def test_classify_illustrative_metastable():
    analysis = illustrative(0.025)
    assert analysis.classification is ch.Steering.METASTABLE_POLARIZATION
    assert analysis.window is not None
    assert analysis.window.separation >= 10


def test_unit_disk_and_unitality_random_models():
    for _ in range(10):
        d = int(RNG.choice([2, 3, 4]))
        ops = models.build_explicit(random_hermitian(d), random_hermitian(d))
        analysis = ch.analyze_channel(ops, float(RNG.uniform(0.1, 2.0)), float(RNG.uniform(0, np.pi)))
        assert np.abs(analysis.spectrum).max() <= 1 + 1e-10
        eye_vec = vec(np.eye(d))
        assert np.linalg.norm(analysis.phi_hat @ eye_vec - eye_vec) < 1e-10
