import numpy as np
import pytest

from rimsteer import linalg
from rimsteer.errors import DimensionMismatch, NonHermitianInput, NotPSD

RNG = np.random.default_rng(20240817)

SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)


def random_complex(d, rng=RNG):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def random_hermitian(d, rng=RNG):
    a = random_complex(d, rng)
    return 0.5 * (a + a.conj().T)


def random_density(d, rng=RNG):
    a = random_complex(d, rng)
    rho = a @ a.conj().T
    return rho / np.trace(rho)


# ---------------------------------------------------------------- kron

def test_kron_identity():
    assert np.array_equal(linalg.kron(np.eye(2), np.eye(2)), np.eye(4))


def test_kron_sigma_z_pair():
    assert np.allclose(linalg.kron(SZ, SZ), np.diag([1, -1, -1, 1]))


def test_kron_elementwise_oracle():
    # quadruple-loop definition of the Kronecker product
    a, b = random_complex(2), random_complex(2)
    got = linalg.kron(a, b)
    expected = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    expected[2 * i + k, 2 * j + l] = a[i, j] * b[k, l]
    assert np.abs(got - expected).max() < 1e-14


def test_kron_mixed_product_and_associativity():
    for _ in range(5):
        a, b, c, d = (random_complex(3) for _ in range(4))
        lhs = linalg.kron(a, b) @ linalg.kron(c, d)
        rhs = linalg.kron(a @ c, b @ d)
        assert np.abs(lhs - rhs).max() < 1e-12
        assert np.abs(
            linalg.kron(linalg.kron(a, b), c) - linalg.kron(a, linalg.kron(b, c))
        ).max() < 1e-12


def test_kron_rejects_nonsquare():
    with pytest.raises(DimensionMismatch):
        linalg.kron(np.ones((2, 3)), np.eye(2))


# ---------------------------------------------------------------- expm

def test_expm_zero_generator():
    assert np.allclose(linalg.expm_hermitian(np.zeros((3, 3)), 0.7), np.eye(3))


def test_expm_diagonal_analytic():
    u = linalg.expm_hermitian(SZ, np.pi / 2)
    assert np.allclose(u, np.diag([np.exp(-1j * np.pi / 2), np.exp(1j * np.pi / 2)]))


def test_expm_matches_taylor_series():
    # 30-term series oracle, evaluated without any eigendecomposition
    h = random_hermitian(4)
    t = 0.37
    series = np.zeros((4, 4), dtype=complex)
    term = np.eye(4, dtype=complex)
    for k in range(30):
        series += term
        term = term @ (-1j * t * h) / (k + 1)
    assert np.abs(linalg.expm_hermitian(h, t) - series).max() < 1e-9


@pytest.mark.parametrize("dim", [2, 3, 4, 8, 16])
def test_expm_unitarity(dim):
    h = random_hermitian(dim)
    u = linalg.expm_hermitian(h, 1.3)
    assert np.linalg.norm(u.conj().T @ u - np.eye(dim)) < 1e-10


def test_expm_rejects_nonhermitian():
    with pytest.raises(NonHermitianInput):
        linalg.expm_hermitian(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


# ---------------------------------------------------------------- vec / devec / inner product

@pytest.mark.parametrize("dim", list(range(2, 17)))
def test_vec_devec_roundtrip_exact(dim):
    a = random_complex(dim)
    assert np.array_equal(linalg.devec(linalg.vec(a)), a)


def test_vec_identity_layout():
    # row-stacking: |I_2>> = (1, 0, 0, 1)
    assert np.array_equal(linalg.vec(np.eye(2)), np.array([1, 0, 0, 1], dtype=float))


def test_hs_inner_is_trace_oracle():
    a, b = random_complex(3), random_complex(3)
    assert abs(linalg.hs_inner(a, b) - np.trace(a.conj().T @ b)) < 1e-13


def test_hs_inner_identity_gives_trace():
    rho = random_density(4)
    assert abs(linalg.hs_inner(np.eye(4), rho) - 1.0) < 1e-12


def test_hs_inner_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        linalg.hs_inner(np.eye(2), np.eye(3))


def test_superoperator_action_equivalence():
    # devec((X kron Y^T) vec(rho)) == X rho Y under the row-stacking convention
    for _ in range(5):
        x, y, rho = random_complex(3), random_complex(3), random_complex(3)
        acted = linalg.devec(linalg.left_right_superop(x, y) @ linalg.vec(rho))
        assert np.abs(acted - x @ rho @ y).max() < 1e-12


# ---------------------------------------------------------------- psd_sqrt / fidelity

def test_psd_sqrt_squares_back():
    rho = random_density(4)
    s = linalg.psd_sqrt(rho)
    assert np.abs(s @ s - rho).max() < 1e-12


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(NotPSD):
        linalg.psd_sqrt(np.diag([1.0, -0.5]))


def test_fidelity_self_is_one():
    rho = random_density(3)
    assert abs(linalg.fidelity(rho, rho) - 1.0) < 1e-10


def test_fidelity_orthogonal_pure_states():
    up = np.diag([1.0, 0.0]).astype(complex)
    down = np.diag([0.0, 1.0]).astype(complex)
    assert linalg.fidelity(up, down) < 1e-10


def test_fidelity_pure_vs_maximally_mixed():
    # direct evaluation: Tr sqrt(sqrt(I/2) |0><0| sqrt(I/2)) = 1/sqrt(2)
    up = np.diag([1.0, 0.0]).astype(complex)
    assert abs(linalg.fidelity(up, np.eye(2) / 2) - 1 / np.sqrt(2)) < 1e-12


def test_fidelity_symmetric_for_commuting_inputs():
    a = np.diag([0.7, 0.3]).astype(complex)
    b = np.diag([0.2, 0.8]).astype(complex)
    assert abs(linalg.fidelity(a, b) - linalg.fidelity(b, a)) < 1e-12


def test_trace_distance_pure_orthogonal():
    assert abs(linalg.trace_distance(np.diag([1.0, 0]), np.diag([0, 1.0])) - 1.0) < 1e-12


# ---------------------------------------------------------------- eig_general

def test_eig_identity_flags_clustered():
    dec = linalg.eig_general(np.eye(4))
    assert np.allclose(dec.eigenvalues, 1.0)
    assert dec.clustered


def test_eig_diagonal_read_off():
    vals = [1.0, 0.5, 0.5 * np.exp(1j * np.pi / 3), 0.0]
    dec = linalg.eig_general(np.diag(vals))
    expected = sorted(vals, key=lambda z: (-abs(z), -z.real, -z.imag))
    assert np.allclose(dec.eigenvalues, expected, atol=1e-12)


def test_eig_biorthonormality_random():
    m = random_complex(6)
    dec = linalg.eig_general(m)
    overlap = dec.left_vectors.conj().T @ dec.right_vectors
    assert np.abs(overlap - np.eye(6)).max() < 1e-8


def test_eig_sorting_deterministic():
    m = np.diag([0.5, -0.5, 0.5j, 1.0])
    dec = linalg.eig_general(m)
    # modulus ties broken by descending real part, then imaginary part
    assert np.allclose(dec.eigenvalues, [1.0, 0.5, 0.5j, -0.5])


def test_eig_reconstruction():
    m = random_complex(5)
    dec = linalg.eig_general(m)
    rebuilt = sum(
        lam * np.outer(dec.right_vectors[:, i], dec.left_vectors[:, i].conj())
        for i, lam in enumerate(dec.eigenvalues)
    )
    assert np.abs(rebuilt - m).max() < 1e-8
