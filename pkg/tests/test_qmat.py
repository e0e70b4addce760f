import numpy as np
import pytest

from qsl.errors import DimMismatchError, NotHermitianError
from qsl.qmat import (
    I2,
    PAULI_X,
    PAULI_Z,
    DensityMatrix,
    PureState,
    expectation,
    fidelity,
    herm_eig,
    kron,
    kron_all,
    psd_sqrt,
)


def random_density(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = a @ a.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


class TestKron:
    def test_identity_case(self):
        assert np.array_equal(kron(I2, I2), np.eye(4))

    def test_zz_diagonal(self):
        assert np.array_equal(kron(PAULI_Z, PAULI_Z), np.diag([1, -1, -1, 1]).astype(complex))

    def test_matches_index_formula_oracle(self):
        # Independent oracle: (A (x) B)[p*r + i, q*s + j] = A[p, q] * B[i, j].
        rng = np.random.default_rng(7)
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        expected = np.empty((4, 4), dtype=complex)
        for p in range(2):
            for q in range(2):
                for i in range(2):
                    for j in range(2):
                        expected[2 * p + i, 2 * q + j] = a[p, q] * b[i, j]
        assert np.array_equal(kron(PAULI_X, PAULI_Z), np.kron(PAULI_X, PAULI_Z))
        assert np.allclose(kron(a, b), expected, atol=0)

    def test_associativity(self):
        # Exact equality needs exactly-representable products; integer-valued
        # complex entries (the Pauli-algebra case) qualify.
        rng = np.random.default_rng(8)
        mats = [
            (rng.integers(-4, 5, size=(2, 2)) + 1j * rng.integers(-4, 5, size=(2, 2))).astype(
                complex
            )
            for _ in range(3)
        ]
        left = kron(kron(mats[0], mats[1]), mats[2])
        right = kron(mats[0], kron(mats[1], mats[2]))
        assert np.array_equal(left, right)
        assert np.array_equal(kron_all(mats), left)


class TestHermEig:
    def test_diagonal_case(self):
        vals, _ = herm_eig(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(vals, [1, 2, 3])

    def test_pauli_x_analytic(self):
        vals, vecs = herm_eig(PAULI_X)
        assert np.allclose(vals, [-1, 1])
        minus = np.array([1, -1]) / np.sqrt(2)
        plus = np.array([1, 1]) / np.sqrt(2)
        # Columns match |-+> up to phase.
        assert abs(abs(np.vdot(minus, vecs[:, 0])) - 1) < 1e-12
        assert abs(abs(np.vdot(plus, vecs[:, 1])) - 1) < 1e-12

    def test_reconstruction_oracle(self):
        rng = np.random.default_rng(11)
        a = random_hermitian(rng, 8)
        vals, vecs = herm_eig(a)
        assert np.allclose((vecs * vals) @ vecs.conj().T, a, atol=1e-8)
        for k in range(8):
            assert np.allclose(a @ vecs[:, k], vals[k] * vecs[:, k], atol=1e-8)

    def test_trace_and_orthonormality_invariants(self):
        rng = np.random.default_rng(12)
        for dim in (2, 4, 7):
            a = random_hermitian(rng, dim)
            vals, vecs = herm_eig(a)
            assert np.all(np.diff(vals) >= -1e-12)
            assert abs(vals.sum() - np.trace(a).real) < 1e-8
            assert np.allclose(vecs.conj().T @ vecs, np.eye(dim), atol=1e-8)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitianError):
            herm_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestPsdSqrt:
    def test_scalar_case(self):
        root = psd_sqrt(DensityMatrix(np.eye(2) / 2))
        assert np.allclose(root, np.eye(2) / np.sqrt(2))

    def test_pure_projector_idempotent(self):
        rho = DensityMatrix.from_pure([1.0, 0.0])
        assert np.allclose(psd_sqrt(rho), rho.mat, atol=1e-12)

    def test_squaring_oracle(self):
        rng = np.random.default_rng(13)
        rho = random_density(rng, 4)
        root = psd_sqrt(rho)
        assert np.allclose(root @ root, rho.mat, atol=1e-8)
        assert np.allclose(root, root.conj().T)

    def test_squaring_oracle_up_to_dim_64(self):
        rng = np.random.default_rng(14)
        for dim in (8, 64):
            rho = random_density(rng, dim)
            root = psd_sqrt(rho)
            assert np.max(np.abs(root @ root - rho.mat)) < 1e-8


class TestFidelity:
    def test_identity_case(self):
        rng = np.random.default_rng(15)
        rho = random_density(rng, 4)
        assert abs(fidelity(rho, rho) - 1.0) < 1e-8

    def test_orthogonal_states(self):
        zero = DensityMatrix.from_pure([1, 0])
        one = DensityMatrix.from_pure([0, 1])
        assert fidelity(zero, one) < 1e-12

    def test_pure_vs_mixed_analytic(self):
        zero = DensityMatrix.from_pure([1, 0])
        mixed = DensityMatrix(np.eye(2) / 2)
        assert abs(fidelity(zero, mixed) - 0.5) < 1e-12

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(16)
        for _ in range(5):
            a = random_density(rng, 4)
            b = random_density(rng, 4)
            fab = fidelity(a, b)
            fba = fidelity(b, a)
            assert abs(fab - fba) < 1e-8
            assert 0.0 <= fab <= 1.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            fidelity(DensityMatrix(np.eye(2) / 2), DensityMatrix(np.eye(4) / 4))


class TestExpectation:
    def test_z_on_zero(self):
        assert expectation(DensityMatrix.from_pure([1, 0]), PAULI_Z) == 1.0

    def test_traceless_on_maximally_mixed(self):
        rng = np.random.default_rng(17)
        obs = random_hermitian(rng, 2)
        obs -= np.trace(obs) / 2 * np.eye(2)
        assert abs(expectation(DensityMatrix(np.eye(2) / 2), obs)) < 1e-12

    def test_eigen_expansion_oracle(self):
        rng = np.random.default_rng(18)
        rho = random_density(rng, 4)
        obs = random_hermitian(rng, 4)
        vals, vecs = np.linalg.eigh(obs)
        oracle = sum(
            vals[k] * float((vecs[:, k].conj() @ rho.mat @ vecs[:, k]).real) for k in range(4)
        )
        assert abs(expectation(rho, obs) - oracle) < 1e-10

    def test_rejects_non_hermitian_observable(self):
        rho = DensityMatrix(np.eye(2) / 2)
        with pytest.raises(NotHermitianError):
            expectation(rho, np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            expectation(DensityMatrix(np.eye(2) / 2), np.eye(4))


class TestTypes:
    def test_density_matrix_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.eye(2))

    def test_density_matrix_rejects_negative(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([1.5, -0.5]).astype(complex))

    def test_density_matrix_rejects_non_hermitian(self):
        m = np.array([[0.5, 0.1], [0.0, 0.5]], dtype=complex)
        with pytest.raises(NotHermitianError):
            DensityMatrix(m)

    def test_pure_state_norm(self):
        with pytest.raises(ValueError):
            PureState([1.0, 1.0])
        s = PureState(np.array([1.0, 1.0]) / np.sqrt(2))
        assert s.dim == 2
        assert abs(np.trace(s.projector().mat) - 1) < 1e-12
