import numpy as np
import pytest

from qsl import qmat
from qsl.errors import TooLargeError
from qsl.qmat import DensityMatrix
from qsl.rng import stream
from qsl.spinsys import PauliTerm
from qsl.stabsim import (
    CliffordCircuit,
    Gate,
    NoiseModel,
    NoiseSite,
    TableauBatch,
    dense_noisy_state,
    exact_fidelity,
    ghz_circuit,
    ghz_state_vector,
    mc_fidelity,
    measure_in_bases,
    run_trajectory,
    stateprep_mixture,
)

# chi^2 upper critical values at alpha = 0.001
CHI2_CRIT = {1: 10.828, 3: 16.266, 7: 24.322, 15: 37.697}


def pauli_mask(ops):
    x = z = 0
    for q, c in enumerate(ops):
        if c in "XY":
            x |= 1 << q
        if c in "ZY":
            z |= 1 << q
    return x, z


class TestGhzCircuit:
    def test_global_structure(self):
        c = ghz_circuit(3, "global")
        assert [g.kind for g in c.gates] == ["h", "cnot", "cnot"]
        assert [g.qubits for g in c.gates] == [(0,), (0, 1), (1, 2)]
        # every gate immediately followed by its noise site
        for i, op in enumerate(c.ops):
            if isinstance(op, Gate):
                site = c.ops[i + 1]
                assert isinstance(site, NoiseSite) and site.qubits == op.qubits

    def test_local_structure(self):
        c = ghz_circuit(2, "local")
        assert [g.kind for g in c.gates] == ["h", "h"]
        assert [g.qubits for g in c.gates] == [(0,), (1,)]

    def test_global_stabilizers(self):
        t = run_trajectory(ghz_circuit(3, "global"), NoiseModel(0, 0), stream(1, 0))
        batch = t.batch
        for ops, sign in (("XXX", 0), ("ZZI", 0), ("IZZ", 0)):
            xm, zm = pauli_mask(ops)
            prob = batch_copy_project(batch, xm, zm, sign)
            assert prob == 1.0

    def test_all_z_measurement_ghz(self):
        noise = NoiseModel(0, 0)
        batch = TableauBatch(4000, 3)
        batch.apply_noise_sites(ghz_circuit(3, "global"), noise, stream(2, 0))
        bits = batch.measure_all_z(stream(2, 1))
        patterns = {tuple(row) for row in bits}
        assert patterns <= {(0, 0, 0), (1, 1, 1)}
        n000 = int(np.sum(bits[:, 0] == 0))
        sigma = np.sqrt(4000 * 0.25)
        assert abs(n000 - 2000) < 4 * sigma

    def test_rejects_zero_qubits(self):
        with pytest.raises(ValueError):
            ghz_circuit(0, "global")


def batch_copy_project(batch, xm, zm, sign):
    scratch = TableauBatch(batch.b, batch.n)
    scratch.x = batch.x.copy()
    scratch.z = batch.z.copy()
    scratch.r = batch.r.copy()
    return float(scratch.project_onto_plus(xm, zm, sign)[0])


class TestRunTrajectory:
    def test_noiseless_deterministic(self):
        c = ghz_circuit(4, "global")
        t1 = run_trajectory(c, NoiseModel(0, 0), stream(3, 0))
        t2 = run_trajectory(c, NoiseModel(0, 0), stream(3, 99))
        assert np.array_equal(t1.batch.x, t2.batch.x)
        assert np.array_equal(t1.batch.z, t2.batch.z)
        assert np.array_equal(t1.batch.r, t2.batch.r)
        assert t1.check_valid()

    def test_fully_depolarized_single_qubit(self):
        # p1 = 1 after [H] leaves I/2: Z outcomes are fair coin flips.
        c = ghz_circuit(1, "local")
        n_traj = 100_000
        batch = TableauBatch(n_traj, 1)
        batch.apply_noise_sites(c, NoiseModel(1.0, 0.0), stream(4, 0))
        bits = batch.measure_all_z(stream(4, 1))
        ones = int(bits.sum())
        sigma = np.sqrt(n_traj * 0.25)
        assert abs(ones - n_traj / 2) < 3 * sigma

    def test_trajectory_ensemble_matches_dense_oracle(self):
        n_traj = 100_000
        c = ghz_circuit(3, "global")
        noise = NoiseModel(0.05, 0.05)
        dense = dense_noisy_state(c, noise)
        for i, ops in enumerate(("ZZI", "XXX", "IZZ")):
            xm, zm = pauli_mask(ops)
            batch = TableauBatch(n_traj, 3)
            batch.apply_noise_sites(c, noise, stream(5, i))
            probs = batch.project_onto_plus(xm, zm, 0)
            vals = 2.0 * probs - 1.0
            est = vals.mean()
            se = vals.std(ddof=1) / np.sqrt(n_traj)
            truth = qmat.expectation(dense, PauliTerm(1.0, ops).matrix())
            assert abs(est - truth) <= 4 * se + 1e-12

    def test_tableau_validity_preserved(self):
        rngs = stream(6, 0)
        batch = TableauBatch(3, 4)
        batch.apply_noise_sites(ghz_circuit(4, "global"), NoiseModel(0.3, 0.3), rngs)
        assert batch.check_valid()
        batch.measure_all_z(rngs)
        assert batch.check_valid()


class TestMeasureInBases:
    def test_zero_state_z_basis(self):
        for _ in range(5):
            t = run_trajectory(
                CliffordCircuit(1, ()), NoiseModel(0, 0), stream(7, 0)
            )
            assert measure_in_bases(t, [2], stream(7, 1))[0] == 0

    def test_zero_state_x_basis_unbiased(self):
        shots = 20_000
        batch = TableauBatch(shots, 1)
        bases = np.zeros((shots, 1), dtype=np.uint8)  # X
        batch.rotate_to_bases(bases)
        bits = batch.measure_all_z(stream(8, 0))
        counts = np.bincount(bits[:, 0], minlength=2)
        chi2 = float(((counts - shots / 2) ** 2 / (shots / 2)).sum())
        assert chi2 < CHI2_CRIT[1]

    def test_ghz_xxx_parity_even(self):
        for k in range(50):
            t = run_trajectory(ghz_circuit(3, "global"), NoiseModel(0, 0), stream(9, k))
            bits = measure_in_bases(t, [0, 0, 0], stream(10, k))
            assert bits.sum() % 2 == 0

    def test_born_rule_against_dense(self):
        # All 9 basis pairs on a noisy 2-qubit state, chi^2 at alpha=0.001.
        c = ghz_circuit(2, "global")
        noise = NoiseModel(0.08, 0.12)
        dense = dense_noisy_state(c, noise).mat
        shots = 30_000
        rot = {
            0: np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
            1: np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
            @ np.diag([1, -1j]).astype(complex),
            2: np.eye(2, dtype=complex),
        }
        for b0 in range(3):
            for b1 in range(3):
                batch = TableauBatch(shots, 2)
                batch.apply_noise_sites(c, noise, stream(11, b0, b1))
                bases = np.full((shots, 2), (b0, b1), dtype=np.uint8)
                batch.rotate_to_bases(bases)
                bits = batch.measure_all_z(stream(12, b0, b1))
                idx = bits[:, 0] * 2 + bits[:, 1]
                counts = np.bincount(idx, minlength=4)
                u = np.kron(rot[b0], rot[b1])
                probs = np.real(np.diag(u @ dense @ u.conj().T))
                chi2 = float(((counts - shots * probs) ** 2 / (shots * probs)).sum())
                assert chi2 < CHI2_CRIT[3], (b0, b1, chi2)


class TestExactFidelity:
    def test_noiseless_is_one(self):
        for kind in ("global", "local"):
            assert exact_fidelity(ghz_circuit(4, kind), NoiseModel(0, 0)) == 1.0

    def test_local_closed_form(self):
        for n in (1, 3, 7):
            for p1 in (0.0, 0.03, 0.2):
                got = exact_fidelity(ghz_circuit(n, "local"), NoiseModel(p1, 0.77))
                assert abs(got - (1 - p1 / 2) ** n) < 1e-12

    def test_global_two_qubit_closed_form(self):
        for p2 in (0.0, 0.04, 0.1):
            got = exact_fidelity(ghz_circuit(2, "global"), NoiseModel(0.0, p2))
            assert abs(got - (1 - 3 * p2 / 4)) < 1e-12

    def test_matches_dense_oracle(self):
        for n in (2, 3, 4):
            for kind in ("global", "local"):
                for p1, p2 in ((0.0, 0.1), (0.05, 0.05), (0.1, 0.0)):
                    c = ghz_circuit(n, kind)
                    noise = NoiseModel(p1, p2)
                    ideal = DensityMatrix.from_pure(ghz_state_vector(n, kind))
                    dense = dense_noisy_state(c, noise)
                    assert abs(exact_fidelity(c, noise) - qmat.fidelity(dense, ideal)) <= 1e-10

    def test_too_large(self):
        with pytest.raises(TooLargeError):
            exact_fidelity(ghz_circuit(25, "global"), NoiseModel(0, 0))


class TestMcFidelity:
    def test_noiseless(self):
        est, se = mc_fidelity(ghz_circuit(3, "global"), NoiseModel(0, 0), 200, stream(13, 0))
        assert est == 1.0 and se == 0.0

    def test_matches_exact(self):
        c = ghz_circuit(4, "global")
        noise = NoiseModel(0.01, 0.05)
        truth = exact_fidelity(c, noise)
        est, se = mc_fidelity(c, noise, 4000, stream(14, 0))
        assert abs(est - truth) <= 4 * se

    def test_local_closed_form(self):
        est, se = mc_fidelity(ghz_circuit(10, "local"), NoiseModel(0.02, 0.0), 4000, stream(15, 0))
        assert abs(est - (1 - 0.01) ** 10) <= 4 * se

    def test_unbiased_coverage(self):
        c = ghz_circuit(3, "global")
        noise = NoiseModel(0.02, 0.06)
        truth = exact_fidelity(c, noise)
        hits = 0
        for k in range(20):
            est, se = mc_fidelity(c, noise, 1500, stream(16, k))
            if abs(est - truth) <= 4 * se:
                hits += 1
        assert hits >= 19

    def test_needs_enough_trajectories(self):
        with pytest.raises(ValueError):
            mc_fidelity(ghz_circuit(2, "global"), NoiseModel(0, 0), 10, stream(17, 0))


class TestDenseNoisyState:
    def test_noiseless_bell(self):
        got = dense_noisy_state(ghz_circuit(2, "global"), NoiseModel(0, 0))
        bell = ghz_state_vector(2, "global")
        assert np.allclose(got.mat, np.outer(bell, bell.conj()), atol=1e-12)

    def test_fully_depolarized(self):
        got = dense_noisy_state(ghz_circuit(1, "local"), NoiseModel(1.0, 0.0))
        assert np.allclose(got.mat, np.eye(2) / 2, atol=1e-12)

    def test_too_large(self):
        with pytest.raises(TooLargeError):
            dense_noisy_state(ghz_circuit(9, "global"), NoiseModel(0, 0))


class TestStateprepMixture:
    def test_endpoints(self):
        ghz = ghz_state_vector(4, "global")
        m0 = stateprep_mixture(4, 0.0)
        assert np.allclose(m0.mat, np.outer(ghz, ghz.conj()), atol=1e-15)
        m1 = stateprep_mixture(4, 1.0)
        idx = 1 << 2  # |0100>
        expected = np.zeros((16, 16), dtype=complex)
        expected[idx, idx] = 1.0
        assert np.allclose(m1.mat, expected, atol=1e-15)

    def test_fidelity_is_one_minus_p(self):
        ideal = DensityMatrix.from_pure(ghz_state_vector(4, "global"))
        got = qmat.fidelity(stateprep_mixture(4, 0.3), ideal)
        assert abs(got - 0.7) < 1e-10
