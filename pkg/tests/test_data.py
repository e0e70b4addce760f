import json

import numpy as np
import pytest

from qsl import qmat
from qsl.data import (
    dfe_arrays,
    generate,
    hamiltonian_for,
    load,
    qst_arrays,
    validate_config,
)
from qsl.errors import ChecksumMismatchError, SchemaViolationError, VersionMismatchError
from qsl.shadows import estimate_fidelity_pauli, ghz_pauli_decomposition
from qsl.stabsim import NoiseModel, exact_fidelity, ghz_circuit


def qst_config(**over):
    cfg = {"task": "qst", "n_qubits": 3, "n_train": 4, "n_test": 2, "m_shots": 100, "seed": 7}
    cfg.update(over)
    return cfg


def dfe_config(**over):
    cfg = {"task": "dfe", "n_qubits": 4, "n_train": 4, "n_test": 2, "m_shots": 200, "seed": 9}
    cfg.update(over)
    return cfg


def dir_bytes(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


class TestValidateConfig:
    def test_fills_defaults(self):
        m = validate_config(qst_config())
        assert m["jz_range"] == [-0.5, 0.5]
        assert m["jx"] == 1.0
        assert m["feature_mask"] == "full"
        assert m["format_version"] == 1

    def test_rejects_unknown_keys(self):
        with pytest.raises(SchemaViolationError):
            validate_config(qst_config(m_shotz=10))

    def test_rejects_wrong_types(self):
        with pytest.raises(SchemaViolationError):
            validate_config(qst_config(n_train="lots"))

    def test_rejects_oversized_qst(self):
        with pytest.raises(SchemaViolationError):
            validate_config(qst_config(n_qubits=9))

    def test_rejects_bad_version(self):
        with pytest.raises(VersionMismatchError):
            validate_config(qst_config(format_version=2))

    def test_default_test_count_is_quarter(self):
        m = validate_config({"task": "dfe", "n_train": 40, "seed": 1})
        assert m["n_test"] == 10

    def test_stateprep_mask_forced(self):
        with pytest.raises(SchemaViolationError):
            validate_config({"task": "stateprep", "n_train": 4, "seed": 1, "feature_mask": "full"})


class TestGenQst:
    def test_determinism_byte_identical(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate(qst_config(), out_dir=a)
        generate(qst_config(), out_dir=b)
        assert dir_bytes(a) == dir_bytes(b)

    def test_worker_count_invariance(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate(qst_config(), out_dir=a, workers=1)
        generate(qst_config(), out_dir=b, workers=2)
        assert dir_bytes(a) == dir_bytes(b)

    def test_features_are_trace_one_hermitian(self):
        ds = generate(qst_config())
        for ex in ds.train + ds.test:
            mat = ex.feature[..., 0] + 1j * ex.feature[..., 1]
            assert abs(np.trace(mat) - 1.0) < 1e-12
            assert np.allclose(mat, mat.conj().T, atol=1e-12)

    def test_labels_are_ground_states(self):
        ds = generate(qst_config())
        for ex in ds.train:
            h = ex.hamiltonian()
            from qsl.spinsys import ground_state

            energy, state, _ = ground_state(h)
            assert abs(energy - ex.surrogate_energy) < 1e-10
            assert qmat.fidelity(ex.label(), state) > 1 - 1e-9

    def test_train_test_draws_disjoint(self):
        ds = generate(qst_config(n_train=8, n_test=8))
        train_c = {ex.coupling for ex in ds.train}
        test_c = {ex.coupling for ex in ds.test}
        assert not train_c & test_c

    def test_mixed_family_interleaves(self):
        # The anisotropic chain's ground state is structurally degenerate for
        # |delta| < 1 (and everywhere at odd n), so mixed sets need an even
        # chain and couplings inside the gapped phase.
        ds = generate(
            qst_config(family="mixed", n_qubits=4, delta_range=[1.5, 3.0], n_train=4, n_test=2)
        )
        assert [ex.family for ex in ds.train] == ["tfim", "xxz", "tfim", "xxz"]

    def test_structural_degeneracy_fails_loudly(self):
        from qsl.errors import GenerationError

        with pytest.raises(GenerationError):
            generate(qst_config(family="xxz", n_qubits=3, n_train=1, n_test=0))

    def test_audit_fraction_recorded(self):
        ds = generate(qst_config())
        assert ds.manifest["audit_violation_fraction"] <= 0.05


class TestGenDfe:
    def test_kinds_balanced(self):
        ds = generate(dfe_config(n_train=6))
        assert [ex.kind for ex in ds.train] == ["global", "local"] * 3

    def test_exact_labels_with_zero_stderr(self):
        ds = generate(dfe_config())
        for ex in ds.train:
            assert ex.label_stderr == 0.0
            c = ghz_circuit(ex.n_qubits, ex.kind)
            assert abs(ex.label - exact_fidelity(c, NoiseModel(ex.p1, ex.p2))) < 1e-12
            assert 0.0 <= ex.label <= 1.0

    def test_noiseless_label_is_one(self):
        ds = generate(dfe_config(p1_range=[0.0, 0.0], p2_range=[0.0, 0.0], n_train=2, n_test=1))
        for ex in ds.train:
            assert ex.label == 1.0

    def test_mask_widths(self):
        for mask, width in (("full", 10), ("noise_only", 2), ("shadow_only", 8)):
            ds = generate(dfe_config(feature_mask=mask, n_train=2, n_test=1))
            assert ds.train[0].feature.shape == (4, width)

    def test_mc_labels_beyond_exact_cutoff(self):
        # n > 24 labels come from trajectory sampling with a recorded stderr
        ds = generate(
            dfe_config(n_qubits=26, n_train=1, n_test=0, m_shots=20, mc_trajectories=500)
        )
        ex = ds.train[0]
        assert ex.label_stderr > 0.0
        assert 0.0 <= ex.label <= 1.0

    def test_masked_features_are_column_subsets(self):
        full = generate(dfe_config(n_train=2, n_test=1))
        shadow = generate(dfe_config(feature_mask="shadow_only", n_train=2, n_test=1))
        noise = generate(dfe_config(feature_mask="noise_only", n_train=2, n_test=1))
        assert np.array_equal(full.train[0].feature[:, :8], shadow.train[0].feature)
        assert np.array_equal(full.train[0].feature[:, 8:], noise.train[0].feature)


class TestGenStateprep:
    def test_labels_and_tokens(self):
        cfg = {"task": "stateprep", "n_qubits": 4, "n_train": 4, "n_test": 2, "m_shots": 50,
               "seed": 3}
        ds = generate(cfg)
        for ex in ds.train:
            assert abs(ex.label - (1.0 - ex.p1)) < 1e-15
            assert ex.feature.shape == (4, 8)
            assert ex.kind == "stateprep"

    def test_p_distribution_uniform(self):
        cfg = {"task": "stateprep", "n_qubits": 2, "n_train": 400, "n_test": 0, "m_shots": 5,
               "seed": 4}
        ds = generate(cfg)
        ps = np.sort([ex.p1 for ex in ds.train])
        u = (ps - 0.1) / 0.8
        ks = float(np.max(np.abs(u - (np.arange(1, 401)) / 400)))
        assert ks < 1.63 / np.sqrt(400)  # KS critical value at alpha = 0.01

    def test_shadow_estimate_tracks_label(self):
        cfg = {"task": "stateprep", "n_qubits": 4, "n_train": 1, "n_test": 0, "m_shots": 20_000,
               "seed": 5}
        ds = generate(cfg)
        ex = ds.train[0]
        est = estimate_fidelity_pauli(ex.shadows, ghz_pauli_decomposition(4))
        assert abs(est - ex.label) < 5 * (15 / 16) * 81 / np.sqrt(20_000)


class TestSaveLoad:
    def test_qst_round_trip_bit_exact(self, tmp_path):
        ds = generate(qst_config(), out_dir=tmp_path / "d")
        back = load(tmp_path / "d")
        assert back.manifest == ds.manifest
        for a, b in zip(ds.train + ds.test, back.train + back.test):
            assert np.array_equal(a.feature, b.feature)
            assert np.array_equal(a.label_planes, b.label_planes)
            assert np.array_equal(a.shadows.bases, b.shadows.bases)
            assert np.array_equal(a.shadows.bits, b.shadows.bits)
            assert a.coupling == b.coupling
            assert a.surrogate_energy == b.surrogate_energy
            assert a.shadow_energy_estimate == b.shadow_energy_estimate
            assert a.shadow_energy_bound == b.shadow_energy_bound

    def test_dfe_round_trip_bit_exact(self, tmp_path):
        ds = generate(dfe_config(), out_dir=tmp_path / "d")
        back = load(tmp_path / "d")
        for a, b in zip(ds.train + ds.test, back.train + back.test):
            assert np.array_equal(a.feature, b.feature)
            assert (a.p1, a.p2, a.label, a.label_stderr, a.kind, a.mask) == (
                b.p1,
                b.p2,
                b.label,
                b.label_stderr,
                b.kind,
                b.mask,
            )
            assert np.array_equal(a.shadows.bases, b.shadows.bases)
            assert np.array_equal(a.shadows.bits, b.shadows.bits)

    def test_corrupted_payload_detected(self, tmp_path):
        generate(qst_config(), out_dir=tmp_path / "d")
        blob = bytearray((tmp_path / "d" / "train.qsld").read_bytes())
        blob[200] ^= 0x01
        (tmp_path / "d" / "train.qsld").write_bytes(bytes(blob))
        with pytest.raises(ChecksumMismatchError):
            load(tmp_path / "d")

    def test_version_mismatch_detected(self, tmp_path):
        generate(qst_config(), out_dir=tmp_path / "d")
        manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
        manifest["format_version"] = 2
        (tmp_path / "d" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(VersionMismatchError):
            load(tmp_path / "d")

    def test_unknown_manifest_key_rejected(self, tmp_path):
        generate(qst_config(), out_dir=tmp_path / "d")
        manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
        manifest["surprise"] = 1
        (tmp_path / "d" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(SchemaViolationError):
            load(tmp_path / "d")

    def test_count_mismatch_rejected(self, tmp_path):
        ds = generate(qst_config(), out_dir=tmp_path / "d")
        manifest = dict(ds.manifest)
        manifest["n_train"] = 3
        (tmp_path / "d" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(SchemaViolationError):
            load(tmp_path / "d")


class TestWireLayout:
    def test_snapshot_block_layout(self, tmp_path):
        # Per snapshot: n basis bytes, then bits packed little-endian 8/byte.
        from qsl.data import _shadow_bytes
        from qsl.shadows import ShadowSet

        bases = np.array([[0, 1, 2], [2, 2, 0]], dtype=np.uint8)
        bits = np.array([[1, 0, 1], [0, 1, 1]], dtype=np.uint8)
        blob = _shadow_bytes(ShadowSet(3, bases, bits))
        assert blob == bytes([0, 1, 2, 0b101, 2, 2, 0, 0b110])


class TestArrays:
    def test_qst_arrays_shapes(self):
        ds = generate(qst_config())
        x, y = qst_arrays(ds.train)
        assert x.shape == (4, 64, 2)
        assert y.shape == (4, 8, 8, 2)
        assert np.array_equal(x[0].reshape(8, 8, 2), ds.train[0].feature)

    def test_dfe_arrays_shapes(self):
        ds = generate(dfe_config())
        x, y = dfe_arrays(ds.train)
        assert x.shape == (4, 4, 10)
        assert y.shape == (4,)


class TestHamiltonianFor:
    def test_families(self):
        h = hamiltonian_for("tfim", 3, 0.4, 1.0)
        assert len(h) == 5
        h = hamiltonian_for("xxz", 3, 1.5, 1.0)
        assert len(h) == 6
        with pytest.raises(ValueError):
            hamiltonian_for("heisenberg", 3, 1.0, 1.0)
