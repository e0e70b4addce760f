"""Dataset construction, serialization, and loading.

A dataset is a directory holding ``manifest.json`` plus one "QSLD" binary
file per split.  Each record stores the example's scalars, its feature
tensor, its label, and the raw snapshots (per snapshot: n basis bytes, then
the outcome bits packed little-endian 8 per byte), so faithfulness reports
can re-estimate anything from the measurement data alone.

Generation is deterministic: example i of a split draws everything from the
stream keyed by (seed, task, split, i), so reruns and different worker counts
produce byte-identical directories.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat
from pathlib import Path

import numpy as np

from . import recordio
from .errors import GenerationError, SchemaViolationError, VersionMismatchError
from .qmat import DensityMatrix
from .rng import stream
from .shadows import (
    ShadowSet,
    collect_dense,
    collect_stabilizer,
    energy_bound,
    estimate_energy,
    local_snapshots,
    shadow_state,
)
from .spinsys import Hamiltonian, build_tfim, build_xxz, ground_state
from .stabsim import (
    EXACT_FIDELITY_MAX_QUBITS,
    NoiseModel,
    exact_fidelity,
    ghz_circuit,
    mc_fidelity,
    stateprep_mixture,
)

__all__ = [
    "QstExample",
    "DfeExample",
    "Dataset",
    "validate_config",
    "generate",
    "save",
    "load",
    "hamiltonian_for",
    "qst_arrays",
    "dfe_arrays",
]

MANIFEST_NAME = "manifest.json"
DATA_MAGIC = b"QSLD"
DEGENERACY_GAP = 1e-8
RESAMPLE_LIMIT = 100
AUDIT_LIMIT = 0.05
BOUND_K_SPLIT = 5
BOUND_DELTA = 0.05
MC_STDERR_LIMIT = 0.005

_FAMILY_CODE = {"tfim": 0, "xxz": 1}
_KIND_CODE = {"global": 0, "local": 1, "stateprep": 2}
_MASK_CODE = {"full": 0, "noise_only": 1, "shadow_only": 2}
MASK_WIDTH = {"full": 10, "noise_only": 2, "shadow_only": 8}
_SPLIT_CODE = {"train": 0, "test": 1}


@dataclass
class QstExample:
    n_qubits: int
    family: str  # "tfim" | "xxz"
    coupling: float
    jx: float
    feature: np.ndarray  # (2^n, 2^n, 2) real/imag planes of the shadow state
    label_planes: np.ndarray  # (2^n, 2^n, 2) planes of the exact ground state
    surrogate_energy: float
    shadow_energy_estimate: float
    shadow_energy_bound: float
    shadows: ShadowSet

    def label(self) -> DensityMatrix:
        return DensityMatrix(
            self.label_planes[..., 0] + 1j * self.label_planes[..., 1], _skip_psd_check=True
        )

    def hamiltonian(self) -> Hamiltonian:
        return hamiltonian_for(self.family, self.n_qubits, self.coupling, self.jx)


@dataclass
class DfeExample:
    n_qubits: int
    kind: str  # "global" | "local" | "stateprep"
    p1: float  # stateprep stores its mixing probability here, p2 = 0
    p2: float
    label: float
    label_stderr: float
    mask: str
    feature: np.ndarray  # (n, width) tokens
    shadows: ShadowSet


@dataclass
class Dataset:
    manifest: dict
    train: list
    test: list

    @property
    def task(self) -> str:
        return self.manifest["task"]


def hamiltonian_for(family: str, n: int, coupling: float, jx: float) -> Hamiltonian:
    if family == "tfim":
        return build_tfim(n, coupling, jx)
    if family == "xxz":
        return build_xxz(n, [coupling] * (n - 1))
    raise ValueError(f"unknown family {family!r}")


def _planes(mat: np.ndarray) -> np.ndarray:
    return np.stack([mat.real, mat.imag], axis=-1)


# ---------------------------------------------------------------------------
# config schemas


def _expect(cfg, key, types, default=None, required=False):
    if key not in cfg:
        if required:
            raise SchemaViolationError(f"missing config key {key!r}")
        return default
    val = cfg[key]
    if isinstance(val, bool) or not isinstance(val, types):
        raise SchemaViolationError(f"config key {key!r} has the wrong type")
    return val


def _expect_range(cfg, key, default):
    val = cfg.get(key, default)
    if (
        not isinstance(val, (list, tuple))
        or len(val) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val)
        or not val[0] <= val[1]
    ):
        raise SchemaViolationError(f"config key {key!r} must be [lo, hi]")
    return [float(val[0]), float(val[1])]


def validate_config(cfg: dict) -> dict:
    """Validate a generation config and return the manifest with defaults filled.

    Unknown keys are rejected; a present ``format_version`` must equal 1.
    """
    if not isinstance(cfg, dict):
        raise SchemaViolationError("config must be a JSON object")
    if "format_version" in cfg and cfg["format_version"] != recordio.FORMAT_VERSION:
        raise VersionMismatchError(f"unsupported manifest version {cfg['format_version']}")
    task = _expect(cfg, "task", str, required=True)
    if task not in ("qst", "dfe", "stateprep"):
        raise SchemaViolationError(f"unknown task {task!r}")
    out = {"task": task, "format_version": recordio.FORMAT_VERSION}
    common = {"task", "format_version", "n_qubits", "n_train", "n_test", "m_shots", "seed",
              "feature_mask"}
    per_task = {
        "qst": {"family", "jz_range", "jx", "delta_range", "audit_violation_fraction"},
        "dfe": {"kind", "p1_range", "p2_range", "mc_trajectories"},
        "stateprep": {"p_range"},
    }
    allowed = common | per_task[task]
    unknown = set(cfg) - allowed
    if unknown:
        raise SchemaViolationError(f"unknown config keys: {sorted(unknown)}")

    defaults_m = {"qst": 10_000, "dfe": 2000, "stateprep": 100}
    out["n_qubits"] = _expect(cfg, "n_qubits", int, default=5 if task == "qst" else 4)
    out["n_train"] = _expect(cfg, "n_train", int, required=True)
    out["n_test"] = _expect(cfg, "n_test", int, default=max(1, out["n_train"] // 4))
    out["m_shots"] = _expect(cfg, "m_shots", int, default=defaults_m[task])
    out["seed"] = _expect(cfg, "seed", int, required=True)
    if out["n_train"] < 1 or out["n_test"] < 0 or out["m_shots"] < BOUND_K_SPLIT:
        raise SchemaViolationError("bad example or shot counts")
    if out["seed"] < 0:
        raise SchemaViolationError("seed must be a non-negative integer")

    if task == "qst":
        out["feature_mask"] = _expect(cfg, "feature_mask", str, default="full")
        if out["feature_mask"] != "full":
            raise SchemaViolationError("reconstruction features are never masked")
        out["family"] = _expect(cfg, "family", str, default="tfim")
        if out["family"] not in ("tfim", "xxz", "mixed"):
            raise SchemaViolationError(f"unknown family {out['family']!r}")
        out["jz_range"] = _expect_range(cfg, "jz_range", [-0.5, 0.5])
        out["jx"] = float(_expect(cfg, "jx", (int, float), default=1.0))
        out["delta_range"] = _expect_range(cfg, "delta_range", [-3.0, 3.0])
        if not 2 <= out["n_qubits"] <= 8:
            raise SchemaViolationError("dense reconstruction datasets need 2..8 qubits")
        if "audit_violation_fraction" in cfg:
            out["audit_violation_fraction"] = float(cfg["audit_violation_fraction"])
    elif task == "dfe":
        out["feature_mask"] = _expect(cfg, "feature_mask", str, default="full")
        if out["feature_mask"] not in MASK_WIDTH:
            raise SchemaViolationError(f"unknown feature mask {out['feature_mask']!r}")
        out["kind"] = _expect(cfg, "kind", str, default="mixed")
        if out["kind"] not in ("global", "local", "mixed"):
            raise SchemaViolationError(f"unknown kind {out['kind']!r}")
        out["p1_range"] = _expect_range(cfg, "p1_range", [0.0001, 0.01])
        out["p2_range"] = _expect_range(cfg, "p2_range", [0.0001, 0.1])
        out["mc_trajectories"] = _expect(cfg, "mc_trajectories", int, default=4000)
        if out["mc_trajectories"] < 100:
            raise SchemaViolationError("mc_trajectories must be at least 100")
        if not 1 <= out["n_qubits"] <= 64:
            raise SchemaViolationError("fidelity datasets need 1..64 qubits")
    else:
        out["feature_mask"] = _expect(cfg, "feature_mask", str, default="shadow_only")
        if out["feature_mask"] != "shadow_only":
            raise SchemaViolationError("state-preparation features drop the noise columns")
        out["p_range"] = _expect_range(cfg, "p_range", [0.1, 0.9])
        if not 2 <= out["n_qubits"] <= 8:
            raise SchemaViolationError("state-preparation datasets need 2..8 qubits")
    return out


# ---------------------------------------------------------------------------
# per-example generation (module-level so worker pools can pickle them)


def _gen_qst_example(manifest: dict, split: str, idx: int) -> QstExample:
    rng = stream(manifest["seed"], "qst", _SPLIT_CODE[split], idx)
    n = manifest["n_qubits"]
    family = manifest["family"]
    if family == "mixed":
        family = "tfim" if idx % 2 == 0 else "xxz"
    lo, hi = manifest["jz_range"] if family == "tfim" else manifest["delta_range"]
    jx = manifest["jx"]
    for _ in range(RESAMPLE_LIMIT):
        coupling = float(rng.uniform(lo, hi))
        h = hamiltonian_for(family, n, coupling, jx)
        energy, state, gap = ground_state(h)
        if gap >= DEGENERACY_GAP:
            break
    else:
        raise GenerationError(f"no gapped sample after {RESAMPLE_LIMIT} draws")
    ss = collect_dense(state, manifest["m_shots"], rng, seed=manifest["seed"])
    return QstExample(
        n_qubits=n,
        family=family,
        coupling=coupling,
        jx=jx,
        feature=_planes(shadow_state(ss)),
        label_planes=_planes(state.mat),
        surrogate_energy=energy,
        shadow_energy_estimate=estimate_energy(ss, h, BOUND_K_SPLIT),
        shadow_energy_bound=energy_bound(h, ss.m, BOUND_K_SPLIT, BOUND_DELTA),
        shadows=ss,
    )


def _dfe_tokens(locs: np.ndarray, p1: float, p2: float, mask: str) -> np.ndarray:
    n = locs.shape[0]
    re = locs.real.reshape(n, 4)
    im = locs.imag.reshape(n, 4)
    if mask == "noise_only":
        return np.concatenate([np.full((n, 1), p1), np.full((n, 1), p2)], axis=1)
    if mask == "shadow_only":
        return np.concatenate([re, im], axis=1)
    return np.concatenate([re, im, np.full((n, 1), p1), np.full((n, 1), p2)], axis=1)


def _gen_dfe_example(manifest: dict, split: str, idx: int) -> DfeExample:
    rng = stream(manifest["seed"], "dfe", _SPLIT_CODE[split], idx)
    n = manifest["n_qubits"]
    kind = manifest["kind"]
    if kind == "mixed":
        kind = "global" if idx % 2 == 0 else "local"
    p1 = float(rng.uniform(*manifest["p1_range"]))
    p2 = float(rng.uniform(*manifest["p2_range"]))
    circuit = ghz_circuit(n, kind)
    noise = NoiseModel(p1, p2)
    ss = collect_stabilizer(circuit, noise, manifest["m_shots"], rng, seed=manifest["seed"])
    if n <= EXACT_FIDELITY_MAX_QUBITS:
        label, stderr = exact_fidelity(circuit, noise), 0.0
    else:
        label, stderr = mc_fidelity(circuit, noise, manifest["mc_trajectories"], rng)
        if stderr > MC_STDERR_LIMIT:
            label, stderr = mc_fidelity(circuit, noise, 4 * manifest["mc_trajectories"], rng)
    return DfeExample(
        n_qubits=n,
        kind=kind,
        p1=p1,
        p2=p2,
        label=label,
        label_stderr=stderr,
        mask=manifest["feature_mask"],
        feature=_dfe_tokens(local_snapshots(ss), p1, p2, manifest["feature_mask"]),
        shadows=ss,
    )


def _gen_stateprep_example(manifest: dict, split: str, idx: int) -> DfeExample:
    rng = stream(manifest["seed"], "stateprep", _SPLIT_CODE[split], idx)
    n = manifest["n_qubits"]
    p = float(rng.uniform(*manifest["p_range"]))
    rho = stateprep_mixture(n, p)
    ss = collect_dense(rho, manifest["m_shots"], rng, seed=manifest["seed"])
    return DfeExample(
        n_qubits=n,
        kind="stateprep",
        p1=p,
        p2=0.0,
        label=1.0 - p,
        label_stderr=0.0,
        mask="shadow_only",
        feature=_dfe_tokens(local_snapshots(ss), p, 0.0, "shadow_only"),
        shadows=ss,
    )


_GENERATORS = {"qst": _gen_qst_example, "dfe": _gen_dfe_example, "stateprep": _gen_stateprep_example}


def _map_split(manifest: dict, split: str, count: int, workers: int) -> list:
    fn = _GENERATORS[manifest["task"]]
    if workers <= 1:
        return [fn(manifest, split, i) for i in range(count)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, repeat(manifest), repeat(split), range(count), chunksize=8))


def generate(config: dict, out_dir=None, workers: int = 1) -> Dataset:
    """Generate a dataset from a config; optionally write it to out_dir."""
    manifest = validate_config(config)
    train = _map_split(manifest, "train", manifest["n_train"], workers)
    test = _map_split(manifest, "test", manifest["n_test"], workers)
    if manifest["task"] == "qst":
        bad = sum(
            abs(ex.shadow_energy_estimate - ex.surrogate_energy) > ex.shadow_energy_bound
            for ex in train + test
        )
        frac = bad / max(1, len(train) + len(test))
        if frac > AUDIT_LIMIT:
            raise GenerationError(
                f"{frac:.1%} of examples violate the shadow energy bound (limit {AUDIT_LIMIT:.0%})"
            )
        manifest["audit_violation_fraction"] = frac
    ds = Dataset(manifest, train, test)
    if out_dir is not None:
        save(ds, out_dir)
    return ds


# ---------------------------------------------------------------------------
# serialization


def _shadow_bytes(ss: ShadowSet) -> bytes:
    packed = np.packbits(ss.bits, axis=1, bitorder="little")
    return np.concatenate([ss.bases, packed], axis=1).tobytes()


def _shadow_from(buf: memoryview, offset: int, n: int, m: int, source: str, seed: int):
    bpp = (n + 7) // 8
    row = n + bpp
    raw = np.frombuffer(buf, dtype=np.uint8, count=m * row, offset=offset).reshape(m, row)
    bases = raw[:, :n].copy()
    bits = np.unpackbits(raw[:, n:], axis=1, count=n, bitorder="little")
    return ShadowSet(n, bases, bits, seed=seed, source=source), offset + m * row


def _qst_payload(ex: QstExample) -> bytes:
    head = struct.pack("<IQB", ex.n_qubits, ex.shadows.m, _FAMILY_CODE[ex.family])
    scal = struct.pack(
        "<5d",
        ex.coupling,
        ex.jx,
        ex.surrogate_energy,
        ex.shadow_energy_estimate,
        ex.shadow_energy_bound,
    )
    return (
        head
        + scal
        + recordio.f64_bytes(ex.feature)
        + recordio.f64_bytes(ex.label_planes)
        + _shadow_bytes(ex.shadows)
    )


def _qst_from_payload(payload: bytes, seed: int) -> QstExample:
    buf = memoryview(payload)
    n, m, fam = struct.unpack_from("<IQB", buf, 0)
    off = 13
    coupling, jx, surrogate, estimate, bound = struct.unpack_from("<5d", buf, off)
    off += 40
    d = 2**n
    plane_bytes = d * d * 2 * 8
    feature = recordio.f64_array(bytes(buf[off : off + plane_bytes]), (d, d, 2))
    off += plane_bytes
    label = recordio.f64_array(bytes(buf[off : off + plane_bytes]), (d, d, 2))
    off += plane_bytes
    family = "tfim" if fam == 0 else "xxz"
    ss, off = _shadow_from(buf, off, n, m, "dense", seed)
    return QstExample(n, family, coupling, jx, feature, label, surrogate, estimate, bound, ss)


def _dfe_payload(ex: DfeExample) -> bytes:
    head = struct.pack(
        "<IQBB", ex.n_qubits, ex.shadows.m, _KIND_CODE[ex.kind], _MASK_CODE[ex.mask]
    )
    scal = struct.pack("<4d", ex.p1, ex.p2, ex.label, ex.label_stderr)
    return head + scal + recordio.f64_bytes(ex.feature) + _shadow_bytes(ex.shadows)


def _dfe_from_payload(payload: bytes, seed: int) -> DfeExample:
    buf = memoryview(payload)
    n, m, kind_code, mask_code = struct.unpack_from("<IQBB", buf, 0)
    off = 14
    p1, p2, label, stderr = struct.unpack_from("<4d", buf, off)
    off += 32
    kind = {v: k for k, v in _KIND_CODE.items()}[kind_code]
    mask = {v: k for k, v in _MASK_CODE.items()}[mask_code]
    width = MASK_WIDTH[mask]
    feat_bytes = n * width * 8
    feature = recordio.f64_array(bytes(buf[off : off + feat_bytes]), (n, width))
    off += feat_bytes
    source = "dense" if kind == "stateprep" else "stabilizer"
    ss, off = _shadow_from(buf, off, n, m, source, seed)
    return DfeExample(n, kind, p1, p2, label, stderr, mask, feature, ss)


def save(ds: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(ds.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    to_payload = _qst_payload if ds.task == "qst" else _dfe_payload
    for split, examples in (("train", ds.train), ("test", ds.test)):
        with open(out / f"{split}.qsld", "wb") as fh:
            recordio.write_header(fh, DATA_MAGIC, len(examples))
            for ex in examples:
                recordio.write_record(fh, to_payload(ex))


def load(path) -> Dataset:
    src = Path(path)
    manifest_path = src / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {src}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = validate_config(json.load(fh))
    from_payload = _qst_from_payload if manifest["task"] == "qst" else _dfe_from_payload
    splits = {}
    for split, expected in (("train", manifest["n_train"]), ("test", manifest["n_test"])):
        with open(src / f"{split}.qsld", "rb") as fh:
            count = recordio.read_header(fh, DATA_MAGIC)
            if count != expected:
                raise SchemaViolationError(
                    f"{split} split holds {count} records, manifest says {expected}"
                )
            splits[split] = [
                from_payload(recordio.read_record(fh), manifest["seed"]) for _ in range(count)
            ]
    return Dataset(manifest, splits["train"], splits["test"])


# ---------------------------------------------------------------------------
# training-ready arrays


def qst_arrays(examples):
    """Token and label arrays: (n, 4^q, 2) features and (n, d, d, 2) labels."""
    x = np.stack([ex.feature.reshape(-1, 2) for ex in examples])
    y = np.stack([ex.label_planes for ex in examples])
    return x, y


def dfe_arrays(examples):
    """Token and label arrays: (n, q, width) features and (n,) fidelities."""
    x = np.stack([ex.feature for ex in examples])
    y = np.array([ex.label for ex in examples])
    return x, y
