"""Classical-shadow collection, estimators, and measurement-error bounds.

A snapshot is one random Pauli-basis measurement: per qubit a basis code
(0=X, 1=Y, 2=Z) and an outcome bit b meaning eigenvalue (-1)^b.  The local
inverse snapshot 3 U^dag |b><b| U - I2 has trace exactly 1 and eigenvalues
{2, -1}; tensor products and averages of these build the shadow state and the
per-qubit local snapshots that the datasets feed to the networks.

Estimators of Pauli expectations exploit the product structure: the factor at
qubit j is 1 for an identity, 3 (-1)^b when the measured basis matches the
Pauli, and 0 otherwise.  Feature construction always uses plain means;
median-of-means is reserved for the faithfulness estimates and their bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooLargeError
from .qmat import DensityMatrix
from .spinsys import Hamiltonian, PauliTerm
from .stabsim import CliffordCircuit, NoiseModel, TableauBatch

__all__ = [
    "BASIS_X",
    "BASIS_Y",
    "BASIS_Z",
    "Snapshot",
    "ShadowSet",
    "BoundSpec",
    "collect_dense",
    "collect_stabilizer",
    "inverse_snapshot_local",
    "shadow_state",
    "local_snapshots",
    "estimate_pauli",
    "median_of_means",
    "estimate_energy",
    "estimate_fidelity_pauli",
    "ghz_pauli_decomposition",
    "energy_bound",
    "fidelity_bound",
    "ghz_fidelity_bound_closed_form",
]

BASIS_X, BASIS_Y, BASIS_Z = 0, 1, 2
COLLECT_DENSE_MAX_QUBITS = 8
SHADOW_STATE_MAX_QUBITS = 8
GHZ_DECOMPOSITION_MAX_QUBITS = 24

_SQ2 = 1.0 / np.sqrt(2.0)
# Columns are the +1 and -1 eigenvectors of X, Y, Z.
_EIGVECS = {
    BASIS_X: np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=np.complex128),
    BASIS_Y: np.array([[_SQ2, _SQ2], [1j * _SQ2, -1j * _SQ2]], dtype=np.complex128),
    BASIS_Z: np.eye(2, dtype=np.complex128),
}
# Rotation sending the measured basis to the computational one (U v_b = |b>).
_ROTATIONS = {c: _EIGVECS[c].conj().T for c in (BASIS_X, BASIS_Y, BASIS_Z)}
# inverse_snapshot_local values, indexed [basis][bit].
_LOCAL_INVERSE = {
    c: tuple(
        3.0 * np.outer(_EIGVECS[c][:, b], _EIGVECS[c][:, b].conj()) - np.eye(2) for b in (0, 1)
    )
    for c in (BASIS_X, BASIS_Y, BASIS_Z)
}


@dataclass(frozen=True)
class Snapshot:
    bases: np.ndarray  # (n,) uint8 over {0, 1, 2}
    bits: np.ndarray  # (n,) uint8 over {0, 1}

    def __post_init__(self):
        if self.bases.shape != self.bits.shape:
            raise ValueError("bases and bits must have equal length")


@dataclass
class ShadowSet:
    """M random-Pauli snapshots of one state, stored as (M, n) arrays."""

    n: int
    bases: np.ndarray  # (M, n) uint8
    bits: np.ndarray  # (M, n) uint8
    seed: int = 0
    source: str = "dense"  # "dense" | "stabilizer"

    def __post_init__(self):
        self.bases = np.ascontiguousarray(self.bases, dtype=np.uint8)
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bases.ndim != 2 or self.bases.shape[1] != self.n or self.bases.shape[0] < 1:
            raise ValueError("bases must be (M, n) with M >= 1")
        if self.bits.shape != self.bases.shape:
            raise ValueError("bits must match bases shape")

    @property
    def m(self) -> int:
        return self.bases.shape[0]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> Snapshot:
        return Snapshot(self.bases[i], self.bits[i])


@dataclass(frozen=True)
class BoundSpec:
    """Median-of-means split and failure budget used in faithfulness reports."""

    k_split: int = 5
    delta: float = 0.05

    def __post_init__(self):
        if self.k_split < 1:
            raise ValueError("k_split must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    def chunk_size(self, m: int) -> int:
        if self.k_split > m:
            raise ValueError("k_split exceeds snapshot count")
        return m // self.k_split


# ---------------------------------------------------------------------------
# collection


def _rotated_probabilities(rho_mat: np.ndarray, combo, n: int) -> np.ndarray:
    """Born probabilities of all 2^n outcomes after rotating per-qubit bases."""
    t = rho_mat.reshape((2,) * (2 * n))
    for j, c in enumerate(combo):
        u = _ROTATIONS[c]
        if c == BASIS_Z:
            continue
        t = np.moveaxis(np.tensordot(u, t, axes=([1], [j])), 0, j)
        t = np.moveaxis(np.tensordot(u.conj(), t, axes=([1], [n + j])), 0, n + j)
    mat = t.reshape(2**n, 2**n)
    return np.clip(np.real(np.diag(mat)), 0.0, None)


def collect_dense(rho: DensityMatrix, m: int, rng, seed: int = 0) -> ShadowSet:
    """Sample M random-Pauli snapshots of a dense state from the exact Born rule.

    Bases are drawn uniformly per qubit; outcomes are sampled from the exact
    joint distribution of the rotated state, grouped by basis combination.
    """
    n = int(np.log2(rho.dim))
    if 2**n != rho.dim:
        raise ValueError("density matrix dimension must be a power of two")
    if n > COLLECT_DENSE_MAX_QUBITS:
        raise TooLargeError(f"dense collection capped at {COLLECT_DENSE_MAX_QUBITS} qubits")
    if m < 1:
        raise ValueError("need at least one snapshot")
    bases = rng.integers(0, 3, size=(m, n), dtype=np.uint8)
    u = rng.random(m)
    weights = 3 ** np.arange(n, dtype=np.int64)
    combo_ids = bases.astype(np.int64) @ weights
    bits = np.zeros((m, n), dtype=np.uint8)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    for cid in np.unique(combo_ids):
        sel = combo_ids == cid
        combo = [(int(cid) // int(w)) % 3 for w in weights]
        probs = _rotated_probabilities(rho.mat, combo, n)
        cdf = np.cumsum(probs)
        cdf /= cdf[-1]
        outcomes = np.searchsorted(cdf, u[sel], side="right")
        bits[sel] = ((outcomes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    return ShadowSet(n, bases, bits, seed=seed, source="dense")


def collect_stabilizer(
    circuit: CliffordCircuit, noise: NoiseModel, m: int, rng, seed: int = 0
) -> ShadowSet:
    """Collect M snapshots, each from a fresh stochastic noise trajectory."""
    if m < 1:
        raise ValueError("need at least one snapshot")
    batch = TableauBatch(m, circuit.n)
    batch.apply_noise_sites(circuit, noise, rng)
    bases = rng.integers(0, 3, size=(m, circuit.n), dtype=np.uint8)
    batch.rotate_to_bases(bases)
    bits = batch.measure_all_z(rng)
    return ShadowSet(circuit.n, bases, bits, seed=seed, source="stabilizer")


# ---------------------------------------------------------------------------
# reconstruction


def inverse_snapshot_local(snapshot: Snapshot, j: int) -> np.ndarray:
    """The 2x2 inverse snapshot 3 U^dag |b><b| U - I2 at qubit j."""
    if not 0 <= j < snapshot.bases.shape[0]:
        raise IndexError(f"qubit {j} out of range")
    return _LOCAL_INVERSE[int(snapshot.bases[j])][int(snapshot.bits[j])].copy()


def shadow_state(ss: ShadowSet) -> np.ndarray:
    """Average over snapshots of the tensor product of local inverse snapshots.

    Hermitian with trace exactly 1, but generally not positive semidefinite.
    Snapshots are grouped by distinct (bases, bits) pattern so the cost is one
    Kronecker chain per distinct pattern.
    """
    if ss.n > SHADOW_STATE_MAX_QUBITS:
        raise TooLargeError(f"shadow state capped at {SHADOW_STATE_MAX_QUBITS} qubits")
    pattern = (ss.bases.astype(np.int64) * 2 + ss.bits.astype(np.int64)) @ (
        6 ** np.arange(ss.n, dtype=np.int64)
    )
    uniq, counts = np.unique(pattern, return_counts=True)
    dim = 2**ss.n
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for pid, cnt in zip(uniq, counts):
        local = np.ones((1, 1), dtype=np.complex128)
        rest = int(pid)
        for _ in range(ss.n):
            code = rest % 6
            rest //= 6
            local = np.kron(local, _LOCAL_INVERSE[code // 2][code % 2])
        acc += cnt * local
    return acc / ss.m


def local_snapshots(ss: ShadowSet) -> np.ndarray:
    """Per-qubit averages of the local inverse snapshots, shape (n, 2, 2)."""
    out = np.zeros((ss.n, 2, 2), dtype=np.complex128)
    for j in range(ss.n):
        code = ss.bases[:, j].astype(np.int64) * 2 + ss.bits[:, j]
        counts = np.bincount(code, minlength=6)
        for c, cnt in enumerate(counts):
            if cnt:
                out[j] += cnt * _LOCAL_INVERSE[c // 2][c % 2]
        out[j] /= ss.m
    return out


# ---------------------------------------------------------------------------
# estimators


_BASIS_FOR_PAULI = {"X": BASIS_X, "Y": BASIS_Y, "Z": BASIS_Z}


def _per_snapshot_values(ss: ShadowSet, term: PauliTerm) -> np.ndarray:
    """Per-snapshot estimates of coeff * <Pauli string>; values in {0, +-3^k} * coeff."""
    if term.n_qubits != ss.n:
        raise ValueError("Pauli term length does not match snapshot width")
    support = [j for j, c in enumerate(term.ops) if c != "I"]
    if not support:
        return np.full(ss.m, term.coeff, dtype=np.float64)
    codes = np.array([_BASIS_FOR_PAULI[term.ops[j]] for j in support], dtype=np.uint8)
    match = np.all(ss.bases[:, support] == codes[None, :], axis=1)
    parity = ss.bits[:, support].sum(axis=1) & 1
    k = len(support)
    vals = np.where(match, (3.0**k) * (1.0 - 2.0 * parity), 0.0)
    return term.coeff * vals


def estimate_pauli(ss: ShadowSet, term: PauliTerm) -> float:
    """Plain-mean shadow estimate of coeff * Tr(rho P)."""
    return float(_per_snapshot_values(ss, term).mean())


def median_of_means(values, k_split: int) -> float:
    """Median of the means of K sequential equal chunks (remainder discarded)."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if k_split < 1:
        raise ValueError("k_split must be positive")
    if k_split > values.shape[0]:
        raise ValueError("k_split exceeds the number of values")
    chunk = values.shape[0] // k_split
    means = values[: k_split * chunk].reshape(k_split, chunk).mean(axis=1)
    return float(np.median(means))


def estimate_energy(ss: ShadowSet, h: Hamiltonian, k_split: int) -> float:
    """Sum over Hamiltonian terms of the median-of-means per-term estimate."""
    return float(sum(median_of_means(_per_snapshot_values(ss, t), k_split) for t in h.terms))


def estimate_fidelity_pauli(ss: ShadowSet, target) -> float:
    """Shadow estimate of Tr(rho |psi><psi|) for |psi><psi| = sum_i gamma_i P_i.

    ``target`` is a sequence of (gamma, PauliTerm) pairs.  The estimate is the
    plain mean per term and may fall outside [0, 1] at small M; it is returned
    raw.  Terms are evaluated in vectorized chunks so large decompositions
    (2^n terms for GHZ) stay cheap.
    """
    gammas, ops_codes, weights = _decomposition_arrays(ss.n, target)
    total = float(gammas[weights == 0].sum())  # identity terms estimate exactly 1
    live = weights > 0
    if not live.any():
        return total
    gammas, ops_codes, weights = gammas[live], ops_codes[live], weights[live]
    bases = ss.bases
    bits = ss.bits
    chunk = max(1, 2**22 // max(1, ss.m * ss.n))
    for lo in range(0, gammas.shape[0], chunk):
        codes = ops_codes[lo : lo + chunk]  # (c, n) in {0:I, 1:X, 2:Y, 3:Z}
        active = codes > 0
        match = np.all(
            (~active[:, None, :]) | (bases[None, :, :] == (codes[:, None, :] - 1)), axis=2
        )
        parity = (bits[None, :, :] * active[:, None, :]).sum(axis=2) & 1
        vals = match * (3.0 ** weights[lo : lo + chunk, None]) * (1.0 - 2.0 * parity)
        total += float(gammas[lo : lo + chunk] @ vals.mean(axis=1))
    return total


def _decomposition_arrays(n: int, target):
    gammas = np.array([float(g) for g, _ in target], dtype=np.float64)
    codes = np.zeros((len(target), n), dtype=np.uint8)
    char_code = {"I": 0, "X": 1, "Y": 2, "Z": 3}
    for i, (_, term) in enumerate(target):
        if term.n_qubits != n:
            raise ValueError("decomposition term length mismatch")
        codes[i] = [char_code[c] for c in term.ops]
    weights = (codes > 0).sum(axis=1)
    return gammas, codes, weights


def ghz_pauli_decomposition(n: int):
    """Trace-normalized Pauli decomposition of the global GHZ projector.

    |GHZ><GHZ| = 2^-n sum over the stabilizer group of sign(S) S, enumerated
    from the generators {X^n, Z_i Z_{i+1}}.  Returns a list of 2^n
    (gamma, PauliTerm) pairs; memory grows as 2^n, so keep n modest.
    """
    if n > GHZ_DECOMPOSITION_MAX_QUBITS:
        raise TooLargeError(f"decomposition capped at {GHZ_DECOMPOSITION_MAX_QUBITS} qubits")
    if n < 1:
        raise ValueError("need at least one qubit")
    from .stabsim import _expand_group  # shared signed Pauli-group arithmetic

    gen_x = np.array([(1 << n) - 1] + [0] * (n - 1), dtype=np.uint64)
    gen_z = np.array([0] + [0b11 << i for i in range(n - 1)], dtype=np.uint64)
    gen_r = np.zeros(n, dtype=np.uint8)
    gx, gz, gr = _expand_group(gen_x, gen_z, gen_r)
    gamma = (1.0 - 2.0 * gr.astype(np.float64)) * 2.0**-n
    out = []
    for xm, zm, g in zip(gx, gz, gamma):
        chars = []
        for q in range(n):
            xb = (int(xm) >> q) & 1
            zb = (int(zm) >> q) & 1
            chars.append("IXZY"[xb + 2 * zb])
        out.append((float(g), PauliTerm(1.0, "".join(chars))))
    return out


# ---------------------------------------------------------------------------
# error bounds


def _term_bound(r: int, k: int) -> float:
    return float(np.sqrt(34.0 * 3.0**k / r))


def energy_bound(h: Hamiltonian, m: int, k_split: int, delta: float) -> float:
    """Shadow-estimation error bound for the energy of a Pauli Hamiltonian.

    Terms are grouped by locality k; within each group every coefficient is
    bounded by the group maximum, giving

        eps = sum over groups of  count * max|coeff| * sqrt(34 * 3^k / R)

    with R = floor(M / K).  ``delta`` is the failure budget the split K was
    chosen for; it is carried in reports but does not change the value.
    """
    if k_split < 1 or k_split > m:
        raise ValueError("need 1 <= k_split <= m")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    r = m // k_split
    by_weight = {}
    for t in h.terms:
        k = t.weight
        count, mx = by_weight.get(k, (0, 0.0))
        by_weight[k] = (count + 1, max(mx, abs(t.coeff)))
    return float(
        sum(count * mx * _term_bound(r, k) for k, (count, mx) in by_weight.items() if k > 0)
    )


def fidelity_bound(decomposition, m: int, k_split: int, delta: float) -> float:
    """Shadow-estimation error bound sum_i |gamma_i| sqrt(34 * 3^k_i / R).

    ``decomposition`` is a sequence of (gamma, locality) pairs; the identity
    term (locality 0) contributes nothing because its estimator is exact.
    """
    if k_split < 1 or k_split > m:
        raise ValueError("need 1 <= k_split <= m")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    r = m // k_split
    return float(sum(abs(g) * _term_bound(r, k) for g, k in decomposition if k > 0))


def ghz_fidelity_bound_closed_form(n: int, m: int, k_split: int) -> float:
    """Closed-form GHZ bound 2 sqrt(34 * 3^n / R) (2^(1-n) coefficient convention).

    Documents why Pauli-basis shadows cannot certify GHZ fidelity at large
    n rather than being a practical gate: the 3^n shadow-norm factor dwarfs
    any realistic snapshot budget.
    """
    if k_split < 1 or k_split > m:
        raise ValueError("need 1 <= k_split <= m")
    r = m // k_split
    return float(2.0 * np.sqrt(34.0 * 3.0**n / r))
