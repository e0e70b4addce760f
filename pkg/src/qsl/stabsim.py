"""Stabilizer simulation of Clifford circuits under stochastic Pauli noise.

The tableau keeps destabilizer rows 0..n-1 and stabilizer rows n..2n-1 in the
Aaronson-Gottesman layout, with each row's X and Z parts packed into a single
uint64 word (so n <= 64).  Everything is batched: a ``TableauBatch`` holds B
independent tableaus and every gate, noise insertion, and measurement is a
vectorized array operation, which is what makes collecting millions of noisy
snapshots tractable on one core.

Depolarization channels

    E_p1(rho) = (1 - p1) rho + p1 I2/2      (after every 1-qubit gate)
    E_p2(rho) = (1 - p2) rho + p2 I4/4      (after every 2-qubit gate)

are unravelled stochastically: insert X/Y/Z each with probability p1/4, or
each of the 15 non-identity two-qubit Paulis with probability p2/16.  Noise
acts after its gate, on the gate's support only; there is no idle noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooLargeError
from .qmat import DensityMatrix

__all__ = [
    "Gate",
    "NoiseSite",
    "CliffordCircuit",
    "NoiseModel",
    "StabTableau",
    "TableauBatch",
    "ghz_circuit",
    "ghz_state_vector",
    "run_trajectory",
    "measure_in_bases",
    "exact_fidelity",
    "mc_fidelity",
    "dense_noisy_state",
    "stateprep_mixture",
]

MAX_QUBITS = 64
EXACT_FIDELITY_MAX_QUBITS = 24
DENSE_MAX_QUBITS = 8

_U64_ONE = np.uint64(1)


# ---------------------------------------------------------------------------
# circuits


@dataclass(frozen=True)
class Gate:
    kind: str  # "h" | "cnot"
    qubits: tuple

    def __post_init__(self):
        if self.kind == "h" and len(self.qubits) != 1:
            raise ValueError("h acts on one qubit")
        if self.kind == "cnot" and (len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]):
            raise ValueError("cnot needs distinct control and target")
        if self.kind not in ("h", "cnot"):
            raise ValueError(f"unsupported gate {self.kind!r}")


@dataclass(frozen=True)
class NoiseSite:
    qubits: tuple  # length 1 -> p1 channel, length 2 -> p2 channel

    def __post_init__(self):
        if len(self.qubits) not in (1, 2):
            raise ValueError("noise sites act on one or two qubits")


@dataclass(frozen=True)
class CliffordCircuit:
    n: int
    ops: tuple  # Gates and NoiseSites, in program order

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}]")
        for op in self.ops:
            if max(op.qubits) >= self.n:
                raise ValueError("qubit index out of range")

    @property
    def gates(self):
        return tuple(op for op in self.ops if isinstance(op, Gate))

    @property
    def noise_sites(self):
        return tuple(op for op in self.ops if isinstance(op, NoiseSite))


@dataclass(frozen=True)
class NoiseModel:
    p1: float
    p2: float

    def __post_init__(self):
        if not (0.0 <= self.p1 <= 1.0 and 0.0 <= self.p2 <= 1.0):
            raise ValueError("depolarization rates must lie in [0, 1]")


def ghz_circuit(n: int, kind: str) -> CliffordCircuit:
    """Noise-annotated preparation circuit for global or local GHZ states.

    Global: H on qubit 0 then a CNOT chain.  Local: H on every qubit.  Every
    gate is followed by its own depolarization site.
    """
    if n < 1:
        raise ValueError("need at least one qubit")
    ops = []
    if kind == "global":
        ops += [Gate("h", (0,)), NoiseSite((0,))]
        for q in range(n - 1):
            ops += [Gate("cnot", (q, q + 1)), NoiseSite((q, q + 1))]
    elif kind == "local":
        for q in range(n):
            ops += [Gate("h", (q,)), NoiseSite((q,))]
    else:
        raise ValueError(f"unknown GHZ kind {kind!r}")
    return CliffordCircuit(n, tuple(ops))


def ghz_state_vector(n: int, kind: str) -> np.ndarray:
    dim = 2**n
    if kind == "global":
        v = np.zeros(dim, dtype=np.complex128)
        v[0] = v[-1] = 1 / np.sqrt(2)
        return v
    if kind == "local":
        return np.full(dim, 2 ** (-n / 2), dtype=np.complex128)
    raise ValueError(f"unknown GHZ kind {kind!r}")


# ---------------------------------------------------------------------------
# packed Pauli algebra helpers

_popcount = np.bitwise_count


def _g_sum(xi, zi, xh, zh):
    """Phase exponent of multiplying Pauli row i into row h, summed over qubits.

    Returns the Aaronson-Gottesman sum of g(x_i, z_i, x_h, z_h) as int64.
    """
    plus = (
        _popcount(xi & zi & zh & ~xh)
        + _popcount(xi & ~zi & xh & zh)
        + _popcount(~xi & zi & xh & ~zh)
    ).astype(np.int64)
    minus = (
        _popcount(xi & zi & xh & ~zh)
        + _popcount(xi & ~zi & zh & ~xh)
        + _popcount(~xi & zi & xh & zh)
    ).astype(np.int64)
    return plus - minus


def _rowsum_phase(rh, ri, gsum):
    """New sign bit of row h after multiplying row i in; total must be even."""
    tot = (2 * rh.astype(np.int64) + 2 * ri.astype(np.int64) + gsum) & 3
    return (tot >> 1).astype(np.uint8)


def _anticommutes(x1, z1, x2, z2):
    """True where Paulis (x1, z1) and (x2, z2) anticommute."""
    return ((_popcount(x1 & z2) + _popcount(z1 & x2)) & 1).astype(bool)


# ---------------------------------------------------------------------------
# batched tableau


class TableauBatch:
    """B independent n-qubit stabilizer tableaus, all initialized to |0...0>."""

    __slots__ = ("n", "b", "x", "z", "r")

    def __init__(self, b: int, n: int):
        if not 1 <= n <= MAX_QUBITS:
            raise TooLargeError(f"qubit count must be in [1, {MAX_QUBITS}]")
        self.n = n
        self.b = b
        self.x = np.zeros((b, 2 * n), dtype=np.uint64)
        self.z = np.zeros((b, 2 * n), dtype=np.uint64)
        self.r = np.zeros((b, 2 * n), dtype=np.uint8)
        for i in range(n):
            self.x[:, i] = _U64_ONE << np.uint64(i)
            self.z[:, n + i] = _U64_ONE << np.uint64(i)

    # -- gates --------------------------------------------------------------

    def apply_h(self, q: int, sel=None):
        q64 = np.uint64(q)
        bit = _U64_ONE << q64
        x, z, r = (self.x, self.z, self.r) if sel is None else (self.x[sel], self.z[sel], self.r[sel])
        xq = (x >> q64) & _U64_ONE
        zq = (z >> q64) & _U64_ONE
        r = r ^ (xq & zq).astype(np.uint8)
        x = (x & ~bit) | (zq << q64)
        z = (z & ~bit) | (xq << q64)
        self._store(x, z, r, sel)

    def apply_sdg(self, q: int, sel=None):
        # S^dagger: X -> -Y, Y -> X, Z -> Z
        q64 = np.uint64(q)
        x, z, r = (self.x, self.z, self.r) if sel is None else (self.x[sel], self.z[sel], self.r[sel])
        xq = (x >> q64) & _U64_ONE
        zq = (z >> q64) & _U64_ONE
        r = r ^ (xq & (zq ^ _U64_ONE)).astype(np.uint8)
        z = z ^ (x & (_U64_ONE << q64))
        self._store(x, z, r, sel)

    def apply_cnot(self, c: int, t: int, sel=None):
        c64, t64 = np.uint64(c), np.uint64(t)
        x, z, r = (self.x, self.z, self.r) if sel is None else (self.x[sel], self.z[sel], self.r[sel])
        xc = (x >> c64) & _U64_ONE
        zc = (z >> c64) & _U64_ONE
        xt = (x >> t64) & _U64_ONE
        zt = (z >> t64) & _U64_ONE
        r = r ^ (xc & zt & (xt ^ zc ^ _U64_ONE)).astype(np.uint8)
        x = x ^ (xc << t64)
        z = z ^ (zt << c64)
        self._store(x, z, r, sel)

    def apply_gate(self, gate: Gate, sel=None):
        if gate.kind == "h":
            self.apply_h(gate.qubits[0], sel)
        else:
            self.apply_cnot(gate.qubits[0], gate.qubits[1], sel)

    def _store(self, x, z, r, sel):
        if sel is None:
            self.x, self.z, self.r = x, z, r
        else:
            self.x[sel], self.z[sel], self.r[sel] = x, z, r

    # -- Pauli insertions -----------------------------------------------------

    def _flip_bits(self, q: int, codes):
        """Sign flips caused by inserting the Pauli with per-batch codes at q.

        codes: (B,) int array over {0: none, 1: X, 2: Y, 3: Z}.  A stabilizer
        row flips sign iff it anticommutes with the inserted Pauli.
        """
        q64 = np.uint64(q)
        xq = ((self.x >> q64) & _U64_ONE).astype(np.uint8)
        zq = ((self.z >> q64) & _U64_ONE).astype(np.uint8)
        c = codes[:, None]
        flip = np.where(c == 1, zq, 0)
        flip = np.where(c == 2, xq ^ zq, flip)
        flip = np.where(c == 3, xq, flip)
        return flip.astype(np.uint8)

    def insert_pauli_1q(self, q: int, codes):
        self.r ^= self._flip_bits(q, codes)

    def insert_pauli_2q(self, q1: int, q2: int, codes1, codes2):
        self.r ^= self._flip_bits(q1, codes1) ^ self._flip_bits(q2, codes2)

    # -- measurement ----------------------------------------------------------

    def _project(self, xp: int, zp: int, rp: int, assigned_r):
        """Project every tableau onto an eigenspace of the Pauli (xp, zp, rp).

        For batch elements where the outcome is random, the new stabilizer row
        gets sign bit ``assigned_r`` (the sampled or forced branch).  Returns
        (is_random, det_sign) where det_sign is the scratch-product sign bit
        for deterministic elements (outcome bit = det_sign XOR rp).
        """
        n, b = self.n, self.b
        xp64, zp64 = np.uint64(xp), np.uint64(zp)
        anti = _anticommutes(self.x, self.z, np.uint64(xp), np.uint64(zp))  # (B, 2n)
        is_random = anti[:, n:].any(axis=1)
        p = n + np.argmax(anti[:, n:], axis=1)  # valid where is_random
        bidx = np.arange(b)
        xpiv = self.x[bidx, p][:, None]
        zpiv = self.z[bidx, p][:, None]
        rpiv = self.r[bidx, p][:, None]
        cols = np.arange(2 * n)[None, :]
        upd = anti & (cols != p[:, None]) & is_random[:, None]
        if upd.any():
            gs = _g_sum(xpiv, zpiv, self.x, self.z)
            new_r = _rowsum_phase(self.r, rpiv, gs)
            self.r = np.where(upd, new_r, self.r)
            self.x = np.where(upd, self.x ^ xpiv, self.x)
            self.z = np.where(upd, self.z ^ zpiv, self.z)
        sel = np.flatnonzero(is_random)
        if sel.size:
            psel = p[sel]
            self.x[sel, psel - n] = self.x[sel, psel]
            self.z[sel, psel - n] = self.z[sel, psel]
            self.r[sel, psel - n] = self.r[sel, psel]
            self.x[sel, psel] = xp64
            self.z[sel, psel] = zp64
            self.r[sel, psel] = assigned_r[sel]
        det_sign = np.zeros(b, dtype=np.uint8)
        det = ~is_random
        if det.any():
            xs = np.zeros(b, dtype=np.uint64)
            zs = np.zeros(b, dtype=np.uint64)
            rs = np.zeros(b, dtype=np.uint8)
            danti = anti[:, :n]
            for i in range(n):
                m = danti[:, i] & det
                if not m.any():
                    continue
                xi = self.x[:, n + i]
                zi = self.z[:, n + i]
                ri = self.r[:, n + i]
                gs = _g_sum(xi, zi, xs, zs)
                new_r = _rowsum_phase(rs, ri, gs)
                rs = np.where(m, new_r, rs)
                xs = np.where(m, xs ^ xi, xs)
                zs = np.where(m, zs ^ zi, zs)
            det_sign = rs
        return is_random, det_sign

    def measure_z(self, q: int, rand_bits):
        """Measure Z on qubit q everywhere; rand_bits supplies random outcomes."""
        is_random, det_sign = self._project(0, 1 << q, 0, rand_bits.astype(np.uint8))
        return np.where(is_random, rand_bits.astype(np.uint8), det_sign)

    def project_onto_plus(self, xp: int, zp: int, rp: int):
        """Force the +1 outcome of the Pauli (xp, zp, sign bit rp).

        Returns the per-element probability of that outcome (1, 1/2, or 0).
        """
        forced = np.full(self.b, rp, dtype=np.uint8)
        is_random, det_sign = self._project(xp, zp, rp, forced)
        prob = np.where(is_random, 0.5, np.where(det_sign == rp, 1.0, 0.0))
        return prob

    def rotate_to_bases(self, bases):
        """Rotate so that measuring Z afterwards measures the requested Pauli.

        bases: (B, n) with codes 0=X, 1=Y, 2=Z.  X uses H; Y uses S^dagger
        then H; Z is left alone.
        """
        for q in range(self.n):
            col = bases[:, q]
            sel_y = col == 1
            if sel_y.any():
                self.apply_sdg(q, sel_y)
            sel_xy = col != 2
            if sel_xy.any():
                self.apply_h(q, sel_xy)

    def measure_all_z(self, rng):
        """Measure every qubit in order 0..n-1; returns (B, n) outcome bits."""
        out = np.empty((self.b, self.n), dtype=np.uint8)
        for q in range(self.n):
            rand_bits = rng.integers(0, 2, size=self.b, dtype=np.uint8)
            out[:, q] = self.measure_z(q, rand_bits)
        return out

    def apply_noise_sites(self, circuit: CliffordCircuit, noise: NoiseModel, rng):
        """Run the circuit with stochastic Pauli noise, drawing one uniform per site."""
        for op in circuit.ops:
            if isinstance(op, Gate):
                self.apply_gate(op)
            elif len(op.qubits) == 1:
                u = rng.random(self.b)
                codes = np.zeros(self.b, dtype=np.int64)
                hit = u < 3.0 * noise.p1 / 4.0
                codes[hit] = 1 + np.floor(u[hit] / (noise.p1 / 4.0)).astype(np.int64)
                self.insert_pauli_1q(op.qubits[0], codes)
            else:
                u = rng.random(self.b)
                pair = np.zeros(self.b, dtype=np.int64)
                hit = u < 15.0 * noise.p2 / 16.0
                pair[hit] = 1 + np.floor(u[hit] / (noise.p2 / 16.0)).astype(np.int64)
                self.insert_pauli_2q(op.qubits[0], op.qubits[1], pair >> 2, pair & 3)

    # -- diagnostics ----------------------------------------------------------

    def stabilizer_rows(self, which: int):
        """(x_mask, z_mask, sign_bit) of stabilizer row `which` for each element."""
        return self.x[:, self.n + which], self.z[:, self.n + which], self.r[:, self.n + which]

    def check_valid(self):
        """Symplectic sanity: destabilizer i anticommutes only with stabilizer i."""
        for b in range(self.b):
            for i in range(2 * self.n):
                for j in range(i, 2 * self.n):
                    anti = bool(
                        _anticommutes(
                            np.uint64(self.x[b, i]),
                            np.uint64(self.z[b, i]),
                            np.uint64(self.x[b, j]),
                            np.uint64(self.z[b, j]),
                        )
                    )
                    expected = j == i + self.n
                    if anti != expected:
                        return False
        return True


class StabTableau:
    """Single-tableau view used by the scalar simulation API."""

    __slots__ = ("batch",)

    def __init__(self, n: int):
        self.batch = TableauBatch(1, n)

    @property
    def n(self) -> int:
        return self.batch.n

    def _bits(self, words):
        out = np.zeros((2 * self.n, self.n), dtype=np.uint8)
        for q in range(self.n):
            out[:, q] = (words[0] >> np.uint64(q)) & _U64_ONE
        return out

    @property
    def x_bits(self):
        return self._bits(self.batch.x)

    @property
    def z_bits(self):
        return self._bits(self.batch.z)

    @property
    def phases(self):
        return self.batch.r[0].copy()

    def check_valid(self) -> bool:
        return self.batch.check_valid()


# ---------------------------------------------------------------------------
# trajectory API


def run_trajectory(circuit: CliffordCircuit, noise: NoiseModel, rng) -> StabTableau:
    """One stochastic-noise run of the circuit starting from |0...0>."""
    t = StabTableau(circuit.n)
    t.batch.apply_noise_sites(circuit, noise, rng)
    return t


def measure_in_bases(t: StabTableau, bases, rng):
    """Measure qubit j in the Pauli basis bases[j] (0=X, 1=Y, 2=Z).

    Outcome bit b means eigenvalue (-1)^b of the chosen Pauli.  The tableau is
    consumed; the post-measurement state is not meaningful for reuse.
    """
    bases = np.asarray(bases, dtype=np.uint8).reshape(1, -1)
    if bases.shape[1] != t.n:
        raise ValueError("need one basis per qubit")
    t.batch.rotate_to_bases(bases)
    return t.batch.measure_all_z(rng)[0]


# ---------------------------------------------------------------------------
# ideal stabilizer groups and fidelity oracles


def _noiseless_generators(circuit: CliffordCircuit):
    t = TableauBatch(1, circuit.n)
    for op in circuit.ops:
        if isinstance(op, Gate):
            t.apply_gate(op)
    n = circuit.n
    return t.x[0, n:].copy(), t.z[0, n:].copy(), t.r[0, n:].copy()


def _expand_group(gen_x, gen_z, gen_r):
    """All 2^n signed elements generated by commuting Pauli generators."""
    gx = np.zeros(1, dtype=np.uint64)
    gz = np.zeros(1, dtype=np.uint64)
    gr = np.zeros(1, dtype=np.uint8)
    for xg, zg, rg in zip(gen_x, gen_z, gen_r):
        gs = _g_sum(np.uint64(xg), np.uint64(zg), gx, gz)
        new_r = _rowsum_phase(gr, np.uint8(rg), gs)
        gx = np.concatenate([gx, gx ^ xg])
        gz = np.concatenate([gz, gz ^ zg])
        gr = np.concatenate([gr, new_r])
    return gx, gz, gr


def exact_fidelity(circuit: CliffordCircuit, noise: NoiseModel) -> float:
    """Fidelity of the noisy output with the noiseless output, exactly.

    Each element S of the ideal stabilizer group is conjugated backward
    through the circuit; every noise site attenuates it by (1 - p) when the
    propagated Pauli acts non-trivially on the site's support.  The fidelity
    is 2^-n sum_S lambda(S) <0|S_back|0>.
    """
    n = circuit.n
    if n > EXACT_FIDELITY_MAX_QUBITS:
        raise TooLargeError(f"exact fidelity capped at {EXACT_FIDELITY_MAX_QUBITS} qubits")
    gx, gz, gr = _expand_group(*_noiseless_generators(circuit))
    att = np.ones(gx.shape[0], dtype=np.float64)
    for op in reversed(circuit.ops):
        if isinstance(op, NoiseSite):
            support = gx | gz
            if len(op.qubits) == 1:
                acts = (support >> np.uint64(op.qubits[0])) & _U64_ONE
                att *= np.where(acts.astype(bool), 1.0 - noise.p1, 1.0)
            else:
                a = (support >> np.uint64(op.qubits[0])) & _U64_ONE
                b = (support >> np.uint64(op.qubits[1])) & _U64_ONE
                att *= np.where((a | b).astype(bool), 1.0 - noise.p2, 1.0)
        elif op.kind == "h":
            q64 = np.uint64(op.qubits[0])
            bit = _U64_ONE << q64
            xq = (gx >> q64) & _U64_ONE
            zq = (gz >> q64) & _U64_ONE
            gr = gr ^ (xq & zq).astype(np.uint8)
            gx = (gx & ~bit) | (zq << q64)
            gz = (gz & ~bit) | (xq << q64)
        else:
            c64, t64 = np.uint64(op.qubits[0]), np.uint64(op.qubits[1])
            xc = (gx >> c64) & _U64_ONE
            zc = (gz >> c64) & _U64_ONE
            xt = (gx >> t64) & _U64_ONE
            zt = (gz >> t64) & _U64_ONE
            gr = gr ^ (xc & zt & (xt ^ zc ^ _U64_ONE)).astype(np.uint8)
            gx = gx ^ (xc << t64)
            gz = gz ^ (zt << c64)
    vacuum = np.where(gx == 0, 1.0, 0.0)
    signs = 1.0 - 2.0 * gr.astype(np.float64)
    return float(np.mean(att * signs * vacuum))


def mc_fidelity(circuit: CliffordCircuit, noise: NoiseModel, n_traj: int, rng):
    """Monte-Carlo estimate of exact_fidelity from noise trajectories.

    Per trajectory the overlap with the ideal stabilizer projector is the
    product over ideal generators of the probability of the +1 outcome when
    they are measured sequentially.  Returns (estimate, standard error).
    """
    if n_traj < 100:
        raise ValueError("need at least 100 trajectories")
    gen_x, gen_z, gen_r = _noiseless_generators(circuit)
    batch = TableauBatch(n_traj, circuit.n)
    batch.apply_noise_sites(circuit, noise, rng)
    prob = np.ones(n_traj, dtype=np.float64)
    for xg, zg, rg in zip(gen_x, gen_z, gen_r):
        prob *= batch.project_onto_plus(int(xg), int(zg), int(rg))
    estimate = float(prob.mean())
    stderr = float(prob.std(ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else 0.0
    return estimate, stderr


# ---------------------------------------------------------------------------
# dense oracle


def _pauli_conjugate(mat: np.ndarray, n: int, codes: dict) -> np.ndarray:
    """P rho P^dagger for a Pauli string given as {qubit: code 1=X, 2=Y, 3=Z}."""
    dim = mat.shape[0]
    idx = np.arange(dim)
    flip = 0
    phase = np.ones(dim, dtype=np.complex128)
    for q, c in codes.items():
        bit = (idx >> (n - 1 - q)) & 1
        if c == 1:
            flip ^= 1 << (n - 1 - q)
        elif c == 2:
            flip ^= 1 << (n - 1 - q)
            phase = phase * (1j * (1 - 2 * bit))
        elif c == 3:
            phase = phase * (1.0 - 2.0 * bit)
    scaled = phase[:, None] * mat * phase.conj()[None, :]
    perm = idx ^ flip
    out = np.empty_like(mat)
    out[np.ix_(perm, perm)] = scaled
    return out


def _depolarize(mat: np.ndarray, n: int, qubits, p: float) -> np.ndarray:
    """Exact k-qubit depolarization via the Pauli-twirl identity."""
    if p == 0.0:
        return mat
    k = len(qubits)
    twirl = np.zeros_like(mat)
    for combo in range(4**k):
        codes = {}
        rest = combo
        for q in qubits:
            c = rest & 3
            rest >>= 2
            if c:
                codes[q] = c
        twirl += _pauli_conjugate(mat, n, codes) if codes else mat
    return (1.0 - p) * mat + (p / 4**k) * twirl


def _apply_h_dense(mat: np.ndarray, n: int, q: int) -> np.ndarray:
    h = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    u = np.eye(1, dtype=np.complex128)
    for j in range(n):
        u = np.kron(u, h if j == q else np.eye(2, dtype=np.complex128))
    return u @ mat @ u.conj().T


def _apply_cnot_dense(mat: np.ndarray, n: int, c: int, t: int) -> np.ndarray:
    dim = mat.shape[0]
    idx = np.arange(dim)
    cbit = (idx >> (n - 1 - c)) & 1
    perm = idx ^ (cbit << (n - 1 - t))
    out = np.empty_like(mat)
    out[np.ix_(perm, perm)] = mat
    return out


def dense_noisy_state(circuit: CliffordCircuit, noise: NoiseModel) -> DensityMatrix:
    """Exact density-matrix run of the noisy circuit (channel applied exactly)."""
    n = circuit.n
    if n > DENSE_MAX_QUBITS:
        raise TooLargeError(f"dense simulation capped at {DENSE_MAX_QUBITS} qubits")
    dim = 2**n
    mat = np.zeros((dim, dim), dtype=np.complex128)
    mat[0, 0] = 1.0
    for op in circuit.ops:
        if isinstance(op, NoiseSite):
            p = noise.p1 if len(op.qubits) == 1 else noise.p2
            mat = _depolarize(mat, n, op.qubits, p)
        elif op.kind == "h":
            mat = _apply_h_dense(mat, n, op.qubits[0])
        else:
            mat = _apply_cnot_dense(mat, n, op.qubits[0], op.qubits[1])
    mat = (mat + mat.conj().T) / 2
    return DensityMatrix(mat)


def stateprep_mixture(n: int, p: float) -> DensityMatrix:
    """(1-p)|GHZ><GHZ| + p|perp><perp| with |perp> = |010...0>."""
    if n > DENSE_MAX_QUBITS:
        raise TooLargeError(f"dense mixture capped at {DENSE_MAX_QUBITS} qubits")
    if n < 2:
        raise ValueError("the orthogonal state flips qubit 1, so n >= 2")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    ghz = ghz_state_vector(n, "global")
    perp = np.zeros(2**n, dtype=np.complex128)
    perp[1 << (n - 2)] = 1.0
    mat = (1.0 - p) * np.outer(ghz, ghz.conj()) + p * np.outer(perp, perp.conj())
    return DensityMatrix(mat, _skip_psd_check=True)
