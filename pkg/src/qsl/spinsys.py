"""Spin-chain Hamiltonians as weighted Pauli strings.

Both chains are open (nearest-neighbour bonds i, i+1):

    transverse-field Ising    H = jz * sum_i Z_i Z_{i+1} - jx * sum_i X_i
    anisotropic Heisenberg    H = -sum_i [ delta_i (X_i X_{i+1} + Y_i Y_{i+1}) + Z_i Z_{i+1} ]

which gives 2n-1 terms for the first and 3(n-1) for the second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmat
from .errors import TooLargeError
from .qmat import DensityMatrix

__all__ = ["PauliTerm", "Hamiltonian", "build_tfim", "build_xxz", "realize", "ground_state"]

REALIZE_MAX_QUBITS = 12

_PAULI_BY_CHAR = {
    "I": qmat.I2,
    "X": qmat.PAULI_X,
    "Y": qmat.PAULI_Y,
    "Z": qmat.PAULI_Z,
}


@dataclass(frozen=True)
class PauliTerm:
    """A real coefficient times a Pauli string over {I, X, Y, Z}."""

    coeff: float
    ops: str

    def __post_init__(self):
        if not self.ops or any(c not in "IXYZ" for c in self.ops):
            raise ValueError(f"invalid Pauli string {self.ops!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    @property
    def weight(self) -> int:
        """Locality k: number of non-identity factors."""
        return sum(c != "I" for c in self.ops)

    def matrix(self) -> np.ndarray:
        return qmat.kron_all(_PAULI_BY_CHAR[c] for c in self.ops)


@dataclass(frozen=True)
class Hamiltonian:
    n_qubits: int
    terms: tuple

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if len(self.terms) < 1:
            raise ValueError("a Hamiltonian needs at least one term")
        strings = [t.ops for t in self.terms]
        if any(len(s) != self.n_qubits for s in strings):
            raise ValueError("all terms must act on n_qubits qubits")
        if len(set(strings)) != len(strings):
            raise ValueError("duplicate Pauli strings")

    def __len__(self) -> int:
        return len(self.terms)


def _string(n: int, placed: dict) -> str:
    chars = ["I"] * n
    for q, c in placed.items():
        chars[q] = c
    return "".join(chars)


def build_tfim(n: int, jz: float, jx: float) -> Hamiltonian:
    """Transverse-field Ising chain: (n-1) ZZ bonds at jz plus n X fields at -jx."""
    if n < 2:
        raise ValueError("TFIM needs at least 2 qubits")
    terms = [PauliTerm(float(jz), _string(n, {i: "Z", i + 1: "Z"})) for i in range(n - 1)]
    terms += [PauliTerm(-float(jx), _string(n, {i: "X"})) for i in range(n)]
    return Hamiltonian(n, tuple(terms))


def build_xxz(n: int, deltas) -> Hamiltonian:
    """Anisotropic Heisenberg chain: per bond -delta_i XX, -delta_i YY, -1 ZZ."""
    if n < 2:
        raise ValueError("XXZ needs at least 2 qubits")
    deltas = np.asarray(deltas, dtype=np.float64).ravel()
    if deltas.shape[0] != n - 1:
        raise ValueError(f"expected {n - 1} couplings, got {deltas.shape[0]}")
    terms = []
    for i, d in enumerate(deltas):
        terms.append(PauliTerm(-float(d), _string(n, {i: "X", i + 1: "X"})))
        terms.append(PauliTerm(-float(d), _string(n, {i: "Y", i + 1: "Y"})))
        terms.append(PauliTerm(-1.0, _string(n, {i: "Z", i + 1: "Z"})))
    return Hamiltonian(n, tuple(terms))


def realize(h: Hamiltonian) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the Hamiltonian."""
    if h.n_qubits > REALIZE_MAX_QUBITS:
        raise TooLargeError(f"dense realization capped at {REALIZE_MAX_QUBITS} qubits")
    dim = 2**h.n_qubits
    out = np.zeros((dim, dim), dtype=np.complex128)
    for term in h.terms:
        out += term.coeff * term.matrix()
    return out


def ground_state(h: Hamiltonian):
    """Ground energy, ground-state projector, and spectral gap.

    The state is the projector onto the ascending-order index-0 eigenvector;
    under degeneracy (gap ~ 0) that choice is solver-dependent and callers
    must not rely on it.
    """
    mat = realize(h)
    vals, vecs = qmat.herm_eig(mat)
    energy = float(vals[0])
    gap = float(vals[1] - vals[0])
    v0 = vecs[:, 0]
    v0 = v0 / np.linalg.norm(v0)
    return energy, DensityMatrix.from_pure(v0), gap
