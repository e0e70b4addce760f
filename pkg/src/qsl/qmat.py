"""Dense complex linear algebra for small quantum systems.

Everything is double precision.  Matrices are plain ``numpy.ndarray`` of
``complex128``; ``DensityMatrix`` and ``PureState`` wrap arrays that have been
validated against their physical invariants.  Eigen-decompositions are backed
by ``numpy.linalg.eigh``, which returns ascending eigenvalues and orthonormal
columns, matching the contracts below.
"""

from __future__ import annotations

import numpy as np

from .errors import DimMismatchError, NotHermitianError

__all__ = [
    "I2",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "DensityMatrix",
    "PureState",
    "kron",
    "kron_all",
    "herm_eig",
    "psd_sqrt",
    "fidelity",
    "expectation",
]

I2 = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

HERMITIAN_TOL = 1e-8
DENSITY_HERMITIAN_TOL = 1e-10
DENSITY_TRACE_TOL = 1e-10
DENSITY_EIG_TOL = 1e-9
# Eigenvalue clamping threshold for PSD operations.
PSD_CLAMP = 1e-9


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatchError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("matrix contains non-finite entries")
    return a


def _check_hermitian(a: np.ndarray, tol: float, what: str = "matrix") -> None:
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol:
        raise NotHermitianError(f"{what} deviates from Hermitian by {dev:.3e} (tol {tol:.0e})")


class DensityMatrix:
    """Hermitian, positive semidefinite, trace-1 complex matrix."""

    __slots__ = ("mat",)

    def __init__(self, mat, *, _skip_psd_check: bool = False):
        a = _as_square(mat)
        _check_hermitian(a, DENSITY_HERMITIAN_TOL, "density matrix")
        tr = a.trace()
        if abs(tr - 1.0) > DENSITY_TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} is not 1 within {DENSITY_TRACE_TOL:.0e}")
        if not _skip_psd_check:
            lo = np.linalg.eigvalsh(a)[0]
            if lo < -DENSITY_EIG_TOL:
                raise ValueError(f"density matrix has eigenvalue {lo:.3e} < -{DENSITY_EIG_TOL:.0e}")
        self.mat = a

    @classmethod
    def from_pure(cls, amplitudes) -> "DensityMatrix":
        """Rank-1 projector |v><v| for a normalized vector (PSD by construction)."""
        v = np.asarray(amplitudes, dtype=np.complex128).ravel()
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"state vector norm {nrm} is not 1")
        return cls(np.outer(v, v.conj()), _skip_psd_check=True)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


class PureState:
    """Normalized complex state vector."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes):
        v = np.asarray(amplitudes, dtype=np.complex128).ravel()
        nrm2 = float(np.vdot(v, v).real)
        if abs(nrm2 - 1.0) > 1e-12:
            raise ValueError(f"squared norm {nrm2} is not 1 within 1e-12")
        self.amplitudes = v

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self.amplitudes)


def kron(a, b) -> np.ndarray:
    """Kronecker product with the standard row-major layout."""
    return np.kron(_as_square(a), _as_square(b))


def kron_all(mats) -> np.ndarray:
    """Left-to-right Kronecker product of a sequence of matrices."""
    mats = list(mats)
    if not mats:
        raise ValueError("kron_all needs at least one matrix")
    out = _as_square(mats[0])
    for m in mats[1:]:
        out = np.kron(out, _as_square(m))
    return out


def herm_eig(a):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues ascending, eigenvector columns).  Raises
    NotHermitianError when the input deviates from Hermitian beyond 1e-8.
    Eigenvector order among degenerate eigenvalues is unspecified.
    """
    a = _as_square(a)
    _check_hermitian(a, HERMITIAN_TOL)
    vals, vecs = np.linalg.eigh(a)
    return vals, vecs


def psd_sqrt(rho: DensityMatrix) -> np.ndarray:
    """Hermitian PSD square root of a density matrix.

    Negative eigenvalues within the clamping tolerance are set to zero.
    """
    vals, vecs = herm_eig(rho.mat)
    vals = np.where(vals < PSD_CLAMP, np.maximum(vals, 0.0), vals)
    root = (vecs * np.sqrt(vals)) @ vecs.conj().T
    return (root + root.conj().T) / 2.0


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, clamped to [0, 1].

    Eigenvalues of the inner product matrix below the numerical noise floor
    (relative to the largest) are zeroed before the square root; without the
    cutoff, machine-noise eigenvalues of a low-rank inner matrix would each
    contribute O(sqrt(eps)) and ruin the result.
    """
    if rho.dim != sigma.dim:
        raise DimMismatchError(f"dims differ: {rho.dim} vs {sigma.dim}")
    s = psd_sqrt(rho)
    inner = s @ sigma.mat @ s
    vals = np.linalg.eigvalsh((inner + inner.conj().T) / 2.0)
    floor = rho.dim * np.finfo(np.float64).eps * max(vals[-1], 0.0)
    vals = np.where(vals > floor, vals, 0.0)
    f = float(np.sum(np.sqrt(vals)) ** 2)
    if not -1e-9 <= f <= 1.0 + 1e-9:
        raise ValueError(f"fidelity {f} outside [0, 1] beyond tolerance")
    return min(max(f, 0.0), 1.0)


def expectation(rho: DensityMatrix, obs) -> float:
    """Tr(rho . obs) for a Hermitian observable; the imaginary part must vanish."""
    obs = _as_square(obs)
    if obs.shape[0] != rho.dim:
        raise DimMismatchError(f"dims differ: {rho.dim} vs {obs.shape[0]}")
    _check_hermitian(obs, HERMITIAN_TOL, "observable")
    val = np.trace(rho.mat @ obs)
    if abs(val.imag) >= 1e-9:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)
