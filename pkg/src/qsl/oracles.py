"""Named self-check suites wired to the ``oracle`` CLI command.

Each check cross-validates one subsystem against an independent route:
back-propagated fidelities against the dense channel simulator, analytic
gradients against central differences, trajectory sampling against exact
expectations, and shadow estimators against the states they were drawn from.
"""

from __future__ import annotations

import numpy as np

from . import qmat
from .network import ModelConfig, build_model
from .qmat import DensityMatrix
from .rng import stream
from .shadows import collect_dense, estimate_pauli, shadow_state
from .spinsys import PauliTerm
from .stabsim import (
    NoiseModel,
    TableauBatch,
    dense_noisy_state,
    exact_fidelity,
    ghz_circuit,
    ghz_state_vector,
    mc_fidelity,
)
from .training import grad_check

__all__ = ["CHECKS", "run_check"]


def check_fidelity_oracles() -> dict:
    """exact_fidelity vs dense-channel fidelity on an (n, kind, p1, p2) grid."""
    worst = 0.0
    grid = [0.0, 0.05, 0.1]
    for n in (2, 4, 6):
        for kind in ("global", "local"):
            ideal = DensityMatrix.from_pure(ghz_state_vector(n, kind))
            circuit = ghz_circuit(n, kind)
            for p1 in grid:
                for p2 in grid:
                    noise = NoiseModel(p1, p2)
                    dense = qmat.fidelity(dense_noisy_state(circuit, noise), ideal)
                    worst = max(worst, abs(exact_fidelity(circuit, noise) - dense))
    return {"max_abs_difference": worst, "passed": worst <= 1e-10}


def check_grad() -> dict:
    """Full-model analytic gradients vs central differences."""
    worst = 0.0
    rng = np.random.default_rng(0)
    qst = build_model(ModelConfig("qst", 2, 2), seed=101)
    x = rng.normal(size=(2, 16, 2))
    y = np.zeros((2, 4, 4, 2))
    y[:, :, :, 0] = np.eye(4) / 4
    worst = max(worst, grad_check(qst, x, y, n_coords=200, seed=1)[0])
    dfe = build_model(ModelConfig("dfe", 4, 10), seed=102)
    x = rng.normal(size=(2, 4, 10))
    y = rng.uniform(0.2, 0.8, size=2)
    worst = max(worst, grad_check(dfe, x, y, n_coords=200, seed=2)[0])
    return {"max_rel_error": worst, "passed": worst <= 1e-4}


def check_sampling() -> dict:
    """Trajectory ensembles vs the dense channel: expectations and mc fidelity."""
    c = ghz_circuit(3, "global")
    noise = NoiseModel(0.05, 0.05)
    dense = dense_noisy_state(c, noise)
    n_traj = 60_000
    worst_sigmas = 0.0
    for i, ops in enumerate(("ZZI", "XXX")):
        term = PauliTerm(1.0, ops)
        xm = zm = 0
        for q, ch in enumerate(ops):
            if ch in "XY":
                xm |= 1 << q
            if ch in "ZY":
                zm |= 1 << q
        batch = TableauBatch(n_traj, 3)
        batch.apply_noise_sites(c, noise, stream(7, i))
        vals = 2.0 * batch.project_onto_plus(xm, zm, 0) - 1.0
        se = vals.std(ddof=1) / np.sqrt(n_traj)
        truth = qmat.expectation(dense, term.matrix())
        worst_sigmas = max(worst_sigmas, abs(vals.mean() - truth) / se)
    est, se = mc_fidelity(c, noise, 20_000, stream(8, 0))
    worst_sigmas = max(worst_sigmas, abs(est - exact_fidelity(c, noise)) / se)
    return {"max_sigmas": worst_sigmas, "passed": worst_sigmas <= 4.0}


def check_unbiasedness() -> dict:
    """Shadow state and Pauli estimators against a random two-qubit state."""
    state_rng = np.random.default_rng(3)
    a = state_rng.normal(size=(4, 4)) + 1j * state_rng.normal(size=(4, 4))
    mat = a @ a.conj().T
    rho = DensityMatrix(mat / np.trace(mat).real)
    m = 200_000
    ss = collect_dense(rho, m, stream(9, 0))
    est = shadow_state(ss)
    entry_sigmas = float(np.max(np.abs(est - rho.mat)) / (3.0 / np.sqrt(m)))
    pauli_sigmas = 0.0
    for ops in ("XI", "YI", "ZI", "IX", "IY", "IZ", "XX", "XY", "XZ", "YY", "YZ", "ZZ"):
        term = PauliTerm(1.0, ops)
        err = abs(estimate_pauli(ss, term) - qmat.expectation(rho, term.matrix()))
        sigma = 3.0 ** term.weight / np.sqrt(m / 3.0 ** term.weight)
        pauli_sigmas = max(pauli_sigmas, err / sigma)
    passed = entry_sigmas <= 5.0 and pauli_sigmas <= 5.0
    return {"entry_sigmas": entry_sigmas, "pauli_sigmas": pauli_sigmas, "passed": passed}


CHECKS = {
    "fidelity-oracles": check_fidelity_oracles,
    "grad": check_grad,
    "sampling": check_sampling,
    "unbiasedness": check_unbiasedness,
}


def run_check(name: str) -> dict:
    if name not in CHECKS:
        raise KeyError(name)
    result = CHECKS[name]()
    result["check"] = name
    return result
