"""Model evaluation and faithfulness gating.

Reconstruction runs are scored by the fidelity between prediction and label
and by the ground-energy error E1 = Tr(pred H) - surrogate energy; fidelity
regression runs by the squared error E2.  A faithfulness verdict compares a
prediction against the classical-shadow estimate recomputed from the stored
measurement records: the prediction is faithful when it lies within the
shadow error bound (inclusive), and an unfaithful prediction is replaced by
the shadow estimate in the reported value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmat
from .autodiff import constant
from .data import DfeExample, QstExample, dfe_arrays, qst_arrays
from .network import Model
from .shadows import (
    GHZ_DECOMPOSITION_MAX_QUBITS,
    energy_bound,
    estimate_energy,
    estimate_fidelity_pauli,
    fidelity_bound,
    ghz_fidelity_bound_closed_form,
    ghz_pauli_decomposition,
)
from .spinsys import realize

__all__ = [
    "FaithVerdict",
    "verdict_for",
    "evaluate_qst",
    "evaluate_dfe",
    "faith_report",
    "predictions",
]


@dataclass(frozen=True)
class FaithVerdict:
    prediction: float
    shadow_estimate: float
    bound: float
    status: str  # "faithful" | "unfaithful" | "indeterminate"
    reported_value: float

    @property
    def faithful(self) -> bool:
        return self.status == "faithful"

    def to_dict(self):
        return {
            "prediction": self.prediction,
            "shadow_estimate": self.shadow_estimate,
            "bound": self.bound,
            "status": self.status,
            "reported_value": self.reported_value,
        }


def verdict_for(prediction: float, shadow_estimate: float, bound: float) -> FaithVerdict:
    """Inclusive-boundary gating: faithful iff |prediction - estimate| <= bound."""
    faithful = abs(prediction - shadow_estimate) <= bound
    return FaithVerdict(
        prediction=prediction,
        shadow_estimate=shadow_estimate,
        bound=bound,
        status="faithful" if faithful else "unfaithful",
        reported_value=prediction if faithful else shadow_estimate,
    )


def predictions(model: Model, examples) -> np.ndarray:
    """Forward pass over a list of examples; planes for qst, scalars for dfe."""
    if model.cfg.task == "qst":
        x, _ = qst_arrays(examples)
    else:
        x, _ = dfe_arrays(examples)
    return model.forward(constant(x)).values


def evaluate_qst(model: Model, examples):
    """Per-example (fidelity, energy error) plus mean/std aggregates."""
    if model.cfg.task != "qst":
        raise ValueError("model does not reconstruct states")
    preds = predictions(model, examples)
    rows = []
    for ex, planes in zip(examples, preds):
        pred = qmat.DensityMatrix(planes[..., 0] + 1j * planes[..., 1], _skip_psd_check=True)
        fq = qmat.fidelity(pred, ex.label())
        e1 = qmat.expectation(pred, realize(ex.hamiltonian())) - ex.surrogate_energy
        rows.append({"fidelity": fq, "energy_error": e1})
    fqs = np.array([r["fidelity"] for r in rows])
    e1s = np.array([r["energy_error"] for r in rows])
    summary = {
        "test_fq_mean": float(fqs.mean()),
        "test_fq_std": float(fqs.std()),
        "test_e1_mean": float(e1s.mean()),
        "test_e1_std": float(e1s.std()),
        "test_e1_abs_mean": float(np.abs(e1s).mean()),
    }
    return rows, summary


def evaluate_dfe(model: Model, examples):
    """Per-example squared error plus mean/std aggregates."""
    if model.cfg.task != "dfe":
        raise ValueError("model does not predict fidelities")
    preds = predictions(model, examples)
    labels = np.array([ex.label for ex in examples])
    e2 = (preds - labels) ** 2
    rows = [
        {"prediction": float(p), "label": float(y), "squared_error": float(e)}
        for p, y, e in zip(preds, labels, e2)
    ]
    summary = {"test_e2_mean": float(e2.mean()), "test_e2_std": float(e2.std())}
    return rows, summary


def faith_report(model: Model, examples, k_split: int = 5, delta: float = 0.05):
    """Faithfulness verdicts for every example, from its stored shadows.

    Reconstruction predictions are gated on the ground-energy surrogate
    (median-of-means estimate vs the energy bound).  Fidelity predictions are
    gated on the shadow fidelity estimate of the ideal GHZ target while the
    Pauli decomposition is tractable; beyond that the verdict is
    "indeterminate" and carries the closed-form bound, which documents why
    Pauli-basis shadows cannot certify GHZ fidelity at scale.
    """
    verdicts = []
    preds = predictions(model, examples)
    for ex, pred in zip(examples, preds):
        if isinstance(ex, QstExample):
            h = ex.hamiltonian()
            planes = pred
            dm = qmat.DensityMatrix(planes[..., 0] + 1j * planes[..., 1], _skip_psd_check=True)
            prediction = qmat.expectation(dm, realize(h))
            estimate = estimate_energy(ex.shadows, h, k_split)
            bound = energy_bound(h, ex.shadows.m, k_split, delta)
            verdicts.append(verdict_for(prediction, estimate, bound))
        elif isinstance(ex, DfeExample):
            prediction = float(pred)
            if ex.n_qubits > GHZ_DECOMPOSITION_MAX_QUBITS:
                bound = ghz_fidelity_bound_closed_form(ex.n_qubits, ex.shadows.m, k_split)
                verdicts.append(
                    FaithVerdict(prediction, float("nan"), bound, "indeterminate", prediction)
                )
                continue
            decomp = ghz_pauli_decomposition(ex.n_qubits)
            estimate = estimate_fidelity_pauli(ex.shadows, decomp)
            bound = fidelity_bound(
                [(g, t.weight) for g, t in decomp], ex.shadows.m, k_split, delta
            )
            verdicts.append(verdict_for(prediction, estimate, bound))
        else:
            raise TypeError(f"unknown example type {type(ex).__name__}")
    n_decided = sum(v.status != "indeterminate" for v in verdicts)
    n_faithful = sum(v.faithful for v in verdicts)
    report = {
        "k_split": k_split,
        "delta": delta,
        "n_examples": len(verdicts),
        "faithful_fraction": (n_faithful / n_decided) if n_decided else float("nan"),
        "fallback_count": sum(v.status == "unfaithful" for v in verdicts),
        "indeterminate_count": len(verdicts) - n_decided,
        "verdicts": [v.to_dict() for v in verdicts],
    }
    return verdicts, report
