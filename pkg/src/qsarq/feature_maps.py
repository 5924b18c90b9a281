"""Data-encoding circuits: normalized feature vector -> quantum state.

Two encoding families are provided. The ``zz`` family is the widely used
Hadamard + phase + pairwise-phase construction with angles 2*x_j on single
qubits and 2*(pi - x_j)*(pi - x_k) on entangled pairs. The ``custom``
family rotates each qubit by RY(2*x_j) and entangles pairs with a parity
phase of pi*x_j*x_k. One qubit per feature; the block repeats `reps` times.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .statevector import (
    H,
    PARITY_PHASE,
    PHASE,
    RY,
    GateOp,
    StateVector,
    apply_circuit,
    new_zero_state,
)

ZZ = "zz"
CUSTOM = "custom"
FAMILIES = frozenset({ZZ, CUSTOM})

LINEAR = "linear"
FULL = "full"
ENTANGLEMENTS = frozenset({LINEAR, FULL})


@dataclass(frozen=True)
class FeatureMapSpec:
    """Fully determines the encoding unitary for a feature vector."""

    family: str
    n_qubits: int
    reps: int = 2
    entanglement: str = LINEAR

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown feature-map family {self.family!r}")
        if self.entanglement not in ENTANGLEMENTS:
            raise ValueError(f"unknown entanglement scheme {self.entanglement!r}")
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n_qubits": self.n_qubits,
            "reps": self.reps,
            "entanglement": self.entanglement,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMapSpec":
        return cls(
            family=d["family"],
            n_qubits=int(d["n_qubits"]),
            reps=int(d["reps"]),
            entanglement=d["entanglement"],
        )


def entanglement_pairs(scheme: str, n_qubits: int) -> list[tuple[int, int]]:
    """Qubit pairs receiving two-qubit gates, in application order.

    linear chains neighbours: (0,1), (1,2), ...; full connects all (j,k)
    with j < k in lexicographic order. A single qubit has no pairs.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if scheme == LINEAR:
        return [(j, j + 1) for j in range(n_qubits - 1)]
    if scheme == FULL:
        return [(j, k) for j in range(n_qubits) for k in range(j + 1, n_qubits)]
    raise ValueError(f"unknown entanglement scheme {scheme!r}")


def _validated_features(spec: FeatureMapSpec, x) -> np.ndarray:
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1 or vec.size != spec.n_qubits:
        raise ValueError(
            f"feature vector of length {vec.size if vec.ndim == 1 else 'n/a'} "
            f"does not match n_qubits={spec.n_qubits}"
        )
    if not np.all(np.isfinite(vec)):
        raise ValueError("feature vector contains non-finite values")
    if np.any(vec < 0.0) or np.any(vec > 1.0):
        warnings.warn(
            "feature values outside [0, 1]; encoding angles are still defined "
            "but inputs are expected to be min-max normalized",
            stacklevel=3,
        )
    return vec


def encoding_circuit(spec: FeatureMapSpec, x) -> list[GateOp]:
    """The gate list realizing the encoding unitary for `x`."""
    vec = _validated_features(spec, x)
    pairs = entanglement_pairs(spec.entanglement, spec.n_qubits)
    gates: list[GateOp] = []
    for _ in range(spec.reps):
        if spec.family == ZZ:
            for q in range(spec.n_qubits):
                gates.append(GateOp(H, (q,)))
            for q in range(spec.n_qubits):
                gates.append(GateOp(PHASE, (q,), 2.0 * vec[q]))
            for j, k in pairs:
                angle = 2.0 * (math.pi - vec[j]) * (math.pi - vec[k])
                gates.append(GateOp(PARITY_PHASE, (j, k), angle))
        else:
            for q in range(spec.n_qubits):
                gates.append(GateOp(RY, (q,), 2.0 * vec[q]))
            for j, k in pairs:
                gates.append(GateOp(PARITY_PHASE, (j, k), math.pi * vec[j] * vec[k]))
    return gates


def encode(spec: FeatureMapSpec, x) -> StateVector:
    """Prepare the encoded state by running the circuit on |0...0>."""
    gates = encoding_circuit(spec, x)
    return apply_circuit(new_zero_state(spec.n_qubits), gates)
