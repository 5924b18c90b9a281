"""Basis-expansion regression: least squares and simulated annealing.

Models are linear in an expanded basis (affine, or affine plus all
pairwise products) and can be trained either by a numerically stable
least-squares solve or by Metropolis annealing on the same objective.
Class predictions come from thresholding the fitted value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

AFFINE = "affine"
POLY2 = "poly2"
BASIS_KINDS = frozenset({AFFINE, POLY2})

FORMAT_TAG = "qsarq-reg v1"


@dataclass(frozen=True)
class BasisSpec:
    """Which expansion to apply to an n_features input vector."""

    kind: str
    n_features: int

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")

    @property
    def size(self) -> int:
        n = self.n_features
        if self.kind == AFFINE:
            return n + 1
        return n + 1 + n * (n + 1) // 2


def expand(basis: BasisSpec, X) -> np.ndarray:
    """Design matrix: constant, features, and (poly2) products x_j*x_k, j <= k."""
    arr = np.asarray(X, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.shape[1] != basis.n_features:
        raise ValueError(
            f"expected {basis.n_features} features, got {arr.shape[1]}"
        )
    cols = [np.ones(arr.shape[0]), *arr.T]
    if basis.kind == POLY2:
        for j in range(basis.n_features):
            for k in range(j, basis.n_features):
                cols.append(arr[:, j] * arr[:, k])
    phi = np.column_stack(cols)
    return phi[0] if single else phi


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling: T_k = t0 * cooling^k over n_iters Metropolis steps."""

    t0: float
    cooling: float
    n_iters: int

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValueError("initial temperature must be > 0")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.n_iters < 1:
            raise ValueError("iteration count must be >= 1")


@dataclass
class RegModel:
    coefficients: np.ndarray = field(repr=False)
    basis: BasisSpec
    threshold: float = 0.0
    rank_deficient: bool = False
    loss: float = float("nan")
    loss_trace: list[float] = field(default_factory=list, repr=False)


def _objective(phi: np.ndarray, y: np.ndarray, q: np.ndarray, ridge: float) -> float:
    r = phi @ q - y
    value = float(r @ r)
    if ridge > 0:
        value += ridge * float(q @ q)
    return value


def fit_least_squares(X, y, basis: BasisSpec, ridge: float = 0.0,
                      threshold: float = 0.0) -> RegModel:
    """Minimize ||phi q - y||^2 + ridge*||q||^2 via orthogonal factorization.

    With ridge=0 a rank-deficient design yields the minimum-norm solution
    and sets `rank_deficient` on the model.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    targets = np.asarray(y, dtype=np.float64)
    phi = expand(basis, X)
    if phi.ndim == 1:
        phi = phi.reshape(1, -1)
    if targets.ndim != 1 or targets.size != phi.shape[0]:
        raise ValueError(f"expected {phi.shape[0]} targets, got {targets.shape}")
    m = basis.size
    if ridge > 0:
        a = np.vstack([phi, np.sqrt(ridge) * np.eye(m)])
        rhs = np.concatenate([targets, np.zeros(m)])
    else:
        a, rhs = phi, targets
    q, _, rank, _ = np.linalg.lstsq(a, rhs, rcond=None)
    return RegModel(
        coefficients=q,
        basis=basis,
        threshold=threshold,
        rank_deficient=rank < m,
        loss=_objective(phi, targets, q, ridge),
    )


def fit_annealing(X, y, basis: BasisSpec, schedule: AnnealSchedule, seed: int,
                  ridge: float = 0.0, threshold: float = 0.0) -> RegModel:
    """Minimize the least-squares objective by Metropolis moves on q.

    Proposals are Gaussian with scale sqrt(T); the best coefficients seen
    are returned, so the final loss never exceeds the loss at the q=0 start.
    Fixed seeds give identical trajectories.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    targets = np.asarray(y, dtype=np.float64)
    phi = expand(basis, X)
    if phi.ndim == 1:
        phi = phi.reshape(1, -1)
    if targets.ndim != 1 or targets.size != phi.shape[0]:
        raise ValueError(f"expected {phi.shape[0]} targets, got {targets.shape}")

    rng = np.random.default_rng(seed)
    m = basis.size
    current = np.zeros(m)
    current_loss = _objective(phi, targets, current, ridge)
    best, best_loss = current.copy(), current_loss
    trace = [best_loss]
    temp = schedule.t0
    for _ in range(schedule.n_iters):
        candidate = current + np.sqrt(temp) * rng.standard_normal(m)
        candidate_loss = _objective(phi, targets, candidate, ridge)
        delta = candidate_loss - current_loss
        if delta <= 0.0 or rng.random() < np.exp(-delta / temp):
            current, current_loss = candidate, candidate_loss
            if current_loss < best_loss:
                best, best_loss = current.copy(), current_loss
        trace.append(best_loss)
        temp *= schedule.cooling
    return RegModel(
        coefficients=best,
        basis=basis,
        threshold=threshold,
        loss=best_loss,
        loss_trace=trace,
    )


def predict_value(model: RegModel, x) -> float:
    return float(expand(model.basis, x) @ model.coefficients)


def predict_label(model: RegModel, x) -> int:
    """+1 when the fitted value reaches the threshold, else -1."""
    return 1 if predict_value(model, x) >= model.threshold else -1


def predict_labels(model: RegModel, X) -> np.ndarray:
    values = expand(model.basis, X) @ model.coefficients
    return np.where(values >= model.threshold, 1, -1).astype(np.int64)


def save_reg_model(model: RegModel, path) -> None:
    lines = [
        FORMAT_TAG,
        "basis " + json.dumps(
            {"kind": model.basis.kind, "n_features": model.basis.n_features},
            sort_keys=True,
        ),
        f"threshold {model.threshold:.17g}",
        "coefficients " + " ".join(f"{v:.17g}" for v in model.coefficients),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_reg_model(path) -> RegModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != FORMAT_TAG:
        raise ValueError(f"{path}: not a {FORMAT_TAG} file")

    def fieldline(idx: int, name: str) -> str:
        prefix = name + " "
        if idx >= len(lines) or not lines[idx].startswith(prefix):
            raise ValueError(f"{path}: expected '{name}' on line {idx + 1}")
        return lines[idx][len(prefix):]

    basis_dict = json.loads(fieldline(1, "basis"))
    basis = BasisSpec(kind=basis_dict["kind"], n_features=int(basis_dict["n_features"]))
    threshold = float(fieldline(2, "threshold"))
    coeffs = np.array([float(v) for v in fieldline(3, "coefficients").split()])
    if coeffs.size != basis.size:
        raise ValueError(f"{path}: coefficient count does not match basis size")
    return RegModel(coefficients=coeffs, basis=basis, threshold=threshold)
