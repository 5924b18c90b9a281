"""Kernel evaluation and Gram-matrix assembly.

Quantum kernels measure the fidelity |<phi(x)|phi(x')>|^2 between encoded
states, either exactly from the statevectors or through seeded binomial
shot sampling. Classical kernels (linear, polynomial, RBF) act directly
on the feature vectors. Gram matrices are computed once per unordered
pair, mirrored, and carry the kernel configuration plus a content hash
of the feature matrix they were built from.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InternalConsistencyError
from .feature_maps import FeatureMapSpec, encode
from .statevector import StateVector

QUANTUM_EXACT = "quantum_exact"
QUANTUM_SHOTS = "quantum_shots"
LINEAR = "linear"
POLY = "poly"
RBF = "rbf"

KINDS = frozenset({QUANTUM_EXACT, QUANTUM_SHOTS, LINEAR, POLY, RBF})
QUANTUM_KINDS = frozenset({QUANTUM_EXACT, QUANTUM_SHOTS})

# rounding slack before a quantum kernel value is considered corrupt
_CLAMP_SLACK = 1e-12


@dataclass(frozen=True)
class KernelConfig:
    """Kernel kind plus exactly the parameters that kind needs."""

    kind: str
    feature_map: FeatureMapSpec | None = None
    shots: int | None = None
    rng_seed: int | None = None
    degree: int | None = None
    offset: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        required = {
            QUANTUM_EXACT: ("feature_map",),
            QUANTUM_SHOTS: ("feature_map", "shots", "rng_seed"),
            LINEAR: (),
            POLY: ("degree", "offset"),
            RBF: ("gamma",),
        }[self.kind]
        all_params = ("feature_map", "shots", "rng_seed", "degree", "offset", "gamma")
        for name in all_params:
            value = getattr(self, name)
            if name in required and value is None:
                raise ValueError(f"{self.kind} kernel requires {name}")
            if name not in required and value is not None:
                raise ValueError(f"{self.kind} kernel does not take {name}")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.degree is not None and self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.offset is not None and self.offset < 0:
            raise ValueError("offset must be >= 0")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be > 0")

    def describe(self) -> str:
        """Short human-readable tag for reports."""
        if self.kind == QUANTUM_EXACT:
            fm = self.feature_map
            return f"q | {fm.family} {fm.entanglement} r{fm.reps}"
        if self.kind == QUANTUM_SHOTS:
            fm = self.feature_map
            return f"q | {fm.family} {fm.entanglement} r{fm.reps} shots={self.shots}"
        if self.kind == LINEAR:
            return "c | linear"
        if self.kind == POLY:
            return f"c | poly d={self.degree} c={self.offset:g}"
        return f"c | rbf gamma={self.gamma:g}"

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.feature_map is not None:
            d["feature_map"] = self.feature_map.to_dict()
        for name in ("shots", "rng_seed", "degree", "offset", "gamma"):
            value = getattr(self, name)
            if value is not None:
                d[name] = value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelConfig":
        fm = d.get("feature_map")
        return cls(
            kind=d["kind"],
            feature_map=FeatureMapSpec.from_dict(fm) if fm is not None else None,
            shots=d.get("shots"),
            rng_seed=d.get("rng_seed"),
            degree=d.get("degree"),
            offset=d.get("offset"),
            gamma=d.get("gamma"),
        )


@dataclass
class GramMatrix:
    """Symmetric kernel matrix with its provenance."""

    entries: np.ndarray = field(repr=False)
    kernel_config: KernelConfig
    dataset_digest: str

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def dataset_digest(X: np.ndarray) -> str:
    """Content hash of a feature matrix (shape plus little-endian float64 bytes)."""
    arr = np.ascontiguousarray(X, dtype="<f8")
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def _as_pair(x, x2) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(x2, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.size != b.size:
        raise ValueError("kernel arguments must be 1-D vectors of equal length")
    return a, b


def _clamp_unit(value: float) -> float:
    if value < -_CLAMP_SLACK or value > 1.0 + _CLAMP_SLACK:
        raise InternalConsistencyError(
            f"quantum kernel value {value!r} outside [0, 1] beyond rounding slack"
        )
    return min(max(value, 0.0), 1.0)


def _fidelity(a: StateVector, b: StateVector) -> float:
    ip = np.vdot(a.amplitudes, b.amplitudes)
    return _clamp_unit(float(abs(ip)) ** 2)


def _exact_quantum(cfg: KernelConfig, x: np.ndarray, x2: np.ndarray) -> float:
    if x.size != cfg.feature_map.n_qubits:
        raise ValueError(
            f"feature length {x.size} does not match the map's "
            f"n_qubits={cfg.feature_map.n_qubits}"
        )
    return _fidelity(encode(cfg.feature_map, x), encode(cfg.feature_map, x2))


def _content_seed(x: np.ndarray, x2: np.ndarray) -> list[int]:
    """Order-independent seed words derived from the two vectors' bytes."""
    da = hashlib.sha256(np.ascontiguousarray(x, dtype="<f8").tobytes()).digest()
    db = hashlib.sha256(np.ascontiguousarray(x2, dtype="<f8").tobytes()).digest()
    lo, hi = sorted((da, db))
    mixed = hashlib.sha256(lo + hi).digest()
    return list(np.frombuffer(mixed[:16], dtype=np.uint32))


def shot_estimate(cfg: KernelConfig, x, x2, pair: tuple[int, int] | None = None) -> float:
    """Finite-shot fidelity estimate: binomial draw around the exact value.

    This models the compute-uncompute test, where the fidelity equals the
    probability of the all-zeros outcome, estimated from `shots` repetitions.
    When `pair` is given (Gram assembly), the generator is seeded from
    (rng_seed, i, j); otherwise from rng_seed mixed with a symmetric content
    hash of the two vectors, so repeated calls are deterministic.
    """
    if cfg.kind != QUANTUM_SHOTS:
        raise ValueError("shot_estimate requires a quantum_shots kernel config")
    a, b = _as_pair(x, x2)
    p = _exact_quantum(cfg, a, b)
    if pair is not None:
        i, j = sorted(pair)
        seed = [int(cfg.rng_seed), i, j]
    else:
        seed = [int(cfg.rng_seed)] + _content_seed(a, b)
    rng = np.random.default_rng(seed)
    return int(rng.binomial(cfg.shots, p)) / cfg.shots


def kernel_value(cfg: KernelConfig, x, x2) -> float:
    """Evaluate one kernel entry K(x, x2)."""
    a, b = _as_pair(x, x2)
    if cfg.kind == QUANTUM_EXACT:
        return _exact_quantum(cfg, a, b)
    if cfg.kind == QUANTUM_SHOTS:
        return shot_estimate(cfg, a, b)
    if cfg.kind == LINEAR:
        return float(np.dot(a, b))
    if cfg.kind == POLY:
        return float((np.dot(a, b) + cfg.offset) ** cfg.degree)
    diff = a - b
    return float(np.exp(-cfg.gamma * np.dot(diff, diff)))


def gram(cfg: KernelConfig, X, n_workers: int = 1, jitter: float = 0.0) -> GramMatrix:
    """Kernel matrix over the rows of X, computed once per unordered pair.

    Entries are filled per pair with the same arithmetic regardless of
    `n_workers`, so the result is identical for any worker count. `jitter`
    adds a diagonal constant to shot-sampled matrices, which are not
    guaranteed positive semidefinite.
    """
    feats = np.asarray(X, dtype=np.float64)
    if feats.ndim == 1:
        feats = feats.reshape(1, -1)
    if feats.ndim != 2 or feats.size == 0:
        raise ValueError("X must be a non-empty 2-D feature matrix")
    if jitter < 0:
        raise ValueError("jitter must be >= 0")
    if jitter > 0 and cfg.kind != QUANTUM_SHOTS:
        raise ValueError("diagonal jitter only applies to shot-sampled kernels")
    n = feats.shape[0]
    digest = dataset_digest(feats)
    entries = np.zeros((n, n), dtype=np.float64)

    if cfg.kind in QUANTUM_KINDS:
        states = [encode(cfg.feature_map, row) for row in feats]

        def fill_row(i: int) -> None:
            for j in range(i, n):
                if cfg.kind == QUANTUM_EXACT:
                    v = _fidelity(states[i], states[j])
                elif i == j:
                    v = 1.0  # self-fidelity is known; sampling adds nothing
                else:
                    p = _fidelity(states[i], states[j])
                    rng = np.random.default_rng([int(cfg.rng_seed), i, j])
                    v = int(rng.binomial(cfg.shots, p)) / cfg.shots
                entries[i, j] = entries[j, i] = v

    else:

        def fill_row(i: int) -> None:
            for j in range(i, n):
                entries[i, j] = entries[j, i] = kernel_value(cfg, feats[i], feats[j])

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill_row, range(n)))
    else:
        for i in range(n):
            fill_row(i)

    if jitter > 0:
        entries[np.diag_indices(n)] += jitter
    return GramMatrix(entries=entries, kernel_config=cfg, dataset_digest=digest)


def save_gram(gm: GramMatrix, path) -> None:
    """Write the text form: N, N rows of 17-significant-digit values, footer."""
    n = gm.size
    lines = [str(n)]
    for i in range(n):
        lines.append(" ".join(f"{v:.17g}" for v in gm.entries[i]))
    footer = (
        f"digest={gm.dataset_digest} "
        f"config={json.dumps(gm.kernel_config.to_dict(), sort_keys=True)}"
    )
    lines.append(footer)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gram(path) -> GramMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: not a Gram matrix file")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise ValueError(f"{path}: first line must be the matrix size") from exc
    if len(lines) != n + 2:
        raise ValueError(f"{path}: expected {n} rows plus a footer")
    entries = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        row = lines[1 + i].split()
        if len(row) != n:
            raise ValueError(f"{path}: row {i} has {len(row)} values, expected {n}")
        entries[i] = [float(v) for v in row]
    footer = lines[n + 1]
    if not footer.startswith("digest="):
        raise ValueError(f"{path}: missing footer line")
    digest_part, _, config_part = footer.partition(" config=")
    digest = digest_part[len("digest="):]
    if not config_part:
        raise ValueError(f"{path}: footer missing kernel config")
    cfg = KernelConfig.from_dict(json.loads(config_part))
    return GramMatrix(entries=entries, kernel_config=cfg, dataset_digest=digest)
