"""End-to-end experiment orchestration.

A single YAML config describes the dataset, the preprocessing steps,
and the list of model rows to train and score. Running an experiment
produces a small comparison report (aligned text plus a JSON record)
whose rows mirror the model/type/acc/execution/kernel layout used for
classical-vs-quantum comparisons. Reruns with the same config and
input are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import InternalConsistencyError
from .kernels import (
    QUANTUM_KINDS,
    QUANTUM_SHOTS,
    KernelConfig,
    dataset_digest,
    gram,
)
from .preprocess import (
    apply_lipinski_filter,
    feature_matrix,
    minmax_fit,
    minmax_transform,
    pca_fit,
    pca_transform,
    pec50,
    read_descriptor_csv,
    resolve_labels,
)
from .regression import (
    AnnealSchedule,
    BasisSpec,
    fit_annealing,
    fit_least_squares,
    predict_labels,
)
from .svm import SvmConfig, decision_value, train

REG_LS = "reg_ls"
REG_ANNEAL = "reg_anneal"
SVM = "svm"
MODEL_KINDS = frozenset({REG_LS, REG_ANNEAL, SVM})

EXEC_CPU = "cpu-exact"
EXEC_SHOTS = "sim-shots"

_ENTRY_KEYS = {
    "name", "kind", "tag", "note", "basis", "ridge", "target",
    "t0", "cooling", "iterations", "anneal_seed",
    "kernel", "C", "tol", "eps", "max_passes", "max_iters", "jitter",
}
_CONFIG_KEYS = {
    "input", "seed", "split", "lipinski_filter", "activity_cutoff",
    "pca_k", "scaler", "models",
}


@dataclass
class ModelEntry:
    """One report row: a model kind plus its solver/kernel parameters."""

    name: str
    kind: str
    tag: str
    note: str | None = None
    # regression rows
    basis: str = "affine"
    ridge: float = 0.0
    target: str = "label"  # "label" (+-1) or "activity" (raw pEC50)
    t0: float = 1.0
    cooling: float = 0.999
    iterations: int = 10_000
    anneal_seed: int = 0
    # svm rows
    kernel: dict | None = None
    C: float = 1.0
    tol: float = 1e-3
    eps: float = 1e-12
    max_passes: int = 10
    max_iters: int = 100_000
    jitter: float = 0.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"model {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == SVM and self.kernel is None:
            raise ValueError(f"model {self.name!r}: svm rows need a kernel section")
        if self.target not in ("label", "activity"):
            raise ValueError(f"model {self.name!r}: unknown target {self.target!r}")


@dataclass
class ExperimentConfig:
    input: str
    seed: int
    split: float
    models: list[ModelEntry]
    lipinski_filter: bool = False
    activity_cutoff: float | None = None
    pca_k: int | None = None
    scaler: bool = True

    def __post_init__(self):
        if not self.models:
            raise ValueError("config lists no models")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")
        seen = set()
        for entry in self.models:
            if entry.name in seen:
                raise ValueError(f"duplicate model name {entry.name!r}")
            seen.add(entry.name)


def _default_tag(kind: str, kernel: dict | None) -> str:
    if kind == REG_LS:
        return "c"
    if kind == REG_ANNEAL:
        return "q"
    if kernel is not None and kernel.get("kind") in QUANTUM_KINDS:
        return "c/q"
    return "c"


def _parse_entry(raw: dict) -> ModelEntry:
    if not isinstance(raw, dict):
        raise ValueError(f"model entry must be a mapping, got {type(raw).__name__}")
    unknown = set(raw) - _ENTRY_KEYS
    if unknown:
        raise ValueError(f"model entry has unknown key(s) {sorted(unknown)}")
    for key in ("name", "kind"):
        if key not in raw:
            raise ValueError(f"model entry missing required key {key!r}")
    raw = dict(raw)
    raw.setdefault("tag", _default_tag(raw["kind"], raw.get("kernel")))
    return ModelEntry(**raw)


def load_experiment_config(path) -> ExperimentConfig:
    """Read and validate a YAML experiment config.

    The input path is resolved relative to the config file's directory.
    """
    cfg_path = Path(path)
    with open(cfg_path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown config key(s) {sorted(unknown)}")
    for key in ("input", "seed", "split", "models"):
        if key not in raw:
            raise ValueError(f"{path}: missing required key {key!r}")
    models = [_parse_entry(m) for m in raw["models"] or []]
    input_path = Path(raw["input"])
    if not input_path.is_absolute():
        input_path = (cfg_path.parent / input_path).resolve()
    return ExperimentConfig(
        input=str(input_path),
        seed=int(raw["seed"]),
        split=float(raw["split"]),
        models=models,
        lipinski_filter=bool(raw.get("lipinski_filter", False)),
        activity_cutoff=(
            None if raw.get("activity_cutoff") is None
            else float(raw["activity_cutoff"])
        ),
        pca_k=None if raw.get("pca_k") is None else int(raw["pca_k"]),
        scaler=bool(raw.get("scaler", True)),
    )


def accuracy(predictions, truth) -> float:
    """Fraction of exact label matches."""
    pred = np.asarray(predictions)
    true = np.asarray(truth)
    if pred.size == 0 or pred.shape != true.shape:
        raise ValueError(
            f"predictions and truth must be equal-length and non-empty, "
            f"got {pred.shape} vs {true.shape}"
        )
    return float(np.mean(pred == true))


def split_indices(n_rows: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle then prefix split into (train, test) index arrays."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("split fraction must lie in (0, 1)")
    if n_rows < 2:
        raise ValueError("need at least two rows to split")
    n_train = int(n_rows * fraction)
    if n_train < 1 or n_train >= n_rows:
        raise ValueError(
            f"fraction {fraction} would leave an empty split for {n_rows} rows"
        )
    perm = np.random.default_rng(seed).permutation(n_rows)
    return perm[:n_train], perm[n_train:]


def resolve_kernel_config(raw: dict, n_features: int) -> KernelConfig:
    """Build a KernelConfig, filling the feature-map qubit count from the data."""
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ValueError("kernel section must be a mapping with a 'kind'")
    spec = dict(raw)
    fm = spec.get("feature_map")
    if fm is not None:
        fm = dict(fm)
        fm.setdefault("n_qubits", n_features)
        if int(fm["n_qubits"]) != n_features:
            raise ValueError(
                f"feature map n_qubits={fm['n_qubits']} does not match the "
                f"{n_features}-dimensional data"
            )
        fm.setdefault("reps", 2)
        fm.setdefault("entanglement", "linear")
        spec["feature_map"] = fm
    return KernelConfig.from_dict(spec)


@dataclass
class ModelResult:
    name: str
    tag: str
    accuracy: float
    execution: str
    kernel: str
    note: str | None = None
    detail: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    results: list[ModelResult]
    dataset: dict
    config_echo: dict

    def to_text(self) -> str:
        headers = ("model", "type", "acc", "execution", "kernel")
        rows = [
            (r.name, r.tag, f"{r.accuracy:.4f}", r.execution, r.kernel)
            for r in self.results
        ]
        widths = [
            max(len(headers[c]), *(len(row[c]) for row in rows))
            for c in range(len(headers))
        ]
        lines = [
            "  ".join(h.ljust(widths[c]) for c, h in enumerate(headers)).rstrip(),
            "  ".join("-" * widths[c] for c in range(len(headers))),
        ]
        for row in rows:
            lines.append(
                "  ".join(v.ljust(widths[c]) for c, v in enumerate(row)).rstrip()
            )
        ds = self.dataset
        lines.append("")
        lines.append(
            f"dataset: n={ds['n_rows']}  "
            f"train={ds['n_train']} (+{ds['train_pos']}/-{ds['train_neg']})  "
            f"test={ds['n_test']} (+{ds['test_pos']}/-{ds['test_neg']})"
        )
        lines.append(f"features: {', '.join(ds['feature_names'])}")
        lines.append(f"input digest: {ds['digest']}")
        for r in self.results:
            if r.note:
                lines.append(f"note {r.name}: {r.note}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "rows": [
                {
                    "name": r.name,
                    "type": r.tag,
                    "accuracy": r.accuracy,
                    "execution": r.execution,
                    "kernel": r.kernel,
                    "note": r.note,
                    "detail": r.detail,
                }
                for r in self.results
            ],
            "dataset": self.dataset,
            "config": self.config_echo,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _stage(name: str):
    class _StageContext:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, (ValueError, OSError)):
                raise ValueError(f"stage {name}: {exc}") from exc
            if exc is not None and isinstance(exc, InternalConsistencyError):
                raise InternalConsistencyError(f"stage {name}: {exc}") from exc
            return False

    return _StageContext()


def _activity_values(rows) -> np.ndarray:
    values = np.empty(len(rows))
    for i, row in enumerate(rows):
        if row.pec50 is not None:
            values[i] = row.pec50
        elif row.ec50_nM is not None:
            values[i] = pec50(row.ec50_nM)
        else:
            raise ValueError(
                f"{row.compound_id}: activity-target regression needs pEC50 or EC50"
            )
    return values


def prepare_features(config: ExperimentConfig):
    """Shared preprocessing: ingest, filter, label, scale, reduce.

    Returns (X_train, X_test, y_train, y_test, info) with all fit steps
    performed on the training split only.
    """
    with _stage("ingest"):
        rows = read_descriptor_csv(config.input)
    if config.lipinski_filter:
        with _stage("filter"):
            rows = apply_lipinski_filter(rows)
            if len(rows) < 2:
                raise ValueError("fewer than two rows survive the rule-of-five filter")
    with _stage("labels"):
        labels = resolve_labels(rows, config.activity_cutoff)
    with _stage("features"):
        X, names = feature_matrix(rows)
    with _stage("split"):
        train_idx, test_idx = split_indices(len(rows), config.split, config.seed)
        y_train, y_test = labels[train_idx], labels[test_idx]
        if np.all(y_train == y_train[0]):
            raise ValueError("training split contains a single class; change the seed")
    X_train, X_test = X[train_idx], X[test_idx]
    with _stage("scale"):
        if config.scaler:
            scaler = minmax_fit(X_train)
            X_train = minmax_transform(scaler, X_train)
            X_test = minmax_transform(scaler, X_test)
    with _stage("reduce"):
        if config.pca_k is not None:
            pca = pca_fit(X_train, config.pca_k)
            X_train = pca_transform(pca, X_train)
            X_test = pca_transform(pca, X_test)
            names = [f"pc{i + 1}" for i in range(config.pca_k)]
            if config.scaler:  # bring reduced coordinates back into [0, 1]
                rescaler = minmax_fit(X_train)
                X_train = minmax_transform(rescaler, X_train)
                X_test = minmax_transform(rescaler, X_test)
    info = {
        "rows": rows,
        "names": names,
        "train_idx": train_idx,
        "test_idx": test_idx,
        "digest": dataset_digest(X),
    }
    return X_train, X_test, y_train, y_test, info


def _run_svm_row(entry, X_train, X_test, y_train, y_test):
    kcfg = resolve_kernel_config(entry.kernel, X_train.shape[1])
    svm_cfg = SvmConfig(
        C=entry.C, tol=entry.tol, eps=entry.eps,
        max_passes=entry.max_passes, max_iters=entry.max_iters,
    )
    gm = gram(kcfg, X_train, jitter=entry.jitter)
    model = train(gm, y_train, svm_cfg, features=X_train)
    preds = np.array(
        [1 if decision_value(model, x) >= 0.0 else -1 for x in X_test],
        dtype=np.int64,
    )
    acc = accuracy(preds, y_test)
    execution = EXEC_SHOTS if kcfg.kind == QUANTUM_SHOTS else EXEC_CPU
    detail = {
        "C": entry.C,
        "converged": model.converged,
        "n_support": int(model.support_indices.size),
        "kernel_config": kcfg.to_dict(),
    }
    return acc, execution, kcfg.describe(), detail


def _run_reg_row(entry, rows, train_idx, test_idx,
                 X_train, X_test, y_train, y_test, cutoff):
    basis = BasisSpec(kind=entry.basis, n_features=X_train.shape[1])
    if entry.target == "activity":
        activities = _activity_values(rows)
        targets = activities[train_idx]
        if cutoff is None:
            raise ValueError(
                f"model {entry.name!r}: activity target needs activity_cutoff"
            )
        threshold = float(cutoff)
    else:
        targets = y_train.astype(np.float64)
        threshold = 0.0
    if entry.kind == REG_LS:
        model = fit_least_squares(X_train, targets, basis, ridge=entry.ridge,
                                  threshold=threshold)
    else:
        schedule = AnnealSchedule(t0=entry.t0, cooling=entry.cooling,
                                  n_iters=entry.iterations)
        model = fit_annealing(X_train, targets, basis, schedule,
                              seed=entry.anneal_seed, ridge=entry.ridge,
                              threshold=threshold)
    preds = predict_labels(model, X_test)
    acc = accuracy(preds, y_test)
    detail = {
        "basis": entry.basis,
        "target": entry.target,
        "ridge": entry.ridge,
        "train_loss": model.loss,
    }
    if entry.kind == REG_ANNEAL:
        detail.update(t0=entry.t0, cooling=entry.cooling,
                      iterations=entry.iterations, anneal_seed=entry.anneal_seed)
    return acc, EXEC_CPU, "-", detail


def run_experiment(config: ExperimentConfig) -> EvalReport:
    """Execute every configured model row and assemble the report."""
    X_train, X_test, y_train, y_test, info = prepare_features(config)
    rows, train_idx, test_idx = info["rows"], info["train_idx"], info["test_idx"]

    results = []
    for entry in config.models:
        with _stage(f"model {entry.name}"):
            if entry.kind == SVM:
                acc, execution, kdesc, detail = _run_svm_row(
                    entry, X_train, X_test, y_train, y_test
                )
            else:
                acc, execution, kdesc, detail = _run_reg_row(
                    entry, rows, train_idx, test_idx,
                    X_train, X_test, y_train, y_test, config.activity_cutoff,
                )
        results.append(ModelResult(
            name=entry.name, tag=entry.tag, accuracy=acc,
            execution=execution, kernel=kdesc, note=entry.note, detail=detail,
        ))

    dataset = {
        "n_rows": len(rows),
        "n_train": int(train_idx.size),
        "n_test": int(test_idx.size),
        "train_pos": int(np.sum(y_train == 1)),
        "train_neg": int(np.sum(y_train == -1)),
        "test_pos": int(np.sum(y_test == 1)),
        "test_neg": int(np.sum(y_test == -1)),
        "feature_names": list(info["names"]),
        "digest": info["digest"],
    }
    config_echo = {
        "input": config.input,
        "seed": config.seed,
        "split": config.split,
        "lipinski_filter": config.lipinski_filter,
        "activity_cutoff": config.activity_cutoff,
        "pca_k": config.pca_k,
        "scaler": config.scaler,
        "models": [
            {k: v for k, v in vars(entry).items() if v is not None}
            for entry in config.models
        ],
    }
    return EvalReport(results=results, dataset=dataset, config_echo=config_echo)
