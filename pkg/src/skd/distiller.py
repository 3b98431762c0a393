"""Losses and training: pretraining, joint fine-tuning, transfer, grad check.

The joint objective sums a softmax cross-entropy classification term over all
records and a squared-Euclidean feature-regression term that pulls the mimic
tap toward the teacher feature for selected records only:

    L = sum_i sum_j ce(logits(x_ij), l_i)
      + sum_i alpha_i sum_j reg_scale * || mimic(x_ij) - f_i ||^2

Supervision signals: "c" classification only, "s" regression only, "sc" both
with the selection mask, "dc" both with every record selected. Both terms
carry unit weight by default (``reg_scale`` exists as an override).

Training is plain mini-batch SGD with a seed-derived shuffle; everything here
is deterministic given (config, seed, data).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import StudentSet
from .metric import MEASURES
from .selgraph import SelectionMask
from .student import (
    StudentArch,
    StudentModel,
    activation_derivative,
    forward_trace,
    init_layers,
)

__all__ = [
    "SUPERVISION_MODES",
    "TrainConfig",
    "TrainingDiverged",
    "classification_loss",
    "regression_loss",
    "total_loss",
    "pretrain_student",
    "finetune",
    "gradient_check",
    "transfer_student",
]

SUPERVISION_MODES = ("c", "s", "sc", "dc")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class TrainConfig:
    """Hyperparameters for pretraining and fine-tuning."""

    supervision: str = "sc"
    selection_lambda: float = -1.0
    learning_rate: float = 0.01
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0
    measure: str = "cossim"
    reg_scale: float = 1.0
    normalize_targets: bool = False

    def __post_init__(self):
        if self.supervision not in SUPERVISION_MODES:
            raise ValueError(
                f"unknown supervision {self.supervision!r}; expected one of {SUPERVISION_MODES}"
            )
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.selection_lambda > 0:
            raise ValueError("selection_lambda must be nonpositive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size >= 1 and epochs >= 0 required")
        if self.reg_scale < 0:
            raise ValueError("reg_scale must be nonnegative")


def _check_model_set(model: StudentModel, sset: StudentSet, need_classes: bool = True) -> None:
    if model.arch.input_dim != sset.d_in:
        raise ValueError(
            f"model input dim {model.arch.input_dim} != set input dim {sset.d_in}"
        )
    if model.arch.mimic_dim != sset.D:
        raise ValueError(
            f"model mimic dim {model.arch.mimic_dim} != teacher feature dim {sset.D}"
        )
    if need_classes and model.arch.class_count < sset.C:
        raise ValueError(
            f"model has {model.arch.class_count} classes, set labels reach {sset.C}"
        )


@dataclass
class _Stacked:
    """All (record, version) samples flattened into arrays."""

    X: np.ndarray        # (n*N, d_in)
    y: np.ndarray        # (n*N,) labels 1..C
    F: np.ndarray        # (n*N, D) regression targets
    record_of: np.ndarray  # (n*N,) record position per row
    n_records: int


def _stack(sset: StudentSet, normalize_targets: bool = False) -> _Stacked:
    X = np.concatenate([np.stack(r.degraded_inputs) for r in sset.records]).astype(np.float64)
    y = np.repeat(sset.labels(), sset.N)
    F = np.repeat(sset.feature_matrix(), sset.N, axis=0)
    if normalize_targets:
        norms = np.linalg.norm(F, axis=1, keepdims=True)
        F = F / np.maximum(norms, 1e-300)
    record_of = np.repeat(np.arange(len(sset)), sset.N)
    return _Stacked(X=X, y=y, F=F, record_of=record_of, n_records=len(sset))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=1, keepdims=True))
    return z / z.sum(axis=1, keepdims=True)


def _mask_vector(mask: SelectionMask | None, supervision: str, n_records: int) -> np.ndarray:
    """Per-record regression weights implied by the supervision signal."""
    if supervision == "c":
        return np.zeros(n_records)
    if supervision == "dc":
        return np.ones(n_records)
    if mask is None:
        raise ValueError(f"supervision {supervision!r} requires a selection mask")
    if len(mask) != n_records:
        raise ValueError(f"mask length {len(mask)} != {n_records} records")
    return mask.alpha.astype(np.float64)


def _loss_and_grads(
    model: StudentModel,
    X: np.ndarray,
    y: np.ndarray,
    F: np.ndarray,
    alpha_rows: np.ndarray,
    use_cls: bool,
    use_reg: bool,
    reg_scale: float,
) -> tuple[float, float, list[tuple[np.ndarray, np.ndarray]]]:
    """Sum losses and parameter gradients over one batch of samples."""
    acts, pres = forward_trace(model, X)
    logits = acts[-1]
    mimic = acts[model.mimic_index + 1]
    n_layers = len(model.layers)

    cls = 0.0
    d_logits = np.zeros_like(logits)
    if use_cls:
        logp = _log_softmax(logits)
        rows = np.arange(len(y))
        cls = float(-logp[rows, y - 1].sum())
        d_logits = _softmax(logits)
        d_logits[rows, y - 1] -= 1.0

    reg = 0.0
    d_mimic = np.zeros_like(mimic)
    if use_reg:
        diff = (mimic - F) * alpha_rows[:, None]
        reg = float(reg_scale * np.einsum("ij,ij->", diff, mimic - F))
        d_mimic = 2.0 * reg_scale * diff

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * n_layers  # type: ignore[list-item]
    delta = d_logits
    for l in range(n_layers - 1, -1, -1):
        if l == model.mimic_index:
            delta = delta + d_mimic
        layer = model.layers[l]
        dpre = delta * activation_derivative(layer.activation, pres[l], acts[l + 1])
        grads[l] = (dpre.T @ acts[l], dpre.sum(axis=0))
        if l > 0:
            delta = dpre @ layer.W
    return cls, reg, grads


def classification_loss(model: StudentModel, sset: StudentSet) -> float:
    """Softmax cross-entropy summed over every record and degraded version."""
    _check_model_set(model, sset)
    st = _stack(sset)
    acts, _ = forward_trace(model, st.X)
    logp = _log_softmax(acts[-1])
    return float(-logp[np.arange(len(st.y)), st.y - 1].sum())


def regression_loss(
    model: StudentModel,
    sset: StudentSet,
    mask: SelectionMask,
    reg_scale: float = 1.0,
    normalize_targets: bool = False,
) -> float:
    """Squared mimic-to-teacher error summed over selected records only."""
    _check_model_set(model, sset, need_classes=False)
    if len(mask) != len(sset):
        raise ValueError(f"mask length {len(mask)} != {len(sset)} records")
    st = _stack(sset, normalize_targets)
    acts, _ = forward_trace(model, st.X)
    mimic = acts[model.mimic_index + 1]
    diff = mimic - st.F
    weights = mask.alpha.astype(np.float64)[st.record_of]
    return float(reg_scale * np.einsum("ij,ij->", diff * weights[:, None], diff))


def total_loss(
    model: StudentModel,
    sset: StudentSet,
    mask: SelectionMask | None,
    supervision: str,
    reg_scale: float = 1.0,
    normalize_targets: bool = False,
) -> float:
    """Supervised objective value for one of the c/s/sc/dc signals."""
    if supervision not in SUPERVISION_MODES:
        raise ValueError(f"unknown supervision {supervision!r}")
    weights = _mask_vector(mask, supervision, len(sset))
    total = 0.0
    if supervision in ("c", "sc", "dc"):
        total += classification_loss(model, sset)
    if supervision in ("s", "sc", "dc"):
        total += regression_loss(
            model, sset, SelectionMask(weights.astype(np.int8)), reg_scale, normalize_targets
        )
    return total


def _sgd_step(model: StudentModel, grads, lr: float) -> None:
    for layer, (dW, db) in zip(model.layers, grads):
        if layer.trainable:
            layer.W -= lr * dW
            layer.b -= lr * db


def _emit_metrics(handle, epoch: int, cls: float, reg: float, total: float) -> None:
    if handle is not None:
        handle.write(
            json.dumps({"epoch": epoch, "cls": cls, "reg": reg, "total": total}) + "\n"
        )


def _train(
    model: StudentModel,
    sset: StudentSet,
    alpha: np.ndarray,
    config: TrainConfig,
    use_cls: bool,
    use_reg: bool,
    metrics_path: str | Path | None,
) -> StudentModel:
    _check_model_set(model, sset)
    model = model.copy()
    st = _stack(sset, config.normalize_targets and use_reg)
    rng = np.random.default_rng(config.seed)
    n = st.n_records
    per_record = [np.flatnonzero(st.record_of == i) for i in range(n)]

    handle = open(metrics_path, "w", encoding="ascii") if metrics_path is not None else None
    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n)
            for start in range(0, n, config.batch_size):
                recs = order[start : start + config.batch_size]
                rows = np.concatenate([per_record[i] for i in recs])
                # overflow surfaces as a non-finite loss, handled below
                with np.errstate(over="ignore", invalid="ignore"):
                    cls, reg, grads = _loss_and_grads(
                        model,
                        st.X[rows],
                        st.y[rows],
                        st.F[rows],
                        alpha[st.record_of[rows]],
                        use_cls,
                        use_reg,
                        config.reg_scale,
                    )
                batch_loss = cls + reg
                if not np.isfinite(batch_loss):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch} "
                        "(learning rate too high for this data?)"
                    )
                _sgd_step(model, grads, config.learning_rate)
            # Epoch log: full-set component values at the current parameters.
            with np.errstate(over="ignore", invalid="ignore"):
                acts, _ = forward_trace(model, st.X)
                logp = _log_softmax(acts[-1])
                cls_full = float(-logp[np.arange(len(st.y)), st.y - 1].sum())
                diff = acts[model.mimic_index + 1] - st.F
                w_rows = alpha[st.record_of]
                reg_full = float(
                    config.reg_scale * np.einsum("ij,ij->", diff * w_rows[:, None], diff)
                )
            total = cls_full * use_cls + reg_full * use_reg
            if not np.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} (learning rate too high for this data?)"
                )
            _emit_metrics(handle, epoch, cls_full, reg_full, total)
    finally:
        if handle is not None:
            handle.close()
    return model


def pretrain_student(
    model: StudentModel,
    sset: StudentSet,
    config: TrainConfig,
    metrics_path: str | Path | None = None,
) -> StudentModel:
    """Classification-only initialization over all records; returns a new model."""
    return _train(
        model, sset, np.zeros(len(sset)), config,
        use_cls=True, use_reg=False, metrics_path=metrics_path,
    )


def finetune(
    model: StudentModel,
    sset: StudentSet,
    mask: SelectionMask | None,
    config: TrainConfig,
    metrics_path: str | Path | None = None,
) -> StudentModel:
    """Joint fine-tuning under ``config.supervision``; returns a new model.

    ``mask`` is required for "s" and "sc", ignored for "c" and "dc".
    """
    alpha = _mask_vector(mask, config.supervision, len(sset))
    use_cls = config.supervision in ("c", "sc", "dc")
    use_reg = config.supervision in ("s", "sc", "dc")
    return _train(model, sset, alpha, config, use_cls, use_reg, metrics_path)


def transfer_student(
    model: StudentModel, new_class_count: int, seed: int | None = None
) -> StudentModel:
    """Freeze trunk and mimic layers; reinitialize identity layer and head.

    The returned model classifies ``new_class_count`` classes; subsequent
    training updates only the identity layer and the fresh head.
    """
    if new_class_count < 2:
        raise ValueError("new_class_count must be >= 2")
    seed = model.seed + 1 if seed is None else seed
    new_arch = StudentArch(
        input_dim=model.arch.input_dim,
        mimic_dim=model.arch.mimic_dim,
        class_count=new_class_count,
        trunk=model.arch.trunk,
        identity_dim=model.arch.identity_dim,
        hidden_activation=model.arch.hidden_activation,
        mimic_activation=model.arch.mimic_activation,
    )
    new_arch.validate()
    rng = np.random.default_rng(seed)
    fresh = {l.name: l for l in init_layers(new_arch, rng, names={"identity", "head"})}
    layers = []
    for layer in model.layers:
        if layer.name in fresh:
            layers.append(fresh[layer.name])
        else:
            frozen = layer.copy()
            frozen.trainable = False
            layers.append(frozen)
    return StudentModel(arch=new_arch, layers=layers, seed=seed)


def gradient_check(
    model: StudentModel,
    sset: StudentSet,
    mask: SelectionMask | None,
    supervision: str,
    epsilon: float = 1e-5,
    max_coords: int = 60,
    seed: int = 0,
    reg_scale: float = 1.0,
) -> float:
    """Max relative error of analytic vs central finite-difference gradients.

    Coordinates whose +/- epsilon perturbation flips a rectifier's active set
    are excluded: the loss has a kink inside the difference window there and
    central differences do not estimate the derivative. Relative error falls
    back to the absolute difference when both gradients are ~0.
    """
    if supervision not in SUPERVISION_MODES:
        raise ValueError(f"unknown supervision {supervision!r}")
    if model.parameter_count() > 10_000:
        raise ValueError("gradient_check is for small models (<= 10^4 parameters)")
    _check_model_set(model, sset)
    alpha = _mask_vector(mask, supervision, len(sset))
    use_cls = supervision in ("c", "sc", "dc")
    use_reg = supervision in ("s", "sc", "dc")
    st = _stack(sset)
    alpha_rows = alpha[st.record_of]

    def loss_and_pattern(m: StudentModel) -> tuple[float, tuple]:
        acts, pres = forward_trace(m, st.X)
        pattern = tuple(
            (pres[k] > 0.0).tobytes()
            for k, layer in enumerate(m.layers)
            if layer.activation == "relu"
        )
        total = 0.0
        if use_cls:
            logp = _log_softmax(acts[-1])
            total += float(-logp[np.arange(len(st.y)), st.y - 1].sum())
        if use_reg:
            diff = acts[m.mimic_index + 1] - st.F
            total += float(reg_scale * np.einsum("ij,ij->", diff * alpha_rows[:, None], diff))
        return total, pattern

    _, _, grads = _loss_and_grads(
        model, st.X, st.y, st.F, alpha_rows, use_cls, use_reg, reg_scale
    )

    coords = []
    for li, layer in enumerate(model.layers):
        coords.extend((li, "W", k) for k in range(layer.W.size))
        coords.extend((li, "b", k) for k in range(layer.b.size))
    rng = np.random.default_rng(seed)
    picks = rng.permutation(len(coords))

    work = model.copy()
    max_err = 0.0
    checked = 0
    for p in picks:
        if checked >= max_coords:
            break
        li, kind, k = coords[p]
        param = work.layers[li].W if kind == "W" else work.layers[li].b
        flat = param.reshape(-1)
        base = flat[k]

        flat[k] = base + epsilon
        up, pat_up = loss_and_pattern(work)
        flat[k] = base - epsilon
        dn, pat_dn = loss_and_pattern(work)
        flat[k] = base
        if pat_up != pat_dn:
            continue  # kink inside the window
        numeric = (up - dn) / (2.0 * epsilon)
        g = grads[li][0] if kind == "W" else grads[li][1]
        analytic = float(g.reshape(-1)[k])
        denom = max(abs(analytic), abs(numeric))
        err = abs(analytic - numeric) if denom < 1e-12 else abs(analytic - numeric) / denom
        max_err = max(max_err, err)
        checked += 1
    if checked == 0:
        raise RuntimeError("no valid coordinates to check (all perturbations crossed kinks)")
    return max_err
