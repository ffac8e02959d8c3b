"""
Training Harness
================
Adam + binary cross-entropy training with global-norm gradient clipping and
validation-loss early stopping, thresholded evaluation, and a central
finite-difference gradient checker for both classifiers.

Usage:
    from training import TrainConfig, train, evaluate

    model, history = train(model, train_set, val_set, TrainConfig(max_epochs=20))
    report = evaluate(model, test_set)
"""

import copy
import json
import logging
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
from tabulate import tabulate
from torch import nn
from torch.utils.data import DataLoader
from tqdm import tqdm

from vuln_models import GraphVulnModel, Model, model_inputs, probability

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZES = {'sequential': 32, 'graph': 8}


class TrainingError(Exception):
    """Base exception for training errors"""
    pass


class NonFiniteLoss(TrainingError):
    """Loss became NaN or infinite"""
    pass


@dataclass
class TrainConfig:
    """Optimization regimen"""
    learning_rate: float = 5e-5
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    batch_size: Optional[int] = None   # None -> 32 sequential / 8 graph
    patience: int = 3
    min_delta: float = 0.0
    threshold: float = 0.5
    max_epochs: int = 50
    seed: int = 0
    show_progress: bool = True

    def batch_size_for(self, kind: str) -> int:
        return self.batch_size or DEFAULT_BATCH_SIZES[kind]

    def validate(self):
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"Adam betas must be in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.adam_eps <= 0 or self.clip_norm <= 0:
            raise ValueError("adam_eps and clip_norm must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.min_delta < 0:
            raise ValueError(f"min_delta must be >= 0, got {self.min_delta}")
        if not 0 < self.threshold < 1:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'TrainConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Unknown TrainConfig keys: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config


@dataclass
class MetricsReport:
    """Thresholded binary classification metrics"""
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    loss: Optional[float] = None
    history: List[Dict] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    train_accuracy: float
    max_grad_norm: float
    improved: bool = False


@dataclass
class TrainHistory:
    """Per-epoch losses plus the early-stopping outcome"""
    epochs: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float('inf')
    stopped_early: bool = False

    def to_dict(self) -> Dict:
        return {
            'epochs': [asdict(e) for e in self.epochs],
            'best_epoch': self.best_epoch,
            'best_val_loss': self.best_val_loss,
            'stopped_early': self.stopped_early,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(e) for e in self.epochs])

    def save(self, path: Union[str, Path]):
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)
        logger.info(f"Saved training history to {path}")


class EarlyStopping:
    """
    Stop once validation loss fails to improve by more than min_delta for
    `patience` consecutive epochs; remembers the best state seen.
    """

    def __init__(self, patience: int = 3, min_delta: float = 0.0):
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.min_delta = min_delta
        self.best_loss = float('inf')
        self.best_epoch = 0
        self.best_state: Optional[Dict] = None
        self.bad_epochs = 0
        self.epoch = 0

    def step(self, val_loss: float, state: Optional[Dict] = None) -> bool:
        """Record one epoch; returns True when training should stop"""
        self.epoch += 1
        if val_loss < self.best_loss - self.min_delta:
            self.best_loss = val_loss
            self.best_epoch = self.epoch
            self.best_state = copy.deepcopy(state) if state is not None else None
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        return self.bad_epochs >= self.patience

    @property
    def improved(self) -> bool:
        return self.bad_epochs == 0


def seed_everything(seed: int):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def compute_metrics(labels: Sequence[int], probabilities: Sequence[float],
                    threshold: float = 0.5) -> MetricsReport:
    """
    Accuracy / precision / recall / F1 from probabilities

    A probability >= threshold predicts vulnerable. Precision, recall and F1
    are 0 when their denominators are 0.
    """
    labels = np.asarray(labels, dtype=np.int64).ravel()
    predicted = (np.asarray(probabilities, dtype=np.float64).ravel() >= threshold).astype(np.int64)
    if labels.shape != predicted.shape:
        raise ValueError(f"{labels.size} labels but {predicted.size} predictions")

    tp = int(np.sum((predicted == 1) & (labels == 1)))
    fp = int(np.sum((predicted == 1) & (labels == 0)))
    fn = int(np.sum((predicted == 0) & (labels == 1)))
    tn = int(np.sum((predicted == 0) & (labels == 0)))
    total = tp + fp + fn + tn

    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0

    return MetricsReport(
        accuracy=(tp + tn) / total if total else 0.0,
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tp, fp=fp, fn=fn, tn=tn,
    )


def _kind(model: Model) -> str:
    return 'graph' if isinstance(model, GraphVulnModel) else 'sequential'


def _move(batch_inputs, device: torch.device):
    if isinstance(batch_inputs, (list, tuple)):
        return type(batch_inputs)(t.to(device) for t in batch_inputs)
    return batch_inputs.to(device)


def global_grad_norm(parameters) -> float:
    grads = [p.grad.detach().flatten() for p in parameters if p.grad is not None]
    if not grads:
        return 0.0
    return float(torch.linalg.vector_norm(torch.cat(grads)))


@torch.no_grad()
def predict(model: Model, dataset, batch_size: int = 32) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Inference-mode pass over a dataset

    Returns:
        (labels, probabilities, mean BCE loss)
    """
    model.eval()
    device = next(model.parameters()).device
    dtype = next(model.parameters()).dtype
    loss_fn = nn.BCEWithLogitsLoss(reduction='sum')
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False)

    labels, probs = [], []
    total_loss = 0.0
    for batch_inputs, targets in loader:
        logits = model(*model_inputs(model, _move(batch_inputs, device)))
        targets = targets.to(device=device, dtype=dtype)
        total_loss += float(loss_fn(logits, targets))
        labels.append(targets.cpu().numpy())
        probs.append(probability(logits).cpu().numpy())

    if not labels:
        return np.zeros(0, np.int64), np.zeros(0), 0.0
    labels = np.concatenate(labels).astype(np.int64)
    return labels, np.concatenate(probs), total_loss / len(labels)


def train(model: Model, train_set, val_set, config: TrainConfig) -> Tuple[Model, TrainHistory]:
    """
    Fit a classifier

    Args:
        model: SequentialVulnModel or GraphVulnModel
        train_set: Dataset of (inputs, label) items
        val_set: Disjoint validation Dataset
        config: TrainConfig

    Returns:
        (model restored to its best-validation-loss state, TrainHistory)

    Raises:
        NonFiniteLoss: A training batch produced a NaN/inf loss
    """
    config.validate()
    kind = _kind(model)
    batch_size = config.batch_size_for(kind)
    device = next(model.parameters()).device
    dtype = next(model.parameters()).dtype

    generator = torch.Generator()
    generator.manual_seed(config.seed)
    loader = DataLoader(train_set, batch_size=batch_size, shuffle=True, generator=generator)

    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )
    loss_fn = nn.BCEWithLogitsLoss()
    stopper = EarlyStopping(config.patience, config.min_delta)
    history = TrainHistory()

    logger.info(
        f"Training {kind} model: {len(train_set)} train / {len(val_set)} val samples, "
        f"batch {batch_size}, lr {config.learning_rate}, up to {config.max_epochs} epochs"
    )

    epochs = tqdm(range(1, config.max_epochs + 1), desc=f"train[{kind}]",
                  unit='epoch', disable=not config.show_progress)
    for epoch in epochs:
        model.train()
        epoch_loss = 0.0
        correct = 0
        seen = 0
        max_norm = 0.0

        for step, (batch_inputs, targets) in enumerate(loader):
            targets = targets.to(device=device, dtype=dtype)
            logits = model(*model_inputs(model, _move(batch_inputs, device)))
            loss = loss_fn(logits, targets)
            if not torch.isfinite(loss):
                logger.error(f"Non-finite loss at epoch {epoch}, batch {step}: {loss.item()}")
                raise NonFiniteLoss(f"Loss became {loss.item()} at epoch {epoch}, batch {step}")

            optimizer.zero_grad()
            loss.backward()
            norm = torch.nn.utils.clip_grad_norm_(model.parameters(), config.clip_norm)
            max_norm = max(max_norm, float(norm))
            optimizer.step()

            epoch_loss += float(loss) * len(targets)
            correct += int(((logits.detach() >= 0) == (targets >= 0.5)).sum())
            seen += len(targets)

        _, _, val_loss = predict(model, val_set, batch_size)
        should_stop = stopper.step(val_loss, model.state_dict())
        record = EpochRecord(
            epoch=epoch,
            train_loss=epoch_loss / max(seen, 1),
            val_loss=val_loss,
            train_accuracy=correct / max(seen, 1),
            max_grad_norm=max_norm,
            improved=stopper.improved,
        )
        history.epochs.append(record)
        epochs.set_postfix(loss=f"{record.train_loss:.4f}", val=f"{val_loss:.4f}")
        logger.debug(
            f"Epoch {epoch}: train_loss={record.train_loss:.5f} val_loss={val_loss:.5f} "
            f"train_acc={record.train_accuracy:.3f} grad_norm={max_norm:.3f}"
        )

        if should_stop:
            history.stopped_early = True
            logger.info(f"Early stopping after epoch {epoch} (best epoch {stopper.best_epoch})")
            break

    history.best_epoch = stopper.best_epoch
    history.best_val_loss = stopper.best_loss
    if stopper.best_state is not None:
        model.load_state_dict(stopper.best_state)
    model.eval()
    return model, history


def evaluate(model: Model, dataset, threshold: float = 0.5, batch_size: int = 32) -> MetricsReport:
    """Thresholded metrics on a held-out dataset"""
    labels, probs, loss = predict(model, dataset, batch_size)
    report = compute_metrics(labels, probs, threshold)
    report.loss = loss
    logger.info(
        f"Evaluated {report.total} samples: accuracy={report.accuracy:.4f} "
        f"precision={report.precision:.4f} recall={report.recall:.4f} f1={report.f1:.4f}"
    )
    return report


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckResult:
    max_rel_error: float
    per_parameter: Dict[str, float]
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor) elementwise"""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def grad_check(model: Model, inputs: Tuple[torch.Tensor, ...], label: float,
               tolerance: float = 1e-4, eps: float = 1e-6,
               mutate_largest_by: Optional[float] = None) -> GradCheckResult:
    """
    Compare autograd gradients of the BCE loss with central differences

    The model is switched to float64 and eval mode (dropout off, batch-norm on
    running statistics). Every element of every parameter is perturbed.

    Args:
        model: Model under test (modified in place to float64)
        inputs: Positional forward() arguments for a batch of one
        label: Target label
        tolerance: Pass threshold on max relative error
        eps: Finite-difference step
        mutate_largest_by: Scale the largest analytic gradient entry by
            (1 + value) before comparing, to confirm errors are detected
    """
    model.double().eval()
    inputs = tuple(t.double() if t.is_floating_point() else t for t in inputs)
    target = torch.tensor([float(label)], dtype=torch.float64)
    loss_fn = nn.BCEWithLogitsLoss()

    def loss_value() -> float:
        with torch.no_grad():
            return float(loss_fn(model(*inputs), target))

    model.zero_grad()
    loss_fn(model(*inputs), target).backward()
    named = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
    analytic = {
        name: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)).numpy()
        for name, p in named
    }

    if mutate_largest_by is not None:
        largest = max(analytic, key=lambda n: np.abs(analytic[n]).max())
        flat = analytic[largest].reshape(-1)
        flat[np.abs(flat).argmax()] *= 1.0 + mutate_largest_by

    per_parameter = {}
    checked = 0
    for name, param in named:
        numeric = np.zeros(param.numel())
        flat = param.data.view(-1)
        for i in range(flat.numel()):
            original = float(flat[i])
            flat[i] = original + eps
            plus = loss_value()
            flat[i] = original - eps
            minus = loss_value()
            flat[i] = original
            numeric[i] = (plus - minus) / (2 * eps)
        per_parameter[name] = float(relative_error(analytic[name].reshape(-1), numeric).max())
        checked += flat.numel()

    worst = max(per_parameter.values()) if per_parameter else 0.0
    logger.info(f"Gradient check over {checked} weights: max relative error {worst:.3e}")
    return GradCheckResult(max_rel_error=worst, per_parameter=per_parameter,
                           checked=checked, tolerance=tolerance)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def format_results_table(results: Mapping[str, Mapping[str, MetricsReport]]) -> str:
    """
    Results grid: one Accuracy and one F1-Score row per model variant,
    one column per vulnerability class.

    Args:
        results: {variant: {vuln_class: MetricsReport}}
    """
    classes: List[str] = []
    for per_class in results.values():
        for name in per_class:
            if name not in classes:
                classes.append(name)

    rows = []
    for variant, per_class in results.items():
        for metric, attr in (('Accuracy', 'accuracy'), ('F1-Score', 'f1')):
            row = [variant, metric]
            for name in classes:
                report = per_class.get(name)
                row.append(f"{getattr(report, attr):.4f}" if report else '-')
            rows.append(row)

    return tabulate(rows, headers=['Model', 'Metric'] + classes, tablefmt='grid')
