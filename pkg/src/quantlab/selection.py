"""Quantification-oriented grid search.

Hyperparameters are scored on many validation *samples* spanning the full
prevalence grid, not on individual documents: the sample set is generated
once per search and reused for every configuration, so mean-loss comparisons
between configurations are paired.  The winner is the configuration
optimizing the mean loss, ties broken toward the lowest grid index.

Selection losses: ae and rae are quantification errors averaged over samples;
accuracy and f1 are classification scores of the underlying classifier over
the pooled validation documents (f1 with respect to the minority class of the
training part).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .learners import LearnerConfig, make_learner
from .prevalence import (
    NEGATIVE,
    POSITIVE,
    absolute_error,
    check_binary_labels,
    prevalence_from_labels,
    relative_absolute_error,
)
from .quantifiers import POSTERIOR_METHODS, make_quantifier
from .sampling import ProtocolPlan, SampleIndex, protocol_samples

C_EXPONENTS = tuple(range(-4, 6))
C_GRID: tuple[float, ...] = tuple(10.0 ** i for i in C_EXPONENTS)
ALPHA_GRID: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass(frozen=True)
class ParamGrid:
    kind: str
    configs: tuple[LearnerConfig, ...]

    def __post_init__(self) -> None:
        if not self.configs:
            raise ValueError("parameter grid is empty")
        if any(c.kind != self.kind for c in self.configs):
            raise ValueError("all configs in a grid must share the learner kind")


def grid_for(kind: str) -> ParamGrid:
    """The standard search grid for a learner kind.

    lr/lsvm: C in {1e-4..1e5} crossed with balanced in {False, True} (20
    configs); mnb: alpha in {0, 0.05, ..., 1} (21 configs).
    """
    if kind in ("lr", "lsvm"):
        configs = tuple(
            LearnerConfig(kind, C=c, balanced=b) for c in C_GRID for b in (False, True)
        )
        return ParamGrid(kind, configs)
    if kind == "mnb":
        return ParamGrid(kind, tuple(LearnerConfig("mnb", alpha=a) for a in ALPHA_GRID))
    raise ValueError(f"unknown learner kind {kind!r}")


class SelectionLoss(str, Enum):
    AE = "ae"
    RAE = "rae"
    ACCURACY = "accuracy"
    F1 = "f1"

    @property
    def direction(self) -> str:
        return "minimize" if self in (SelectionLoss.AE, SelectionLoss.RAE) else "maximize"


def _f1_minority(predictions: np.ndarray, labels: np.ndarray, minority: int) -> float:
    pred_m = predictions == minority
    true_m = labels == minority
    tp = int(np.count_nonzero(pred_m & true_m))
    fp = int(np.count_nonzero(pred_m & ~true_m))
    fn = int(np.count_nonzero(~pred_m & true_m))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def _evaluate_with_trace(
    model,
    X,
    y,
    samples: list[tuple[float, list[SampleIndex]]],
    loss: SelectionLoss,
    minority_positive: bool | None,
) -> tuple[float, tuple[float, ...]]:
    y = check_binary_labels(y)
    if loss in (SelectionLoss.AE, SelectionLoss.RAE):
        if not samples:
            raise ValueError("no validation samples to evaluate on")
        per_sample = []
        for _, sample_list in samples:
            for sample in sample_list:
                estimate = model.quantify(X[sample.indices])
                truth = prevalence_from_labels(y[sample.indices])
                if loss is SelectionLoss.AE:
                    per_sample.append(absolute_error(truth, estimate))
                else:
                    per_sample.append(relative_absolute_error(truth, estimate, len(sample)))
        return float(np.mean(per_sample)), tuple(per_sample)

    classifier = getattr(model, "classifier_", None)
    if classifier is None:
        raise ValueError(f"loss {loss.value} needs an underlying classifier")
    predictions = np.asarray(classifier.predict(X))
    if loss is SelectionLoss.ACCURACY:
        score = float(np.mean(predictions == y))
    else:
        if minority_positive is None:
            raise ValueError("f1 selection needs the training minority class")
        minority = POSITIVE if minority_positive else NEGATIVE
        score = _f1_minority(predictions, y, minority)
    return score, (score,)


def evaluate_on_samples(
    model,
    X,
    y,
    samples: list[tuple[float, list[SampleIndex]]],
    loss: SelectionLoss,
    *,
    minority_positive: bool | None = None,
) -> float:
    """Mean loss of a fitted quantifier over protocol samples from pool (X, y).

    For ae/rae the model quantifies every sample and is scored against the
    sample's true prevalence (rae smoothing uses the sample's own size).  For
    accuracy/f1 the underlying classifier is scored once on the whole pool.
    """
    mean, _ = _evaluate_with_trace(model, X, y, samples, loss, minority_positive)
    return mean


def _sample_checksum(samples: list[tuple[float, list[SampleIndex]]]) -> str:
    h = hashlib.sha256()
    for prevalence, sample_list in samples:
        h.update(repr(prevalence).encode())
        for sample in sample_list:
            h.update(sample.indices.tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class SelectionReport:
    """Everything a grid search decided and why."""

    method: str
    learner_kind: str
    loss: str
    config_labels: tuple[str, ...]
    mean_losses: tuple[float, ...]
    per_sample_traces: tuple[tuple[float, ...], ...] = field(repr=False)
    failures: tuple[str, ...]
    winner_index: int
    winner_label: str
    plan_master_seed: int
    inner_split_seed: int
    split_description: str
    sample_checksum: str
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "learner_kind": self.learner_kind,
            "loss": self.loss,
            "config_labels": list(self.config_labels),
            "mean_losses": list(self.mean_losses),
            "per_sample_traces": [list(t) for t in self.per_sample_traces],
            "failures": list(self.failures),
            "winner_index": self.winner_index,
            "winner_label": self.winner_label,
            "plan_master_seed": self.plan_master_seed,
            "inner_split_seed": self.inner_split_seed,
            "split_description": self.split_description,
            "sample_checksum": self.sample_checksum,
            "n_samples": self.n_samples,
        }


def select(
    method: str,
    grid: ParamGrid,
    X_train,
    y_train,
    X_val,
    y_val,
    plan: ProtocolPlan,
    loss: SelectionLoss,
    *,
    random_state: int = 0,
    emq_settings=None,
    hdy_settings=None,
) -> tuple[object, SelectionReport]:
    """Grid-search a quantification method against a loss.

    Validation samples are drawn once from (X_val, y_val) via the plan and
    reused for every configuration.  Each configuration is fitted on the
    train part only (methods with own parameters split it internally, seeded
    by ``random_state`` identically across configurations).  Returns the
    winner's fitted model and the full report.

    Raises ``RuntimeError`` listing per-config causes if every configuration
    fails to fit.
    """
    y_train = check_binary_labels(y_train)
    y_val = check_binary_labels(y_val)
    samples = protocol_samples(y_val, plan)
    minority_positive = bool(prevalence_from_labels(y_train).pos < 0.5)
    needs_posteriors = method in POSTERIOR_METHODS

    minimize = loss.direction == "minimize"
    means: list[float] = []
    traces: list[tuple[float, ...]] = []
    failures: list[str] = []
    best_index = -1
    best_mean = None
    best_model = None

    for config in grid.configs:
        try:
            learner = make_learner(config, needs_posteriors=needs_posteriors)
            model = make_quantifier(
                method,
                learner,
                random_state=random_state,
                emq_settings=emq_settings,
                hdy_settings=hdy_settings,
            )
            model.fit(X_train, y_train)
            mean, trace = _evaluate_with_trace(
                model, X_val, y_val, samples, loss, minority_positive
            )
        except (ValueError, RuntimeError, FloatingPointError) as exc:
            means.append(float("nan"))
            traces.append(())
            failures.append(f"{config.describe()}: {exc}")
            continue
        means.append(mean)
        traces.append(trace)
        failures.append("")
        better = (
            best_mean is None
            or (minimize and mean < best_mean)
            or (not minimize and mean > best_mean)
        )
        if better:
            best_index = len(means) - 1
            best_mean = mean
            best_model = model

    if best_model is None:
        detail = "; ".join(f for f in failures if f)
        raise RuntimeError(f"every configuration failed to fit: {detail}")

    report = SelectionReport(
        method=method,
        learner_kind=grid.kind,
        loss=loss.value,
        config_labels=tuple(c.describe() for c in grid.configs),
        mean_losses=tuple(means),
        per_sample_traces=tuple(traces),
        failures=tuple(failures),
        winner_index=best_index,
        winner_label=grid.configs[best_index].describe(),
        plan_master_seed=plan.master_seed,
        inner_split_seed=random_state,
        split_description=(
            f"train pool {y_train.size} docs, validation pool {y_val.size} docs; "
            f"own-parameter methods split the train part 60/40 stratified "
            f"with seed {random_state}"
        ),
        sample_checksum=_sample_checksum(samples),
        n_samples=sum(len(sample_list) for _, sample_list in samples),
    )
    return best_model, report
