"""Binary classifiers with deterministic full-batch training.

Three learners: L2-regularized logistic regression, multinomial naive Bayes
with additive smoothing, and a linear SVM with squared hinge loss solved in
the primal.  LR and the SVM minimize

    0.5 ||w||^2 + C * sum_i J_{y_i} * loss(margin_i)

with L-BFGS (full batch, deterministic; capped at 1000 iterations, gradient
tolerance 1e-6).  ``J`` are the per-class rebalancing weights: in balanced
mode the positive class gets p_neg(train)/p_pos(train) and the negative class
1, otherwise both are 1.

Soft classifiers expose ``predict_proba`` with columns [P(negative),
P(positive)]; hard decisions use threshold 0.5 on calibrated posteriors and 0
on raw margins.  Platt calibration maps raw SVM scores to posteriors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import expit, logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin

from .prevalence import (
    NEGATIVE,
    POSITIVE,
    ClassRates,
    PrevalenceVector,
    check_binary_labels,
    prevalence_from_labels,
)

MAX_ITERATIONS = 1000
GRADIENT_TOLERANCE = 1e-6
PLATT_GRADIENT_TOLERANCE = 1e-8

#: Floor on per-class log-joints before normalization; exp(-745) is the
#: smallest positive double, so a floored class still normalizes cleanly.
LOG_JOINT_FLOOR = -745.0

LearnerKind = Literal["lr", "mnb", "lsvm"]
LEARNER_KINDS: tuple[str, ...] = ("lr", "mnb", "lsvm")


def check_feature_matrix(X) -> sp.csr_matrix:
    """Convert any 2-d array-like or sparse matrix to canonical CSR float64."""
    if sp.issparse(X):
        out = X.tocsr().astype(np.float64)
    else:
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"feature matrix must be 2-d, got shape {arr.shape}")
        out = sp.csr_matrix(arr)
    out.eliminate_zeros()
    out.sort_indices()
    return out


def class_weights(train_prevalence: PrevalenceVector, balanced: bool) -> tuple[float, float]:
    """Per-class loss weights (J_pos, J_neg).

    Balanced mode returns (p_neg/p_pos, 1); unbalanced mode (1, 1).  Either
    way a zero class prevalence is rejected: rebalancing is undefined there.
    """
    if train_prevalence.pos <= 0.0 or train_prevalence.neg <= 0.0:
        raise ValueError("degenerate class weights: a class has zero prevalence")
    if balanced:
        return train_prevalence.neg / train_prevalence.pos, 1.0
    return 1.0, 1.0


@dataclass(frozen=True)
class LearnerConfig:
    """One hyperparameter combination for one learner kind.

    Fields irrelevant to the kind must be left None.
    """

    kind: str
    C: Optional[float] = None
    balanced: Optional[bool] = None
    alpha: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.kind in ("lr", "lsvm"):
            if self.C is None or self.balanced is None or self.alpha is not None:
                raise ValueError(f"{self.kind} config needs C and balanced, nothing else")
            if self.C <= 0:
                raise ValueError("C must be positive")
        else:  # mnb
            if self.alpha is None or self.C is not None or self.balanced is not None:
                raise ValueError("mnb config needs alpha, nothing else")
            if self.alpha < 0:
                raise ValueError("alpha must be nonnegative")

    def describe(self) -> str:
        if self.kind == "mnb":
            return f"mnb(alpha={self.alpha})"
        return f"{self.kind}(C={self.C}, balanced={self.balanced})"


def _sample_weights(y: np.ndarray, balanced: bool) -> np.ndarray:
    if not balanced:
        return np.ones(y.size)
    j_pos, j_neg = class_weights(prevalence_from_labels(y), balanced=True)
    return np.where(y == POSITIVE, j_pos, j_neg)


class _PrimalLinearModel(BaseEstimator, ClassifierMixin):
    """Shared machinery for the two margin-based learners."""

    def __init__(self, C: float = 1.0, balanced: bool = False):
        self.C = C
        self.balanced = balanced

    def _loss_terms(self, margins, weights):
        raise NotImplementedError

    def fit(self, X, y):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        X = check_feature_matrix(X)
        y = check_binary_labels(y)
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
        signs = np.where(y == POSITIVE, 1.0, -1.0)
        weights = self.C * _sample_weights(y, self.balanced)

        n_features = X.shape[1]

        def objective(theta: np.ndarray):
            w, b = theta[:-1], theta[-1]
            margins = signs * (X @ w + b)
            loss, dloss_dmargin = self._loss_terms(margins, weights)
            value = 0.5 * float(w @ w) + loss
            pull = signs * dloss_dmargin
            grad = np.empty_like(theta)
            grad[:-1] = w + X.T @ pull
            grad[-1] = pull.sum()
            return value, grad

        result = minimize(
            objective,
            np.zeros(n_features + 1),
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": MAX_ITERATIONS,
                "maxfun": 50 * MAX_ITERATIONS,
                "gtol": GRADIENT_TOLERANCE,
                "ftol": 0.0,
            },
        )
        self.coef_ = result.x[:-1]
        self.intercept_ = float(result.x[-1])
        self.objective_value_ = float(result.fun)
        self.n_iter_ = int(result.nit)
        self.converged_ = bool(result.status == 0)
        self.n_samples_ = int(y.size)
        self.n_features_in_ = n_features
        self.classes_ = np.array([NEGATIVE, POSITIVE])
        return self

    def decision_function(self, X) -> np.ndarray:
        X = check_feature_matrix(X)
        return np.asarray(X @ self.coef_ + self.intercept_)

    def objective(self, X, y, coef, intercept) -> float:
        """Objective value at arbitrary parameters (convexity checks)."""
        X = check_feature_matrix(X)
        y = check_binary_labels(y)
        signs = np.where(y == POSITIVE, 1.0, -1.0)
        weights = self.C * _sample_weights(y, self.balanced)
        margins = signs * (X @ np.asarray(coef, dtype=np.float64) + float(intercept))
        loss, _ = self._loss_terms(margins, weights)
        coef = np.asarray(coef, dtype=np.float64)
        return 0.5 * float(coef @ coef) + loss


class L2LogisticRegression(_PrimalLinearModel):
    """Logistic regression: C-scaled, J-weighted log loss plus 0.5 ||w||^2."""

    def _loss_terms(self, margins, weights):
        # log(1 + exp(-m)) and its derivative wrt m, both weighted
        losses = np.logaddexp(0.0, -margins)
        dloss = -weights * expit(-margins)
        return float(weights @ losses), dloss

    def predict_proba(self, X) -> np.ndarray:
        p_pos = expit(self.decision_function(X))
        return np.column_stack([1.0 - p_pos, p_pos])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int8)


class SquaredHingeSVM(_PrimalLinearModel):
    """Linear SVM, squared hinge in the primal.  Margins only, no posteriors."""

    def _loss_terms(self, margins, weights):
        slack = np.maximum(0.0, 1.0 - margins)
        return float(weights @ (slack * slack)), -2.0 * weights * slack

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(np.int8)


class MultinomialNaiveBayes(BaseEstimator, ClassifierMixin):
    """Multinomial naive Bayes with additive (Laplace) smoothing factor alpha.

    Accepts any nonnegative feature matrix.  With alpha = 0 a feature unseen
    in a class has log-likelihood -inf; the per-class log-joint is floored at
    ``LOG_JOINT_FLOOR`` before normalization, so posteriors stay defined.
    """

    def __init__(self, alpha: float = 1.0):
        self.alpha = alpha

    def fit(self, X, y):
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        X = check_feature_matrix(X)
        y = check_binary_labels(y)
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
        if X.nnz and X.data.min() < 0:
            raise ValueError("naive Bayes requires nonnegative features")
        n_features = X.shape[1]
        log_likelihood = np.empty((2, n_features))
        log_prior = np.empty(2)
        with np.errstate(divide="ignore"):
            for col, cls in enumerate((NEGATIVE, POSITIVE)):
                rows = np.flatnonzero(y == cls)
                log_prior[col] = np.log(rows.size / y.size) if rows.size else -np.inf
                counts = np.asarray(X[rows].sum(axis=0)).ravel() + self.alpha
                total = counts.sum()
                if total > 0:
                    log_likelihood[col] = np.log(counts) - np.log(total)
                else:  # no mass at all in this class: uniform
                    log_likelihood[col] = -np.log(n_features)
        self.feature_log_likelihood_ = log_likelihood
        self.class_log_prior_ = log_prior
        self.n_samples_ = int(y.size)
        self.n_features_in_ = n_features
        self.classes_ = np.array([NEGATIVE, POSITIVE])
        return self

    def _log_joint(self, X) -> np.ndarray:
        X = check_feature_matrix(X)
        joint = X @ self.feature_log_likelihood_.T + self.class_log_prior_
        return np.maximum(joint, LOG_JOINT_FLOOR)

    def predict_proba(self, X) -> np.ndarray:
        joint = self._log_joint(X)
        return np.exp(joint - logsumexp(joint, axis=1, keepdims=True))

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int8)


@dataclass(frozen=True)
class CalibrationMap:
    """Platt sigmoid: posterior = 1 / (1 + exp(A*score + B))."""

    A: float
    B: float

    def apply(self, scores) -> np.ndarray:
        scores = np.asarray(scores, dtype=np.float64)
        return expit(-(self.A * scores + self.B))


def platt_calibrate(scores, labels) -> CalibrationMap:
    """Fit the Platt sigmoid to raw classifier scores.

    Minimizes the negative log-likelihood against Platt's smoothed targets
    (N+ + 1)/(N+ + 2) for positives and 1/(N- + 2) for negatives, by BFGS to
    gradient norm <= 1e-8.  Requires both classes in ``labels``.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = check_binary_labels(labels)
    if s.size != y.size:
        raise ValueError(f"{s.size} scores but {y.size} labels")
    n_pos = int(np.count_nonzero(y == POSITIVE))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("calibration needs both classes")
    targets = np.where(y == POSITIVE, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(theta: np.ndarray):
        a, b = theta
        z = a * s + b
        # posterior p = expit(-z); -log p = logaddexp(0, z)
        value = float(np.sum(np.logaddexp(0.0, z) - (1.0 - targets) * z))
        residual = targets - expit(-z)
        return value, np.array([residual @ s, residual.sum()])

    start = np.array([0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))])
    result = minimize(
        nll,
        start,
        jac=True,
        method="BFGS",
        options={"gtol": PLATT_GRADIENT_TOLERANCE, "maxiter": MAX_ITERATIONS},
    )
    return CalibrationMap(A=float(result.x[0]), B=float(result.x[1]))


def platt_nll(calibration: CalibrationMap, scores, labels) -> float:
    """Platt-target NLL of a calibration map on a score/label set."""
    s = np.asarray(scores, dtype=np.float64)
    y = check_binary_labels(labels)
    n_pos = int(np.count_nonzero(y == POSITIVE))
    n_neg = y.size - n_pos
    targets = np.where(y == POSITIVE, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    z = calibration.A * s + calibration.B
    return float(np.sum(np.logaddexp(0.0, z) - (1.0 - targets) * z))


class PlattCalibratedSVM(BaseEstimator, ClassifierMixin):
    """Squared-hinge SVM whose scores are mapped to posteriors via Platt.

    The sigmoid is fitted on the SVM's own training scores; the smoothed
    Platt targets exist precisely to make that in-sample fit usable.
    """

    def __init__(self, C: float = 1.0, balanced: bool = False):
        self.C = C
        self.balanced = balanced

    def fit(self, X, y):
        self.svm_ = SquaredHingeSVM(C=self.C, balanced=self.balanced).fit(X, y)
        scores = self.svm_.decision_function(X)
        self.calibration_ = platt_calibrate(scores, y)
        self.n_samples_ = self.svm_.n_samples_
        self.n_features_in_ = self.svm_.n_features_in_
        self.converged_ = self.svm_.converged_
        self.classes_ = np.array([NEGATIVE, POSITIVE])
        return self

    def decision_function(self, X) -> np.ndarray:
        return self.svm_.decision_function(X)

    def predict_proba(self, X) -> np.ndarray:
        p_pos = self.calibration_.apply(self.svm_.decision_function(X))
        return np.column_stack([1.0 - p_pos, p_pos])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int8)


def make_learner(config: LearnerConfig, needs_posteriors: bool = False):
    """Instantiate the estimator a config describes.

    For the SVM, ``needs_posteriors`` selects the Platt-calibrated variant;
    LR and MNB produce posteriors natively.
    """
    if config.kind == "lr":
        return L2LogisticRegression(C=config.C, balanced=config.balanced)
    if config.kind == "mnb":
        return MultinomialNaiveBayes(alpha=config.alpha)
    if needs_posteriors:
        return PlattCalibratedSVM(C=config.C, balanced=config.balanced)
    return SquaredHingeSVM(C=config.C, balanced=config.balanced)


def positive_posteriors(classifier, X) -> np.ndarray:
    """P(positive | x) column from any soft classifier."""
    if not hasattr(classifier, "predict_proba"):
        raise ValueError(
            f"{type(classifier).__name__} produces no posteriors; "
            "use a soft or calibrated classifier"
        )
    return np.asarray(classifier.predict_proba(X))[:, 1]


def estimate_rates_hard(predictions, labels) -> ClassRates:
    """TPR/FPR of hard predictions against held-out labels.

    TPR is the mean prediction over true positives, FPR over true negatives.
    Raises if either class is absent.
    """
    preds = np.asarray(predictions, dtype=np.float64)
    return _mean_rates(preds, labels)


def estimate_rates_soft(posteriors, labels) -> ClassRates:
    """Soft TPR/FPR: mean positive posterior over each true class."""
    post = np.asarray(posteriors, dtype=np.float64)
    if post.size and (post.min() < 0.0 or post.max() > 1.0):
        raise ValueError("posteriors must lie in [0, 1]")
    return _mean_rates(post, labels)


def _mean_rates(values: np.ndarray, labels) -> ClassRates:
    y = check_binary_labels(labels)
    if values.size != y.size:
        raise ValueError(f"{values.size} predictions but {y.size} labels")
    pos = y == POSITIVE
    if not pos.any() or pos.all():
        raise ValueError("rates undefined: a class is absent from the labels")
    return ClassRates(tpr=float(values[pos].mean()), fpr=float(values[~pos].mean()))
