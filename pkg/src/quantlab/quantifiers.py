"""Quantification methods: estimate class prevalence in an unlabelled sample.

Seven methods, each a fit/quantify estimator over a feature matrix:

* ``cc``   classify and count: fraction of hard-positive predictions
* ``pcc``  probabilistic CC: mean positive posterior
* ``acc``  CC corrected by the classifier's held-out TPR/FPR
* ``pacc`` PCC corrected by the soft (mean-posterior) rates
* ``emq``  iterative prior re-estimation by posterior reweighting
* ``hdy``  Hellinger-distance matching of posterior histograms
* ``mlpe`` the training prevalence, ignoring the sample

Methods that estimate their own parameters (acc, pacc, hdy) split the
training part 60/40 stratified, train the classifier on the inner train part
only, and estimate rates or posterior pools on the inner validation part.
The classifier is deliberately NOT retrained on the union afterwards: the
estimated parameters describe the inner-train classifier, not a retrained one.

Fitted models are immutable; ``quantify`` is pure and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, clone

from .learners import (
    LearnerConfig,
    check_feature_matrix,
    estimate_rates_hard,
    estimate_rates_soft,
    make_learner,
    positive_posteriors,
)
from .prevalence import (
    POSITIVE,
    ClassRates,
    PrevalenceVector,
    check_binary_labels,
    clip_normalize,
    prevalence_from_labels,
)
from .sampling import stratified_split

METHOD_KINDS: tuple[str, ...] = ("cc", "pcc", "acc", "pacc", "emq", "hdy", "mlpe")

#: Methods that estimate parameters of their own on an inner validation split.
CASE1_METHODS = frozenset({"acc", "pacc", "hdy"})

#: Methods whose underlying classifier must produce posteriors.
POSTERIOR_METHODS = frozenset({"pcc", "pacc", "emq", "hdy"})

#: Below this TPR-FPR gap the rate adjustment divides by ~0 and is refused.
RATE_GAP_MIN = 1e-6

#: Inner train share for the parameter-estimation split of case-1 methods.
INNER_TRAIN_FRACTION = 0.6


@dataclass(frozen=True)
class EmqSettings:
    """Stopping rule for the prior-reweighting iteration."""

    tolerance: float = 1e-6
    max_iterations: int = 1000

    def __post_init__(self) -> None:
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class HdySettings:
    """Discretization of the Hellinger-distance search."""

    bin_counts: tuple[int, ...] = tuple(range(10, 111, 10))
    alpha_grid_step: float = 0.01

    def __post_init__(self) -> None:
        counts = tuple(int(b) for b in self.bin_counts)
        if not counts or any(b < 1 for b in counts):
            raise ValueError("bin_counts must be a nonempty list of positive integers")
        step = float(self.alpha_grid_step)
        if not (0.0 < step < 1.0):
            raise ValueError("alpha_grid_step must lie in (0, 1)")
        if abs(round(1.0 / step) * step - 1.0) > 1e-9:
            raise ValueError("alpha_grid_step must divide 1 evenly")
        object.__setattr__(self, "bin_counts", counts)

    def alphas(self) -> np.ndarray:
        n = round(1.0 / self.alpha_grid_step)
        return np.linspace(0.0, 1.0, n + 1)


def _check_posterior_array(values, what: str = "posteriors") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"empty sample: no {what} given")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{what} must lie in [0, 1]")
    return arr


# ---------------------------------------------------------------------------
# Functional kernels
# ---------------------------------------------------------------------------

def cc_quantify(hard_predictions) -> PrevalenceVector:
    """Classify and count: the mean of 0/1 predictions."""
    preds = np.asarray(hard_predictions)
    if preds.size == 0:
        raise ValueError("empty sample: no predictions given")
    preds = check_binary_labels(preds)
    return PrevalenceVector.from_positive(float(preds.mean()))


def pcc_quantify(posteriors) -> PrevalenceVector:
    """Probabilistic classify and count: the mean positive posterior."""
    post = _check_posterior_array(posteriors)
    return PrevalenceVector.from_positive(float(post.mean()))


def acc_quantify(cc_estimate: PrevalenceVector, rates: ClassRates) -> PrevalenceVector:
    """Invert the classifier bias: (cc - fpr) / (tpr - fpr), clipped into [0, 1].

    Raises when |tpr - fpr| < 1e-6; whether to fall back to the raw CC
    estimate in that case is the caller's decision.
    """
    gap = rates.tpr - rates.fpr
    if abs(gap) < RATE_GAP_MIN:
        raise ValueError("unadjustable: degenerate rates (tpr and fpr coincide)")
    return clip_normalize((cc_estimate.pos - rates.fpr) / gap)


def pacc_quantify(pcc_estimate: PrevalenceVector, soft_rates: ClassRates) -> PrevalenceVector:
    """The soft-rate analogue of the CC adjustment, applied to a PCC estimate."""
    return acc_quantify(pcc_estimate, soft_rates)


def emq_iterate(
    posteriors, train_prevalence: PrevalenceVector, settings: EmqSettings = EmqSettings()
) -> tuple[PrevalenceVector, int, bool]:
    """Run the prior-reweighting iteration; also report iterations and convergence.

    Each round rescales every posterior by (current prior / training prior)
    per class, renormalizes per document, and sets the next prior to the mean
    reweighted posterior.  Stops when the prior moves less than the tolerance
    or at the iteration cap.
    """
    s = _check_posterior_array(posteriors)
    p0 = train_prevalence.pos
    if p0 <= 0.0 or p0 >= 1.0:
        raise ValueError("EM undefined at zero prior: training prevalence must be interior")
    p = p0
    iterations = 0
    converged = False
    for _ in range(settings.max_iterations):
        scaled_pos = (p / p0) * s
        denom = scaled_pos + ((1.0 - p) / (1.0 - p0)) * (1.0 - s)
        # denom hits 0 only at saturated posteriors whose reweighted limit is
        # the posterior itself
        reweighted = np.where(
            denom > 0.0,
            np.divide(scaled_pos, denom, out=np.zeros_like(s), where=denom > 0.0),
            s,
        )
        p_next = float(reweighted.mean())
        iterations += 1
        step = abs(p_next - p)
        p = p_next
        if step < settings.tolerance:
            converged = True
            break
    return PrevalenceVector.from_positive(p), iterations, converged


def emq_quantify(
    posteriors, train_prevalence: PrevalenceVector, settings: EmqSettings = EmqSettings()
) -> PrevalenceVector:
    """Final prior of the reweighting iteration (see ``emq_iterate``)."""
    estimate, _, _ = emq_iterate(posteriors, train_prevalence, settings)
    return estimate


def hellinger_distance(p, q) -> float:
    """sqrt(sum((sqrt(p) - sqrt(q))^2)) over matching histogram bins."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(np.sqrt(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)))


def hdy_quantify(
    val_pos_posteriors,
    val_neg_posteriors,
    test_posteriors,
    settings: HdySettings = HdySettings(),
) -> PrevalenceVector:
    """Prevalence that best mixes the per-class posterior histograms.

    For each bin count, histogram the two validation pools and the test
    posteriors on [0, 1], scan the mixture weight over the alpha grid
    minimizing the Hellinger distance to the test histogram (ties broken
    toward the smallest alpha), and return the median of the per-bin-count
    argmins.
    """
    pos_pool = _check_posterior_array(val_pos_posteriors, "validation posteriors")
    neg_pool = _check_posterior_array(val_neg_posteriors, "validation posteriors")
    test = _check_posterior_array(test_posteriors, "test posteriors")
    alphas = settings.alphas()
    argmins = []
    for bins in settings.bin_counts:
        h_pos = np.histogram(pos_pool, bins=bins, range=(0.0, 1.0), density=True)[0]
        h_neg = np.histogram(neg_pool, bins=bins, range=(0.0, 1.0), density=True)[0]
        h_test = np.histogram(test, bins=bins, range=(0.0, 1.0), density=True)[0]
        # written as h_neg + alpha*(h_pos - h_neg) so equal pools tie exactly
        # and argmin's first-index rule breaks ties toward the smallest alpha
        mixtures = h_neg[None, :] + alphas[:, None] * (h_pos - h_neg)[None, :]
        np.maximum(mixtures, 0.0, out=mixtures)  # rounding can graze below zero
        distances = np.sqrt(((np.sqrt(mixtures) - np.sqrt(h_test)) ** 2).sum(axis=1))
        argmins.append(alphas[int(np.argmin(distances))])
    return PrevalenceVector.from_positive(float(np.median(argmins)))


def mlpe_quantify(train_prevalence: PrevalenceVector) -> PrevalenceVector:
    """The IID baseline: always the training prevalence."""
    return train_prevalence


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

class _QuantifierBase(BaseEstimator):
    """Common checks for the classifier-backed quantifiers."""

    def _start_fit(self, X, y, needs_posteriors: bool):
        X = check_feature_matrix(X)
        y = check_binary_labels(y)
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
        n_pos = int(np.count_nonzero(y == POSITIVE))
        if n_pos == 0 or n_pos == y.size:
            raise ValueError("quantifier training needs both classes present")
        if needs_posteriors and not hasattr(self.learner, "predict_proba"):
            raise ValueError(
                f"{type(self).__name__} needs a soft classifier; "
                f"{type(self.learner).__name__} has no predict_proba"
            )
        return X, y

    def _ensure_fitted(self) -> None:
        if not hasattr(self, "train_prevalence_") and not hasattr(self, "classifier_"):
            raise ValueError(f"{type(self).__name__} is not fitted; call fit first")


class ClassifyAndCount(_QuantifierBase):
    """CC: train on everything, count hard-positive predictions."""

    def __init__(self, learner):
        self.learner = learner

    def fit(self, X, y):
        X, y = self._start_fit(X, y, needs_posteriors=False)
        self.classifier_ = clone(self.learner).fit(X, y)
        return self

    def quantify(self, X) -> PrevalenceVector:
        self._ensure_fitted()
        return cc_quantify(self.classifier_.predict(X))


class ProbabilisticClassifyAndCount(_QuantifierBase):
    """PCC: train on everything, average the positive posteriors."""

    def __init__(self, learner):
        self.learner = learner

    def fit(self, X, y):
        X, y = self._start_fit(X, y, needs_posteriors=True)
        self.classifier_ = clone(self.learner).fit(X, y)
        return self

    def quantify(self, X) -> PrevalenceVector:
        self._ensure_fitted()
        return pcc_quantify(positive_posteriors(self.classifier_, X))


class _AdjustedBase(_QuantifierBase):
    soft = False

    def __init__(self, learner, val_fraction: float = 1.0 - INNER_TRAIN_FRACTION,
                 random_state: int = 0):
        self.learner = learner
        self.val_fraction = val_fraction
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._start_fit(X, y, needs_posteriors=self.soft)
        train_part, val_part = stratified_split(
            y, 1.0 - self.val_fraction, seed=self.random_state
        )
        self.classifier_ = clone(self.learner).fit(
            X[train_part.indices], y[train_part.indices]
        )
        y_val = y[val_part.indices]
        if self.soft:
            values = positive_posteriors(self.classifier_, X[val_part.indices])
            rates = estimate_rates_soft(values, y_val)
        else:
            values = self.classifier_.predict(X[val_part.indices])
            rates = estimate_rates_hard(values, y_val)
        if abs(rates.tpr - rates.fpr) < RATE_GAP_MIN:
            raise ValueError("unadjustable: degenerate rates (tpr and fpr coincide)")
        self.rates_ = rates
        self.inner_train_size_ = len(train_part)
        self.inner_val_size_ = len(val_part)
        return self


class AdjustedClassifyAndCount(_AdjustedBase):
    """ACC: CC corrected by hard rates estimated on an inner held-out split."""

    soft = False

    def quantify(self, X) -> PrevalenceVector:
        self._ensure_fitted()
        return acc_quantify(cc_quantify(self.classifier_.predict(X)), self.rates_)


class ProbabilisticAdjustedClassifyAndCount(_AdjustedBase):
    """PACC: PCC corrected by soft rates estimated on an inner held-out split."""

    soft = True

    def quantify(self, X) -> PrevalenceVector:
        self._ensure_fitted()
        return pacc_quantify(
            pcc_quantify(positive_posteriors(self.classifier_, X)), self.rates_
        )


class ExpectationMaximizationQuantifier(_QuantifierBase):
    """EMQ: reweight test posteriors toward the maximum-likelihood prior."""

    def __init__(self, learner, tolerance: float = 1e-6, max_iterations: int = 1000):
        self.learner = learner
        self.tolerance = tolerance
        self.max_iterations = max_iterations

    def fit(self, X, y):
        X, y = self._start_fit(X, y, needs_posteriors=True)
        self.classifier_ = clone(self.learner).fit(X, y)
        self.train_prevalence_ = prevalence_from_labels(y)
        return self

    def _settings(self) -> EmqSettings:
        return EmqSettings(tolerance=self.tolerance, max_iterations=self.max_iterations)

    def quantify(self, X) -> PrevalenceVector:
        self._ensure_fitted()
        posteriors = positive_posteriors(self.classifier_, X)
        return emq_quantify(posteriors, self.train_prevalence_, self._settings())

    def quantify_with_details(self, X) -> tuple[PrevalenceVector, int, bool]:
        """Like quantify, also returning (iterations, converged)."""
        self._ensure_fitted()
        posteriors = positive_posteriors(self.classifier_, X)
        return emq_iterate(posteriors, self.train_prevalence_, self._settings())


class HellingerDistanceQuantifier(_QuantifierBase):
    """HDy: match the test posterior histogram with a mixture of per-class pools.

    The per-class posterior pools are estimated on an inner held-out split,
    like the rate-adjusted methods.
    """

    def __init__(self, learner, bin_counts: tuple[int, ...] = tuple(range(10, 111, 10)),
                 alpha_grid_step: float = 0.01,
                 val_fraction: float = 1.0 - INNER_TRAIN_FRACTION,
                 random_state: int = 0):
        self.learner = learner
        self.bin_counts = bin_counts
        self.alpha_grid_step = alpha_grid_step
        self.val_fraction = val_fraction
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._start_fit(X, y, needs_posteriors=True)
        train_part, val_part = stratified_split(
            y, 1.0 - self.val_fraction, seed=self.random_state
        )
        self.classifier_ = clone(self.learner).fit(
            X[train_part.indices], y[train_part.indices]
        )
        posteriors = positive_posteriors(self.classifier_, X[val_part.indices])
        y_val = y[val_part.indices]
        pos_pool = posteriors[y_val == POSITIVE]
        neg_pool = posteriors[y_val != POSITIVE]
        if pos_pool.size == 0 or neg_pool.size == 0:
            raise ValueError("inner validation split lost a class; cannot build pools")
        self.val_pos_posteriors_ = pos_pool
        self.val_neg_posteriors_ = neg_pool
        self.inner_train_size_ = len(train_part)
        self.inner_val_size_ = len(val_part)
        return self

    def quantify(self, X) -> PrevalenceVector:
        self._ensure_fitted()
        test_posteriors = positive_posteriors(self.classifier_, X)
        settings = HdySettings(tuple(self.bin_counts), self.alpha_grid_step)
        return hdy_quantify(
            self.val_pos_posteriors_, self.val_neg_posteriors_, test_posteriors, settings
        )


class MaximumLikelihoodPrevalenceEstimator(BaseEstimator):
    """MLPE: memorize the training prevalence, ignore every test sample."""

    def fit(self, X, y):
        self.train_prevalence_ = prevalence_from_labels(y)
        return self

    def quantify(self, X) -> PrevalenceVector:
        if not hasattr(self, "train_prevalence_"):
            raise ValueError("MaximumLikelihoodPrevalenceEstimator is not fitted")
        return mlpe_quantify(self.train_prevalence_)


def make_quantifier(
    kind: str,
    learner=None,
    *,
    random_state: int = 0,
    emq_settings: EmqSettings | None = None,
    hdy_settings: HdySettings | None = None,
):
    """Build an unfitted quantifier of the given kind around a learner."""
    if kind not in METHOD_KINDS:
        raise ValueError(f"unknown quantification method {kind!r}")
    if kind == "mlpe":
        return MaximumLikelihoodPrevalenceEstimator()
    if learner is None:
        raise ValueError(f"method {kind!r} needs an underlying learner")
    if kind == "cc":
        return ClassifyAndCount(learner)
    if kind == "pcc":
        return ProbabilisticClassifyAndCount(learner)
    if kind == "acc":
        return AdjustedClassifyAndCount(learner, random_state=random_state)
    if kind == "pacc":
        return ProbabilisticAdjustedClassifyAndCount(learner, random_state=random_state)
    if kind == "emq":
        settings = emq_settings or EmqSettings()
        return ExpectationMaximizationQuantifier(
            learner, tolerance=settings.tolerance, max_iterations=settings.max_iterations
        )
    settings = hdy_settings or HdySettings()
    return HellingerDistanceQuantifier(
        learner,
        bin_counts=settings.bin_counts,
        alpha_grid_step=settings.alpha_grid_step,
        random_state=random_state,
    )


def fit_quantifier(
    kind: str,
    X,
    y,
    config: LearnerConfig | None = None,
    *,
    random_state: int = 0,
    emq_settings: EmqSettings | None = None,
    hdy_settings: HdySettings | None = None,
):
    """Build the learner a config describes, wrap it in a quantifier, and fit."""
    learner = None
    if kind != "mlpe":
        if config is None:
            raise ValueError(f"method {kind!r} needs a learner config")
        learner = make_learner(config, needs_posteriors=kind in POSTERIOR_METHODS)
    model = make_quantifier(
        kind,
        learner,
        random_state=random_state,
        emq_settings=emq_settings,
        hdy_settings=hdy_settings,
    )
    return model.fit(X, y)
