"""quantlab: learning to quantify (class-prevalence estimation).

Quantifiers estimate how prevalent each class is in an unlabelled sample,
which is not the same problem as classifying its members: under prior shift
the classify-and-count heuristic is biased, and this package implements both
that heuristic, its rate-adjusted corrections, stronger baselines, and the
prevalence-grid protocol needed to evaluate and model-select them.
"""

__version__ = "0.1.0"

from .datasets import load_dataset, load_tsv_corpus, synthetic_corpus, write_tsv_corpus
from .learners import (
    CalibrationMap,
    L2LogisticRegression,
    LearnerConfig,
    MultinomialNaiveBayes,
    PlattCalibratedSVM,
    SquaredHingeSVM,
    class_weights,
    estimate_rates_hard,
    estimate_rates_soft,
    make_learner,
    platt_calibrate,
)
from .prevalence import (
    ClassRates,
    PrevalenceVector,
    absolute_error,
    clip_normalize,
    prevalence_from_labels,
    relative_absolute_error,
    smooth,
)
from .quantifiers import (
    AdjustedClassifyAndCount,
    ClassifyAndCount,
    EmqSettings,
    ExpectationMaximizationQuantifier,
    HdySettings,
    HellingerDistanceQuantifier,
    MaximumLikelihoodPrevalenceEstimator,
    ProbabilisticAdjustedClassifyAndCount,
    ProbabilisticClassifyAndCount,
    acc_quantify,
    cc_quantify,
    emq_quantify,
    fit_quantifier,
    hdy_quantify,
    make_quantifier,
    mlpe_quantify,
    pacc_quantify,
    pcc_quantify,
)
from .sampling import (
    DEFAULT_PREVALENCE_GRID,
    ProtocolPlan,
    SampleIndex,
    SampleSpec,
    derive_seed,
    generate_indices,
    protocol_samples,
    stratified_split,
)
from .selection import SelectionLoss, evaluate_on_samples, grid_for, select
from .stats import TTestVerdict, paired_ttest, student_t_two_sided_p
from .text import Corpus, TfidfTextVectorizer, Vocabulary, build_vocabulary, tokenize, vectorize

__all__ = [name for name in dir() if not name.startswith("_")]
