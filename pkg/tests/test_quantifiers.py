import numpy as np
import pytest
from scipy.special import expit
from sklearn.base import clone

from quantlab.learners import L2LogisticRegression, LearnerConfig
from quantlab.prevalence import ClassRates, PrevalenceVector
from quantlab.quantifiers import (
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
    emq_iterate,
    emq_quantify,
    fit_quantifier,
    hdy_quantify,
    hellinger_distance,
    make_quantifier,
    mlpe_quantify,
    pacc_quantify,
    pcc_quantify,
)


@pytest.fixture(scope="module")
def vectorized_corpus():
    from quantlab.datasets import synthetic_corpus
    from quantlab.text import build_vocabulary, vectorize

    corpus = synthetic_corpus(
        "quant", 900, 0.6, vocabulary_size=250, separation=1.0, seed=21
    )
    vocab = build_vocabulary(corpus, 5)
    return vectorize(corpus, vocab), corpus.labels


LR_CONFIG = LearnerConfig("lr", C=1.0, balanced=False)


class TestCcQuantify:
    def test_examples(self):
        assert cc_quantify([1, 1, 0, 1]).pos == 0.75
        assert cc_quantify([0, 0, 0]) == PrevalenceVector(0.0, 1.0)
        assert cc_quantify([1, 0]).pos == 0.5

    def test_empty(self):
        with pytest.raises(ValueError, match="empty sample"):
            cc_quantify([])


class TestPccQuantify:
    def test_examples(self):
        assert pcc_quantify([0.9, 0.6, 0.3]).pos == pytest.approx(0.6, abs=1e-12)
        assert pcc_quantify([0.5, 0.5]).pos == 0.5

    def test_degenerates_to_cc_on_hard_posteriors(self):
        rng = np.random.default_rng(0)
        hard = rng.integers(0, 2, size=50)
        assert pcc_quantify(hard.astype(float)).pos == cc_quantify(hard).pos

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            pcc_quantify([0.5, 1.2])


class TestAccQuantify:
    def test_hand_value(self):
        got = acc_quantify(PrevalenceVector.from_positive(0.6), ClassRates(0.8, 0.2))
        assert got.pos == pytest.approx((0.6 - 0.2) / 0.6, abs=1e-12)

    def test_perfect_classifier_identity(self):
        cc = PrevalenceVector.from_positive(0.37)
        assert acc_quantify(cc, ClassRates(1.0, 0.0)).pos == pytest.approx(0.37, abs=1e-12)

    def test_clips_negative_raw(self):
        got = acc_quantify(PrevalenceVector.from_positive(0.1), ClassRates(0.8, 0.2))
        assert got == PrevalenceVector(0.0, 1.0)  # raw -1/6 clipped

    def test_degenerate_rates(self):
        with pytest.raises(ValueError, match="unadjustable: degenerate rates"):
            acc_quantify(PrevalenceVector.from_positive(0.5), ClassRates(0.5, 0.5))


class TestPaccQuantify:
    def test_hand_value(self):
        got = pacc_quantify(PrevalenceVector.from_positive(0.55), ClassRates(0.85, 0.25))
        assert got.pos == pytest.approx(0.5, abs=1e-12)

    def test_identity_rates(self):
        assert pacc_quantify(
            PrevalenceVector.from_positive(0.21), ClassRates(1.0, 0.0)
        ).pos == pytest.approx(0.21, abs=1e-12)

    def test_clip(self):
        got = pacc_quantify(PrevalenceVector.from_positive(0.2), ClassRates(0.7, 0.3))
        assert got == PrevalenceVector(0.0, 1.0)  # raw -0.25 clipped


class TestBiasCorrectionLaw:
    def test_cc_mean_matches_contamination_and_acc_recovers(self):
        # hard classifier simulated by label flips at known rates
        tpr, fpr = 0.9, 0.2
        rates = ClassRates(tpr, fpr)
        rng = np.random.default_rng(1234)
        for p in (0.1, 0.5, 0.9):
            cc_means, acc_means = [], []
            for _ in range(100):
                n_pos = int(round(p * 500))
                labels = np.array([1] * n_pos + [0] * (500 - n_pos))
                predictions = np.where(
                    labels == 1,
                    rng.random(500) < tpr,
                    rng.random(500) < fpr,
                ).astype(int)
                cc = cc_quantify(predictions)
                cc_means.append(cc.pos)
                acc_means.append(acc_quantify(cc, rates).pos)
            expected_cc = p * tpr + (1 - p) * fpr
            assert abs(np.mean(cc_means) - expected_cc) < 0.02
            assert abs(np.mean(acc_means) - p) < 0.02


class TestEmq:
    def test_fixed_point(self):
        prior = PrevalenceVector.from_positive(0.3)
        estimate, iterations, converged = emq_iterate(np.full(200, 0.3), prior)
        assert estimate.pos == pytest.approx(0.3, abs=1e-12)
        assert iterations == 1 and converged

    def test_hard_posteriors(self):
        prior = PrevalenceVector.from_positive(0.5)
        posteriors = np.array([1.0] * 30 + [0.0] * 70)
        estimate, _, converged = emq_iterate(posteriors, prior)
        assert estimate.pos == pytest.approx(0.3, abs=1e-12)
        assert converged

    def test_prior_shift_recovery(self):
        # posteriors from Bayes rule with class scores N(+1,1)/N(-1,1)
        rng = np.random.default_rng(42)
        n = 10000
        true_prior = 0.8
        labels = rng.random(n) < true_prior
        x = np.where(labels, rng.normal(1, 1, n), rng.normal(-1, 1, n))
        posteriors = expit(2 * x)  # trained at prior 0.5
        estimate = emq_quantify(posteriors, PrevalenceVector(0.5, 0.5))
        assert abs(estimate.pos - true_prior) < 0.02

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        posteriors = rng.random(300)
        prior = PrevalenceVector.from_positive(0.4)
        a = emq_quantify(posteriors, prior)
        b = emq_quantify(posteriors[rng.permutation(300)], prior)
        assert a.pos == pytest.approx(b.pos, abs=1e-15)

    def test_step_below_tolerance_unless_capped(self):
        rng = np.random.default_rng(4)
        posteriors = rng.random(500)
        prior = PrevalenceVector.from_positive(0.6)
        settings = EmqSettings(tolerance=1e-8, max_iterations=3)
        _, iterations, converged = emq_iterate(posteriors, prior, settings)
        assert not converged and iterations == 3
        _, iterations, converged = emq_iterate(posteriors, prior, EmqSettings(1e-8, 1000))
        assert converged and iterations < 1000

    def test_zero_prior_rejected(self):
        with pytest.raises(ValueError, match="EM undefined at zero prior"):
            emq_quantify([0.5], PrevalenceVector(1.0, 0.0))


def bimodal_pools(rng, n=1000):
    pos = expit(2 * rng.normal(1, 1, n))
    neg = expit(2 * rng.normal(-1, 1, n))
    return pos, neg


class TestHdy:
    def test_exact_mixture_recovery(self):
        rng = np.random.default_rng(7)
        pos, neg = bimodal_pools(rng)
        # integer tilings make the test histogram the exact mixture
        for alpha, (k_pos, k_neg) in {0.3: (3, 7), 0.7: (7, 3)}.items():
            test = np.concatenate([np.tile(pos, k_pos), np.tile(neg, k_neg)])
            estimate = hdy_quantify(pos, neg, test)
            assert abs(estimate.pos - alpha) <= 0.01 + 1e-12
            # the brute-force scan is its own oracle: the distance at alpha is
            # the grid minimum for every bin count
            for bins in HdySettings().bin_counts:
                h_pos = np.histogram(pos, bins=bins, range=(0, 1), density=True)[0]
                h_neg = np.histogram(neg, bins=bins, range=(0, 1), density=True)[0]
                h_test = np.histogram(test, bins=bins, range=(0, 1), density=True)[0]
                grid = np.linspace(0, 1, 101)
                dists = [
                    hellinger_distance(a * h_pos + (1 - a) * h_neg, h_test) for a in grid
                ]
                assert abs(grid[int(np.argmin(dists))] - alpha) <= 0.01 + 1e-12

    def test_pure_positive_boundary(self):
        rng = np.random.default_rng(8)
        pos, neg = bimodal_pools(rng, 600)
        estimate = hdy_quantify(pos, neg, pos)
        assert estimate.pos >= 1.0 - 0.01

    def test_identical_pools_tie_break_smallest(self):
        rng = np.random.default_rng(9)
        pool = rng.random(400)
        estimate = hdy_quantify(pool, pool.copy(), rng.random(300))
        assert estimate.pos == 0.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(10)
        pos, neg = bimodal_pools(rng, 300)
        test = rng.random(200)
        a = hdy_quantify(pos, neg, test)
        b = hdy_quantify(
            pos[rng.permutation(300)], neg[rng.permutation(300)], test[rng.permutation(200)]
        )
        assert a.pos == b.pos

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError, match="empty sample"):
            hdy_quantify([], [0.5], [0.5])

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            HdySettings(bin_counts=())
        with pytest.raises(ValueError):
            HdySettings(alpha_grid_step=0.03)  # does not divide 1


class TestMlpe:
    def test_returns_training_prevalence(self):
        assert mlpe_quantify(PrevalenceVector(0.9, 0.1)).pos == 0.9
        assert mlpe_quantify(PrevalenceVector(0.5, 0.5)).pos == 0.5

    def test_ignores_test_sample(self, vectorized_corpus):
        X, y = vectorized_corpus
        model = MaximumLikelihoodPrevalenceEstimator().fit(X, y)
        assert model.quantify(X[:10]) == model.quantify(X[200:350])


class TestFittedQuantifiers:
    def test_cc_consistency_on_training_data(self, vectorized_corpus):
        X, y = vectorized_corpus
        model = ClassifyAndCount(L2LogisticRegression(C=100.0)).fit(X, y)
        if (model.classifier_.predict(X) == y).all():  # perfect fit
            assert model.quantify(X).pos == pytest.approx(y.mean(), abs=1e-12)

    def test_mlpe_stores_prevalence(self, vectorized_corpus):
        X, y = vectorized_corpus
        model = MaximumLikelihoodPrevalenceEstimator().fit(X, y)
        assert model.train_prevalence_.pos == pytest.approx(y.mean(), abs=1e-12)

    def test_case1_classifier_sees_fewer_documents(self, vectorized_corpus):
        X, y = vectorized_corpus
        model = fit_quantifier("acc", X, y, LR_CONFIG, random_state=5)
        assert model.classifier_.n_samples_ == model.inner_train_size_
        assert model.inner_train_size_ < y.size
        assert model.inner_train_size_ + model.inner_val_size_ == y.size

    @pytest.mark.parametrize("kind", ["cc", "pcc", "acc", "pacc", "emq", "hdy", "mlpe"])
    def test_outputs_valid_and_repeatable(self, kind, vectorized_corpus):
        X, y = vectorized_corpus
        model = fit_quantifier(
            kind, X, y, None if kind == "mlpe" else LR_CONFIG, random_state=1
        )
        sample = X[100:400]
        first = model.quantify(sample)
        second = model.quantify(sample)
        assert 0.0 <= first.pos <= 1.0
        assert first.pos + first.neg == pytest.approx(1.0, abs=1e-12)
        assert first == second  # bit-identical on repeat

    def test_fit_requires_both_classes(self, vectorized_corpus):
        X, _ = vectorized_corpus
        y_single = np.ones(X.shape[0], dtype=np.int8)
        with pytest.raises(ValueError, match="both classes"):
            ClassifyAndCount(L2LogisticRegression()).fit(X, y_single)

    def test_posterior_method_rejects_hard_learner(self, vectorized_corpus):
        from quantlab.learners import SquaredHingeSVM

        X, y = vectorized_corpus
        with pytest.raises(ValueError, match="predict_proba"):
            ProbabilisticClassifyAndCount(SquaredHingeSVM()).fit(X, y)

    def test_acc_pacc_store_rates(self, vectorized_corpus):
        X, y = vectorized_corpus
        acc = fit_quantifier("acc", X, y, LR_CONFIG, random_state=2)
        pacc = fit_quantifier("pacc", X, y, LR_CONFIG, random_state=2)
        for model in (acc, pacc):
            assert abs(model.rates_.tpr - model.rates_.fpr) >= 1e-6

    def test_quantifiers_clone_cleanly(self):
        model = AdjustedClassifyAndCount(L2LogisticRegression(C=2.0), random_state=3)
        copy = clone(model)
        assert copy.get_params()["random_state"] == 3
        assert copy.get_params()["learner"].C == 2.0

    def test_make_quantifier_kinds(self):
        learner = L2LogisticRegression()
        kinds = {
            "cc": ClassifyAndCount,
            "pcc": ProbabilisticClassifyAndCount,
            "acc": AdjustedClassifyAndCount,
            "pacc": ProbabilisticAdjustedClassifyAndCount,
            "emq": ExpectationMaximizationQuantifier,
            "hdy": HellingerDistanceQuantifier,
            "mlpe": MaximumLikelihoodPrevalenceEstimator,
        }
        for kind, cls in kinds.items():
            assert isinstance(make_quantifier(kind, learner), cls)
        with pytest.raises(ValueError, match="unknown quantification method"):
            make_quantifier("quanet", learner)

    def test_unfitted_quantify_rejected(self):
        with pytest.raises(ValueError, match="not fitted"):
            ClassifyAndCount(L2LogisticRegression()).quantify(np.zeros((2, 2)))
