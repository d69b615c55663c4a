import numpy as np
import pytest

import modkernel.autodiff as ad
from modkernel.errors import ConfigurationError
from modkernel.losses import (DecomposableLoss, LabeledSet, make_loss,
                              monotonicity_audit, multiclass_xe, risk,
                              risk_tensor)


class TestMakeLoss:
    def test_xe2_at_zero(self):
        loss = make_loss("xe2")
        assert loss.ell_plus(0.0) == pytest.approx(np.log(2.0))
        assert loss.ell_minus(0.0) == pytest.approx(np.log(2.0))

    def test_hinge_at_one(self):
        loss = make_loss("hinge")
        assert loss.ell_plus(1.0) == 0.0
        assert loss.ell_minus(1.0) == 2.0

    def test_tanh_mse_limits(self):
        loss = make_loss("tanh-mse")
        assert loss.ell_plus(30.0) == pytest.approx(0.0, abs=1e-12)
        assert loss.ell_minus(30.0) == pytest.approx(4.0, abs=1e-12)

    def test_underscore_alias(self):
        assert make_loss("tanh_mse").kind == "tanh-mse"

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            make_loss("focal")

    def test_negative_lambda_rejected(self):
        with pytest.raises(ConfigurationError):
            make_loss("hinge", lam=-0.1)


class TestRisk:
    def _set(self, y):
        y = np.asarray(y)
        return LabeledSet.from_binary_labels(np.zeros((y.size, 1)), y)

    def test_satisfied_hinge_margins(self):
        labeled = self._set([1, 1, 0, 0])
        scores = np.array([2.0, 2.0, -2.0, -2.0])
        assert risk(make_loss("hinge"), scores, labeled) == 0.0

    def test_xe2_at_zero_scores(self):
        labeled = self._set([1, 0])
        assert risk(make_loss("xe2"), np.zeros(2), labeled) == pytest.approx(
            np.log(2.0))

    def test_matches_term_by_term_loop(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 12)
        scores = rng.standard_normal(12)
        labeled = self._set(y)
        for kind in ("xe2", "tanh-mse", "hinge"):
            loss = make_loss(kind, lam=0.3)
            total = 0.0
            for i, s in enumerate(scores):
                term = loss.ell_plus(s) if y[i] == 1 else loss.ell_minus(s)
                total += float(term) / len(y)
            total += 0.3 * 1.7
            assert risk(loss, scores, labeled, w_norm=1.7) == pytest.approx(
                total, abs=1e-12)

    def test_permutation_invariance_within_sets(self):
        rng = np.random.default_rng(1)
        y = np.array([1, 1, 1, 0, 0])
        scores = rng.standard_normal(5)
        labeled = self._set(y)
        loss = make_loss("xe2")
        base = risk(loss, scores, labeled)
        swapped = scores.copy()
        swapped[[0, 2]] = swapped[[2, 0]]  # both in I+
        swapped[[3, 4]] = swapped[[4, 3]]  # both in I-
        assert risk(loss, swapped, labeled) == pytest.approx(base, abs=1e-12)

    def test_lambda_zero_ignores_weight_norm(self):
        labeled = self._set([1, 0])
        loss = make_loss("hinge", lam=0.0)
        scores = np.array([0.3, -0.2])
        assert risk(loss, scores, labeled, w_norm=0.0) == risk(
            loss, scores, labeled, w_norm=1e6)

    def test_lambda_scales_penalty(self):
        labeled = self._set([1, 0])
        loss = make_loss("hinge", lam=0.5)
        base = risk(make_loss("hinge"), np.zeros(2), labeled)
        assert risk(loss, np.zeros(2), labeled, w_norm=2.0) == pytest.approx(
            base + 1.0)


class TestMulticlassXe:
    def test_uniform_logits(self):
        logits = np.zeros((4, 10))
        assert multiclass_xe(logits, np.zeros(4, dtype=int)) == pytest.approx(
            np.log(10.0))

    def test_dominant_correct_logit(self):
        logits = np.full((3, 4), -30.0)
        labels = np.array([0, 1, 2])
        logits[np.arange(3), labels] = 30.0
        assert multiclass_xe(logits, labels) == pytest.approx(0.0, abs=1e-12)

    def test_matches_log_sum_exp_oracle(self):
        rng = np.random.default_rng(2)
        logits = rng.standard_normal((4, 3)) * 5
        labels = rng.integers(0, 3, 4)
        total = 0.0
        for i in range(4):
            total += np.log(np.exp(logits[i]).sum()) - logits[i, labels[i]]
        assert multiclass_xe(logits, labels) == pytest.approx(
            total / 4.0, abs=1e-12)

    def test_two_class_softmax_identity_with_xe2_risk(self):
        # score t as two-class logits (0, t), positive = class 1
        rng = np.random.default_rng(3)
        scores = rng.standard_normal(10) * 2
        y = rng.integers(0, 2, 10)
        labeled = LabeledSet.from_binary_labels(np.zeros((10, 1)), y)
        decomposed = risk(make_loss("xe2"), scores, labeled)
        logits = np.stack([np.zeros(10), scores], axis=1)
        assert decomposed == pytest.approx(multiclass_xe(logits, y), abs=1e-12)


class TestRiskTensor:
    @pytest.mark.parametrize("kind", ("xe2", "tanh-mse", "hinge"))
    def test_matches_plain_risk(self, kind):
        rng = np.random.default_rng(4)
        y = rng.integers(0, 2, 9)
        scores = rng.standard_normal((9, 1))
        labeled = LabeledSet.from_binary_labels(np.zeros((9, 1)), y)
        loss = make_loss(kind)
        plain = risk(loss, scores, labeled)
        graph = risk_tensor(loss, ad.Tensor(scores), y == 1)
        assert graph.item() == pytest.approx(plain, abs=1e-12)

    def test_penalty_needs_weights(self):
        loss = make_loss("hinge", lam=0.1)
        with pytest.raises(ConfigurationError):
            risk_tensor(loss, ad.Tensor(np.zeros((2, 1))),
                        np.array([True, False]))


class TestMonotonicityAudit:
    def test_builtin_losses_clean_on_dense_grid(self):
        grid = np.arange(-10.0, 10.0 + 1e-9, 0.01)
        for kind in ("xe2", "tanh-mse", "hinge"):
            report = monotonicity_audit(make_loss(kind), grid)
            assert report.passed, report.violations[:3]

    def test_broken_loss_is_reported(self):
        broken = DecomposableLoss("broken", ell_plus=lambda t: np.asarray(t),
                                  ell_minus=lambda t: np.asarray(t))
        report = monotonicity_audit(broken, np.linspace(-1, 1, 11))
        assert not report.passed
        assert all(v[0] == "ell_plus" for v in report.violations)

    def test_single_interval_hinge(self):
        report = monotonicity_audit(make_loss("hinge"), [0.0, 1.0])
        assert report.passed

    def test_unsorted_grid_rejected(self):
        with pytest.raises(ConfigurationError):
            monotonicity_audit(make_loss("hinge"), [1.0, 0.0])

    def test_decreasing_g_is_reported(self):
        loss = make_loss("hinge", lam=0.1, g=lambda t: -t)
        report = monotonicity_audit(loss, np.linspace(0, 1, 5))
        assert any(v[0] == "g" for v in report.violations)
