"""Tests for transducer/CTC losses and the fast-skip gradient rule."""

import itertools
import math

import numpy as np
import pytest

from fastskip.core.config import FsrConfig
from fastskip.core.lattice import Lattice, NodeProbs, enumerate_paths, node_posterior_split
from fastskip.core.logspace import log_softmax, logsumexp
from fastskip.core.losses import (
    BlankPosterior,
    LatticeGrad,
    chain_to_logits,
    ctc_forward,
    ctc_grad,
    ctc_loss_and_grad,
    ctc_min_frames,
    fsr_lattice_grads,
    fsr_surrogate,
    joint_loss,
    transducer_lattice_grads,
    transducer_loss,
)
from fastskip.utils.exceptions import (
    ConfigurationError,
    CtcInfeasibleError,
    LatticeShapeError,
    NonFiniteLossError,
)
from fastskip.utils.gradcheck import numeric_grad, relative_error


def lattice_from_logits(logits: np.ndarray, targets) -> Lattice:
    lp = log_softmax(logits)
    U = len(targets)
    label = lp[:, np.arange(U), list(targets)] if U else np.zeros((lp.shape[0], 0))
    return Lattice.build(NodeProbs.from_arrays(lp[:, :, 0], label))


def ctc_oracle(lp: np.ndarray, targets) -> float:
    """logsumexp over every frame labelling that collapses to ``targets``."""
    T, V1 = lp.shape
    total = []
    for seq in itertools.product(range(V1), repeat=T):
        collapsed = [k for i, k in enumerate(seq) if k != 0 and (i == 0 or seq[i - 1] != k)]
        if collapsed == list(targets):
            total.append(sum(lp[t, k] for t, k in enumerate(seq)))
    return logsumexp(total)


class TestTransducerLoss:
    def test_certain_blank_has_zero_loss(self):
        probs = NodeProbs.from_arrays(np.array([[0.0]]), np.zeros((1, 0)))
        assert transducer_loss(Lattice.build(probs)) == 0.0

    def test_uniform_two_by_one(self):
        half = math.log(0.5)
        probs = NodeProbs.from_arrays(np.full((2, 2), half), np.full((2, 1), half))
        assert transducer_loss(Lattice.build(probs)) == pytest.approx(-math.log(0.25))

    def test_matches_oracle(self, rng, make_node_probs):
        probs, _ = make_node_probs(rng, 3, 2)
        oracle = logsumexp([lp for _, lp in enumerate_paths(probs, 3, 2)])
        assert abs(transducer_loss(Lattice.build(probs)) + oracle) < 1e-8


class TestLatticeGradients:
    def test_classic_gradients_match_finite_differences(self, rng, make_node_probs):
        T, U = 4, 2
        probs, _ = make_node_probs(rng, T, U)
        grads = transducer_lattice_grads(Lattice.build(probs))
        blank_lp = probs.blank_lp.copy()
        label_lp = probs.label_lp.copy()

        def loss_blank(lp):
            return transducer_loss(Lattice.build(NodeProbs.from_arrays(lp, label_lp)))

        def loss_label(lp):
            return transducer_loss(Lattice.build(NodeProbs.from_arrays(blank_lp, lp)))

        _, fd_blank = numeric_grad(loss_blank, blank_lp.copy())
        _, fd_label = numeric_grad(loss_label, label_lp.copy())
        # Steps are taken in log space: d/d log p = p * d/d p.
        by_blank = (grads.d_blank * np.exp(blank_lp)).reshape(-1)
        by_label = (grads.d_label * np.exp(label_lp)).reshape(-1)
        np.testing.assert_allclose(by_blank, fd_blank, rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(by_label, fd_label, rtol=1e-6, atol=1e-9)

    def test_gradients_are_non_positive(self, rng, make_node_probs):
        probs, _ = make_node_probs(rng, 5, 3)
        grads = transducer_lattice_grads(Lattice.build(probs))
        assert np.all(grads.d_blank <= 0.0)
        assert np.all(grads.d_label <= 0.0)

    def test_zero_lambda_is_bit_identical_to_classic(self, rng, make_node_probs):
        probs, _ = make_node_probs(rng, 4, 2)
        lattice = Lattice.build(probs)
        post = BlankPosterior(cb=rng.uniform(size=4))
        fsr = fsr_lattice_grads(lattice, post, FsrConfig(fsr_lambda=0.0))
        classic = transducer_lattice_grads(lattice)
        assert np.array_equal(fsr.d_blank, classic.d_blank)
        assert np.array_equal(fsr.d_label, classic.d_label)

    def test_certain_blank_scales_blank_moves_only(self, rng, make_node_probs):
        probs, _ = make_node_probs(rng, 3, 2)
        lattice = Lattice.build(probs)
        post = BlankPosterior(cb=np.ones(3))
        fsr = fsr_lattice_grads(lattice, post, FsrConfig(fsr_lambda=0.01))
        classic = transducer_lattice_grads(lattice)
        np.testing.assert_allclose(fsr.d_blank, 1.01 * classic.d_blank, rtol=1e-15)
        np.testing.assert_array_equal(fsr.d_label, classic.d_label)

    @pytest.mark.parametrize("lam", [0.001, 0.01, 0.02])
    def test_scaling_law(self, rng, make_node_probs, lam):
        probs, _ = make_node_probs(rng, 5, 3)
        lattice = Lattice.build(probs)
        post = BlankPosterior(cb=rng.uniform(size=5))
        fsr = fsr_lattice_grads(lattice, post, FsrConfig(fsr_lambda=lam))
        classic = transducer_lattice_grads(lattice)
        expected_blank = (1.0 + lam * post.cb)[:, None] * classic.d_blank
        expected_label = (1.0 + lam * post.cnb)[:, None] * classic.d_label
        np.testing.assert_allclose(fsr.d_blank, expected_blank, rtol=1e-12)
        np.testing.assert_allclose(fsr.d_label, expected_label, rtol=1e-12)

    def test_terminal_blank_gradient(self, rng, make_node_probs):
        probs, _ = make_node_probs(rng, 3, 1)
        lattice = Lattice.build(probs)
        logp = -transducer_loss(lattice)
        grads = transducer_lattice_grads(lattice)
        assert grads.d_blank[2, 1] == pytest.approx(-math.exp(lattice.alpha[3, 1] - logp))

    def test_blank_posterior_length_mismatch(self, rng, make_node_probs):
        probs, _ = make_node_probs(rng, 3, 1)
        with pytest.raises(LatticeShapeError):
            fsr_lattice_grads(
                Lattice.build(probs), BlankPosterior(cb=np.ones(4)), FsrConfig()
            )

    def test_negative_lambda_rejected(self):
        with pytest.raises(ConfigurationError):
            FsrConfig(fsr_lambda=-0.1)

    def test_cnb_is_complement(self, rng):
        post = BlankPosterior(cb=rng.uniform(size=6))
        np.testing.assert_allclose(post.cb + post.cnb, 1.0)


class TestSurrogate:
    def test_matches_node_split_sum(self, rng, make_node_probs):
        T, U = 4, 2
        probs, _ = make_node_probs(rng, T, U)
        lattice = Lattice.build(probs)
        post = BlankPosterior(cb=rng.uniform(size=T))
        logp = -transducer_loss(lattice)
        expected = 0.0
        for t in range(1, T + 1):
            for u in range(U + 1):
                nb, b = node_posterior_split(lattice, t, u)
                expected += post.cnb[t - 1] * math.exp(nb - logp)
                expected += post.cb[t - 1] * math.exp(b - logp)
        assert fsr_surrogate(lattice, post) == pytest.approx(expected, rel=1e-10)


class TestChainToLogits:
    def test_hand_softmax_jacobian(self):
        node_lp = np.log(np.full((1, 1, 2), 0.5))
        grad = LatticeGrad(d_blank=np.array([[1.0]]), d_label=np.zeros((1, 0)))
        out = chain_to_logits(grad, node_lp, [])
        np.testing.assert_allclose(out[0, 0], [0.25, -0.25])

    def test_zero_gradient_stays_zero(self, rng):
        node_lp = log_softmax(rng.normal(size=(3, 3, 4)))
        out = chain_to_logits(LatticeGrad.zeros(3, 2), node_lp, [1, 3])
        assert np.all(out == 0.0)

    def test_full_chain_matches_finite_differences(self, rng):
        T, U, V = 4, 2, 3
        targets = [2, 1]
        logits = rng.normal(size=(T, U + 1, V + 1))
        lattice = lattice_from_logits(logits, targets)
        analytic = chain_to_logits(
            transducer_lattice_grads(lattice), log_softmax(logits), targets
        )
        _, fd = numeric_grad(
            lambda z: transducer_loss(lattice_from_logits(z, targets)), logits.copy()
        )
        assert relative_error(analytic, fd) < 1e-4


class TestCtc:
    def test_min_frames_counts_repeats(self):
        assert ctc_min_frames([1, 2, 3]) == 3
        assert ctc_min_frames([1, 1, 2, 2]) == 6
        assert ctc_min_frames([]) == 0

    def test_single_frame(self, rng):
        lp = log_softmax(rng.normal(size=(1, 4)))
        assert ctc_forward(lp, [2]) == pytest.approx(lp[0, 2])

    def test_two_frames_one_label(self, rng):
        lp = log_softmax(rng.normal(size=(2, 4)))
        p = np.exp(lp)
        a = 3
        expected = math.log(p[0, a] * p[1, a] + p[0, 0] * p[1, a] + p[0, a] * p[1, 0])
        assert ctc_forward(lp, [a]) == pytest.approx(expected, abs=1e-12)

    def test_matches_oracle(self, rng):
        V1 = 3
        for T in range(1, 6):
            for targets in ([], [1], [2, 1], [1, 1], [2, 2]):
                if ctc_min_frames(targets) > T:
                    continue
                lp = log_softmax(rng.normal(size=(T, V1)))
                assert abs(ctc_forward(lp, targets) - ctc_oracle(lp, targets)) < 1e-8

    def test_infeasible_alignment_raises(self, rng):
        lp = log_softmax(rng.normal(size=(2, 4)))
        with pytest.raises(CtcInfeasibleError):
            ctc_forward(lp, [1, 1])
        with pytest.raises(CtcInfeasibleError):
            ctc_grad(lp, [1, 2, 3])

    def test_gradient_matches_finite_differences(self, rng):
        targets = [1, 3]
        logits = rng.normal(size=(4, 4))
        _, analytic = ctc_loss_and_grad(log_softmax(logits), targets)
        _, fd = numeric_grad(
            lambda z: -ctc_forward(log_softmax(z), targets), logits.copy()
        )
        assert relative_error(analytic, fd) < 1e-4

    def test_gradient_rows_sum_to_zero(self, rng):
        lp = log_softmax(rng.normal(size=(5, 4)))
        grad = ctc_grad(lp, [2, 2])
        np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)


class TestJointLoss:
    def test_transducer_only(self):
        cfg = FsrConfig(fsr_lambda=0.0, ctc_weight=0.0)
        assert joint_loss(3.5, 2.0, 7.0, cfg) == 3.5

    def test_sum_of_losses(self):
        cfg = FsrConfig(fsr_lambda=0.0, ctc_weight=1.0)
        assert joint_loss(3.5, 2.0, 7.0, cfg) == 5.5

    def test_reported_surrogate_term(self):
        cfg = FsrConfig(fsr_lambda=0.01, ctc_weight=1.0)
        assert joint_loss(3.5, 2.0, 7.0, cfg) == pytest.approx(5.5 + 0.07)

    def test_non_finite_component_rejected(self):
        with pytest.raises(NonFiniteLossError) as exc:
            joint_loss(float("inf"), 1.0, 0.0, FsrConfig())
        assert exc.value.term == "transducer"
