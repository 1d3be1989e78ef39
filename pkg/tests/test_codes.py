import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sawbridge.codes import (
    FixedOrthonormalCode,
    LinearCode,
    NeuralCode,
    evaluate_maps,
    latent_entropies,
    quantize,
)
from sawbridge.entropy_model import FactorizedEntropyModel
from sawbridge.kltcoder import coder_params
from sawbridge.process import eigenvalue_tail, eigenvalues, sample_sawbridge_batch
from sawbridge.rng import substream
from sawbridge.training import DiagonalScaledBasis
from sawbridge.transforms import klt_sampled_basis

TINY = dict(grid_size=64, latent_dims=2, hidden=8, steps=150, batch_size=16,
            support=16, eval_every=50)


class TestQuantize:
    def test_rounds_toward_zero_bin(self):
        q, clamped = quantize(np.array([0.4, -0.4]))
        assert np.array_equal(q, [0.0, -0.0])
        assert clamped == 0

    def test_half_to_even(self):
        q, _ = quantize(np.array([1.5, 2.5, -0.5]))
        assert np.array_equal(q, [2.0, 2.0, -0.0])

    def test_clamp_counts(self):
        q, clamped = quantize(np.array([7.2, 1.0]), support=5)
        assert np.array_equal(q, [5.0, 1.0])
        assert clamped == 1

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            quantize(np.array([np.nan]))


class TestEvaluateMaps:
    def test_zero_rate_code(self):
        # everything maps to latent 0 and reconstructs to 0: entropy ~ 0,
        # distortion = source energy 1/6
        n = 256
        model = FactorizedEntropyModel(1, support=4)
        model.fit_histogram(np.zeros((100, 1), dtype=int), floor=1e-12)
        result = evaluate_maps(
            lambda x: np.zeros((x.shape[0], 1)),
            lambda q: np.zeros((q.shape[0], n)),
            model, n, n_samples=50_000, seed=3,
        )
        assert result.entropy_bits == pytest.approx(0.0, abs=1e-6)
        assert result.distortion == pytest.approx(1 / 6, rel=0.02)
        assert result.clamp_count == 0

    def test_deterministic_given_seed(self):
        n = 64
        model = FactorizedEntropyModel(2, support=8)
        analysis = lambda x: x[:, :2]
        synthesis = lambda q: np.zeros((q.shape[0], n))
        a = evaluate_maps(analysis, synthesis, model, n, 5000, seed=9)
        b = evaluate_maps(analysis, synthesis, model, n, 5000, seed=9)
        assert a == b

    def test_sample_doubling_within_noise(self):
        # Monte Carlo consistency: doubling the sample budget moves the
        # estimate by at most ~2 standard errors.
        n = 128
        base = klt_sampled_basis(n, 3)
        pair = DiagonalScaledBasis(base, init_scale=4.0)
        model = FactorizedEntropyModel(3, support=16)
        u = substream(5, "fit-pool").uniform(size=40_000)
        q, _ = quantize(pair.analysis_np(sample_sawbridge_batch(u, n)), 16)
        model.fit_histogram(q.astype(int))
        small = evaluate_maps(pair.analysis_np, pair.synthesis_np, model, n, 100_000, seed=2)
        large = evaluate_maps(pair.analysis_np, pair.synthesis_np, model, n, 400_000, seed=4)
        # entropy per sample is a few bits with O(1) spread
        sigma = 3.0 / math.sqrt(100_000)
        assert abs(small.entropy_bits - large.entropy_bits) <= 2 * sigma

    def test_klt_code_matches_undithered_oracle(self):
        # sampled eigenbasis, K dims, scale 1/step: entropy equals the
        # closed-form sum of undithered index entropies from the arcsine CDF,
        # and distortion stays within 10% above the coder's target.
        delta = 0.05
        params = coder_params(delta)
        k, n = params.k_coeffs, 1024
        pair = DiagonalScaledBasis(klt_sampled_basis(n, k), init_scale=1.0 / params.step)
        model = FactorizedEntropyModel(k, support=16)
        u = substream(6, "hist-pool").uniform(size=300_000)
        q, _ = quantize(pair.analysis_np(sample_sawbridge_batch(u, n)), 16)
        model.fit_histogram(q.astype(int))
        result = evaluate_maps(pair.analysis_np, pair.synthesis_np, model, n, 200_000, seed=8)

        oracle_bits = 0.0
        for ell in range(1, k + 1):
            amp = math.sqrt(2 * eigenvalues(k)[ell - 1])
            edges = params.step * (np.arange(-16, 17) - 0.5)
            cdf = 0.5 + np.arcsin(np.clip(edges / amp, -1, 1)) / np.pi
            pmf = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
            pmf = pmf[pmf > 1e-15]
            oracle_bits += -float(np.sum(pmf * np.log2(pmf)))
        assert result.entropy_bits == pytest.approx(oracle_bits, abs=0.1)
        assert result.distortion <= 1.1 * delta


class TestMlpForward:
    def test_zero_network_maps_to_zero(self):
        code = NeuralCode(**TINY)
        analysis, _, analysis_np, _, params = code._build()
        for w in code.analysis_stack_.weights:
            w.data[...] = 0.0
        x = substream(1, "x").normal(size=(3, 64))
        assert np.array_equal(analysis_np(x), np.zeros((3, 2)))

    def test_alpha_one_is_affine(self):
        code = NeuralCode(grid_size=16, latent_dims=3, hidden=5, alpha=1.0,
                          steps=1, batch_size=2, support=8, seed=2)
        code._build()
        stack = code.analysis_stack_
        x = substream(2, "x").normal(size=(4, 16))
        # fold the three affine layers into one
        w = stack.weights[0].data @ stack.weights[1].data @ stack.weights[2].data
        b = (stack.biases[0].data @ stack.weights[1].data @ stack.weights[2].data
             + stack.biases[1].data @ stack.weights[2].data + stack.biases[2].data)
        assert np.allclose(stack.forward_np(x), x @ w + b, atol=1e-12)

    def test_matches_independent_reimplementation(self):
        code = NeuralCode(grid_size=12, latent_dims=2, hidden=7, alpha=0.01,
                          steps=1, batch_size=2, support=8, seed=3)
        code._build()
        stack = code.analysis_stack_

        def straight_line(x):
            h = x
            for i, (w, b) in enumerate(zip(stack.weights, stack.biases)):
                h = h @ w.data + b.data
                if i < len(stack.weights) - 1:
                    h = np.where(h > 0, h, 0.01 * h)
            return h

        for trial in range(10):
            x = substream(trial, "probe").normal(size=(1, 12))
            np.testing.assert_allclose(stack.forward_np(x), straight_line(x), atol=1e-12)
            tensor_out = stack(x)
            np.testing.assert_allclose(tensor_out.data, straight_line(x), atol=1e-12)

    def test_dimension_mismatch(self):
        code = NeuralCode(**TINY)
        code._build()
        with pytest.raises(ValueError):
            code.analysis_stack_.forward_np(np.zeros((2, 63)))


class TestEstimators:
    def test_not_fitted_errors(self):
        code = NeuralCode(**TINY)
        with pytest.raises(NotFittedError):
            code.transform(np.zeros((1, 64)))
        with pytest.raises(NotFittedError):
            code.evaluate(n_samples=10)

    def test_sklearn_params_roundtrip(self):
        code = FixedOrthonormalCode(kind="daub4", lam=3.5, grid_size=64, steps=10)
        cloned = clone(code)
        assert cloned.get_params() == code.get_params()

    def test_fit_transform_roundtrip(self):
        code = NeuralCode(lam=5.0, seed=1, **TINY)
        code.fit()
        x = sample_sawbridge_batch(np.array([0.2, 0.8]), 64)
        q = code.transform(x)
        assert q.shape == (2, 2) and q.dtype == np.int64
        recon = code.inverse_transform(q)
        assert recon.shape == (2, 64)

    def test_fit_from_pool(self):
        pool = sample_sawbridge_batch(substream(4, "pool").uniform(size=512), 64)
        code = NeuralCode(lam=5.0, seed=1, **TINY).fit(pool)
        assert code.evaluate(n_samples=2000).distortion <= 0.5

    def test_training_is_deterministic(self):
        traces = []
        for _ in range(2):
            code = NeuralCode(lam=8.0, seed=7, **TINY)
            code.fit()
            traces.append(code.trace_)
        assert traces[0].steps == traces[1].steps
        assert traces[0].surrogate_loss == traces[1].surrogate_loss
        assert traces[0].entropy_bits == traces[1].entropy_bits
        assert traces[0].distortion == traces[1].distortion

    def test_linear_code_equals_single_layer_mlp(self):
        kwargs = dict(lam=6.0, grid_size=64, latent_dims=2, steps=120,
                      batch_size=16, support=16, eval_every=40, seed=5)
        linear = LinearCode(**kwargs).fit()
        mlp = NeuralCode(analysis_depth=1, synthesis_depth=1, alpha=1.0,
                         hidden=1, **kwargs).fit()
        assert linear.trace_.surrogate_loss == mlp.trace_.surrogate_loss
        assert linear.trace_.entropy_bits == mlp.trace_.entropy_bits

    def test_family_tags(self):
        assert LinearCode().family_tag() == "arbitrary-linear"
        assert NeuralCode().family_tag() == "nonlinear-mlp"
        assert NeuralCode(analysis_depth=1).family_tag() == "hybrid-linear-analysis"
        assert FixedOrthonormalCode(kind="daub4").family_tag() == "daub4"

    def test_fixed_code_trains_scale_only(self):
        code = FixedOrthonormalCode(kind="klt-sampled", lam=30.0, grid_size=64,
                                    latent_dims=8, steps=200, batch_size=16,
                                    support=16, eval_every=100, seed=2)
        code.fit()
        assert code.scale_.shape == (8,)
        ev = code.evaluate(n_samples=5000)
        assert ev.distortion < 1 / 6

    def test_active_dimensions_zero_rate(self):
        # strong rate pressure collapses a tiny code to zero active dims
        code = NeuralCode(lam=0.01, seed=3, **TINY)
        code.fit()
        assert code.active_dimensions(n_samples=5000) == 0

    def test_latent_entropies_shape(self):
        code = NeuralCode(lam=5.0, seed=1, **TINY).fit()
        ent = code.latent_report(n_samples=4000)
        assert ent.shape == (2,)
        assert np.all(ent >= 0)
