import numpy as np
import pytest

from sawbridge.entropy_model import FactorizedEntropyModel
from sawbridge.rng import substream


class TestFactorizedEntropyModel:
    def test_masses_normalized(self):
        model = FactorizedEntropyModel(5, support=32)
        assert np.max(np.abs(model.pmf().sum(axis=1) - 1.0)) < 1e-12

    def test_normalized_after_logit_updates(self):
        model = FactorizedEntropyModel(3, support=16)
        model.logits += substream(0, "jiggle").normal(0, 5.0, model.logits.shape)
        assert np.max(np.abs(model.pmf().sum(axis=1) - 1.0)) < 1e-12

    def test_initial_profile_peaks_at_zero(self):
        model = FactorizedEntropyModel(1, support=8)
        pmf = model.pmf()[0]
        assert pmf.argmax() == 8
        assert pmf[0] == pytest.approx(pmf[-1])

    def test_bits_of_known_pmf(self):
        model = FactorizedEntropyModel(2, support=4)
        model.logits[:] = 0.0  # uniform over 9 bins
        q = np.array([[0, 3], [-4, 1]])
        bits = model.bits(q)
        assert np.allclose(bits, 2 * np.log2(9))

    def test_bits_requires_support(self):
        model = FactorizedEntropyModel(1, support=2)
        with pytest.raises(ValueError):
            model.bits(np.array([[3]]))

    def test_bits_shape_check(self):
        model = FactorizedEntropyModel(2, support=2)
        with pytest.raises(ValueError):
            model.bits(np.array([[0, 0, 0]]))

    def test_fit_histogram_recovers_frequencies(self):
        model = FactorizedEntropyModel(1, support=4)
        q = np.array([[0]] * 6 + [[1]] * 3 + [[-2]] * 1)
        model.fit_histogram(q)
        pmf = model.pmf()[0]
        assert pmf[4] == pytest.approx(0.6, abs=1e-6)
        assert pmf[5] == pytest.approx(0.3, abs=1e-6)
        assert pmf[2] == pytest.approx(0.1, abs=1e-6)

    def test_fit_histogram_floor_keeps_bits_finite(self):
        model = FactorizedEntropyModel(1, support=4)
        model.fit_histogram(np.zeros((10, 1), dtype=int))
        bits = model.bits(np.array([[4]]))
        assert np.isfinite(bits).all()

    def test_cross_entropy_identity(self):
        # model fitted to the empirical histogram: cross-entropy = plug-in entropy
        rng = substream(1, "samples")
        q = rng.integers(-3, 4, size=(5000, 2))
        model = FactorizedEntropyModel(2, support=8)
        model.fit_histogram(q, floor=0.0)
        mean_bits = model.bits(q).mean()
        entropy = 0.0
        for dim in range(2):
            counts = np.bincount(q[:, dim] + 8, minlength=17)
            p = counts / counts.sum()
            entropy -= np.sum(p[p > 0] * np.log2(p[p > 0]))
        assert mean_bits == pytest.approx(entropy, abs=1e-9)
