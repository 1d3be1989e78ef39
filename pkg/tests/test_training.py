import numpy as np
import pytest

from sawbridge.autodiff import Tensor
from sawbridge.codes import NeuralCode
from sawbridge.entropy_model import FactorizedEntropyModel
from sawbridge.process import sample_sawbridge_batch
from sawbridge.rng import substream
from sawbridge.training import (
    AffineStack,
    TrainConfig,
    TrainingDiverged,
    TrainTrace,
    surrogate_loss,
)


def tiny_setup(seed=0, n=8, d=2, batch=4, hidden=6, support=8):
    rng = substream(seed, "init")
    analysis = AffineStack([n, hidden, hidden, d], 0.01, rng)
    synthesis = AffineStack([d, hidden, hidden, n], 0.01, rng)
    model = FactorizedEntropyModel(d, support=support)
    model.logits += substream(seed, "jiggle").normal(0, 0.3, model.logits.shape)
    logits = Tensor(model.logits, requires_grad=True)
    x = sample_sawbridge_batch(substream(seed, "u").uniform(size=batch), n)
    noise = substream(seed, "noise").uniform(-0.5, 0.5, (batch, d))
    return analysis, synthesis, model, logits, x, noise


class TestSurrogateLoss:
    def test_zero_multiplier_leaves_rate_only(self):
        analysis, synthesis, model, logits, x, noise = tiny_setup()
        loss, rate, dist, _ = surrogate_loss(
            x, analysis, synthesis, model, logits, 1e-12, noise
        )
        assert float(loss.data) == pytest.approx(float(rate.data), rel=1e-9)
        assert float(dist.data) > 0

    def test_uniform_model_rate_is_exact(self):
        analysis, synthesis, model, logits, x, noise = tiny_setup()
        model.logits[:] = 0.0
        _, rate, _, _ = surrogate_loss(x, analysis, synthesis, model, logits, 1.0, noise)
        bins = 2 * model.support + 1
        assert float(rate.data) == pytest.approx(model.dims * np.log2(bins), abs=1e-12)

    def test_out_of_support_latents_are_counted(self):
        analysis, synthesis, model, logits, x, noise = tiny_setup()
        for w in analysis.weights:
            w.data *= 200.0  # push latents far outside the support
        _, _, _, clamped = surrogate_loss(x, analysis, synthesis, model, logits, 1.0, noise)
        assert clamped > 0

    def test_loss_is_finite_under_extreme_latents(self):
        analysis, synthesis, model, logits, x, noise = tiny_setup()
        for w in analysis.weights:
            w.data *= 1e6
        loss, _, _, _ = surrogate_loss(x, analysis, synthesis, model, logits, 1.0, noise)
        assert np.isfinite(float(loss.data))


class TestTrainLoop:
    def test_divergence_raises_with_diagnostics(self):
        code = NeuralCode(lam=50.0, grid_size=32, latent_dims=2, hidden=8,
                          steps=200, batch_size=8, support=8, eval_every=100,
                          learning_rate=1e9, seed=0)
        with pytest.raises(TrainingDiverged) as err:
            code.fit()
        assert err.value.step >= 1
        assert err.value.param_norms

    def test_trace_strictly_increasing_steps(self):
        trace = TrainTrace()
        trace.append(10, 1.0, 0.5, 0.1)
        with pytest.raises(ValueError):
            trace.append(10, 0.9, 0.5, 0.1)

    def test_trace_csv_roundtrip(self, tmp_path):
        trace = TrainTrace()
        trace.append(1, 2.5, 1.25, 0.05)
        trace.append(2, 2.25, 1.0, 0.04)
        path = tmp_path / "trace.csv"
        trace.write_csv(str(path))
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "step,surrogate_loss,entropy_bits,distortion"
        assert lines[1].startswith("1,2.5,1.25,")

    def test_converged_flag_true_on_smooth_run(self):
        code = NeuralCode(lam=5.0, grid_size=32, latent_dims=2, hidden=8,
                          steps=300, batch_size=16, support=16, eval_every=100, seed=1)
        code.fit()
        assert code.converged_ in (True, False)
        assert 0.0 <= code.clamp_fraction_ <= 1.0


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(lam=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(lam=1.0, steps=0)

    def test_file_roundtrip(self, tmp_path):
        config = TrainConfig(lam=15.5, steps=1234, batch_size=32, seed=9,
                             latent_dims=4, grid_size=128)
        path = tmp_path / "train.cfg"
        config.to_file(str(path))
        loaded = TrainConfig.from_file(str(path))
        assert loaded == config

    def test_file_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("lam = 1.0\nwibble = 3\n")
        with pytest.raises(ValueError):
            TrainConfig.from_file(str(path))

    def test_file_comments_and_overrides(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text("# comment\nlam = 2.0\nsteps = 10\n")
        loaded = TrainConfig.from_file(str(path), seed=77)
        assert loaded.lam == 2.0 and loaded.steps == 10 and loaded.seed == 77
