"""Entropy-distortion laboratory for the sawbridge process.

Analytic machinery (exact tradeoff curve, KLT coder bounds) lives in
``optimal``, ``process`` and ``kltcoder``; trainable transform codes with a
factorized entropy model live in ``codes``/``training``; ``sweep`` and
``cli`` orchestrate reproducible experiments.
"""

__version__ = "0.1.0"

from .codes import (
    CodeEvaluation,
    FixedOrthonormalCode,
    LinearCode,
    NeuralCode,
    evaluate_maps,
    quantize,
)
from .entropy_model import FactorizedEntropyModel
from .kltcoder import (
    KltCoderParams,
    arcsine_uniform_entropy,
    coder_params,
    dithered_decode,
    dithered_encode,
    quantizer_step_constant,
    separate_coding_rate,
    separate_coding_rate_limit,
)
from .optimal import (
    EntropyDistortionPoint,
    conditional_mean_decode,
    entropy_distortion,
    interval_encode,
    interval_encoder_distortion,
    lce_entropy_distortion,
)
from .process import (
    KltBasis,
    autocorrelation,
    klt_basis,
    klt_coefficient_analytic,
    klt_coefficient_numeric,
    klt_reconstruct,
    sample_sawbridge,
)
from .sweep import SweepSpec, compare_curves, emit_realizations, run_sweep

__all__ = [
    "__version__",
    "CodeEvaluation",
    "FixedOrthonormalCode",
    "LinearCode",
    "NeuralCode",
    "evaluate_maps",
    "quantize",
    "FactorizedEntropyModel",
    "KltCoderParams",
    "arcsine_uniform_entropy",
    "coder_params",
    "dithered_decode",
    "dithered_encode",
    "quantizer_step_constant",
    "separate_coding_rate",
    "separate_coding_rate_limit",
    "EntropyDistortionPoint",
    "conditional_mean_decode",
    "entropy_distortion",
    "interval_encode",
    "interval_encoder_distortion",
    "lce_entropy_distortion",
    "KltBasis",
    "autocorrelation",
    "klt_basis",
    "klt_coefficient_analytic",
    "klt_coefficient_numeric",
    "klt_reconstruct",
    "sample_sawbridge",
    "SweepSpec",
    "compare_curves",
    "emit_realizations",
    "run_sweep",
]
