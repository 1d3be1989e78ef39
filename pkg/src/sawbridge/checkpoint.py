"""Self-describing binary checkpoints for trained codes.

Layout: 4-byte magic ``SAWB``, u32 little-endian format version, u64
little-endian header length, a UTF-8 JSON header, then the raw array payload.
The header names the estimator class, its constructor parameters, the family
tag, fit metadata, and the name/shape of every array; arrays follow
concatenated as 64-bit little-endian floats in header order, so the file is
readable without this package.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .codes import FixedOrthonormalCode, LinearCode, NeuralCode
from .entropy_model import FactorizedEntropyModel
from .training import AffineStack, DiagonalScaledBasis
from .validation import check_is_fitted

__all__ = ["save_code", "load_code", "FORMAT_VERSION"]

MAGIC = b"SAWB"
FORMAT_VERSION = 1

_CLASSES = {
    "FixedOrthonormalCode": FixedOrthonormalCode,
    "NeuralCode": NeuralCode,
    "LinearCode": LinearCode,
}


def _collect_arrays(code) -> list[tuple[str, np.ndarray]]:
    arrays: list[tuple[str, np.ndarray]] = []
    if isinstance(code, FixedOrthonormalCode):
        pair = code.scaled_basis_
        arrays.append(("basis", pair.base))
        arrays.append(("log_scale", pair.log_scale.data))
    else:
        for role, stack in (("analysis", code.analysis_stack_), ("synthesis", code.synthesis_stack_)):
            for i, (w, b) in enumerate(zip(stack.weights, stack.biases)):
                arrays.append((f"{role}.w{i}", w.data))
                arrays.append((f"{role}.b{i}", b.data))
    arrays.append(("logits", code.entropy_model_.logits))
    return arrays


def save_code(code, path: str) -> None:
    """Write a fitted code to ``path``."""
    check_is_fitted(code, "entropy_model_")
    cls_name = type(code).__name__
    if cls_name not in _CLASSES:
        raise TypeError(f"cannot checkpoint {cls_name}")
    arrays = _collect_arrays(code)
    header = {
        "format_version": FORMAT_VERSION,
        "class": cls_name,
        "family": code.family_tag(),
        "params": code.get_params(),
        "fit_info": {
            "converged": bool(code.converged_),
            "clamp_fraction": float(code.clamp_fraction_),
        },
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_code(path: str):
    """Reconstruct a fitted code from a checkpoint file."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not a code checkpoint")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated array payload")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

    cls = _CLASSES[header["class"]]
    code = cls(**header["params"])
    model = FactorizedEntropyModel(
        arrays["logits"].shape[0], support=(arrays["logits"].shape[1] - 1) // 2
    )
    model.logits[...] = arrays["logits"]
    code.entropy_model_ = model

    if cls is FixedOrthonormalCode:
        pair = DiagonalScaledBasis.from_arrays(arrays["basis"], arrays["log_scale"])
        code.scaled_basis_ = pair
        code._analysis_np = pair.analysis_np
        code._synthesis_np = pair.synthesis_np
    else:
        stacks = {}
        for role in ("analysis", "synthesis"):
            weights, biases = [], []
            i = 0
            while f"{role}.w{i}" in arrays:
                weights.append(arrays[f"{role}.w{i}"])
                biases.append(arrays[f"{role}.b{i}"])
                i += 1
            stacks[role] = AffineStack.from_arrays(weights, biases, code.alpha)
        code.analysis_stack_ = stacks["analysis"]
        code.synthesis_stack_ = stacks["synthesis"]
        code._analysis_np = stacks["analysis"].forward_np
        code._synthesis_np = stacks["synthesis"].forward_np

    code.trace_ = None
    code.converged_ = header["fit_info"]["converged"]
    code.clamp_fraction_ = header["fit_info"]["clamp_fraction"]
    return code
