import numpy as np
import pytest

from sawbridge.process import grid_points
from sawbridge.rng import substream
from sawbridge.training import DiagonalScaledBasis
from sawbridge.transforms import daub4_basis, dct2_basis, klt_sampled_basis, orthonormal_basis


def grid_gram(rows):
    return rows @ rows.T / rows.shape[1]


class TestBases:
    @pytest.mark.parametrize("kind", ["dct2", "daub4", "klt-sampled"])
    def test_full_gram_is_identity(self, kind):
        rows = orthonormal_basis(kind, 256)
        gram = grid_gram(rows)
        assert np.max(np.abs(gram - np.eye(256))) < 1e-10

    def test_dct_identity_tight(self):
        rows = dct2_basis(128)
        assert np.max(np.abs(grid_gram(rows) - np.eye(128))) < 1e-12

    def test_klt_first_row(self):
        n = 1024
        rows = klt_sampled_basis(n, 4)
        expected = np.sqrt(2) * np.sin(np.pi * grid_points(n))
        expected /= np.sqrt(np.mean(expected**2))
        assert np.max(np.abs(rows[0] - expected)) <= 1e-6

    def test_daub4_annihilates_constants(self):
        rows = daub4_basis(64)
        coeffs = rows @ np.ones(64) / 64
        # row 0 is the scaling function; all detail rows kill constants
        assert np.max(np.abs(coeffs[1:])) < 1e-12
        assert abs(coeffs[0]) > 0.5

    def test_daub4_requires_power_of_two(self):
        with pytest.raises(ValueError):
            daub4_basis(48)

    def test_dimension_checks(self):
        with pytest.raises(ValueError):
            orthonormal_basis("dct2", 16, 17)
        with pytest.raises(ValueError):
            orthonormal_basis("nope", 16)
        with pytest.raises(ValueError):
            orthonormal_basis("dct2", 0)

    @pytest.mark.parametrize("kind", ["dct2", "daub4", "klt-sampled"])
    def test_truncation_takes_leading_rows(self, kind):
        full = orthonormal_basis(kind, 64)
        part = orthonormal_basis(kind, 64, 5)
        assert np.array_equal(part, full[:5])


class TestScaledPair:
    def test_roundtrip_identity_without_quantization(self):
        n = 128
        pair = DiagonalScaledBasis(orthonormal_basis("dct2", n), init_scale=3.0)
        x = substream(1, "x").normal(size=(4, n))
        recon = pair.synthesis_np(pair.analysis_np(x))
        assert np.max(np.abs(recon - x)) < 1e-6

    def test_retained_subspace_identity(self):
        n, d = 128, 10
        base = orthonormal_basis("klt-sampled", n, d)
        pair = DiagonalScaledBasis(base, init_scale=0.5)
        mix = substream(2, "mix").normal(size=(6, d))
        x = mix @ base  # inside the retained span
        recon = pair.synthesis_np(pair.analysis_np(x))
        assert np.max(np.abs(recon - x)) < 1e-6

    def test_autodiff_paths_match_numpy(self):
        n, d = 32, 8
        pair = DiagonalScaledBasis(orthonormal_basis("daub4", n, d), init_scale=2.0)
        x = substream(3, "x2").normal(size=(5, n))
        y = pair.analysis(x)
        assert np.allclose(y.data, pair.analysis_np(x))
        assert np.allclose(pair.synthesis(y.data).data, pair.synthesis_np(pair.analysis_np(x)))
