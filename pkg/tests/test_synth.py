import numpy as np
import pytest

from homkit import geometry as geo
from homkit import synth
from homkit.errors import ImageTooSmall

from test_geometry import naive_warp


def smooth_image(seed, w=320, h=240):
    rng = np.random.default_rng(seed)
    img = rng.uniform(-1, 1, (h, w))
    k = np.ones(5) / 5
    img = np.apply_along_axis(lambda r: np.convolve(r, k, mode="same"), 1, img)
    img = np.apply_along_axis(lambda c: np.convolve(c, k, mode="same"), 0, img)
    return np.clip(img, -1, 1).astype(np.float32)[None]


class TestGeneratePair:
    def test_rho_zero_identity(self):
        img = smooth_image(1)
        pair = synth.generate_pair(img, synth.GenConfig(rho=0), np.random.default_rng(2))
        assert np.array_equal(pair.original, pair.warped)
        assert np.all(pair.target == 0.0)

    def test_determinism(self):
        img = smooth_image(2)
        cfg = synth.GenConfig()
        a = synth.generate_pair(img, cfg, np.random.default_rng(9))
        b = synth.generate_pair(img, cfg, np.random.default_rng(9))
        assert np.array_equal(a.original, b.original)
        assert np.array_equal(a.warped, b.warped)
        assert np.array_equal(a.target, b.target)
        assert np.array_equal(a.h_target, b.h_target)

    def test_consistency_invariant(self):
        img = smooth_image(3)
        for seed in range(5):
            pair = synth.generate_pair(img, synth.GenConfig(),
                                       np.random.default_rng(seed))
            back = geo.hmat_to_h4pt(pair.h_target, pair.corners)
            assert np.abs(back - pair.target).max() < 1e-4

    def test_target_within_rho(self):
        img = smooth_image(4)
        for seed in range(10):
            pair = synth.generate_pair(img, synth.GenConfig(rho=16),
                                       np.random.default_rng(seed))
            assert np.abs(pair.target).max() <= 16.0

    def test_corners_respect_margin(self):
        img = smooth_image(5)
        for seed in range(10):
            pair = synth.generate_pair(img, synth.GenConfig(),
                                       np.random.default_rng(seed))
            c = pair.corners
            assert c[:, 0].min() >= 32 and c[:, 0].max() <= 320 - 1 - 32
            assert c[:, 1].min() >= 32 and c[:, 1].max() <= 240 - 1 - 32

    def test_warped_matches_independent_recomputation(self):
        img = smooth_image(6, w=96, h=96)
        cfg = synth.GenConfig(patch_size=32, rho=16)
        pair = synth.generate_pair(img, cfg, np.random.default_rng(10))
        full = naive_warp(img.astype(float), np.linalg.inv(pair.h_target), 96, 96)
        x0, y0 = int(pair.corners[0, 0]), int(pair.corners[0, 1])
        ref = np.clip(full[:, y0:y0 + 32, x0:x0 + 32], -1, 1)
        assert np.allclose(pair.warped, ref, atol=1e-6)

    def test_image_too_small(self):
        img = smooth_image(7, w=100, h=100)
        with pytest.raises(ImageTooSmall):
            synth.generate_pair(img, synth.GenConfig(patch_size=128, rho=32),
                                np.random.default_rng(0))


class TestNoise:
    def test_eta_zero_identity(self):
        img = smooth_image(8)
        out = synth.add_noise(img, 0.0, np.random.default_rng(1))
        assert np.array_equal(out, img)

    def test_clip_upper_bound(self):
        img = np.ones((1, 32, 32), dtype=np.float32)
        out = synth.add_noise(img, 0.5, np.random.default_rng(2))
        assert out.max() <= 1.0

    def test_monte_carlo_std(self):
        img = np.zeros((1, 1000, 1000), dtype=np.float32)
        out = synth.add_noise(img, 0.1, np.random.default_rng(3))
        std = float(out.std())
        assert 0.099 <= std <= 0.101


class TestIllumination:
    def test_lambda_one_identity(self):
        img = smooth_image(9)
        assert np.allclose(synth.shift_illumination(img, 1.0), img)

    def test_direct_arithmetic(self):
        img = np.full((1, 4, 4), 0.5, dtype=np.float32)
        assert np.allclose(synth.shift_illumination(img, 1.2), 0.6)

    def test_clipping(self):
        img = np.full((1, 4, 4), 0.8, dtype=np.float32)
        assert np.allclose(synth.shift_illumination(img, 1.6), 1.0)


class TestOcclude:
    def test_alpha_zero_identity(self):
        img = smooth_image(10, w=128, h=128)
        out = synth.occlude(img, 0.0, np.random.default_rng(1))
        assert np.array_equal(out, img)

    def test_alpha_one_constant(self):
        img = smooth_image(11, w=128, h=128)
        out = synth.occlude(img, 1.0, np.random.default_rng(2))
        assert len(np.unique(out)) == 1

    def test_box_side_from_area_fraction(self):
        img = np.zeros((1, 128, 128), dtype=np.float32)
        out = synth.occlude(img, 0.25, np.random.default_rng(3))
        changed = out != 0.0
        ys, xs = np.nonzero(changed[0])
        # n = round(128 * sqrt(0.25)) = 64
        assert ys.max() - ys.min() + 1 == 64
        assert xs.max() - xs.min() + 1 == 64


class TestApplyCorruption:
    def _pair(self):
        img = smooth_image(12)
        return synth.generate_pair(img, synth.GenConfig(), np.random.default_rng(4))

    def test_none_unchanged(self):
        pair = self._pair()
        out = synth.apply_corruption(pair, synth.CorruptionSpec("none"), None)
        assert out is pair

    def test_illumination_original_untouched(self):
        pair = self._pair()
        out = synth.apply_corruption(pair, synth.CorruptionSpec("illumination", 1.4),
                                     np.random.default_rng(5))
        assert np.array_equal(out.original, pair.original)
        assert not np.array_equal(out.warped, pair.warped)

    def test_occlusion_original_untouched(self):
        pair = self._pair()
        out = synth.apply_corruption(pair, synth.CorruptionSpec("occlusion", 0.4),
                                     np.random.default_rng(6))
        assert np.array_equal(out.original, pair.original)

    def test_noise_determinism(self):
        pair = self._pair()
        spec = synth.CorruptionSpec("noise", 0.3)
        a = synth.apply_corruption(pair, spec, np.random.default_rng(7))
        b = synth.apply_corruption(pair, spec, np.random.default_rng(7))
        assert np.array_equal(a.original, b.original)
        assert np.array_equal(a.warped, b.warped)

    def test_target_never_mutated(self):
        pair = self._pair()
        for spec in (synth.CorruptionSpec("noise", 0.5),
                     synth.CorruptionSpec("illumination", 1.6),
                     synth.CorruptionSpec("occlusion", 0.6)):
            out = synth.apply_corruption(pair, spec, np.random.default_rng(8))
            assert np.array_equal(out.target, pair.target)
            assert np.array_equal(out.h_target, pair.h_target)

    def test_outputs_in_range(self):
        pair = self._pair()
        grid = ([synth.CorruptionSpec("noise", e) for e in (0.1, 0.3, 0.5)]
                + [synth.CorruptionSpec("illumination", l) for l in (1.2, 1.4, 1.6)]
                + [synth.CorruptionSpec("occlusion", a) for a in (0.2, 0.4, 0.6)])
        for spec in grid:
            out = synth.apply_corruption(pair, spec, np.random.default_rng(9))
            for img in (out.original, out.warped):
                assert img.min() >= -1.0 and img.max() <= 1.0

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            synth.CorruptionSpec("noise", 1.5)
        with pytest.raises(ValueError):
            synth.CorruptionSpec("illumination", 0.0)
        with pytest.raises(ValueError):
            synth.CorruptionSpec("blur", 1.0)
