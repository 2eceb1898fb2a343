import numpy as np
import pytest

from homkit.errors import (
    BadMagic,
    DuplicateName,
    ShapeMismatch,
    TruncatedFile,
    VersionUnsupported,
)
from homkit.nn import (
    WeightStore,
    batchnorm_inference,
    conv2d,
    linear,
    load_weights,
    maxpool2,
    relu,
    save_weights,
)


def naive_conv2d(x, w, b):
    """Six-nested-loop reference convolution (3x3, stride 1, pad 1)."""
    n, c, h, wd = x.shape
    o = w.shape[0]
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((n, o, h, wd))
    for ni in range(n):
        for oi in range(o):
            for y in range(h):
                for xx in range(wd):
                    acc = float(b[oi])
                    for ci in range(c):
                        for ky in range(3):
                            for kx in range(3):
                                acc += w[oi, ci, ky, kx] * xp[ni, ci, y + ky, xx + kx]
                    out[ni, oi, y, xx] = acc
    return out


class TestConv2d:
    def test_delta_kernel_identity(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1, 1, 8, 8)).astype(np.float32)
        w = np.zeros((1, 1, 3, 3), dtype=np.float32)
        w[0, 0, 1, 1] = 1.0
        out = conv2d(x, w, np.zeros(1, dtype=np.float32))
        assert np.allclose(out, x)

    def test_all_ones_hand_count(self):
        x = np.ones((1, 1, 3, 3), dtype=np.float32)
        w = np.ones((1, 1, 3, 3), dtype=np.float32)
        out = conv2d(x, w, np.zeros(1, dtype=np.float32))[0, 0]
        assert out[1, 1] == 9
        assert out[0, 0] == out[0, 2] == out[2, 0] == out[2, 2] == 4
        assert out[0, 1] == out[1, 0] == out[1, 2] == out[2, 1] == 6

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n, c, o = rng.integers(1, 3), int(rng.integers(1, 4)), int(rng.integers(1, 4))
            h, wd = int(rng.integers(3, 9)), int(rng.integers(3, 9))
            x = rng.normal(size=(n, c, h, wd)).astype(np.float32)
            w = rng.normal(size=(o, c, 3, 3)).astype(np.float32)
            b = rng.normal(size=o).astype(np.float32)
            out = conv2d(x, w, b)
            ref = naive_conv2d(x, w, b)
            denom = np.maximum(np.abs(ref), 1.0)
            assert np.max(np.abs(out - ref) / denom) < 1e-5

    def test_shape_mismatch(self):
        x = np.zeros((1, 2, 4, 4), dtype=np.float32)
        w = np.zeros((3, 1, 3, 3), dtype=np.float32)
        with pytest.raises(ShapeMismatch):
            conv2d(x, w, np.zeros(3, dtype=np.float32))
        with pytest.raises(ShapeMismatch):
            conv2d(x, np.zeros((3, 2, 5, 5), dtype=np.float32),
                   np.zeros(3, dtype=np.float32))


class TestSimpleKernels:
    def test_relu(self):
        assert np.array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_maxpool2(self):
        x = np.array([[1, 2], [3, 4]], dtype=np.float32).reshape(1, 1, 2, 2)
        assert maxpool2(x)[0, 0, 0, 0] == 4

    def test_maxpool2_odd_raises(self):
        with pytest.raises(ShapeMismatch):
            maxpool2(np.zeros((1, 1, 3, 4), dtype=np.float32))

    def test_batchnorm_neutral_statistics(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(1, 4, 5, 5)).astype(np.float32)
        ones = np.ones(4, dtype=np.float32)
        zeros = np.zeros(4, dtype=np.float32)
        out = batchnorm_inference(x, ones, zeros, zeros, ones - np.float32(1e-5))
        assert np.allclose(out, x, atol=1e-6)

    def test_linear(self):
        x = np.array([[1.0, 2.0]], dtype=np.float32)
        w = np.array([[3.0, 4.0], [5.0, 6.0]], dtype=np.float32)
        b = np.array([1.0, -1.0], dtype=np.float32)
        assert np.allclose(linear(x, w, b), [[12.0, 16.0]])

    def test_finite_outputs(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 3, 6, 6)).astype(np.float32)
        w = rng.normal(size=(5, 3, 3, 3)).astype(np.float32)
        out = conv2d(x, w, rng.normal(size=5).astype(np.float32))
        assert np.all(np.isfinite(out))


class TestWeightFormat:
    def _random_store(self, seed=0):
        rng = np.random.default_rng(seed)
        store = WeightStore()
        store.add("conv1.weight", rng.normal(size=(4, 2, 3, 3)).astype(np.float32))
        store.add("conv1.bias", rng.normal(size=4).astype(np.float32))
        store.add("fc.weight", rng.normal(size=(8, 64)).astype(np.float32))
        return store

    def test_round_trip_bit_exact(self, tmp_path):
        store = self._random_store()
        path = tmp_path / "w.hwts"
        save_weights(store, path)
        loaded = load_weights(path)
        assert loaded.names() == store.names()
        for name, tensor in store.items():
            assert np.array_equal(loaded[name], tensor)
            assert loaded[name].dtype == np.float32

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.hwts"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(BadMagic):
            load_weights(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v9.hwts"
        path.write_bytes(b"HWTS" + (9).to_bytes(4, "little")
                         + (0).to_bytes(4, "little"))
        with pytest.raises(VersionUnsupported):
            load_weights(path)

    def test_truncated_payload(self, tmp_path):
        store = self._random_store()
        path = tmp_path / "w.hwts"
        save_weights(store, path)
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        with pytest.raises(TruncatedFile):
            load_weights(path)

    def test_duplicate_name(self):
        store = WeightStore()
        store.add("a", np.zeros(3, dtype=np.float32))
        with pytest.raises(DuplicateName):
            store.add("a", np.zeros(3, dtype=np.float32))
