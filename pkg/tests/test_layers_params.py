"""Parameter-tree naming, checkpoint serialization, and layer primitives."""

import struct

import numpy as np
import pytest

from refinery import autodiff as ad
from refinery.autodiff import Tensor
from refinery.errors import FormatError, InputError
from refinery.layers import (Conv, Dense, PositionEmbedding, ResidualBlock,
                             SelfAttentionBlock, coordinate_map, fan_in_uniform)
from refinery.model import RefinementConfig, RefinerNetwork
from refinery.params import (assign_params, check_tree, load_checkpoint,
                             param_count, save_checkpoint, zero_grads)

CFG = RefinementConfig(channels=8, prior_dim=16, downsample_levels=2, attn_downsample=2)


def rng_for(tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([20240603, tag])))


def small_net(tag: int = 0) -> RefinerNetwork:
    return RefinerNetwork(CFG, rng_for(tag))


class TestNamedParams:
    def test_names_unique_and_non_empty(self):
        tree = small_net(1).named_params()
        names = [n for n, _ in tree]
        assert len(names) == len(set(names))
        assert len(names) > 10
        check_tree(tree)

    def test_order_is_deterministic(self):
        a = [n for n, _ in small_net(2).named_params()]
        b = [n for n, _ in small_net(2).named_params()]
        assert a == b

    def test_list_attributes_get_indexed_names(self):
        names = [n for n, _ in small_net(3).named_params()]
        assert "encoder.0.weight" in names
        assert "encoder.0.bias" in names
        assert any(n.startswith("short_blocks.1.") for n in names)

    def test_duplicate_names_rejected(self):
        t = Tensor(np.zeros(3, dtype=np.float32), requires_grad=True)
        with pytest.raises(InputError, match="duplicate"):
            check_tree([("w", t), ("w", t)])

    def test_zero_grads_clears_accumulation(self):
        w = Tensor(np.ones(4, dtype=np.float32), requires_grad=True)
        ad.backward(ad.mean(ad.mul(w, w)))
        assert w.grad is not None
        zero_grads([("w", w)])
        assert w.grad is None


class TestCheckpointRoundTrip:
    def test_bitwise_round_trip(self, tmp_path):
        net = small_net(10)
        path = tmp_path / "weights.ptgc"
        save_checkpoint(path, net.named_params())
        loaded = load_checkpoint(path)
        tree = net.named_params()
        assert list(loaded.keys()) == [n for n, _ in tree]
        for name, tensor in tree:
            assert loaded[name].dtype == np.float32
            assert np.array_equal(loaded[name], tensor.data), name

    def test_assign_restores_saved_state(self, tmp_path):
        net = small_net(11)
        path = tmp_path / "weights.ptgc"
        save_checkpoint(path, net.named_params())
        other = small_net(12)   # different init
        assign_params(other.named_params(), load_checkpoint(path))
        for (_, a), (_, b) in zip(net.named_params(), other.named_params()):
            assert np.array_equal(a.data, b.data)

    def test_two_saves_identical_bytes(self, tmp_path):
        net = small_net(13)
        p1, p2 = tmp_path / "a.ptgc", tmp_path / "b.ptgc"
        save_checkpoint(p1, net.named_params())
        save_checkpoint(p2, net.named_params())
        assert p1.read_bytes() == p2.read_bytes()


class TestCheckpointErrors:
    def checkpoint_bytes(self, tmp_path):
        w = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3), requires_grad=True)
        b = Tensor(np.zeros(2, dtype=np.float32), requires_grad=True)
        path = tmp_path / "t.ptgc"
        save_checkpoint(path, [("lin.weight", w), ("lin.bias", b)])
        return path, path.read_bytes()

    def test_bad_magic_reports_offset_zero(self, tmp_path):
        path, blob = self.checkpoint_bytes(tmp_path)
        path.write_bytes(b"NOPE" + blob[4:])
        with pytest.raises(FormatError, match="offset 0"):
            load_checkpoint(path)

    def test_bad_version_reports_offset(self, tmp_path):
        path, blob = self.checkpoint_bytes(tmp_path)
        path.write_bytes(blob[:4] + struct.pack("<I", 99) + blob[8:])
        with pytest.raises(FormatError, match="version 99"):
            load_checkpoint(path)

    def test_truncated_header(self, tmp_path):
        path, blob = self.checkpoint_bytes(tmp_path)
        path.write_bytes(blob[:6])
        with pytest.raises(FormatError, match="truncated while reading header"):
            load_checkpoint(path)

    def test_truncated_tensor_data_names_entry(self, tmp_path):
        path, blob = self.checkpoint_bytes(tmp_path)
        path.write_bytes(blob[:-2])
        with pytest.raises(FormatError, match="lin.bias"):
            load_checkpoint(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path, blob = self.checkpoint_bytes(tmp_path)
        path.write_bytes(blob + b"\x00\x00")
        with pytest.raises(FormatError, match="trailing"):
            load_checkpoint(path)

    def test_assign_rejects_missing_and_extra(self, tmp_path):
        path, _ = self.checkpoint_bytes(tmp_path)
        values = load_checkpoint(path)
        w = Tensor(np.zeros((2, 3), dtype=np.float32), requires_grad=True)
        with pytest.raises(InputError, match="does not match"):
            assign_params([("lin.weight", w)], values)

    def test_assign_rejects_shape_change(self, tmp_path):
        path, _ = self.checkpoint_bytes(tmp_path)
        values = load_checkpoint(path)
        w = Tensor(np.zeros((3, 2), dtype=np.float32), requires_grad=True)
        b = Tensor(np.zeros(2, dtype=np.float32), requires_grad=True)
        with pytest.raises(InputError, match="shape"):
            assign_params([("lin.weight", w), ("lin.bias", b)], values)


class TestLayerPrimitives:
    def test_fan_in_uniform_bounds(self):
        vals = fan_in_uniform(rng_for(20), (64, 64), 16, np.float32)
        assert np.abs(vals).max() <= 1.0 / 4.0
        assert vals.dtype == np.float32

    def test_coordinate_map_corners_exact(self):
        grid = coordinate_map(5, 7)
        assert grid.shape == (5, 7, 2)
        assert grid[0, 0, 0] == -1.0 and grid[0, 0, 1] == -1.0
        assert grid[4, 6, 0] == 1.0 and grid[4, 6, 1] == 1.0
        assert grid[0, 6, 0] == 1.0 and grid[0, 6, 1] == -1.0

    def test_coordinate_map_degenerate_axis(self):
        grid = coordinate_map(1, 3)
        assert np.all(grid[:, :, 1] == -1.0)

    def test_conv_zero_init_and_bias_init(self):
        conv = Conv(rng_for(21), 3, 4, 2, zero_init=True, bias_init=1.5)
        assert np.all(conv.weight.data == 0.0)
        assert np.all(conv.bias.data == 1.5)
        x = Tensor(np.ones((6, 6, 4), dtype=np.float32))
        assert np.allclose(conv(x).data, 1.5)

    def test_residual_block_zero_weights_is_identity(self):
        block = ResidualBlock(rng_for(22), 4)
        for _, t in block.named_params():
            t.data = np.zeros_like(t.data)
        x = Tensor(rng_for(23).standard_normal((5, 5, 4)).astype(np.float32))
        assert np.array_equal(block(x).data, x.data)

    def test_position_embedding_shape(self):
        emb = PositionEmbedding(rng_for(24), 8)
        out = emb(3, 5)
        assert out.shape == (3, 5, 8)

    def test_attention_weights_are_row_stochastic(self):
        block = SelfAttentionBlock(rng_for(25), 8)
        x = Tensor(rng_for(26).standard_normal((10, 8)).astype(np.float32))
        _, weights = block(x, return_weights=True)
        np.testing.assert_allclose(weights.data.sum(axis=1), 1.0, atol=1e-6)

    def test_dense_matches_matmul(self):
        lin = Dense(rng_for(27), 4, 3)
        x = Tensor(rng_for(28).standard_normal((5, 4)).astype(np.float32))
        expected = x.data @ lin.weight.data + lin.bias.data
        np.testing.assert_allclose(lin(x).data, expected, atol=1e-6)

    def test_param_count_sums_sizes(self):
        lin = Dense(rng_for(29), 4, 3)
        assert param_count(lin.named_params()) == 4 * 3 + 3

    def test_prior_projection_layer_size(self):
        # a 512-to-16 projection carries 512*16 weights plus 16 biases
        from refinery.layers import VecDense
        proj = VecDense(rng_for(30), 512, 16)
        assert param_count(proj.named_params()) == 8208
