"""Tests for the implicit decoder: positional encoding, neighbor gathering,
the modulated MLP, and full query evaluation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anysr.autodiff import Tensor
from anysr.decoder import (
    ModulatedMLP,
    QueryBatch,
    gather_neighbors,
    positional_encode,
)
from anysr.imageops import Image, axis_centers, make_coord_grid, resample_bilinear
from anysr.model import AblationVariant, FULL, ModelConfig, SuperResolver


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def random_image(seed, h, w):
    return Image(rng_for(seed).uniform(0.0, 1.0, size=(h, w, 3)))


def tiny_model(seed=0):
    cfg = ModelConfig(feat_channels=6, res_blocks=1, freq_hidden=4, freq_latent=3,
                      token_channels=4, mlp_blocks=3, mlp_width=16)
    return SuperResolver(cfg, seed=seed)


def grid_queries(h, w, ry, rx):
    grid = make_coord_grid(h, w)
    return QueryBatch(coords=grid.coords, scale_ratio=[1.0 / ry, 1.0 / rx])


class TestPositionalEncoding:
    def test_origin(self):
        enc = positional_encode(np.array([[0.0, 0.0]]))
        assert enc.shape == (1, 42)
        np.testing.assert_array_equal(enc[0, :2], 0.0)
        np.testing.assert_array_equal(enc[0, 2::4], 0.0)  # sin(y) terms
        np.testing.assert_array_equal(enc[0, 3::4], 0.0)  # sin(x) terms
        np.testing.assert_array_equal(enc[0, 4::4], 1.0)  # cos(y) terms
        np.testing.assert_array_equal(enc[0, 5::4], 1.0)  # cos(x) terms

    def test_component_one(self):
        enc = positional_encode(np.array([[1.0, 0.0]]))[0]
        # frequency 0: sin(pi) ~ 0, cos(pi) = -1; frequency 1: sin(2pi) ~ 0, cos(2pi) = 1
        assert abs(enc[2]) < 1e-12 and abs(enc[4] + 1.0) < 1e-12
        assert abs(enc[6]) < 1e-12 and abs(enc[8] - 1.0) < 1e-12

    def test_component_half(self):
        enc = positional_encode(np.array([[0.5, 0.0]]))[0]
        # frequency 0: sin(pi/2) = 1, cos(pi/2) ~ 0; frequency 1: sin(pi) ~ 0, cos(pi) = -1
        assert abs(enc[2] - 1.0) < 1e-12 and abs(enc[4]) < 1e-12
        assert abs(enc[6]) < 1e-12 and abs(enc[8] + 1.0) < 1e-12

    def test_length_formula(self):
        assert positional_encode(np.zeros((3, 2)), octaves=4).shape == (3, 18)


class TestGatherNeighbors:
    def test_query_at_interior_center_takes_full_weight(self):
        grid = make_coord_grid(5, 7)
        centers_y, centers_x = axis_centers(5), axis_centers(7)
        qb = QueryBatch(coords=[[centers_y[2], centers_x[3]]], scale_ratio=[0.5, 0.5])
        nb = gather_neighbors(grid, qb)
        target = 2 * 7 + 3
        at_target = nb.weights[0][nb.indices[0] == target].sum()
        assert abs(at_target - 1.0) < 1e-12
        assert abs(nb.weights[0].sum() - 1.0) < 1e-12

    def test_midpoint_gives_quarter_weights(self):
        grid = make_coord_grid(4, 4)
        cy, cx = axis_centers(4), axis_centers(4)
        mid = [(cy[1] + cy[2]) / 2, (cx[1] + cx[2]) / 2]
        nb = gather_neighbors(grid, QueryBatch(coords=[mid], scale_ratio=[0.5, 0.5]))
        np.testing.assert_allclose(nb.weights[0], 0.25, atol=1e-12)

    def test_partition_of_unity_1000_random(self):
        rng = rng_for(1)
        coords = rng.uniform(-1.0, 1.0, size=(1000, 2))
        nb = gather_neighbors(make_coord_grid(6, 9),
                              QueryBatch(coords=coords, scale_ratio=[0.5, 0.5]))
        np.testing.assert_allclose(nb.weights.sum(axis=1), 1.0, atol=1e-12)

    @given(st.integers(4, 64), st.integers(4, 64), st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_partition_of_unity_includes_borders(self, h, w, seed):
        rng = rng_for(seed)
        coords = rng.uniform(-1.0, 1.0, size=(50, 2))
        coords[:10, 0] = rng.choice([-1.0, 1.0], size=10)  # force border clamping
        coords[10:20, 1] = rng.choice([-1.0, 1.0], size=10)
        nb = gather_neighbors(make_coord_grid(h, w),
                              QueryBatch(coords=coords, scale_ratio=[0.5, 0.5]))
        np.testing.assert_allclose(nb.weights.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(nb.weights >= 0.0) and np.all(nb.weights <= 1.0)

    def test_relative_coords_bounded(self):
        rng = rng_for(2)
        for h, w in [(4, 4), (16, 9), (64, 64)]:
            coords = rng.uniform(-1.0, 1.0, size=(200, 2))
            nb = gather_neighbors(make_coord_grid(h, w),
                                  QueryBatch(coords=coords, scale_ratio=[0.5, 0.5]))
            assert np.all(np.abs(nb.rel_coords) <= 2.0)

    def test_rejects_out_of_range_queries(self):
        with pytest.raises(ValueError):
            QueryBatch(coords=[[1.5, 0.0]], scale_ratio=[0.5, 0.5])

    def test_rejects_nonpositive_ratio(self):
        with pytest.raises(ValueError):
            QueryBatch(coords=[[0.0, 0.0]], scale_ratio=[0.0, 0.5])


class TestModulatedMLP:
    def _inputs(self, seed, rows, feature_len):
        rng = rng_for(seed)
        features = Tensor(rng.normal(size=(rows, feature_len)))
        rel = Tensor(rng.uniform(-1, 1, size=(rows, 2)))
        ratio = Tensor(np.full((rows, 2), 0.5))
        g_s = Tensor(positional_encode(rng.uniform(-1, 1, size=(rows, 2))))
        return features, rel, ratio, g_s

    def test_sine_gates_at_one_degenerate_to_plain_relu_mlp(self):
        mlp = ModulatedMLP(rng_for(3), feature_len=10, depth=3, width=8)
        for layer in mlp.modulation:
            layer.weight.data[:] = 0.0
            layer.bias.data[:] = np.pi / 2  # sin(pi/2) = 1 everywhere
        features, rel, ratio, g_s = self._inputs(4, 6, 10)
        gated = mlp(features, rel, ratio, g_s, use_modulation=True)
        plain = mlp(features, rel, ratio, g_s, use_modulation=False)
        np.testing.assert_allclose(gated.data, plain.data, atol=1e-15)

    def test_zero_modulation_kills_gated_half(self):
        # with the first gate forced to sin(0) = 0, m_0 = 0, so the columns of
        # the next content layer that read m_0 cannot influence the output
        mlp = ModulatedMLP(rng_for(5), feature_len=10, depth=2, width=8)
        mlp.modulation[0].weight.data[:] = 0.0
        mlp.modulation[0].bias.data[:] = 0.0
        features, rel, ratio, g_s = self._inputs(6, 5, 10)
        before = mlp(features, rel, ratio, g_s).data.copy()
        mlp.content[1].weight.data[:8, :] = rng_for(7).normal(size=(8, 8))
        after = mlp(features, rel, ratio, g_s).data
        np.testing.assert_array_equal(before, after)

    def test_width_mismatch_names_block(self):
        mlp = ModulatedMLP(rng_for(8), feature_len=10, depth=2, width=8)
        bad = Tensor(np.zeros((4, 11)))
        with pytest.raises(Exception, match="block 0"):
            mlp(bad, Tensor(np.zeros((4, 2))), Tensor(np.zeros((4, 2))),
                Tensor(np.zeros((4, 42))))

    def test_every_weight_passes_fd(self):
        from conftest import kink_margin, weight_fd

        for seed in range(9, 49):
            mlp = ModulatedMLP(rng_for(seed), feature_len=6, depth=3, width=8)
            features, rel, ratio, g_s = self._inputs(seed + 100, 4, 6)
            forward = lambda: mlp(features, rel, ratio, g_s).mean()
            if kink_margin(lambda _t: forward(), features) >= 1e-3:
                break
        else:
            raise AssertionError("no kink-free MLP sample found")

        layers = [(f"content{i}", l) for i, l in enumerate(mlp.content)]
        layers += [(f"mod{i}", l) for i, l in enumerate(mlp.modulation)]
        layers += [("out", mlp.output)]
        for name, layer in layers:
            err = weight_fd(forward, layer, "weight")
            assert err < 1e-4, f"{name}.weight: max relative error {err}"

    def test_global_coordinates_are_live(self):
        mlp = ModulatedMLP(rng_for(10), feature_len=6, depth=3, width=8)
        features, rel, ratio, g_s = self._inputs(11, 8, 6)
        out = mlp(features, rel, ratio, g_s).data
        permuted = Tensor(g_s.data[::-1].copy())
        out_permuted = mlp(features, rel, ratio, permuted).data
        assert not np.allclose(out, out_permuted)


class TestQueryRgb:
    def test_skip_only_reduces_to_bilinear_upsampling(self):
        model = tiny_model(12)
        model.decoder.output.weight.data[:] = 0.0
        model.decoder.output.bias.data[:] = 0.0
        lr = random_image(13, 7, 5)
        prep = model.prepare(lr)
        out = model.query(prep, grid_queries(14, 10, 2.0, 2.0))
        expected = resample_bilinear(lr, 14, 10).pixels.reshape(-1, 3)
        assert np.max(np.abs(out.data - expected)) < 1e-12

    def test_full_x2_grid_shape(self):
        model = tiny_model(15)
        lr = random_image(16, 16, 16)
        out = model.forward(lr, grid_queries(32, 32, 2.0, 2.0))
        assert out.shape == (1024, 3)
        assert np.all(np.isfinite(out.data))

    def test_empty_query_batch(self):
        model = tiny_model(17)
        prep = model.prepare(random_image(18, 4, 4))
        out = model.query(prep, QueryBatch(coords=np.zeros((0, 2)), scale_ratio=[0.5, 0.5]))
        assert out.shape == (0, 3)

    def test_boundary_continuity_100_crossings(self):
        model = tiny_model(19)
        lr = random_image(20, 8, 8)
        prep = model.prepare(lr)
        rng = rng_for(21)
        centers = axis_centers(8)
        eps = 1e-6
        jumps = []
        for _ in range(50):
            # vertical crossing: y passes through a latent row center
            y = centers[rng.integers(1, 7)]
            x = rng.uniform(-0.9, 0.9)
            lo = model.query(prep, QueryBatch([[y - eps, x]], [0.5, 0.5])).data
            hi = model.query(prep, QueryBatch([[y + eps, x]], [0.5, 0.5])).data
            jumps.append(np.abs(hi - lo).max())
            # horizontal crossing
            y2 = rng.uniform(-0.9, 0.9)
            x2 = centers[rng.integers(1, 7)]
            lo = model.query(prep, QueryBatch([[y2, x2 - eps]], [0.5, 0.5])).data
            hi = model.query(prep, QueryBatch([[y2, x2 + eps]], [0.5, 0.5])).data
            jumps.append(np.abs(hi - lo).max())
        assert max(jumps) < 1e-4

    def test_scale_conditioning_is_live(self):
        model = tiny_model(22)
        prep = model.prepare(random_image(23, 8, 8))
        coords = rng_for(24).uniform(-1, 1, size=(16, 2))
        out_a = model.query(prep, QueryBatch(coords, [0.5, 0.5]), include_skip=False).data
        out_b = model.query(prep, QueryBatch(coords, [0.25, 0.25]), include_skip=False).data
        assert not np.allclose(out_a, out_b)

    def test_same_parameters_any_input_resolution(self):
        model = tiny_model(25)
        for size in (16, 32, 48):
            lr = random_image(26 + size, size, size)
            out = model.forward(lr, grid_queries(size * 2, size * 2, 2.0, 2.0))
            assert out.shape == (4 * size * size, 3)
            assert np.all(np.isfinite(out.data))


class TestVariants:
    def test_labels_parse(self):
        assert AblationVariant.from_label("full") == FULL
        assert not AblationVariant.from_label("-L").use_tokens
        assert not AblationVariant.from_label("-G").use_modulation
        assert not AblationVariant.from_label("-S").use_skip
        with pytest.raises(ValueError):
            AblationVariant.from_label("-X")

    def test_each_variant_changes_output(self):
        model = tiny_model(27)
        lr = random_image(28, 8, 8)
        prep = model.prepare(lr)
        qb = grid_queries(12, 12, 1.5, 1.5)
        full = model.query(prep, qb).data
        for label in ("-L", "-G", "-S"):
            variant = AblationVariant.from_label(label)
            out = model.query(prep, qb, variant=variant).data
            assert not np.allclose(full, out), label
