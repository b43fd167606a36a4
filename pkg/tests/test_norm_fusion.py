import numpy as np
import pytest

from latentskip.core import SeededRng, stats
from latentskip.norm_fusion import (AttnStub, EmbeddingBundle, build_portrait_embedding,
                                    cross_attend, normalize_fuse)


@pytest.fixture
def stub():
    return AttnStub(seed=0, d_m=4, d_e=6, d_me=5, d_z=8, d_attn=4)


class TestPortraitEmbedding:
    def test_zero_inputs_zero_output(self, stub):
        p = build_portrait_embedding(np.zeros((7, 4)), np.zeros((7, 6)), stub)
        assert np.all(p == 0.0)

    def test_output_width_is_concatenation(self, stub):
        p = build_portrait_embedding(SeededRng(1).normal((7, 4)), SeededRng(2).normal((7, 6)), stub)
        assert p.shape == (7, 4 + 6 + 5)

    def test_deterministic(self, stub):
        emb_m, emb_e = SeededRng(1).normal((7, 4)), SeededRng(2).normal((7, 6))
        stub2 = AttnStub(seed=0, d_m=4, d_e=6, d_me=5, d_z=8, d_attn=4)
        assert np.array_equal(build_portrait_embedding(emb_m, emb_e, stub),
                              build_portrait_embedding(emb_m, emb_e, stub2))

    def test_width_mismatch(self, stub):
        with pytest.raises(ValueError):
            build_portrait_embedding(np.zeros((7, 3)), np.zeros((7, 6)), stub)

    def test_bundle(self, stub):
        bundle = EmbeddingBundle.build(SeededRng(1).normal((7, 4)), SeededRng(2).normal((7, 6)),
                                       SeededRng(3).normal((7, 9)), stub)
        assert bundle.emb_p.shape[1] == 15


class TestCrossAttend:
    def test_single_key_collapses_softmax(self, stub):
        z = SeededRng(1).normal((3, 8))
        emb = SeededRng(2).normal((1, 15))
        out = cross_attend(z, emb, stub)
        expected = emb @ stub.cross["v"]
        for row in out:
            assert np.allclose(row, expected[0])

    def test_key_permutation_invariant(self, stub):
        z = SeededRng(1).normal((3, 8))
        emb = SeededRng(2).normal((6, 15))
        a = cross_attend(z, emb, stub)
        b = cross_attend(z, emb[::-1].copy(), stub)
        assert np.allclose(a, b, atol=1e-12)

    def test_zero_value_projection(self, stub):
        stub.cross["v"][...] = 0.0
        out = cross_attend(SeededRng(1).normal((3, 8)), SeededRng(2).normal((6, 15)), stub)
        assert np.all(out == 0.0)

    def test_output_shape_matches_queries(self, stub):
        out = cross_attend(SeededRng(1).normal((5, 8)), SeededRng(2).normal((6, 15)), stub)
        assert out.shape == (5, 8)


class TestNormalizeFuse:
    def test_hand_example(self):
        out = normalize_fuse(np.array([10.0, 20.0]), np.array([1.0, 3.0]))
        assert np.array_equal(out, np.array([20.0, 40.0]))

    def test_identity_when_stats_already_match(self):
        z_img = SeededRng(1).normal(64)
        si = stats(z_img)
        z_p = SeededRng(2).normal(64)
        sp = stats(z_p)
        z_p = (z_p - sp.mean) / sp.std * si.std + si.mean
        out = normalize_fuse(z_img, z_p)
        assert np.allclose(out, z_p + z_img, atol=1e-12)

    def test_aligned_stream_matches_image_stats(self):
        z_img = SeededRng(1).normal(128) * 4 - 2
        z_p = SeededRng(2).normal(128) * 0.1 + 9
        aligned = normalize_fuse(z_img, z_p) - z_img
        si, sa = stats(z_img), stats(aligned)
        assert abs(si.mean - sa.mean) < 1e-9
        assert abs(si.std - sa.std) < 1e-9

    def test_affine_invariance(self):
        rng = SeededRng(7)
        for _ in range(100):
            z_img, z_p = rng.normal(32), rng.normal(32)
            a = abs(rng.normal(1)[0]) + 0.1
            b = rng.normal(1)[0] * 5
            base = normalize_fuse(z_img, z_p)
            scaled = normalize_fuse(z_img, a * z_p + b)
            assert np.allclose(base, scaled, atol=1e-9)

    def test_alignment_is_idempotent(self):
        z_img, z_p = SeededRng(1).normal(64), SeededRng(2).normal(64) * 3 + 1
        once = normalize_fuse(z_img, z_p) - z_img
        twice = normalize_fuse(z_img, once) - z_img
        assert np.allclose(once, twice, atol=1e-9)

    def test_constant_portrait_stream_degenerates(self):
        z_img = SeededRng(1).normal(16)
        si = stats(z_img)
        out = normalize_fuse(z_img, np.full(16, 3.0))
        assert np.all(np.isfinite(out))
        assert np.allclose(out - z_img, si.mean)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            normalize_fuse(np.zeros(3), np.zeros(4))

    def test_ablation_modes(self):
        z_img, z_p = SeededRng(1).normal(64) * 2 + 5, SeededRng(2).normal(64) * 3 - 1
        mu_p, sd_p = z_p.mean(), z_p.std()
        mu_i, sd_i = z_img.mean(), z_img.std()
        assert np.allclose(normalize_fuse(z_img, z_p, "baseline-add"), z_p + z_img)
        assert np.allclose(normalize_fuse(z_img, z_p, "pure-norm"),
                           (z_p - mu_p) / sd_p + z_img)
        assert np.allclose(normalize_fuse(z_img, z_p, "centralization"),
                           (z_p - mu_p) / sd_p + (z_img - mu_i) / sd_i)
        with pytest.raises(ValueError):
            normalize_fuse(z_img, z_p, "nope")

    def test_per_channel_axis_option(self):
        z_img = SeededRng(1).normal((10, 4))
        z_p = SeededRng(2).normal((10, 4)) * 3 + 2
        out = normalize_fuse(z_img, z_p, axis=0)
        aligned = out - z_img
        assert np.allclose(aligned.mean(axis=0), z_img.mean(axis=0), atol=1e-9)
        assert np.allclose(aligned.std(axis=0), z_img.std(axis=0), atol=1e-9)
