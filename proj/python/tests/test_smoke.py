import math

import numpy as np
import pytest

import panodepth


def test_tiny_forward_shape_and_range():
    cfg = panodepth.preset_config("tiny")
    model = panodepth.Model(cfg, seed=3)
    image = np.random.default_rng(0).uniform(size=(2, 3, cfg["height"], cfg["width"])).astype(np.float32)
    depth = model(image)
    assert depth.shape == (2, 1, cfg["height"], cfg["width"])
    assert np.all(np.isfinite(depth))
    assert depth.min() >= 0 and depth.max() <= cfg["head"]["d_max"]


def test_forward_rejects_wrong_extent():
    model = panodepth.Model(panodepth.preset_config("tiny"))
    with pytest.raises(ValueError):
        model(np.zeros((1, 3, 9, 16), dtype=np.float32))


def test_unknown_preset():
    with pytest.raises(panodepth.ConfigError):
        panodepth.preset_config("huge")


def test_parameter_groups_sum_to_total():
    model = panodepth.Model(panodepth.preset_config("desk"))
    groups = model.parameter_groups()
    assert sum(groups.values()) == model.parameter_count()
    assert {"backbone", "tokenizer", "encoder", "decoder", "head"} <= set(groups)


def test_metrics_worked_example():
    m = panodepth.depth_metrics(np.array([1.1, 1.8, 5.0]), np.array([1.0, 2.0, 4.0]))
    assert m["abs_rel"] == pytest.approx(0.15, abs=1e-12)
    assert m["rmse"] == pytest.approx(0.59161, abs=1e-5)
    assert m["delta1"] == pytest.approx(2 / 3)


def test_median_alignment():
    aligned = panodepth.align_depth(np.array([1.0, 2.0, 3.0]), np.array([2.0, 4.0, 6.0]))
    np.testing.assert_allclose(aligned, [2.0, 4.0, 6.0])


def test_positional_encoding_first_rows():
    pe = panodepth.positional_encoding(4, 8)
    assert pe.shape == (4, 8)
    np.testing.assert_allclose(pe[0, 0::2], 0.0)
    np.testing.assert_allclose(pe[0, 1::2], 1.0)
    assert pe[1, 0] == pytest.approx(math.sin(1.0))


def test_pfm_round_trip(tmp_path):
    depth = np.random.default_rng(1).uniform(0.5, 9.0, size=(6, 10)).astype(np.float32)
    path = str(tmp_path / "d.pfm")
    panodepth.write_pfm(path, depth)
    np.testing.assert_array_equal(panodepth.read_pfm(path), depth)


def test_synth_room_matches_ray_depth():
    rgb, depth = panodepth.synth_room(seed=0, index=0, height=16, width=32)
    assert rgb.shape == (3, 16, 32)
    assert depth.shape == (16, 32)
    assert np.all(depth > 0)


def test_unit_cube_nadir():
    d = panodepth.room_ray_depth([2.0, 2.0, 2.0], [1.0, 1.0, 1.0], 0.0, -math.pi / 2)
    assert d == pytest.approx(1.0)


def test_gradcheck_srb():
    assert "srb" in panodepth.gradcheck_blocks()
    report = panodepth.gradcheck("srb")
    assert report["passed"], report


def test_train_tiny(tmp_path):
    manifest = panodepth.write_synthetic_dataset(str(tmp_path / "data"), count=4, height=8, width=16)
    losses = panodepth.train(
        manifest, tmp_path / "run", model=panodepth.preset_config("tiny"), max_steps=2, batch_size=2
    )
    assert len(losses) == 2
    assert all(math.isfinite(v) for v in losses)
    assert (tmp_path / "run" / "checkpoint.bin").exists()
