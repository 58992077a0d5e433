"""Model assembly: shape contracts, ablation lattice, determinism."""

import numpy as np
import pytest

from mcsr import model as m
from mcsr.errors import ConfigError, ShapeError


def small_cfg(**kw):
    base = dict(s=2, L=2, C=8, B=1)
    base.update(kw)
    return m.ModelConfig(**base)


def rand_inputs(rng, n=1, hr=16, s=2):
    x_aux = rng.random((n, 1, hr, hr)).astype(np.float32)
    y_tar = rng.random((n, 1, hr // s, hr // s)).astype(np.float32)
    return x_aux, y_tar


class TestModelConfig:
    def test_defaults_follow_reference_protocol(self):
        cfg = m.ModelConfig()
        assert (cfg.L, cfg.alpha) == (6, 0.7)

    def test_sep_attention_requires_aux(self):
        with pytest.raises(ConfigError):
            m.ModelConfig(use_aux=False, use_sep_attention=True)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown"):
            m.ModelConfig.from_dict({"s": 2, "bogus": 1})

    def test_round_trip(self):
        cfg = small_cfg(use_aux=False, use_sep_attention=False)
        assert m.ModelConfig.from_dict(cfg.to_dict()) == cfg

    def test_validation_bounds(self):
        for kw in ({"L": 0}, {"C": 2}, {"alpha": 1.5}, {"s": 0}, {"B": 0}):
            with pytest.raises(ConfigError):
                small_cfg(**kw)


class TestAblationConfig:
    def test_table_rows(self):
        rows = {
            "Ab1": (False, False, False, False),
            "Ab2": (False, False, True, False),
            "Ab3": (True, False, True, False),
            "Ab4": (True, True, True, False),
            "full": (True, True, True, True),
        }
        for name, (aux, m_int, m_att, sep) in rows.items():
            cfg = m.ablation_config(name, L=2, C=8)
            assert cfg.use_aux == aux
            assert cfg.use_m_int == m_int
            assert cfg.use_m_att == m_att
            assert cfg.use_sep_attention == sep

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            m.ablation_config("Ab9")


class TestForward:
    def test_output_sizes_full_model(self):
        rng = np.random.default_rng(0)
        net = m.MultiContrastSRNet(small_cfg(), seed=1)
        x_aux, y_tar = rand_inputs(rng, n=2)
        out = net.forward(x_aux, y_tar)
        assert out.sr_tar.shape == (2, 1, 16, 16)
        assert out.sr_aux.shape == (2, 1, 16, 16)

    def test_output_sizes_all_variants(self):
        rng = np.random.default_rng(1)
        x_aux, y_tar = rand_inputs(rng)
        for name in ("Ab1", "Ab2", "Ab3", "Ab4", "full"):
            net = m.MultiContrastSRNet(m.ablation_config(name, L=2, C=8, B=1), seed=2)
            out = net.forward(x_aux, y_tar)
            assert out.sr_tar.shape == (1, 1, 16, 16)
            assert (out.sr_aux is not None) == net.cfg.use_aux

    def test_scale_one_path(self):
        rng = np.random.default_rng(2)
        net = m.MultiContrastSRNet(small_cfg(s=1), seed=3)
        x_aux = rng.random((1, 1, 8, 8)).astype(np.float32)
        y_tar = rng.random((1, 1, 8, 8)).astype(np.float32)
        assert net.forward(x_aux, y_tar).sr_tar.shape == (1, 1, 8, 8)

    def test_extract_features_shapes_and_zero_case(self):
        rng = np.random.default_rng(12)
        net = m.MultiContrastSRNet(small_cfg(), seed=13)
        x_aux, y_tar = rand_inputs(rng, n=2)
        f_aux0, f_tar0 = net.extract_features(x_aux, y_tar)
        assert f_aux0.shape == (2, 8, 16, 16)
        assert f_tar0.shape == (2, 8, 16, 16)
        # zero inputs with zero biases give zero features
        f_aux0, f_tar0 = net.extract_features(np.zeros_like(x_aux), np.zeros_like(y_tar))
        assert np.all(f_aux0.data == 0) and np.all(f_tar0.data == 0)

    def test_extract_features_scale_one_no_rearrangement(self):
        net = m.MultiContrastSRNet(small_cfg(s=1), seed=14)
        rng = np.random.default_rng(13)
        y_tar = rng.random((1, 1, 8, 8)).astype(np.float32)
        x_aux = rng.random((1, 1, 8, 8)).astype(np.float32)
        _, f_tar0 = net.extract_features(x_aux, y_tar)
        from mcsr import autodiff as ad
        from mcsr.autodiff import Tensor

        direct = ad.conv2d(Tensor(y_tar), net.head_tar.w, net.head_tar.b)
        assert np.array_equal(f_tar0.data, direct.data)

    def test_ab1_ignores_auxiliary_input(self):
        rng = np.random.default_rng(3)
        net = m.MultiContrastSRNet(m.ablation_config("Ab1", L=2, C=8, B=1), seed=4)
        x_aux, y_tar = rand_inputs(rng)
        other_aux = rng.random(x_aux.shape).astype(np.float32)
        a = net.forward(x_aux, y_tar).sr_tar.data
        b = net.forward(other_aux, y_tar).sr_tar.data
        assert np.array_equal(a, b)

    def test_zero_parameters_finite_bias_only(self):
        rng = np.random.default_rng(4)
        net = m.MultiContrastSRNet(small_cfg(), seed=5)
        for _, t, _ in net.store.items():
            t.data[...] = 0.0
        x_aux, y_tar = rand_inputs(rng)
        out = net.forward(x_aux, y_tar)
        assert np.all(np.isfinite(out.sr_tar.data))
        assert np.ptp(out.sr_tar.data) == 0.0  # constant bias-only image

    def test_deterministic_forward_and_build(self):
        rng = np.random.default_rng(5)
        x_aux, y_tar = rand_inputs(rng)
        n1 = m.MultiContrastSRNet(small_cfg(), seed=7)
        n2 = m.MultiContrastSRNet(small_cfg(), seed=7)
        a = n1.forward(x_aux, y_tar).sr_tar.data
        b = n2.forward(x_aux, y_tar).sr_tar.data
        assert np.array_equal(a, b)

    def test_aux_size_mismatch_rejected(self):
        rng = np.random.default_rng(6)
        net = m.MultiContrastSRNet(small_cfg(), seed=8)
        x_aux = rng.random((1, 1, 12, 12)).astype(np.float32)
        y_tar = rng.random((1, 1, 8, 8)).astype(np.float32)
        with pytest.raises(ShapeError):
            net.forward(x_aux, y_tar)

    def test_diagnostics_attention_pairs(self):
        rng = np.random.default_rng(7)
        net = m.MultiContrastSRNet(small_cfg(), seed=9)
        x_aux, y_tar = rand_inputs(rng)
        out = net.forward(x_aux, y_tar, capture_diagnostics=True)
        pairs = out.diagnostics["attention_pairs"]
        assert len(pairs) == net.cfg.L
        for pair in pairs:
            s = pair.a_h.data + pair.a_l.data
            assert np.max(np.abs(s - 1.0)) == 0.0
            assert np.all((pair.a_h.data > 0) & (pair.a_h.data < 1))
        aff = out.diagnostics["affinity"]
        assert aff.shape == (1, 2 * net.cfg.L, 2 * net.cfg.L)
        np.testing.assert_allclose(aff.sum(-1), 1.0, atol=1e-6)

    def test_m_int_without_aux_uses_target_stages(self):
        cfg = m.ModelConfig(s=2, L=2, C=8, B=1, use_aux=False,
                            use_sep_attention=False, use_m_int=True, use_m_att=False)
        net = m.MultiContrastSRNet(cfg, seed=10)
        rng = np.random.default_rng(8)
        x_aux, y_tar = rand_inputs(rng)
        out = net.forward(x_aux, y_tar, capture_diagnostics=True)
        assert out.diagnostics["affinity"].shape == (1, 2, 2)

    def test_m_int_needs_two_stages(self):
        with pytest.raises(ConfigError):
            m.ModelConfig(s=2, L=1, C=8, use_aux=False, use_sep_attention=False,
                          use_m_int=True, use_m_att=False)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        net = m.MultiContrastSRNet(small_cfg(), seed=11)
        net.save_checkpoint(tmp_path / "ckpt")
        restored = m.MultiContrastSRNet.load_checkpoint(tmp_path / "ckpt")
        assert restored.cfg == net.cfg
        x_aux, y_tar = rand_inputs(rng)
        a = net.forward(x_aux, y_tar).sr_tar.data
        b = restored.forward(x_aux, y_tar).sr_tar.data
        assert np.array_equal(a, b)

    def test_mismatched_config_rejected(self, tmp_path):
        net = m.MultiContrastSRNet(small_cfg(), seed=12)
        net.save_checkpoint(tmp_path / "ckpt")
        other = m.MultiContrastSRNet(small_cfg(C=12), seed=12)
        with pytest.raises(ConfigError):
            other.store.load(tmp_path / "ckpt" / "params")
