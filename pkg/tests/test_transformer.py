import numpy as np
import pytest
import torch

from motionsel.transformer import (BottleneckSizeWarning, TransformerConfig, TransformerNet,
                                   count_parameters)


def small(**kw):
    base = dict(N=4, L=8, delta=3, channels=1, height=64, width=64)
    base.update(kw)
    return TransformerConfig(**base)


def rand_input(cfg, batch=2, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(batch, cfg.delta, cfg.channels, cfg.height, cfg.width, generator=g) * 2 - 1


def test_pyramid_sizes_and_input_planes():
    cfg = small()
    net = TransformerNet(cfg)
    assert net.enc[0].in_channels == 3
    pyramid = net.encode(rand_input(cfg))
    assert [tuple(p.shape[-2:]) for p in pyramid] == [(32, 32), (16, 16), (8, 8), (4, 4)]
    assert all(p.shape[1] == cfg.N for p in pyramid)
    rgb = small(channels=3, delta=3)
    assert TransformerNet(rgb).enc[0].in_channels == 9


def test_zero_parameters_give_zero_pyramid_and_output():
    cfg = small()
    net = TransformerNet(cfg)
    with torch.no_grad():
        for p in net.parameters():
            p.zero_()
    x = rand_input(cfg)
    for level in net.encode(x):
        assert torch.all(level == 0)
    assert torch.all(net(x, torch.full((2, cfg.rows, cfg.N), 1 / cfg.N)) == 0)


@pytest.mark.parametrize("h,w,L", [(100, 320, 10), (200, 200, 12), (64, 64, 8), (37, 53, 6)])
def test_output_shape_matches_input(h, w, L):
    cfg = TransformerConfig(N=3, L=L, delta=2, channels=3, height=h, width=w)
    net = TransformerNet(cfg)
    with torch.no_grad():
        out = net(rand_input(cfg, batch=1))
    assert out.shape == (1, 3, h, w)
    assert out.abs().max() <= 1


def test_uniform_alpha_is_plain_unet():
    for seed in range(20):
        torch.manual_seed(seed)
        cfg = small(N=int(np.random.default_rng(seed).integers(2, 6)))
        net = TransformerNet(cfg)
        x = rand_input(cfg, seed=seed)
        with torch.no_grad():
            plain = net(x)
            modulated = net(x, torch.full((2, cfg.rows, cfg.N), 1.0 / cfg.N))
        assert (plain - modulated).abs().max() <= 1e-6


def test_zero_alpha_drops_decoder_branch():
    cfg = small()
    net = TransformerNet(cfg)
    x = rand_input(cfg)
    zero = torch.zeros(2, cfg.rows, cfg.N)
    with torch.no_grad():
        z_bg, z_fg, bias = net.split_preactivation(net.encode(x), zero)
    assert torch.all(z_fg == 0)


def test_deterministic_forward():
    cfg = small()
    net = TransformerNet(cfg)
    x = rand_input(cfg)
    with torch.no_grad():
        assert torch.equal(net(x), net(x))


def test_decomposition_additivity():
    rng = np.random.default_rng(0)
    for i in range(10):
        cfg = small(N=int(rng.integers(2, 6)), height=int(rng.integers(16, 40)),
                    width=int(rng.integers(16, 40)), L=4)
        torch.manual_seed(i)
        net = TransformerNet(cfg).double()
        x = rand_input(cfg).double()
        alpha = torch.softmax(torch.randn(2, cfg.rows, cfg.N, dtype=torch.float64), -1)
        with torch.no_grad():
            pyr = net.encode(x)
            full = net.final_preactivation(pyr, alpha)
            z_bg, z_fg, bias = net.split_preactivation(pyr, alpha)
            assert torch.allclose(full, z_bg + z_fg + bias, rtol=1e-10, atol=1e-12)
            assert torch.equal(net.decompose(x, alpha, "full"), net(x, alpha))


def test_last_row_alpha_is_linear_in_foreground():
    # the last row scales the final modulated input, which enters the output conv linearly
    # after the rectifier; positive scalings therefore scale the foreground term exactly
    cfg = small()
    net = TransformerNet(cfg).double()
    x = rand_input(cfg).double()
    alpha = torch.softmax(torch.randn(2, cfg.rows, cfg.N, dtype=torch.float64), -1)
    scaled = alpha.clone()
    scaled[:, -1] *= 3.0
    with torch.no_grad():
        _, fg1, _ = net.split_preactivation(net.encode(x), alpha)
        _, fg3, _ = net.split_preactivation(net.encode(x), scaled)
    assert torch.allclose(fg3, 3 * fg1, rtol=1e-10, atol=1e-12)


def test_wrong_shapes_rejected():
    cfg = small()
    net = TransformerNet(cfg)
    with pytest.raises(ValueError):
        net(torch.zeros(1, 2, 1, 64, 64))
    with pytest.raises(ValueError):
        net(rand_input(cfg), torch.zeros(2, cfg.rows + 1, cfg.N))
    with pytest.raises(ValueError):
        net.decompose(rand_input(cfg), None, "sideways")


def test_config_validation():
    with pytest.raises(ValueError):
        small(L=7).validate()
    with pytest.raises(ValueError):
        small(height=8, L=8).validate()
    with pytest.warns(BottleneckSizeWarning):
        small(L=4).validate()


def test_initialization():
    net = TransformerNet(small(N=16))
    assert abs(net.enc[1].weight.std().item() - 0.02) < 0.002
    assert torch.all(net.enc[1].bias == 0)
    assert torch.all(net.enc_norm[0].weight == 1)
    assert count_parameters(net) > 0
