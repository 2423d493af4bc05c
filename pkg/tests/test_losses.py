import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from motionsel.losses import LossConfig, l1_loss, motion_loss, sequence_loss, sequence_terms


def t(x):
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def test_l1_examples():
    gt = torch.full((2, 3), 0.25, dtype=torch.float64)
    assert l1_loss(gt, gt) == 0
    assert l1_loss(gt + 0.5, gt).item() == pytest.approx(0.5)
    assert l1_loss(-gt, gt).item() == pytest.approx(0.5)
    with pytest.raises(ValueError):
        l1_loss(gt, gt[:1])


def test_motion_examples():
    a, b = t([[0.1, 0.2]]), t([[0.3, -0.4]])
    assert motion_loss(a, b, a, b) == 0
    # static prediction against a constant ground-truth increment c
    c = 0.3
    assert motion_loss(a, a, b + c, b).item() == pytest.approx(c)
    # sign-flipped increments of equal magnitude
    assert motion_loss(a + 0.2, a, b - 0.2, b).item() == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        motion_loss(a, a, a, t([[1.0]]))


def _scalar_oracle(preds, gts, mu):
    """Direct element loops over the per-batch loss with the indicator on the first frame."""
    total = 0.0
    for i in range(len(preds)):
        p, g = np.ravel(preds[i]), np.ravel(gts[i])
        total += sum(abs(pv - gv) for pv, gv in zip(p, g)) / len(p)
        if i > 0:
            pp, gp = np.ravel(preds[i - 1]), np.ravel(gts[i - 1])
            total += mu * sum(abs(abs(p[k] - pp[k]) - abs(g[k] - gp[k])) for k in range(len(p))) / len(p)
    return total


def test_sequence_loss_toy_matches_scalar_oracle():
    preds = [[0.5, -0.2], [0.1, 0.4], [0.0, 0.9]]
    gts = [[0.3, -0.1], [0.3, 0.2], [-0.5, 0.7]]
    expected = _scalar_oracle(np.array(preds), np.array(gts), 10.0)
    got = sequence_loss([t(p) for p in preds], [t(g) for g in gts], LossConfig(10.0))
    assert got.item() == pytest.approx(expected, rel=1e-12)
    # by hand: L1 = 0.15 + 0.2 + 0.35; motion = 0.35 + 0.35
    assert expected == pytest.approx(0.7 + 10 * 0.7)


def test_sequence_loss_single_frame_and_mu_zero():
    p, g = [t([0.2, 0.4])], [t([0.0, 0.0])]
    assert sequence_loss(p, g, LossConfig(10.0)).item() == pytest.approx(0.3)
    preds = [t([0.2]), t([0.9])]
    gts = [t([0.0]), t([0.0])]
    assert sequence_loss(preds, gts, LossConfig(0.0)).item() == pytest.approx(0.2 + 0.9)
    with pytest.raises(ValueError):
        sequence_loss(preds, gts[:1])
    with pytest.raises(ValueError):
        LossConfig(-1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_nonnegative_and_flip_invariant(n, seed):
    rng = np.random.default_rng(seed)
    preds = [t(rng.uniform(-1, 1, (1, 3, 4))) for _ in range(n)]
    gts = [t(rng.uniform(-1, 1, (1, 3, 4))) for _ in range(n)]
    loss = sequence_loss(preds, gts)
    assert loss >= 0
    flipped = sequence_loss([p.flip(-1) for p in preds], [g.flip(-1) for g in gts])
    assert flipped.item() == pytest.approx(loss.item(), rel=1e-12)
    assert sequence_loss(gts, gts) == 0


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    gts = [t(rng.uniform(-1, 1, (2, 3))) for _ in range(3)]
    base = [rng.uniform(-1, 1, (2, 3)) for _ in range(3)]
    preds = [t(b).requires_grad_() for b in base]
    l1, motion = sequence_terms(preds, gts)
    for term_index, term in enumerate((l1, motion)):
        grads = torch.autograd.grad(term, preds, retain_graph=True)
        h = 1e-6
        for i in range(3):
            for idx in np.ndindex(2, 3):
                up = [b.copy() for b in base]
                dn = [b.copy() for b in base]
                up[i][idx] += h
                dn[i][idx] -= h
                fu = sequence_terms([t(x) for x in up], gts)[term_index].item()
                fd = sequence_terms([t(x) for x in dn], gts)[term_index].item()
                assert grads[i][idx].item() == pytest.approx((fu - fd) / (2 * h), abs=1e-6)


def test_subgradient_at_zero_is_zero():
    p = torch.zeros(3, dtype=torch.float64, requires_grad=True)
    l1_loss(p, torch.zeros(3, dtype=torch.float64)).backward()
    assert torch.all(p.grad == 0)
