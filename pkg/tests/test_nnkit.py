import math

import numpy as np
import pytest

from glove.config import AdamWParams, CosineRestartSchedule
from glove.errors import ShapeMismatch
from glove.model import BranchSpec, FusionSpec, MultiBranchNet
from glove.nnkit import functional as F
from glove.nnkit import (
    AdamState,
    AdamW,
    BatchNorm1d,
    Conv1d,
    CosineWarmRestarts,
    Linear,
    Parameter,
    Sequential,
    Tensor,
    adamw_step,
    clip_gradients,
    concat,
    grad_check,
    lr_at,
    no_grad,
)

TOL = 1e-4


def param(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def assert_grads(fn, inputs):
    errors = grad_check(fn, inputs, h=1e-4)
    assert max(errors) < TOL, errors


def test_elementwise_and_reduction_grads(rng):
    a, b = param(rng, 3, 4), param(rng, 4)
    c = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)), requires_grad=True)
    assert_grads(lambda: ((a * b + a / c - b) ** 2).sum(), [a, b, c])
    assert_grads(lambda: (c.log() + a.exp() * 0.1).mean(), [a, c])
    w = param(rng, 4, 2)
    assert_grads(
        lambda: ((a @ w).relu() + 0.5 * c.sqrt().sum(axis=1, keepdims=True)).sum(), [a, w, c]
    )
    assert_grads(lambda: (a.reshape(2, 6).transpose()[1:4] * 2.0).sum(), [a])
    assert_grads(lambda: concat([a, c], axis=1).mean(axis=0).sum(), [a, c])


def test_conv1d_examples():
    x = Tensor(np.array([[[1.0, 2.0, 3.0]]]))
    identity = Tensor(np.array([[[0.0, 1.0, 0.0]]]))
    assert np.array_equal(F.conv1d(x, identity).data, x.data)
    ones = Tensor(np.ones((1, 1, 3)))
    assert F.conv1d(x, ones).data.reshape(-1).tolist() == [3.0, 6.0, 5.0]
    with pytest.raises(ShapeMismatch):
        F.conv1d(Tensor(np.ones((1, 2, 3))), ones)


def test_conv1d_grads(rng):
    x, w, b = param(rng, 2, 3, 7), param(rng, 4, 3, 3), param(rng, 4)
    assert_grads(lambda: (F.conv1d(x, w, b) ** 2).sum(), [x, w, b])
    w4 = param(rng, 2, 3, 4)
    assert_grads(lambda: (F.conv1d(x, w4) ** 2).sum(), [x, w4])


def test_layer_ops_examples():
    assert F.relu(Tensor(np.array([-2.0, 3.0]))).data.tolist() == [0.0, 3.0]
    pooled = F.adaptive_avg_pool1d(Tensor(np.array([[[2.0, 4.0, 6.0]]])))
    assert pooled.data.reshape(-1).tolist() == [4.0]
    ln = F.layer_norm(Tensor(np.array([[1.0, 2.0, 4.0, 9.0]])), None, None)
    assert abs(ln.data.mean()) < 1e-12
    assert ln.data.var() == pytest.approx(1.0, abs=1e-4)
    pooled = F.max_pool1d(Tensor(np.array([[[1.0, 5.0, 2.0, 0.0, 7.0]]])))
    assert pooled.data.reshape(-1).tolist() == [5.0, 2.0]
    probs = F.softmax(Tensor(np.array([[1000.0, 1000.0, 999.0]])))
    assert probs.data.sum() == pytest.approx(1.0, abs=1e-12)


def test_layer_op_grads(rng):
    x3 = param(rng, 4, 3, 6)
    gamma, beta = param(rng, 3), param(rng, 3)
    rm, rv = np.zeros(3), np.ones(3)
    scale = Tensor(np.arange(72.0).reshape(4, 3, 6))
    assert_grads(
        lambda: (F.batch_norm(x3, gamma, beta, rm, rv, training=True) * scale).sum(),
        [x3, gamma, beta],
    )
    x2 = param(rng, 5, 6)
    g2, b2 = param(rng, 6), param(rng, 6)
    weights = Tensor(rng.normal(size=(5, 6)))
    assert_grads(lambda: (F.layer_norm(x2, g2, b2) * weights).sum(), [x2, g2, b2])
    assert_grads(lambda: (F.max_pool1d(x3) * 1.5).sum(), [x3])
    assert_grads(lambda: (F.adaptive_avg_pool1d(x3) ** 2).sum(), [x3])
    assert_grads(
        lambda: (F.dropout(x2, 0.3, True, np.random.default_rng(0)) * weights).sum(), [x2]
    )
    assert_grads(lambda: (F.softmax(x2) * weights).sum(), [x2])


def test_batch_norm_running_stats():
    x = Tensor(np.array([[1.0], [3.0]]))
    rm, rv = np.zeros(1), np.ones(1)
    F.batch_norm(x, Tensor(np.ones(1)), Tensor(np.zeros(1)), rm, rv, training=True)
    assert rm.tolist() == [pytest.approx(0.2)]
    assert rv.tolist() == [pytest.approx(0.9 + 0.1 * 2.0)]
    with pytest.raises(ShapeMismatch):
        F.batch_norm(Tensor(np.ones((1, 1))), Tensor(np.ones(1)), Tensor(np.zeros(1)), rm, rv, True)


def test_dropout_modes(rng):
    x = Tensor(np.ones((1000, 10)))
    assert F.dropout(x, 0.5, False, rng) is x
    dropped = F.dropout(x, 0.5, True, rng).data
    assert set(np.unique(dropped)) <= {0.0, 2.0}
    assert dropped.mean() == pytest.approx(1.0, abs=0.05)


def test_focal_loss_reductions(rng):
    logits = param(rng, 8, 11)
    targets = rng.integers(0, 11, size=8)
    ce = F.cross_entropy(logits, targets).item()
    assert F.focal_loss(logits, targets, alpha=1.0, gamma=0.0).item() == pytest.approx(ce, abs=1e-12)
    half = Tensor(np.array([[0.0, 0.0]]))
    expected = 0.25 * math.log(2)
    assert F.focal_loss(half, np.array([0]), 1.0, 2.0).item() == pytest.approx(expected, abs=1e-12)
    confident = Tensor(np.array([[50.0, 0.0]]))
    assert F.focal_loss(confident, np.array([0])).item() < 1e-12
    assert_grads(lambda: F.focal_loss(logits, targets, 0.5, 2.0), [logits])
    assert_grads(lambda: F.cross_entropy(logits, targets), [logits])
    with pytest.raises(ShapeMismatch):
        F.cross_entropy(logits, np.full(8, 11))


def test_adamw_single_step():
    theta = np.zeros(1)
    adamw_step([theta], [np.ones(1)], AdamState.zeros_like([theta]), AdamWParams())
    assert theta[0] == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-15)


def test_adamw_decay_only():
    hp = AdamWParams(lr=0.01, weight_decay=0.1)
    theta = np.array([2.0, -4.0])
    state = AdamState.zeros_like([theta])
    for step in range(1, 4):
        adamw_step([theta], [np.zeros(2)], state, hp)
        expected = np.array([2.0, -4.0]) * (1 - 0.01 * 0.1) ** step
        assert np.allclose(theta, expected, rtol=1e-12, atol=0.0)


def test_adam_matches_scalar_reference(rng):
    hp = AdamWParams(weight_decay=0.0)
    theta = np.array([0.3])
    state = AdamState.zeros_like([theta])
    ref, m, v = 0.3, 0.0, 0.0
    for t in range(1, 11):
        g = float(rng.normal())
        adamw_step([theta], [np.array([g])], state, hp)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 0.001 * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
        assert theta[0] == pytest.approx(ref, abs=1e-10)


def test_lr_schedule_trace():
    schedule = CosineRestartSchedule(T0=10, Tmult=2, eta_min=0.0)
    assert lr_at(schedule, 0, 1e-3) == pytest.approx(1e-3)
    assert lr_at(schedule, 5, 1e-3) == pytest.approx(5e-4)
    assert lr_at(schedule, 10, 1e-3) == pytest.approx(1e-3)
    assert lr_at(schedule, 15, 1e-3) == pytest.approx(1e-3 * (1 + math.cos(math.pi * 5 / 20)) / 2)
    assert lr_at(schedule, 15, 1e-3) == pytest.approx(8.536e-4, abs=1e-7)
    assert lr_at(schedule, 30, 1e-3) == pytest.approx(1e-3)


def test_scheduler_drives_optimizer():
    opt = AdamW([Parameter(np.zeros(2))], AdamWParams(lr=1e-3))
    scheduler = CosineWarmRestarts(opt, CosineRestartSchedule())
    lrs = [scheduler.step() for _ in range(10)]
    assert lrs[4] == pytest.approx(5e-4)
    assert lrs[9] == pytest.approx(1e-3)


def test_clip_gradients():
    small = [np.array([0.3, 0.4])]
    assert clip_gradients(small)[0].tolist() == [0.3, 0.4]
    clipped = clip_gradients([np.array([3.0, 4.0])])
    assert np.allclose(clipped[0], [0.6, 0.8])
    rng = np.random.default_rng(0)
    for _ in range(50):
        grads = [rng.normal(scale=10, size=s) for s in [(3,), (2, 2), (5,)]]
        norm = math.sqrt(sum(float((g * g).sum()) for g in clip_gradients(grads)))
        assert norm <= 1.0 + 1e-9


def test_module_state_roundtrip(rng):
    net = Sequential(Conv1d(2, 3, 3, rng), BatchNorm1d(3))
    names = [name for name, _ in net.named_parameters()]
    assert names == ["0.weight", "0.bias", "1.weight", "1.bias"]
    state = net.state_dict()
    assert set(state) == set(names) | {"1.running_mean", "1.running_var"}
    other = Sequential(Conv1d(2, 3, 3, np.random.default_rng(99)), BatchNorm1d(3))
    other.load_state_dict(state)
    assert all(np.array_equal(other.state_dict()[k], v) for k, v in state.items())
    with pytest.raises(ShapeMismatch):
        Linear(4, 2, rng).load_state_dict({"weight": np.zeros((2, 4))})


def test_no_grad_records_nothing(rng):
    a = param(rng, 3)
    with no_grad():
        out = (a * 2.0).sum()
    assert not out.requires_grad


def small_network(seed=0):
    return MultiBranchNet(
        branch=BranchSpec(conv1_channels=3, conv2_channels=4),
        fusion=FusionSpec(hidden=(8,), dropout=(0.0,)),
        seed=seed,
    )


def test_composed_multibranch_grads_in_eval_mode(rng):
    net = small_network().eval()
    x = Tensor(rng.normal(size=(3, 5, 6, 12)))
    targets = np.array([0, 4, 9])
    assert_grads(lambda: F.focal_loss(net(x), targets), net.parameters() + [x])
