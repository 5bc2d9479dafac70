import math

import numpy as np
import pytest

from scmsim import tensor as T
from scmsim.errors import ContractError, ShapeError
from scmsim.optim import Adam, AdamState, LrSchedule, adam_step, lr_at
from scmsim.tensor import Tensor


def test_adam_first_step_is_signed_lr():
    p = np.array([1.0, -2.0, 0.5])
    g = np.array([10.0, -0.01, 3.0])
    st = AdamState.for_param(p)
    adam_step(p, g, st, lr=0.1)
    # at t=1 bias correction makes m_hat=g, v_hat=g^2, so the step is
    # lr * g/(|g| + eps) ~= lr * sign(g)
    assert np.allclose(p, [1.0 - 0.1, -2.0 + 0.1, 0.5 - 0.1], atol=1e-5)
    assert st.t == 1


def test_adam_step_validates():
    p = np.zeros(3)
    st = AdamState.for_param(p)
    with pytest.raises(ContractError):
        adam_step(p, np.zeros(3), st, lr=0.0)
    with pytest.raises(ShapeError):
        adam_step(p, np.zeros(4), st, lr=0.1)


def test_adam_minimizes_quadratic():
    target = np.array([3.0, -1.0, 0.25])
    x = Tensor(np.zeros(3), track_grad=True)
    opt = Adam([x])
    for _ in range(400):
        loss = T.sum_sq(T.sub(x, Tensor(target)))
        opt.zero_grad()
        T.backward(loss)
        opt.step(0.05)
    assert np.allclose(x.data, target, atol=1e-3)


def test_adam_skips_params_without_grads():
    a = Tensor(np.ones(2), track_grad=True)
    b = Tensor(np.ones(2), track_grad=True)
    opt = Adam([a, b])
    T.backward(T.sum_sq(a))
    before = b.data.copy()
    opt.step(0.1)
    assert np.array_equal(b.data, before)
    assert not np.array_equal(a.data, np.ones(2))


def test_lr_schedule_anchors_and_restarts():
    s = LrSchedule(eta_max=1e-3, eta_min=1e-5, t0=10, t_mult=2)
    assert lr_at(0, s) == pytest.approx(1e-3)
    # restart points: cycle lengths 10, 20, 40 -> restarts at 10, 30, 70
    for e in (10, 30, 70):
        assert lr_at(e, s) == pytest.approx(1e-3)
    # cosine midpoint of the first cycle
    assert lr_at(5, s) == pytest.approx((1e-3 + 1e-5) / 2)
    # midpoint of the second cycle (length 20)
    assert lr_at(20, s) == pytest.approx((1e-3 + 1e-5) / 2)
    # approaching a restart from the left decays to eta_min
    assert lr_at(9, s) < lr_at(8, s)
    assert lr_at(9, s) - 1e-5 < (1e-3 - 1e-5) * (1 - math.cos(math.pi * 0.9)) / 2


def test_lr_monotone_within_cycle():
    s = LrSchedule(eta_max=2e-4)
    vals = [lr_at(e, s) for e in range(10)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert min(vals) >= s.eta_min


def test_lr_schedule_validation():
    s = LrSchedule(eta_max=1e-3, t0=0)
    with pytest.raises(ContractError):
        lr_at(1, s)
    with pytest.raises(ContractError):
        lr_at(-1, LrSchedule(eta_max=1e-3))
    with pytest.raises(ContractError):
        lr_at(1, LrSchedule(eta_max=1e-3, t_mult=0))
