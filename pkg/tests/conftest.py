"""Shared fixtures: the finite-difference harness and the op registry.

Every differentiable op gets a factory returning (leaf tensors, build)
where build() recomputes a scalar loss from the current leaf data. The
harness compares backward() gradients against central differences on
every leaf coordinate. Non-scalar ops are reduced through a fixed random
projection so their full Jacobian is exercised.
"""

from __future__ import annotations

import numpy as np
import pytest

from scmsim import tensor as T
from scmsim.constellation import make_square_qam
from scmsim.decorrelator import batch_standardize, residual_t
from scmsim.modulator import (GumbelConfig, SymbolDistribution,
                              gumbel_softmax_with_noise, normalize_power_t,
                              symbol_components)
from scmsim.tensor import Tensor

H = 1e-5
ATOL = 1e-7
RTOL = 1e-4


def fd_check(build, leaves, h=H, atol=ATOL, rtol=RTOL):
    """Assert analytic grads of build() match central differences."""
    loss = build()
    for p in leaves:
        p.grad = None
    T.backward(loss)
    grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
             for p in leaves]
    for p, g in zip(leaves, grads):
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(build().data)
            flat[i] = orig - h
            lm = float(build().data)
            flat[i] = orig
            num = (lp - lm) / (2.0 * h)
            ana = gflat[i]
            assert abs(ana - num) <= atol + rtol * abs(num), (
                f"grad mismatch at coord {i}: analytic={ana!r} numeric={num!r}")


def _leaf(rng, shape, scale=1.0):
    return Tensor(scale * rng.normal(size=shape), track_grad=True)


def _proj(rng, out):
    c = Tensor(rng.normal(size=out.shape))

    def close(o):
        return T.tsum(T.mul(o, c))

    return close


def _case_matmul(rng):
    a, b = _leaf(rng, (3, 4)), _leaf(rng, (4, 2))
    c = Tensor(rng.normal(size=(3, 2)))
    return [a, b], lambda: T.tsum(T.mul(T.matmul(a, b), c))


def _case_add(rng):
    a, b = _leaf(rng, (3, 4)), _leaf(rng, (3, 4))
    c = Tensor(rng.normal(size=(3, 4)))
    return [a, b], lambda: T.tsum(T.mul(T.add(a, b), c))


def _case_sub(rng):
    a, b = _leaf(rng, (3, 4)), _leaf(rng, (3, 4))
    c = Tensor(rng.normal(size=(3, 4)))
    return [a, b], lambda: T.tsum(T.mul(T.sub(a, b), c))


def _case_mul(rng):
    a, b = _leaf(rng, (3, 4)), _leaf(rng, (3, 4))
    c = Tensor(rng.normal(size=(3, 4)))
    return [a, b], lambda: T.tsum(T.mul(T.mul(a, b), c))


def _case_mul_scalar(rng):
    a = _leaf(rng, (3, 4))
    k = float(rng.uniform(-2, 2))
    c = Tensor(rng.normal(size=(3, 4)))
    return [a], lambda: T.tsum(T.mul(T.mul_scalar(a, k), c))


def _case_add_bias(rng):
    x, b = _leaf(rng, (3, 4)), _leaf(rng, (4,))
    c = Tensor(rng.normal(size=(3, 4)))
    return [x, b], lambda: T.tsum(T.mul(T.add_bias(x, b), c))


def _case_sub_bias(rng):
    x, b = _leaf(rng, (3, 4)), _leaf(rng, (4,))
    c = Tensor(rng.normal(size=(3, 4)))
    return [x, b], lambda: T.tsum(T.mul(T.sub_bias(x, b), c))


def _case_scale_cols(rng):
    x, s = _leaf(rng, (3, 4)), _leaf(rng, (4,))
    c = Tensor(rng.normal(size=(3, 4)))
    return [x, s], lambda: T.tsum(T.mul(T.scale_cols(x, s), c))


def _case_scale_rows(rng):
    x, s = _leaf(rng, (3, 4)), _leaf(rng, (3,))
    c = Tensor(rng.normal(size=(3, 4)))
    return [x, s], lambda: T.tsum(T.mul(T.scale_rows(x, s), c))


def _case_row_sumsq(rng):
    x = _leaf(rng, (3, 4))
    c = Tensor(rng.normal(size=(3,)))
    return [x], lambda: T.tsum(T.mul(T.row_sumsq(x), c))


def _case_col_mean(rng):
    x = _leaf(rng, (3, 4))
    c = Tensor(rng.normal(size=(4,)))
    return [x], lambda: T.tsum(T.mul(T.col_mean(x), c))


def _case_pow_const(rng):
    x = Tensor(rng.uniform(0.5, 2.5, size=(3, 3)), track_grad=True)
    p = float(rng.choice([-2.0, -1.0, -0.5, 0.5, 2.0, 3.0]))
    c = Tensor(rng.normal(size=(3, 3)))
    return [x], lambda: T.tsum(T.mul(T.pow_const(x, p), c))


def _case_log(rng):
    x = Tensor(rng.uniform(0.2, 3.0, size=(3, 4)), track_grad=True)
    c = Tensor(rng.normal(size=(3, 4)))
    return [x], lambda: T.tsum(T.mul(T.log(x), c))


def _case_sigmoid(rng):
    x = _leaf(rng, (3, 4), scale=3.0)
    c = Tensor(rng.normal(size=(3, 4)))
    return [x], lambda: T.tsum(T.mul(T.sigmoid(x), c))


def _away_from_zero(rng, shape, margin=0.1):
    x = rng.normal(size=shape)
    x = np.where(np.abs(x) < margin, margin * np.sign(x) + (x == 0) * margin, x)
    return x


def _case_prelu_scalar(rng):
    x = Tensor(_away_from_zero(rng, (3, 4)), track_grad=True)
    s = Tensor(np.asarray(rng.uniform(0.1, 0.5)), track_grad=True)
    c = Tensor(rng.normal(size=(3, 4)))
    return [x, s], lambda: T.tsum(T.mul(T.prelu(x, s), c))


def _case_prelu_vector(rng):
    x = Tensor(_away_from_zero(rng, (3, 4)), track_grad=True)
    s = Tensor(rng.uniform(0.1, 0.5, size=(4,)), track_grad=True)
    c = Tensor(rng.normal(size=(3, 4)))
    return [x, s], lambda: T.tsum(T.mul(T.prelu(x, s), c))


def _case_softmax_last(rng):
    x = _leaf(rng, (2, 3, 4))
    c = Tensor(rng.normal(size=(2, 3, 4)))
    return [x], lambda: T.tsum(T.mul(T.softmax_last(x), c))


def _case_softmax_rows(rng):
    x = _leaf(rng, (3, 4))
    c = Tensor(rng.normal(size=(3, 4)))
    return [x], lambda: T.tsum(T.mul(T.softmax_rows(x), c))


def _case_cross_entropy(rng):
    x = _leaf(rng, (4, 5))
    labels = rng.integers(0, 5, size=4)
    return [x], lambda: T.cross_entropy(x, labels)


def _case_mse(rng):
    x, y = _leaf(rng, (3, 4)), _leaf(rng, (3, 4))
    return [x, y], lambda: T.mse(x, y)


def _case_sum_sq(rng):
    x = _leaf(rng, (3, 4))
    return [x], lambda: T.sum_sq(x)


def _case_tsum(rng):
    x = _leaf(rng, (3, 4))
    return [x], lambda: T.tsum(x)


def _case_reshape(rng):
    x = _leaf(rng, (3, 4))
    c = Tensor(rng.normal(size=(2, 6)))
    return [x], lambda: T.tsum(T.mul(T.reshape(x, (2, 6)), c))


def _case_affine(rng):
    x, w, b = _leaf(rng, (3, 4)), _leaf(rng, (4, 2)), _leaf(rng, (2,))
    c = Tensor(rng.normal(size=(3, 2)))
    return [x, w, b], lambda: T.tsum(T.mul(T.affine(x, w, b), c))


def _case_gumbel_relaxed(rng):
    z = _leaf(rng, (2, 2, 2, 3))
    noise = rng.gumbel(size=(2, 2, 2, 3))
    tau = float(rng.uniform(0.5, 2.0))
    c = Tensor(rng.normal(size=(2, 2, 2, 3)))

    def build():
        dist = SymbolDistribution(probs=T.softmax_last(z))
        y = gumbel_softmax_with_noise(dist, noise, GumbelConfig(tau, hard=False))
        return T.tsum(T.mul(y, c))

    return [z], build


def _case_symbol_components(rng):
    x = _leaf(rng, (2, 3, 2, 4))
    qam16 = make_square_qam(16)
    c = Tensor(rng.normal(size=(2, 6)))
    return [x], lambda: T.tsum(T.mul(symbol_components(x, qam16), c))


def _case_normalize_power(rng):
    y = Tensor(rng.normal(size=(3, 8)) + 0.3, track_grad=True)
    c = Tensor(rng.normal(size=(3, 8)))
    return [y], lambda: T.tsum(T.mul(normalize_power_t(y, 1.7, 4), c))


def _case_batch_standardize(rng):
    x = _leaf(rng, (4, 5))
    c = Tensor(rng.normal(size=(4, 5)))
    return [x], lambda: T.tsum(T.mul(batch_standardize(x), c))


def _case_residual(rng):
    u1, u2 = _leaf(rng, (3, 4)), _leaf(rng, (3, 4))
    wt, b = _leaf(rng, (4, 4)), _leaf(rng, (4,))
    c = Tensor(rng.normal(size=(3, 4)))
    return [u1, u2, wt, b], lambda: T.tsum(T.mul(residual_t(u1, u2, wt, b), c))


OP_CASES = [
    ("matmul", _case_matmul),
    ("add", _case_add),
    ("sub", _case_sub),
    ("mul", _case_mul),
    ("mul_scalar", _case_mul_scalar),
    ("add_bias", _case_add_bias),
    ("sub_bias", _case_sub_bias),
    ("scale_cols", _case_scale_cols),
    ("scale_rows", _case_scale_rows),
    ("row_sumsq", _case_row_sumsq),
    ("col_mean", _case_col_mean),
    ("pow_const", _case_pow_const),
    ("log", _case_log),
    ("sigmoid", _case_sigmoid),
    ("prelu_scalar", _case_prelu_scalar),
    ("prelu_vector", _case_prelu_vector),
    ("softmax_last", _case_softmax_last),
    ("softmax_rows", _case_softmax_rows),
    ("cross_entropy", _case_cross_entropy),
    ("mse", _case_mse),
    ("sum_sq", _case_sum_sq),
    ("tsum", _case_tsum),
    ("reshape", _case_reshape),
    ("affine", _case_affine),
    ("gumbel_relaxed", _case_gumbel_relaxed),
    ("symbol_components", _case_symbol_components),
    ("normalize_power", _case_normalize_power),
    ("batch_standardize", _case_batch_standardize),
    ("residual", _case_residual),
]


def run_op_cases(n_instances: int, seed: int = 0):
    import zlib

    for name, factory in OP_CASES:
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        for _ in range(n_instances):
            leaves, build = factory(rng)
            fd_check(build, leaves)


@pytest.fixture(scope="session")
def tiny_cfg():
    from scmsim.config import RunConfig

    return RunConfig(n_samples=240, epochs1=4, epochs2=6, epochs3=2,
                     hidden=32, n=4, batch_size=32, eval_noise_draws=4)


@pytest.fixture(scope="session")
def smoke_cfg():
    from scmsim.config import RunConfig

    return RunConfig(n_samples=600, epochs1=20, epochs2=30, epochs3=10,
                     hidden=64, eval_noise_draws=8)


@pytest.fixture(scope="session")
def smoke_run(smoke_cfg):
    from scmsim.pipeline import run_experiment

    return run_experiment(smoke_cfg)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Replay the acceptance PASS/FAIL lines after the run summary."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", []) if mod else []
    if lines:
        terminalreporter.section("acceptance")
        for ln in lines:
            terminalreporter.write_line(ln)
