import numpy as np
import pytest
from scipy import stats

from scmsim import tensor as T
from scmsim.constellation import make_square_qam
from scmsim.errors import ContractError, ShapeError
from scmsim.modulator import (
    GumbelConfig,
    Modulator,
    SymbolDistribution,
    complex_to_components,
    components_to_complex,
    gumbel_softmax_sample,
    gumbel_softmax_with_noise,
    map_to_symbols,
    normalize_power,
    normalize_power_t,
    sample_gumbel,
    symbol_components,
)
from scmsim.tensor import Tensor


@pytest.fixture
def mod4():
    return Modulator(n=4, constellation=make_square_qam(4), hidden=16,
                     rng=np.random.default_rng(0))


def test_symbol_logits_shapes(mod4):
    batch = mod4.symbol_logits(Tensor(np.random.default_rng(1).normal(size=(5, 8))))
    assert batch.probs.shape == (5, 4, 2, 2)
    single = mod4.symbol_logits(Tensor(np.zeros(8)))
    assert single.probs.shape == (4, 2, 2)
    assert single.num_levels == 2


def test_probs_are_normalized(mod4):
    dist = mod4.symbol_logits(Tensor(np.random.default_rng(2).normal(size=(3, 8))))
    sums = dist.probs.data.sum(axis=-1)
    assert np.allclose(sums, 1.0, atol=1e-12)


def test_untrained_modulator_is_uniform(mod4):
    # zero-initialized output layer -> exactly uniform categoricals
    dist = mod4.symbol_logits(Tensor(np.random.default_rng(3).normal(size=(2, 8))))
    assert np.array_equal(dist.probs.data, np.full((2, 4, 2, 2), 0.5))


def test_symbol_logits_rejects_wrong_width(mod4):
    with pytest.raises(ShapeError):
        mod4.symbol_logits(Tensor(np.zeros((2, 6))))


def test_gumbel_temperature_must_be_positive(mod4):
    dist = mod4.symbol_logits(Tensor(np.zeros(8)))
    with pytest.raises(ContractError):
        gumbel_softmax_sample(dist, GumbelConfig(temperature=0.0),
                              np.random.default_rng(0))


def test_gumbel_noise_shape_checked(mod4):
    dist = mod4.symbol_logits(Tensor(np.zeros(8)))
    with pytest.raises(ShapeError):
        gumbel_softmax_with_noise(dist, np.zeros((4, 2, 3)), GumbelConfig())


def test_hard_sample_is_onehot(mod4):
    dist = mod4.symbol_logits(Tensor(np.random.default_rng(4).normal(size=(6, 8))))
    y = gumbel_softmax_sample(dist, GumbelConfig(hard=True),
                              np.random.default_rng(5))
    data = y.data
    assert set(np.unique(data).tolist()) == {0.0, 1.0}
    assert np.array_equal(data.sum(axis=-1), np.ones((6, 4, 2)))


def test_soft_sample_sums_to_one(mod4):
    dist = mod4.symbol_logits(Tensor(np.random.default_rng(6).normal(size=(6, 8))))
    y = gumbel_softmax_sample(dist, GumbelConfig(temperature=0.7),
                              np.random.default_rng(7))
    assert np.allclose(y.data.sum(axis=-1), 1.0, atol=1e-12)
    assert y.data.min() > 0


@pytest.mark.parametrize("tau", [0.3, 1.0, 4.0])
def test_hard_sampling_matches_categorical(tau):
    # straight-through argmax of logp + gumbel is an exact categorical draw,
    # independent of the temperature
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    n_draws = 100_000
    dist = SymbolDistribution(probs=Tensor(np.tile(probs, (n_draws, 1, 2, 1))[:, :1]))
    y = gumbel_softmax_sample(dist, GumbelConfig(temperature=tau, hard=True),
                              np.random.default_rng(int(tau * 10)))
    counts = y.data.reshape(-1, 4).sum(axis=0)
    chi2 = stats.chisquare(counts, probs * counts.sum())
    assert chi2.pvalue > 0.001


def test_map_to_symbols_manual():
    c = make_square_qam(4)
    onehots = np.zeros((1, 2, 2, 2))
    onehots[0, 0, 0, 1] = 1  # I0 high level
    onehots[0, 0, 1, 0] = 1  # Q0 low level
    onehots[0, 1, 0, 0] = 1  # I1 low
    onehots[0, 1, 1, 1] = 1  # Q1 high
    z = map_to_symbols(Tensor(onehots), c)
    hi = c.levels[1]
    assert np.allclose(z, [[hi - 1j * hi, -hi + 1j * hi]])


def test_symbol_components_rejects_level_mismatch():
    with pytest.raises(ShapeError):
        symbol_components(Tensor(np.zeros((2, 4, 2, 3))), make_square_qam(4))
    with pytest.raises(ShapeError):
        symbol_components(Tensor(np.zeros((4, 2))), make_square_qam(4))


def test_components_complex_round_trip():
    rng = np.random.default_rng(8)
    comps = rng.normal(size=(3, 10))
    z = components_to_complex(comps)
    assert z.shape == (3, 5)
    assert np.array_equal(complex_to_components(z), comps)
    assert np.array_equal(z[0, 0], comps[0, 0] + 1j * comps[0, 1])


def test_normalize_power_exact():
    rng = np.random.default_rng(9)
    y = Tensor(rng.normal(size=(16, 8)))
    out = normalize_power_t(y, p=1.7, n=4)
    per_seq = (out.data**2).sum(axis=1) / 4
    assert np.abs(per_seq - 1.7).max() <= 1e-12


def test_normalize_power_rejects_zero_rows():
    y = Tensor(np.zeros((2, 8)))
    with pytest.raises(ContractError):
        normalize_power_t(y, p=1.0, n=4)
    with pytest.raises(ContractError):
        normalize_power(np.zeros((2, 4), dtype=complex), p=1.0)
    with pytest.raises(ShapeError):
        normalize_power_t(Tensor(np.ones((2, 6))), p=1.0, n=4)


def test_normalize_power_tensor_matches_complex():
    rng = np.random.default_rng(10)
    comps = rng.normal(size=(5, 8))
    via_t = normalize_power_t(Tensor(comps), p=2.0, n=4).data
    via_c = normalize_power(components_to_complex(comps), p=2.0)
    assert np.allclose(complex_to_components(via_c), via_t, atol=1e-14)


def test_straight_through_gradient_reaches_logits():
    logits = Tensor(np.random.default_rng(11).normal(size=(1, 3, 2, 2)),
                    track_grad=True)
    dist = SymbolDistribution(probs=T.softmax_last(logits))
    noise = sample_gumbel(dist.probs.shape, np.random.default_rng(12))
    y = gumbel_softmax_with_noise(dist, noise, GumbelConfig(hard=True))
    comps = symbol_components(y, make_square_qam(4))
    T.backward(T.sum_sq(comps))
    assert logits.grad is not None
    assert np.any(logits.grad != 0)


def test_sampling_is_deterministic_given_seed(mod4):
    dist = mod4.symbol_logits(Tensor(np.random.default_rng(13).normal(size=(4, 8))))
    y1 = gumbel_softmax_sample(dist, GumbelConfig(hard=True), np.random.default_rng(42))
    y2 = gumbel_softmax_sample(dist, GumbelConfig(hard=True), np.random.default_rng(42))
    assert np.array_equal(y1.data, y2.data)


def test_sample_gumbel_distribution():
    g = sample_gumbel((200_000,), np.random.default_rng(14))
    # standard Gumbel: mean = Euler-Mascheroni, var = pi^2/6
    assert np.mean(g) == pytest.approx(0.5772, abs=0.01)
    assert np.var(g) == pytest.approx(np.pi**2 / 6, abs=0.03)
