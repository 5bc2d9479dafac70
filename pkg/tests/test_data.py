import numpy as np
import pytest

from scmsim.data import (
    HierSpec,
    bayes_reference,
    class_means,
    coarse_of,
    export_csv,
    generate,
    import_csv,
    squash,
    to_arrays,
)
from scmsim.errors import ContractError


def test_coarse_of_arithmetic():
    spec = HierSpec()
    assert [coarse_of(s2, spec) for s2 in range(8)] == [0, 0, 1, 1, 2, 2, 3, 3]
    spec3 = HierSpec(l1=2, l2=6)
    assert [coarse_of(s2, spec3) for s2 in range(6)] == [0, 0, 0, 1, 1, 1]
    with pytest.raises(IndexError):
        coarse_of(8, spec)
    with pytest.raises(IndexError):
        coarse_of(-1, spec)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"l1": 3, "l2": 8},
        {"l1": 0},
        {"k": 1},
        {"coarse_sep": 0.0},
        {"fine_sep": -1.0},
        {"noise_sd": 0.0},
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ContractError):
        HierSpec(**kwargs)


def test_span():
    assert HierSpec().span == pytest.approx(11.5)
    assert HierSpec(coarse_sep=4.0, noise_sd=1.0).span == pytest.approx(7.0)


def test_generation_is_deterministic():
    spec = HierSpec(seed=5)
    a = to_arrays(generate(spec, 64))
    b = to_arrays(generate(spec, 64))
    for lhs, rhs in zip(a, b):
        assert np.array_equal(lhs, rhs)
    c = to_arrays(generate(spec, 64, stream_seed=123))
    assert not np.array_equal(a[0], c[0])


def test_shared_geometry_across_streams():
    spec = HierSpec(seed=2)
    m1 = class_means(spec)
    m2 = class_means(spec)
    assert np.array_equal(m1.fine, m2.fine)
    # fine means sit near their coarse parent
    for s2 in range(spec.l2):
        d_parent = np.linalg.norm(m1.fine[s2] - m1.coarse[coarse_of(s2, spec)])
        assert d_parent < 3 * spec.fine_sep * np.sqrt(spec.k)


def test_markov_consistency_and_range():
    spec = HierSpec(seed=1)
    samples = generate(spec, 500)
    x, s1, s2 = to_arrays(samples)
    assert np.array_equal(s1, np.array([coarse_of(int(v), spec) for v in s2]))
    assert x.min() >= 0.0 and x.max() <= 1.0
    assert x.shape == (500, 32)


def test_label_marginals_near_uniform():
    spec = HierSpec(seed=3)
    _, _, s2 = to_arrays(generate(spec, 8_000))
    counts = np.bincount(s2, minlength=spec.l2)
    # 5-sigma binomial envelope around n/L2
    expected = 8_000 / spec.l2
    sd = np.sqrt(8_000 * (1 / spec.l2) * (1 - 1 / spec.l2))
    assert np.abs(counts - expected).max() < 5 * sd


def test_squash_is_affine_then_clipped():
    spec = HierSpec()
    assert squash(np.zeros(3), spec)[0] == pytest.approx(0.5)
    assert squash(np.array([spec.span]), spec)[0] == pytest.approx(1.0)
    assert squash(np.array([100.0]), spec)[0] == 1.0
    assert squash(np.array([-100.0]), spec)[0] == 0.0


def test_bayes_reference_defaults_are_separable():
    coarse_acc, fine_acc = bayes_reference(HierSpec(), 2_000)
    assert coarse_acc >= 0.99
    assert fine_acc >= 0.95


def test_bayes_reference_tiny_noise_is_perfect():
    spec = HierSpec(noise_sd=1e-9)
    assert bayes_reference(spec, 1_000) == (1.0, 1.0)


def test_bayes_reference_unseparated_fine_layer():
    # collapse the fine offsets: coarse stays decodable, fine is chance-level
    spec = HierSpec(fine_sep=1e-9, noise_sd=0.3)
    coarse_acc, fine_acc = bayes_reference(spec, 4_000)
    assert coarse_acc >= 0.99
    per_coarse = spec.l2 // spec.l1
    assert fine_acc == pytest.approx(1 / per_coarse, abs=0.05)


def test_generate_validates_n():
    with pytest.raises(ContractError):
        generate(HierSpec(), 0)


def test_to_arrays_empty():
    with pytest.raises(ContractError):
        to_arrays([])


def test_csv_round_trip(tmp_path):
    spec = HierSpec(seed=9, k=5)
    samples = generate(spec, 20)
    path = tmp_path / "data.csv"
    export_csv(path, samples)
    back = import_csv(path)
    assert len(back) == 20
    for a, b in zip(samples, back):
        assert a.s1 == b.s1 and a.s2 == b.s2
        assert np.array_equal(a.x, b.x)


def test_csv_rejects_bad_inputs(tmp_path):
    with pytest.raises(ContractError):
        export_csv(tmp_path / "x.csv", [])
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ContractError):
        import_csv(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("s1,s2,x_0\n")
    with pytest.raises(ContractError):
        import_csv(empty)
