import json

import numpy as np
import pytest

from tempcausal.datasets import (
    DataError, DEFAULT_EDGES, GeneratorSpec, IntegrationError, generate, integrate, load_csv,
    load_ground_truth, lorenz_deriv, lorenz_truth, rk4_step, save_bundle,
)


@pytest.mark.parametrize("structure", list(DEFAULT_EDGES))
def test_basic_structures(structure):
    b = generate(GeneratorSpec(structure=structure, length=300, seed=1))
    n = 4 if structure == "diamond" else 3
    assert b.series.shape == (n, 300)
    assert b.truth.n == n and len(b.truth) == len(DEFAULT_EDGES[structure])
    assert not any(s == d for s, d in b.truth.pairs())
    for s, d, _, lag in DEFAULT_EDGES[structure]:
        assert b.truth.edges[(s - 1, d - 1)].delay == lag


def test_zero_noise_fork_is_exact():
    b = generate(GeneratorSpec(structure="fork", noise=0.0, edges=[(1, 2, 1.0, 1), (1, 3, 1.0, 2)], length=200))
    x = b.series
    assert np.array_equal(x[1, 1:], x[0, :-1])
    assert np.array_equal(x[2, 2:], x[0, :-2])


def test_zeroed_coefficient_removes_dependence():
    spec = GeneratorSpec(structure="fork", noise=0.0, edges=[(1, 2, 0.0, 1), (1, 3, 1.0, 2)], length=100)
    b = generate(spec)
    assert (0, 1) not in b.truth
    assert np.all(b.series[1] == 0)


def test_seed_determinism():
    a = generate(GeneratorSpec(structure="diamond", seed=5))
    b = generate(GeneratorSpec(structure="diamond", seed=5))
    c = generate(GeneratorSpec(structure="diamond", seed=6))
    assert np.array_equal(a.series, b.series) and not np.array_equal(a.series, c.series)


def test_innovation_moments():
    e = generate(GeneratorSpec(structure="fork", length=100_000, seed=0)).series[0]
    assert abs(e.mean()) < 0.02 and abs(e.std() - 1) < 0.02


def test_unknown_structure():
    with pytest.raises(DataError, match="valid options"):
        generate(GeneratorSpec(structure="ring"))


def test_lorenz_deriv_examples():
    assert np.allclose(lorenz_deriv(np.zeros(6), 8.0), 8.0)
    assert np.allclose(lorenz_deriv(np.full(6, 8.0), 8.0), 0.0)
    assert lorenz_deriv(np.array([1.0, 2, 3, 4, 5]), 0.0)[0] == -11.0
    with pytest.raises(ValueError):
        lorenz_deriv(np.zeros(3), 1.0)


def test_rk4_exact_on_linear_ode():
    x = rk4_step(lambda v: -v, np.array([1.0]), 0.1)
    assert abs(x[0] - np.exp(-0.1)) < 1e-6


def test_lorenz_stays_finite_and_truth():
    x = integrate(lambda v: lorenz_deriv(v, 40.0), 40.0 + np.linspace(0, 0.1, 10), 0.01, 100_000, 1000)
    assert np.all(np.isfinite(x))
    g = lorenz_truth(10)
    assert len(g) == 40 and (0, 0) in g and (8, 0) in g and (9, 0) in g and (1, 0) in g
    b = generate(GeneratorSpec(structure="lorenz96", length=200, seed=0))
    assert b.series.shape == (10, 200)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_integration_error():
    with pytest.raises(IntegrationError, match="step"):
        integrate(lambda v: v * v, np.array([1.0]), 1.0, 50)


def test_bundle_files(tmp_path):
    b = generate(GeneratorSpec(structure="mediator", length=50, seed=2))
    paths = save_bundle(b, tmp_path)
    back = load_csv(paths["data"])
    assert np.array_equal(back.series, b.series) and back.labels == b.labels
    truth = load_ground_truth(paths["truth"], 3)
    assert truth.to_dict() == b.truth.to_dict()
    prov = json.loads(paths["provenance"].read_text())
    assert prov["spec"]["structure"] == "mediator"
    first = paths["data"].read_bytes()
    save_bundle(generate(GeneratorSpec(structure="mediator", length=50, seed=2)), tmp_path)
    assert paths["data"].read_bytes() == first


@pytest.mark.parametrize("content,match", [
    ("", "empty"),
    ("a,b\n1,2\n3\n", "row 3"),
    ("a,b\n1,x\n", "row 2, column 2"),
    ("1,2\n3,nan\n", "non-finite"),
])
def test_load_csv_errors(tmp_path, content, match):
    f = tmp_path / "bad.csv"
    f.write_text(content)
    with pytest.raises(DataError, match=match):
        load_csv(f)


def test_load_csv_headerless(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("1,2\n3,4\n5,6\n")
    b = load_csv(f)
    assert b.series.tolist() == [[1, 3, 5], [2, 4, 6]] and b.labels is None


def test_ground_truth_errors(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("1,5\n")
    with pytest.raises(DataError, match="out of range"):
        load_ground_truth(f, 3)
    f.write_text("1,2\n1,2\n")
    with pytest.raises(DataError, match="duplicate"):
        load_ground_truth(f)
    f.write_text("src,dst\n2,1\n")
    assert load_ground_truth(f).pairs() == {(1, 0)}
