import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import qmc

from pecann.problems import composite_heat_spec, poisson1d_spec, reaction_diffusion_spec
from pecann.sampling import CollocationSet, Region, read_csv, sample_problem, sobol, write_csv


def test_first_three_points():
    np.testing.assert_array_equal(sobol(3, 1)[:, 0], [0.5, 0.75, 0.25])


@pytest.mark.filterwarnings("ignore::UserWarning")
@pytest.mark.parametrize("dim", range(1, 9))
def test_matches_reference_generator(dim):
    ref = qmc.Sobol(dim, scramble=False, bits=32).random(257)[1:]
    np.testing.assert_array_equal(sobol(256, dim), ref)


def test_dim_limit():
    with pytest.raises(ValueError):
        sobol(4, 9)


@given(st.integers(1, 300))
@settings(max_examples=20, deadline=None)
def test_distinct_and_in_unit_interval(n):
    x = sobol(n, 1)[:, 0]
    assert len(np.unique(x)) == n
    assert np.all((x >= 0) & (x < 1))


def _star_discrepancy_grid(P, m=64):
    # max over grid boxes [0, a) x [0, b) of |fraction inside - area|
    edges = np.arange(1, m + 1) / m
    inside = (P[:, 0][:, None, None] < edges[None, :, None]) & (P[:, 1][:, None, None] < edges[None, None, :])
    frac = inside.mean(axis=0)
    return np.max(np.abs(frac - np.outer(edges, edges)))


def test_lower_discrepancy_than_random():
    s = _star_discrepancy_grid(sobol(1024, 2))
    r = _star_discrepancy_grid(np.random.default_rng(0).random((1024, 2)))
    assert s < r


def test_digital_shift_is_deterministic_and_different():
    a, b = sobol(16, 2, seed=3), sobol(16, 2, seed=3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sobol(16, 2))


def test_problem_counts():
    pts = sample_problem(poisson1d_spec())
    np.testing.assert_array_equal(pts["dirichlet"].points[:, 0], [0.0, 1.0])
    assert len(sample_problem(composite_heat_spec())["interior"]) == 500
    rd = sample_problem(reaction_diffusion_spec())
    assert rd.counts() == {"interior": 1024, "periodic_lo": 128, "periodic_hi": 128, "initial": 128}
    np.testing.assert_array_equal(rd["periodic_lo"].points[:, 1], rd["periodic_hi"].points[:, 1])
    assert np.all(rd["periodic_lo"].points[:, 0] == 0) and np.all(rd["periodic_hi"].points[:, 0] == 2 * np.pi)
    assert np.all(rd["initial"].points[:, 1] == 0)


def test_interior_strictly_inside_and_deterministic():
    spec = reaction_diffusion_spec()
    a, b = sample_problem(spec, 4), sample_problem(spec, 4)
    np.testing.assert_array_equal(a["interior"].points, b["interior"].points)
    X = a["interior"].points
    assert np.all((X > spec.bounds[:, 0]) & (X < spec.bounds[:, 1]))


def test_csv_roundtrip(tmp_path):
    cs = CollocationSet({
        "interior": Region(sobol(5, 2)),
        "neumann": Region(np.array([[1.0, 0.5]]), np.array([0.25]), np.array([[1.0, 0.0]])),
    })
    write_csv(cs, tmp_path / "pts.csv")
    back = read_csv(tmp_path / "pts.csv")
    np.testing.assert_array_equal(back["interior"].points, cs["interior"].points)
    assert back["interior"].targets is None
    np.testing.assert_array_equal(back["neumann"].normals, [[1.0, 0.0]])
    np.testing.assert_array_equal(back["neumann"].targets, [0.25])


def test_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        read_csv(tmp_path / "nope.csv")
