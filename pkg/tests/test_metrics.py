import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from headmotion.metrics import (
    MetricReport,
    dtw,
    evaluate_pair,
    frechet_discrete,
    frechet_gaussian,
    gaussian_frechet,
    mae,
    pearson,
    read_reports,
    write_reports,
)
from headmotion.motion import PoseSequence
from oracles import dtw_bruteforce, frechet_bruteforce, warping_paths

seqs = arrays(np.float64, st.tuples(st.integers(1, 5), st.just(3)), elements=st.floats(-1, 1))


def xs(*v):
    return np.array([[x, 0.0, 0.0] for x in v])


def test_path_enumeration_counts():
    # Delannoy numbers
    assert len(warping_paths(3, 3)) == 13
    assert len(warping_paths(4, 4)) == 63
    assert len(warping_paths(1, 5)) == 1


def test_dtw_examples():
    a = xs(0, 1, 2)
    assert dtw(a, a) == 0.0
    assert dtw(xs(0, 0, 0), xs(0)) == 0.0
    assert dtw(xs(0, 2, 4), xs(0, 4)) == pytest.approx(2.0)
    assert dtw(xs(0, 1), xs(1, 0)) == pytest.approx(2.0)


def test_frechet_examples():
    assert frechet_discrete(xs(0, 2, 4), xs(0, 4)) == pytest.approx(2.0)
    assert frechet_discrete(xs(0, 1, 2), xs(0, 1, 2)) == 0.0


def test_mae_examples():
    assert mae(xs(0, 1), xs(1, 1)) == pytest.approx(1 / 6)
    with pytest.raises(ValueError, match="length"):
        mae(xs(0, 1), xs(0))


def test_empty_sequences_rejected():
    with pytest.raises(ValueError, match="empty"):
        dtw(np.zeros((0, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError, match="empty"):
        frechet_discrete(np.zeros((2, 3)), np.zeros((0, 3)))


@settings(max_examples=60, deadline=None)
@given(seqs, seqs)
def test_dp_against_bruteforce(a, b):
    assert dtw(a, b) == pytest.approx(dtw_bruteforce(a, b), abs=1e-12)
    assert frechet_discrete(a, b) == pytest.approx(frechet_bruteforce(a, b), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seqs, seqs)
def test_metric_properties(a, b):
    assert dtw(a, b) == pytest.approx(dtw(b, a), abs=1e-12)
    assert frechet_discrete(a, b) == pytest.approx(frechet_discrete(b, a), abs=1e-12)
    assert dtw(a, a) == 0.0 and frechet_discrete(a, a) == 0.0
    # the coupling maximum never exceeds the coupling sum
    assert frechet_discrete(a, b) <= dtw(a, b) + 1e-12


def test_gaussian_frechet_identity(rng):
    a = rng.standard_normal((50, 3))
    assert frechet_gaussian(a, a) == pytest.approx(0.0, abs=1e-10)


def test_gaussian_frechet_closed_form():
    mu_a, mu_b = np.array([0.1, 0.0, -0.2]), np.array([0.0, 0.3, 0.1])
    ca, cb = np.diag([1.0, 0.5, 0.2]), np.diag([0.25, 2.0, 0.2])
    expected = 0.01 + 0.09 + 0.09 + (1 - 0.5) ** 2 + (np.sqrt(0.5) - np.sqrt(2.0)) ** 2 + 0.0
    assert gaussian_frechet(mu_a, ca, mu_b, cb) == pytest.approx(expected, abs=1e-12)


def test_gaussian_frechet_against_sqrtm(rng):
    for _ in range(20):
        A = rng.standard_normal((3, 3))
        B = rng.standard_normal((3, 3))
        ca, cb = A @ A.T + 0.1 * np.eye(3), B @ B.T + 0.1 * np.eye(3)
        mu_a, mu_b = rng.standard_normal(3), rng.standard_normal(3)
        cross = scipy.linalg.sqrtm(ca @ cb).real
        ref = np.sum((mu_a - mu_b) ** 2) + np.trace(ca + cb - 2 * cross)
        assert gaussian_frechet(mu_a, ca, mu_b, cb) == pytest.approx(ref, abs=1e-8)


def test_gaussian_frechet_needs_two_frames():
    with pytest.raises(ValueError):
        frechet_gaussian(np.zeros((1, 3)), np.zeros((3, 3)))


def test_gaussian_frechet_shift(rng):
    a = rng.standard_normal((40, 3))
    assert frechet_gaussian(a, a + [1.0, 2.0, 0.0]) == pytest.approx(5.0, abs=1e-9)


def test_pearson_examples():
    res = pearson([1, 2, 3, 4], [1, 3, 2, 4])
    assert res.r == pytest.approx(0.8)
    assert res.n == 4
    # t = 0.8 * sqrt(2 / 0.36), two-sided with 2 dof
    t = 0.8 * np.sqrt(2 / 0.36)
    assert res.p == pytest.approx(1 - t / np.sqrt(2 + t * t), rel=1e-9)
    assert pearson([1, 2, 3], [3, 2, 1]).r == pytest.approx(-1.0)
    with pytest.raises(ValueError, match="degenerate"):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2])


def test_pearson_matches_scipy(rng):
    from scipy import stats
    x, y = rng.standard_normal(30), rng.standard_normal(30)
    ref = stats.pearsonr(x, y)
    res = pearson(x, y)
    assert res.r == pytest.approx(ref[0], abs=1e-12)
    assert res.p == pytest.approx(ref[1], rel=1e-8)


def test_report_validation_and_io(tmp_path, rng):
    a, b = PoseSequence(rng.uniform(-.5, .5, (10, 3))), PoseSequence(rng.uniform(-.5, .5, (10, 3)))
    r = evaluate_pair("u1", "sample_0", a, b)
    write_reports(tmp_path / "m.csv", [r])
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "utterance_id,variant,mae,dtw,fd_gaussian,fd_discrete"
    assert read_reports(tmp_path / "m.csv") == [r]
    with pytest.raises(ValueError):
        MetricReport("u", "v", -1.0, 0, 0, 0)
