import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from levy_galerkin import levy
from levy_galerkin.levy import LevyMeasureSpec


def test_covariance_examples():
    assert np.allclose(levy.covariance_diag(LevyMeasureSpec(1.0, [1.0], [1.0])), [1.0])
    spec = LevyMeasureSpec(2.0, [0.5, 0.5], [1.0, 0.5])
    assert np.allclose(levy.covariance_diag(spec), [1.0, 0.25])


def test_second_moment_geometric():
    K = 8
    a = 2.0 ** -np.arange(1, K + 1)
    spec = LevyMeasureSpec(3.0, np.full(K, 1 / K), a)
    closed = 3.0 / K * (1 - 4.0**-K) / 3.0  # sum of 4^-k, k = 1..K
    assert levy.second_moment_of_measure(spec) == pytest.approx(closed, rel=1e-14)
    scaled = LevyMeasureSpec(3.0, spec.mode_probs, 5.0 * a)
    assert levy.second_moment_of_measure(scaled) == pytest.approx(25 * closed, rel=1e-14)


def test_q_sqrt():
    spec = LevyMeasureSpec(4.0, [0.25, 0.75], [0.5, 1.0])
    assert np.allclose(levy.q_sqrt_apply(spec, [1.0, 1.0, 1.0]), [0.5, np.sqrt(3.0), 0.0])


def test_power_law_trace():
    spec = LevyMeasureSpec.power_law(50.0, 100, -1.0, trace=2.0)
    q = levy.covariance_diag(spec)
    assert q.sum() == pytest.approx(2.0, rel=1e-12)
    assert q[0] / q[9] == pytest.approx(10.0, rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(intensity=1.0, mode_probs=[0.5, 0.4], jump_scales=[1.0, 1.0]),
    dict(intensity=-1.0, mode_probs=[1.0], jump_scales=[1.0]),
    dict(intensity=1.0, mode_probs=[1.0], jump_scales=[0.0]),
    dict(intensity=1.0, mode_probs=[1.0], jump_scales=[1.0, 2.0]),
])
def test_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        LevyMeasureSpec(**kwargs)


def test_zero_intensity_gives_empty_paths():
    spec = LevyMeasureSpec(0.0, [1.0], [1.0])
    for p in levy.sample_paths(spec, 2.0, 1, range(50)):
        assert len(p) == 0


def test_path_invariants():
    spec = LevyMeasureSpec.power_law(40.0, 16, -1.0)
    for p in levy.sample_paths(spec, 1.5, 9, range(200)):
        assert np.all(np.diff(p.times) > 0)
        assert np.all((p.times > 0) & (p.times <= 1.5))
        assert np.all((p.modes >= 1) & (p.modes <= 16))
        assert np.allclose(np.abs(p.sizes), spec.jump_scales[p.modes - 1])


def test_reproducible_substreams():
    spec = LevyMeasureSpec.power_law(20.0, 8, -2.0)
    a = levy.sample_paths(spec, 1.0, 123, [5, 7])
    b = levy.sample_paths(spec, 1.0, 123, [7, 5], threads=2)
    for x, y in ((a[0], b[1]), (a[1], b[0])):
        assert np.array_equal(x.times, y.times)
        assert np.array_equal(x.modes, y.modes)
        assert np.array_equal(x.sizes, y.sizes)
    c = levy.sample_paths(spec, 1.0, 123, [5], stream=1)[0]
    assert not np.array_equal(a[0].times, c.times)


def test_seed_range():
    with pytest.raises(ValueError):
        levy.substream(-1, 0)
    with pytest.raises(ValueError):
        levy.substream(2**64, 0)
    levy.substream(2**64 - 1, 0)


@given(st.floats(0.0, 80.0), st.integers(0, 2**32))
@settings(max_examples=50, deadline=None)
def test_poisson_count_nonnegative_int(mean, seed):
    n = levy.poisson_count(np.random.default_rng(seed), mean)
    assert isinstance(n, int) and n >= 0


@pytest.mark.parametrize("mean", [0.7, 12.0, 45.0])
def test_poisson_count_distribution(mean):
    rng = levy.substream(5, 0)
    x = np.array([levy.poisson_count(rng, mean) for _ in range(20000)])
    assert abs(x.mean() - mean) < 4 * np.sqrt(mean / x.size)
    assert abs(x.var() - mean) < 0.1 * mean


def test_evaluate_L():
    path = levy.PoissonSamplePath(1.0, np.array([0.2, 0.5, 0.9]), np.array([1, 3, 1]),
                                  np.array([0.5, -1.0, 0.25]), 3)
    assert np.array_equal(levy.evaluate_L(path, 0.0), [0.0, 0.0, 0.0])
    assert np.allclose(levy.evaluate_L(path, 0.6), [0.5, 0.0, -1.0])
    assert np.allclose(levy.evaluate_L(path, 1.0), [0.75, 0.0, -1.0])
    with pytest.raises(ValueError):
        levy.evaluate_L(path, 1.1)


def test_with_jump_keeps_order():
    path = levy.PoissonSamplePath(1.0, np.array([0.2, 0.9]), np.array([1, 2]),
                                  np.array([1.0, -1.0]), 2)
    q = path.with_jump(0.5, 4, 2.0)
    assert q.times.tolist() == [0.2, 0.5, 0.9] and q.modes.tolist() == [1, 4, 2]
    assert q.n_modes == 4 and len(path) == 2


def test_csv_round_trip():
    spec = LevyMeasureSpec.power_law(10.0, 5, -1.0)
    paths = levy.sample_paths(spec, 1.0, 77, range(20))
    buf = io.StringIO()
    levy.write_paths_csv(buf, paths)
    text = buf.getvalue()
    assert text.splitlines()[0] == "sample_id,jump_time,mode,size"
    back = levy.read_paths_csv(io.StringIO(text), 1.0, 5)
    for i, p in enumerate(paths):
        if len(p) == 0:
            assert i not in back
            continue
        assert np.array_equal(back[i].times, p.times)
        assert np.array_equal(back[i].modes, p.modes)
        assert np.array_equal(back[i].sizes, p.sizes)


def test_disjoint_window_counts_uncorrelated():
    spec = LevyMeasureSpec(8.0, [1.0], [1.0])
    paths = levy.sample_paths(spec, 1.0, 31, range(20000))
    c = np.array([levy.jump_counts(p, [0.0, 0.3, 1.0]) for p in paths])
    assert abs(c[:, 0].mean() - 2.4) < 4 * np.sqrt(2.4 / len(paths))
    r = np.corrcoef(c[:, 0], c[:, 1])[0, 1]
    assert abs(r) < 4 / np.sqrt(len(paths))


def test_martingale_increments():
    # regress L(1) - L(0.5) on L(0.5) per mode: slope should vanish
    spec = LevyMeasureSpec(20.0, [0.6, 0.4], [1.0, 0.5])
    paths = levy.sample_paths(spec, 1.0, 4, range(20000))
    early = np.array([levy.evaluate_L(p, 0.5) for p in paths])
    late = np.array([levy.evaluate_L(p, 1.0) for p in paths]) - early
    for k in range(2):
        res = stats.linregress(early[:, k], late[:, k])
        assert abs(res.slope) < 4 * res.stderr


def test_isometry_process_level():
    spec = LevyMeasureSpec.power_law(30.0, 6, -1.0, trace=1.0)
    paths = levy.sample_paths(spec, 0.7, 8, range(20000))
    sq = np.array([np.sum(levy.evaluate_L(p, 0.7) ** 2) for p in paths])
    se = sq.std(ddof=1) / np.sqrt(sq.size)
    assert abs(sq.mean() - 0.7) < 4 * se
