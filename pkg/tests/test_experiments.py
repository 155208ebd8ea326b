import math
import warnings

import numpy as np
import pytest

from levy_galerkin import experiments as ex
from levy_galerkin.config import Functional, LevyConfig, VectorSpec, default_config
from levy_galerkin.fem import FemMesh, SpectralTruncation
from levy_galerkin.mild import deterministic_error_sq
from levy_galerkin.spectral import eigenvalue

HS = [2.0**-j for j in range(3, 8)]


def test_fit_exact_quadratic():
    fit = ex.fit_rate([(h, h**2) for h in HS])
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_log_model():
    pts = [(h, h**2 * (1 + abs(math.log(h)))) for h in HS]
    raw = ex.fit_rate(pts)
    corrected = ex.fit_rate([(h, ex.log_corrected(h, e)) for h, e in pts])
    # the log factor grows as h shrinks, so the raw slope sits below 2
    expected = 2.0 - math.log((1 + 7 * math.log(2)) / (1 + 3 * math.log(2))) / math.log(16)
    assert raw.slope == pytest.approx(expected, abs=0.01)
    assert raw.slope == pytest.approx(1.77, abs=0.01)
    assert corrected.slope == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("pts", [
    [(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)],
    [(0.1, 1.0), (0.05, 0.0), (0.025, 1.0)],
    [(0.1, 1.0), (0.05, 1.0)],
])
def test_fit_domain_errors(pts):
    with pytest.raises(ValueError):
        ex.fit_rate(pts)


def small_config(**kw):
    K = 64
    base = default_config().replace(
        x0=VectorSpec("power", K, 1.0, -3.0), f=VectorSpec("power", K, 1.0, -3.0),
        g=VectorSpec("constant", K, 1.0), levy=LevyConfig("power", 50.0, K, -1.0, 1.0),
        discretizations=tuple(SpectralTruncation(n) for n in (2, 4, 8, 16)), ref_dim=K,
        mc_samples=400)
    return base.replace(**kw)


def test_resolved_data_without_noise_gives_zero_error():
    cfg = small_config(x0=VectorSpec("explicit", 2, values=(1.0, 0.5)),
                       f=VectorSpec("zero", 1), g=VectorSpec("zero", 1))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = ex.weak_error_analytic(cfg)["squared_norm"]
        srep = ex.strong_error(cfg)
    assert rep.levels == [] and len(rep.dropped) == 4
    assert len(caught) == 8
    assert rep.raw is None and srep.raw is None


def test_linear_functional_sees_only_deterministic_error():
    psi = VectorSpec("explicit", 3, values=(1.0, -1.0, 2.0))
    cfg = small_config(functionals=(Functional("linear", psi, "low"),))
    with pytest.warns(UserWarning, match="below the 1e-14 floor"):
        rep = ex.weak_error_analytic(cfg)["low"]
    spec = cfg.model_spec()
    # psi lives on modes 1-3, resolved at every level except N = 2
    assert [lv.h for lv in rep.levels] == [SpectralTruncation(2).h]
    assert rep.dropped == [SpectralTruncation(n).h for n in (4, 8, 16)]
    fem_cfg = cfg.replace(discretizations=(FemMesh(3), FemMesh(7), FemMesh(15)))
    for lv, d in zip(ex.weak_error_analytic(fem_cfg)["low"].levels, fem_cfg.discretizations):
        assert lv.error <= math.sqrt(deterministic_error_sq(spec, d, cfg.ref_dim)) * np.linalg.norm(psi.build())


def test_default_analytic_rates():
    cfg = default_config()
    weak = ex.weak_error(cfg)["squared_norm"]
    strong = ex.strong_error(cfg)
    assert 1.8 <= weak.corrected.slope <= 2.2 and weak.corrected.r_squared >= 0.98
    assert 0.8 <= strong.raw.slope <= 1.2
    assert abs(weak.corrected.slope - 2 * strong.raw.slope) <= 0.3


def test_mc_matches_analytic_small():
    cfg = small_config(mode="mc", mc_samples=3000, levy=LevyConfig("power", 2000.0, 64, -1.0, 1.0))
    ana = ex.strong_error(cfg.replace(mode="analytic"))
    mc = ex.strong_error(cfg, threads=2)
    for a, m in zip(ana.levels, mc.levels):
        assert abs(a.error - m.error) < 4 * m.std_error


def test_mc_thread_independent():
    cfg = small_config(mode="mc", mc_samples=200)
    a = ex.coupled_samples(cfg, threads=1)
    b = ex.coupled_samples(cfg, threads=3)
    assert np.array_equal(a.weak["squared_norm"], b.weak["squared_norm"])
    assert np.array_equal(a.strong_sq, b.strong_sq)


def test_coupling_reduces_variance():
    ratio = ex.coupling_variance_ratio(small_config(mc_samples=400))
    assert np.all(ratio > 10)


def test_inconclusive_when_standard_error_large():
    rep = ex.weak_error(small_config(mode="mc", mc_samples=20))["squared_norm"]
    assert rep.verdict == "INCONCLUSIVE" and "samples required" in rep.note


def test_spectral_smoothing_closed_form():
    t_grid = (0.001, 0.01, 0.1)
    rep = ex.smoothing_check(t_grid, [SpectralTruncation(4), SpectralTruncation(8)], ref_dim=64)
    for h, t, norm, ratio in rep.rows:
        N = round(1 / (h * math.pi))
        assert norm == pytest.approx(math.exp(-eigenvalue(N + 1) * t), rel=1e-8)
        assert ratio == pytest.approx(t * norm / h**2)


def test_fem_smoothing_t_decay_monotone():
    rep = ex.smoothing_check((0.05, 0.1, 0.2, 0.4), [FemMesh(7), FemMesh(15)])
    for h in {r[0] for r in rep.rows}:
        norms = [r[2] for r in rep.rows if r[0] == h]
        assert all(b <= a for a, b in zip(norms, norms[1:]))
        # t^-1 decay: doubling t at least halves the norm
        assert norms[-1] <= norms[-2] / 2


def test_smoothing_rejects_t_zero():
    with pytest.raises(ValueError):
        ex.smoothing_check((0.0, 0.1), [FemMesh(3)])


def test_malliavin_rows():
    rows = ex.run_malliavin_checks(small_config(), samples=500)
    names = [r.check_name for r in rows]
    assert names[0] == "duality" and names[-1] == "integration_by_parts"
    assert all(r.passed for r in rows[:-1])
