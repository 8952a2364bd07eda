import io

import numpy as np
import pytest

import ptss


def kernel_system(n=40, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 4.0, size=(n, 3))
    y = rng.standard_normal(n)
    return x, y, ptss.gram_matrix(x, "rbf", 1.0, 1.0, 0.1)


def test_gram_matrix_matches_numpy():
    x, _, k = kernel_system()
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    np.testing.assert_allclose(k, np.exp(-0.5 * d2) + 0.1 * np.eye(len(x)), rtol=1e-12, atol=1e-12)


def test_dense_oracle_matches_numpy():
    _, y, k = kernel_system()
    r = ptss.dense_oracle(k, y)
    np.testing.assert_allclose(r["solution"], np.linalg.solve(k, y), rtol=1e-9)
    assert r["logdet"] == pytest.approx(np.linalg.slogdet(k)[1], rel=1e-10)


def test_tss_enumeration_is_unbiased():
    _, y, k = kernel_system()
    pmf = ptss.truncation_pmf("exp:0.5", 3, 8)
    assert sum(pmf) == pytest.approx(1.0)
    draws = [ptss.tss_solve(k, y, 3, 8, seed=s) for s in range(4000)]
    mean = np.mean([d[0] for d in draws], axis=0)
    target = ptss.cg_iterate(k, y, 8)
    assert np.linalg.norm(mean - target) < 0.1 * np.linalg.norm(target)
    assert {d[1] for d in draws} <= set(range(3, 9))


def test_nlml_exact_gradient_and_estimate():
    x, y, _ = kernel_system()
    value, grad = ptss.nlml_exact(x, y, "matern32", 1.0, 1.0, 0.1)
    h = 1e-6
    up, _ = ptss.nlml_exact(x, y, "matern32", 1.0, 1.0 + h, 0.1)
    dn, _ = ptss.nlml_exact(x, y, "matern32", 1.0, 1.0 - h, 0.1)
    assert grad[1] == pytest.approx((up - dn) / (2 * h), rel=1e-5)
    est, est_grad = ptss.nlml_estimate(x, y, "matern32", 1.0, 1.0, 0.1, method="PC-TSS", precond_rank=8, seed=3)
    assert np.isfinite(est) and len(est_grad) == 3


def test_gamma_optimal_beats_uniform():
    opt = ptss.truncation_pmf("gamma-opt-solve", 2, 6, kappa=100.0)
    uniform = [0.2] * 5
    assert ptss.gamma_factor(opt, 2, "solve", 100.0) <= ptss.gamma_factor(uniform, 2, "solve", 100.0)


def test_franke_reference_points():
    assert ptss.franke(0.0, 0.0) == pytest.approx(0.76642, abs=5e-6)
    assert ptss.franke(0.5, 0.5) == pytest.approx(0.32576, abs=5e-6)


def test_run_experiment_is_deterministic():
    settings = {"n": "48", "replicates": "20", "l_grid": "1,2", "precond_rank": "8", "seed": "5"}
    a = ptss.run_experiment("quad-sweep", settings)
    assert a == ptss.run_experiment("quad-sweep", settings)
    lines = [ln for ln in io.StringIO(a).read().splitlines() if not ln.startswith("#")]
    assert lines[0].startswith("l,quantity,method")
    assert len(lines) == 1 + 2 * 4


def test_errors_surface_as_exceptions():
    with pytest.raises(ptss.PtssError):
        ptss.run_experiment("quad-sweep", {"no_such_key": "1"})
    with pytest.raises(ptss.PtssError):
        ptss.truncation_pmf("poisson", 1, 3)
