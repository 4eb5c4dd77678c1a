import numpy as np
import pytest

from sta_lambda import cost, kernels, optimize
from sta_lambda.model import PulseParameters, SystemConfig


@pytest.mark.parametrize("M", [2001, 1200])
@pytest.mark.parametrize("T", [0.1e-3, 0.25e-3])
def test_fused_kernel_matches_array_pipeline(M, T):
    cfg = SystemConfig(grid_points=M)
    X, _ = optimize.draw_seed_vectors(optimize.SeedBox(rng_seed=21), 400, T, 4, M)
    peak_k, q_k, ok_k = kernels.candidate_scores(X, T, cfg)
    peak_n, q_n, _, ok_n = cost.evaluate_batch(X, T, cfg)
    np.testing.assert_array_equal(ok_k, ok_n)
    assert ok_k.sum() >= 20
    np.testing.assert_allclose(peak_k[ok_k], peak_n[ok_n], rtol=1e-10)
    np.testing.assert_allclose(q_k[ok_k], q_n[ok_n], rtol=1e-10, atol=1e-12)
    assert np.all(np.isnan(peak_k[~ok_k]))


def test_single_score_and_q_scale():
    T = 0.4e-3
    x = PulseParameters.gaussian(T, 2).to_vector()
    peak, q, ok = kernels.candidate_score(x, T, SystemConfig())
    ref = cost.evaluate(PulseParameters.from_vector(x, T), SystemConfig())
    assert ok
    assert peak == pytest.approx(ref.omega_peak, rel=1e-12)
    assert q == pytest.approx(ref.q, rel=1e-10)
    _, q2, _ = kernels.candidate_score(x, T, SystemConfig(q_scale=3.0))
    assert q2 == pytest.approx(3 * q, rel=1e-14)


def test_kernel_flags_boundary_failures():
    T = 0.25e-3
    bad = PulseParameters([0.5], [-0.3 * T], [T / 10], T).to_vector()  # ratio 0.02
    assert not kernels.candidate_score(bad, T, SystemConfig())[2]
    assert kernels.candidate_score(bad, T, SystemConfig(boundary_tol=0.5))[2]
