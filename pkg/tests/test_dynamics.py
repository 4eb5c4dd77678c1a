import warnings

import numpy as np
import pytest

from conftest import valid_vectors
from sta_lambda import dynamics, model, optimize, robustness, sta
from sta_lambda.errors import NormDriftError
from sta_lambda.model import PulseParameters, SystemConfig


def frame_and_pulses(params, cfg=SystemConfig(), adiabatic=False):
    fr = sta.effective_frame(model.reference_pulses(params, cfg), cfg, adiabatic=adiabatic)
    return fr, sta.physical_pulses(fr, cfg)


@pytest.fixture(scope="module")
def baseline():
    return frame_and_pulses(PulseParameters.gaussian(0.4e-3))


def test_zero_pulses_leave_the_ground_state_alone(baseline):
    _, phys = baseline
    z = np.zeros_like(phys.omega_P_t)
    dark = sta.PhysicalPulses(phys.times, z, z.copy())
    psi = dynamics.integrate_three_level(dark, SystemConfig(), substeps=4)
    np.testing.assert_allclose(abs(psi) ** 2, [1.0, 0.0, 0.0], atol=1e-15)


def test_norm_is_conserved(baseline, random_params, cfg):
    fr, phys = baseline
    for eps in (0.9, 1.0, 1.1):
        psi = dynamics.integrate_two_level(fr, epsilon=eps)
        assert abs(np.vdot(psi, psi).real - 1) <= 1e-9
    psi = dynamics.integrate_three_level(phys, cfg, epsilon=1.05)
    assert abs(np.vdot(psi, psi).real - 1) <= 1e-9
    for p in random_params[:5]:
        psi = dynamics.integrate_two_level(frame_and_pulses(p)[0], epsilon=1.1)
        assert abs(np.vdot(psi, psi).real - 1) <= 1e-9


def test_sta_transfer_is_exact_at_unit_scaling(baseline):
    fr, _ = baseline
    assert dynamics.transfer_fidelity(dynamics.integrate_two_level(fr)) >= 1 - 1e-6
    # from |1> the final dark-state population is unity up to the boundary residue
    psi = dynamics.integrate_two_level(fr, dynamics.basis_state(0, 2))
    assert dynamics.dressed_population(fr, psi) >= 1 - 1e-6


def test_sta_transfer_is_exact_for_unclipped_shapes(cfg):
    T = 0.25e-3
    box = optimize.SeedBox(a_lo=0.0, rng_seed=11)
    for x in valid_vectors(60, T, cfg, box=box):
        fr = frame_and_pulses(PulseParameters.from_vector(x, T), cfg)[0]
        assert dynamics.transfer_fidelity(dynamics.integrate_two_level(fr)) >= 1 - 1e-6


def test_unresolved_gamma_swing_is_integrated_exactly(cfg):
    # theta turns round while Omega_eff is tiny: gamma swings by pi in ~20 ns,
    # far below the grid step, yet the transfer stays exact
    p = PulseParameters((0.18884509242659853, 0.31691611965648214, 0.939879533811904,
                         0.09866607215059586),
                        (5.5543570322194276e-05, -0.00011595847541283372,
                         3.7016069059567485e-05, 7.739688518215365e-05),
                        (7.704451761165474e-05, 6.206424002492863e-06,
                         1.3477203708905857e-05, 6.382996617007683e-05), 0.25e-3)
    fr = frame_and_pulses(p, cfg)[0]
    h = fr.times[1]
    assert np.abs(np.diff(fr.gamma)).max() > 1.0
    assert np.abs(fr.gamma_dot).max() * h > 1.0
    assert dynamics.transfer_fidelity(dynamics.integrate_two_level(fr)) >= 1 - 1e-6


def test_clipped_shapes_converge_under_grid_refinement():
    # a clipped pulse switches on with a kink, which the sampled Hamiltonian
    # only resolves as the grid is refined
    T = 0.25e-3
    p = PulseParameters((-0.8334196869369614, 0.45927751694251606, -0.166446502386967,
                         0.8878184134974731),
                        (-0.0001202311576228174, -2.0564106035941747e-05,
                         -3.324975665868339e-06, 8.277080990630448e-05),
                        (9.576646391392735e-05, 2.6842629491445974e-05,
                         4.192814795056502e-05, 9.329276109972925e-05), T)
    loss = []
    for M in (2001, 8001):
        cfg = SystemConfig(grid_points=M)
        fr = frame_and_pulses(p, cfg)[0]
        assert np.any(fr.omega_eff_t == 0)
        loss.append(1 - dynamics.transfer_fidelity(dynamics.integrate_two_level(fr)))
    assert loss[0] > 1e-6
    assert loss[1] < loss[0] / 8


def test_optimized_pulses_transfer_in_the_three_level_model(optimized_params, cfg):
    assert cfg.delta / cfg.omega0 >= 100
    _, phys = frame_and_pulses(optimized_params, cfg)
    psi = dynamics.integrate_three_level(phys, cfg)
    assert dynamics.transfer_fidelity(psi) >= 0.99


def test_scaling_reduces_fidelity(baseline):
    fr, _ = baseline
    assert dynamics.transfer_fidelity(dynamics.integrate_two_level(fr, epsilon=1.1)) < 0.99


def test_scaling_sweep_model_column(baseline, cfg):
    fr, _ = baseline
    sweep = dynamics.scaling_sweep(fr, 1.59, 0.95, 1.05, 3)
    np.testing.assert_allclose(sweep.epsilons, [0.95, 1.0, 1.05])
    assert sweep.model_fidelities[1] == 1.0
    assert sweep.fidelities[1] == pytest.approx(1.0, abs=1e-6)
    assert sweep.model_fidelities[2] == pytest.approx(0.9841, rel=1e-12)
    assert dynamics.model_fidelity(1.59, [2.0])[0] == 0.0
    cols = sweep.export_columns()
    assert list(cols) == ["epsilon", "fidelity_numeric", "fidelity_model"]


def test_fitted_curvature_matches_q(baseline, cfg):
    fr, _ = baseline
    q = robustness.sensitivity(fr, cfg).q
    assert dynamics.fitted_sensitivity(fr) == pytest.approx(q, rel=0.10)


def test_fitted_curvature_converges_to_q_as_the_window_shrinks(random_params, cfg):
    # quartic terms in eps bias the +-3% fit when q is small; a narrow window
    # isolates the quadratic coefficient
    for p in random_params[:8]:
        fr = frame_and_pulses(p, cfg)[0]
        q = robustness.sensitivity(fr, cfg).q
        assert dynamics.fitted_sensitivity(fr, half_width=0.003) == pytest.approx(q, rel=5e-3)


@pytest.mark.parametrize("args", [(0.0, 1.2, 5), (0.9, 1.0, 5), (1.0, 1.2, 5), (0.9, 1.1, 2)])
def test_scaling_sweep_rejects_bad_ranges(baseline, args):
    with pytest.raises(ValueError):
        dynamics.scaling_sweep(baseline[0], 1.0, *args)


def test_bad_inputs_are_rejected(baseline, cfg):
    fr, phys = baseline
    with pytest.raises(ValueError):
        dynamics.integrate_two_level(fr, epsilon=0.0)
    with pytest.raises(ValueError):
        dynamics.integrate_three_level(phys, cfg, epsilon=-1.0)
    with pytest.raises(ValueError):
        dynamics.integrate_two_level(fr, np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        dynamics.integrate_three_level(phys, cfg, np.array([1.0, 0.0]))


def test_norm_drift_is_signalled():
    cfg = SystemConfig(grid_points=11)
    fr, phys = frame_and_pulses(PulseParameters.gaussian(0.4e-3), cfg)
    with pytest.raises(NormDriftError):
        dynamics.integrate_two_level(fr, substeps=1)
    with pytest.raises(NormDriftError):
        dynamics.integrate_three_level(phys, cfg, substeps=1)


def test_default_step_rule(baseline, cfg):
    fr, phys = baseline
    n = dynamics.substeps_for(phys.times, cfg.delta + phys.omega_P_t, 0.05)
    h = (phys.times[1] - phys.times[0]) / n
    assert h * cfg.delta <= 0.05


def _richardson_ratio(run, n):
    a, b, c = run(n), run(2 * n), run(4 * n)
    return np.linalg.norm(a - b) / np.linalg.norm(b - c)


def test_two_level_rk4_is_fourth_order(baseline):
    fr, _ = baseline
    ratio = _richardson_ratio(lambda n: dynamics.integrate_two_level(fr, epsilon=1.1,
                                                                     substeps=n), 1)
    assert 14 <= ratio <= 18


def test_three_level_rk4_is_fourth_order():
    # a moderate detuning keeps the fast phase resolvable at affordable step counts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        cfg = SystemConfig(delta=50 * model.DEFAULT_OMEGA0, grid_points=201)
    _, phys = frame_and_pulses(PulseParameters.gaussian(0.02e-3), cfg, adiabatic=True)
    n = dynamics.substeps_for(phys.times, cfg.delta + phys.omega_P_t, 0.05)
    ratio = _richardson_ratio(
        lambda k: dynamics.integrate_three_level(phys, cfg, substeps=k), n // 2)
    assert 14 <= ratio <= 18
