"""Perturbative sensitivity of the STA transfer to a uniform power scaling.

Scaling both physical pulses by ``eps`` multiplies the rotated two-level
Hamiltonian by ``eps**2``.  To first order, the amplitude leaking from the dark
state ``a0`` into ``a-`` is ``-i (eps**2 - 1) I`` with::

    I = integral_0^T exp(i [xi0(t) - xi-(t)]) <a-| U Ht U^dagger |a0> dt

and the transfer fidelity drops as ``1 - 4 q (eps - 1)**2`` with ``q = |I|**2``.
``xi_n`` are the dynamical phases of the reference Hamiltonian; the geometric
phases vanish for the real dressed states.  With ``hbar = 1`` the integral
is dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemConfig
from .sta import FrameSamples

#: Recorded in output metadata: phases come from instantaneous eigenvalues of H0.
PHASE_CONVENTION = "eigenvalue"


@dataclass(frozen=True)
class PhaseRecord:
    times: np.ndarray
    xi0: np.ndarray
    xim: np.ndarray


@dataclass(frozen=True)
class Sensitivity:
    q: float

    def __post_init__(self):
        if not (np.isfinite(self.q) and self.q >= 0):
            raise ValueError(f"sensitivity must be finite and >= 0, got {self.q}")


def dressed_states(frame: FrameSamples, k: int):
    """Dark and bright eigenstates of H0 at grid index ``k``.

    Returns ``(a0, am, E0, Em)`` with vectors in the {|1>, |3>} basis and
    energies in rad/s.
    """
    th = frame.theta[k]
    c, s = np.cos(th), np.sin(th)
    e0 = 0.5 * np.hypot(frame.delta_eff[k], frame.omega_eff[k])
    return np.array([c, -s]), np.array([s, c]), e0, -e0


def simpson_uniform(y, h):
    """Composite Simpson along the last axis; trapezoid on a final odd panel."""
    y = np.asarray(y)
    m = y.shape[-1]
    end = m if m % 2 else m - 1
    total = h / 3.0 * (y[..., 0] + y[..., end - 1]
                       + 4.0 * y[..., 1:end - 1:2].sum(axis=-1)
                       + 2.0 * y[..., 2:end - 2:2].sum(axis=-1))
    if end < m:
        total = total + 0.5 * h * (y[..., -2] + y[..., -1])
    return total


def cumulative_simpson_uniform(y, h):
    """Running integral from the first sample, Simpson-accurate at every point.

    Even-indexed points carry the composite Simpson sum; each odd point adds
    the half-panel integral of the parabola through its neighbours.  A final
    even-length tail uses the parabola through the last three points.
    """
    y = np.asarray(y)
    m = y.shape[-1]
    out = np.zeros(y.shape, dtype=np.result_type(y, float))
    if m < 3:
        out[..., 1:] = 0.5 * h * (y[..., :-1] + y[..., 1:])
        return out
    panels = h / 3.0 * (y[..., 0:m - 2:2] + 4.0 * y[..., 1:m - 1:2] + y[..., 2:m:2])
    out[..., 2::2] = np.cumsum(panels, axis=-1)
    half = h / 12.0 * (5.0 * y[..., 0:m - 2:2] + 8.0 * y[..., 1:m - 1:2] - y[..., 2:m:2])
    out[..., 1:m - 1:2] = out[..., 0:m - 2:2] + half
    if m % 2 == 0:
        tail = h / 12.0 * (-y[..., -3] + 8.0 * y[..., -2] + 5.0 * y[..., -1])
        out[..., -1] = out[..., -2] + tail
    return out


def _step(times):
    return (times[-1] - times[0]) / (len(times) - 1)


def _dynamical_phase(times, delta_eff, omega_eff):
    energy = 0.5 * np.hypot(delta_eff, omega_eff)
    return -cumulative_simpson_uniform(energy, _step(times))


def accumulate_phases(frame: FrameSamples) -> PhaseRecord:
    """Dynamical phases ``xi0`` and ``xi-`` accumulated along the grid.

    Raises
    ------
    ArithmeticError
        If the geometric connection ``<a_n|d/dt a_n>`` is not numerically zero.
    """
    th = frame.theta
    c, s = np.cos(th), np.sin(th)
    # d/dt a0 = -theta_dot a-, d/dt a- = theta_dot a0
    conn0 = c * (-frame.omega_a * s) + (-s) * (-frame.omega_a * c)
    connm = s * (frame.omega_a * c) + c * (-frame.omega_a * s)
    T = frame.times[-1] - frame.times[0]
    worst = T * max(np.abs(conn0).max(), np.abs(connm).max())
    if worst >= 1e-10:
        raise ArithmeticError(f"geometric phase term not zero: {worst:.3g}")
    xi0 = _dynamical_phase(frame.times, frame.delta_eff, frame.omega_eff)
    return PhaseRecord(frame.times, xi0, -xi0)


def coupling_arrays(theta, gamma, omega_eff_t, delta_eff_t, phi_L=0.0):
    """``<a-| U Ht U^dagger |a0>`` evaluated elementwise (rad/s).

    The constant laser phase is a gauge choice that the real dressed states
    do not carry, so it is removed from ``gamma`` first.
    """
    c, s = np.cos(theta), np.sin(theta)
    g = gamma - phi_L
    m11 = -0.5 * delta_eff_t
    m22 = 0.5 * delta_eff_t
    m12 = -0.5 * omega_eff_t * np.exp(-1j * g)
    m21 = -0.5 * omega_eff_t * np.exp(1j * g)
    return s * (m11 * c - m12 * s) + c * (m21 * c - m22 * s)


def sensitivity_arrays(times, delta_eff, omega_eff, theta, gamma, omega_eff_t,
                       delta_eff_t, phi_L=0.0):
    """Vectorised raw ``q`` (before ``q_scale``) over leading batch axes."""
    xi0 = _dynamical_phase(times, delta_eff, omega_eff)
    integrand = np.exp(2j * xi0) * coupling_arrays(theta, gamma, omega_eff_t,
                                                   delta_eff_t, phi_L)
    return np.abs(simpson_uniform(integrand, _step(times))) ** 2


def sensitivity_integrand(frame: FrameSamples) -> np.ndarray:
    phases = accumulate_phases(frame)
    return np.exp(1j * (phases.xi0 - phases.xim)) * coupling_arrays(
        frame.theta, frame.gamma, frame.omega_eff_t, frame.delta_eff_t, frame.phi_L
    )


def sensitivity(frame: FrameSamples, cfg: SystemConfig) -> Sensitivity:
    """Sensitivity ``q`` of the transfer fidelity to a power scaling."""
    integrand = sensitivity_integrand(frame)
    if not np.all(np.isfinite(integrand)):
        raise ArithmeticError("non-finite sensitivity integrand")
    amplitude = simpson_uniform(integrand, _step(frame.times))
    return Sensitivity(cfg.q_scale * float(np.abs(amplitude) ** 2))
