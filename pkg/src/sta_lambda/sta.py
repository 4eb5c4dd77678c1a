"""Shortcut-to-adiabaticity map from reference pulses to physical pulses.

The excited state is eliminated to give the two-level Hamiltonian::

    H0 = -1/2 [[Delta_eff, Omega_eff], [Omega_eff, -Delta_eff]]
    Omega_eff = Omega_P Omega_S / (2 Delta)
    Delta_eff = (Omega_P**2 - Omega_S**2) / (4 Delta)

whose dark state ``a0 = (cos theta, -sin theta)`` with
``theta = arctan(Omega_P / Omega_S)`` carries the population from |1> to |3>.
The counter-diabatic term that makes the evolution follow ``a0`` exactly is::

    H_cd = [[0, i Omega_a], [-i Omega_a, 0]],   Omega_a = d(theta)/dt

In the ``-1/2`` convention of ``H0`` it adds an imaginary coupling of size
``2 Omega_a``, so the combined coupling has modulus
``sqrt(Omega_eff**2 + 4 Omega_a**2)`` and phase ``gamma``.  Rotating by
``U = diag(exp(-i gamma/2), exp(i gamma/2))`` (lab state = ``U`` times rotated
state) removes the phase at the price of a detuning shift ``d(gamma)/dt``.
The physical pulses then invert the elimination formulas for the rotated
Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPhysicalFrame, SingularMixingAngle
from .model import ReferencePulses, SystemConfig

SINGULAR_FLOOR = 1e-24


@dataclass(frozen=True)
class FrameSamples:
    """Adiabatic-frame quantities on the time grid.

    All frequencies are angular (rad/s); ``gamma`` and ``theta`` are radians.
    ``omega_a`` is the mixing-angle rate; the counter-diabatic coupling in the
    two-level Hamiltonian is ``2 * omega_a``.
    """

    times: np.ndarray
    omega_eff: np.ndarray
    delta_eff: np.ndarray
    omega_a: np.ndarray
    gamma: np.ndarray
    gamma_dot: np.ndarray
    omega_eff_t: np.ndarray
    delta_eff_t: np.ndarray
    theta: np.ndarray
    phi_L: float = 0.0

    def export_columns(self) -> dict[str, np.ndarray]:
        mhz = 1.0 / (2e6 * np.pi)
        return {
            "time_ms": self.times * 1e3,
            "omega_eff_MHz": self.omega_eff * mhz,
            "delta_eff_MHz": self.delta_eff * mhz,
            "omega_a_MHz": self.omega_a * mhz,
            "gamma_rad": self.gamma,
            "gamma_dot_MHz": self.gamma_dot * mhz,
            "omega_eff_t_MHz": self.omega_eff_t * mhz,
            "delta_eff_t_MHz": self.delta_eff_t * mhz,
            "theta_rad": self.theta,
        }


@dataclass(frozen=True)
class PhysicalPulses:
    """Laboratory pump and Stokes Rabi frequencies (rad/s)."""

    times: np.ndarray
    omega_P_t: np.ndarray
    omega_S_t: np.ndarray

    def export_columns(self) -> dict[str, np.ndarray]:
        mhz = 1.0 / (2e6 * np.pi)
        return {
            "time_ms": self.times * 1e3,
            "omega_P_t_MHz": self.omega_P_t * mhz,
            "omega_S_t_MHz": self.omega_S_t * mhz,
        }


def _safe_div(num, den):
    nz = den != 0
    return np.where(nz, num / np.where(nz, den, 1.0), 0.0)


def _fill_undefined(x, undefined):
    """Carry the nearest earlier defined value (or first later one) into gaps.

    ``gamma`` has no meaning where the rotated coupling vanishes (possible
    where a clipped pulse is exactly zero); filling keeps it continuous.
    """
    if not np.any(undefined):
        return x
    m = x.shape[-1]
    idx = np.where(undefined, -1, np.arange(m))
    idx = np.maximum.accumulate(idx, axis=-1)
    first = np.argmax(~undefined, axis=-1)[..., None]
    idx = np.where(idx < 0, first, idx)
    return np.take_along_axis(x, idx, axis=-1)


def frame_arrays(P, S, dP, dS, ddP, ddS, delta, phi_L=0.0, adiabatic=False):
    """Vectorised core of :func:`effective_frame`.

    Accepts arrays of shape (..., M) and returns a dict of arrays with the
    same shape.  No error checking is done here.
    """
    R2 = P * P + S * S
    omega_eff = P * S / (2.0 * delta)
    delta_eff = (P * P - S * S) / (4.0 * delta)
    theta = np.arctan2(P, S)
    if adiabatic:
        omega_a = np.zeros_like(P)
        d_omega_a = np.zeros_like(P)
    else:
        wronskian = dP * S - dS * P
        omega_a = _safe_div(wronskian, R2)
        d_wronskian = ddP * S - ddS * P
        d_R2 = 2.0 * (P * dP + S * dS)
        d_omega_a = _safe_div(d_wronskian * R2 - wronskian * d_R2, R2 * R2)
    d_omega_eff = (dP * S + P * dS) / (2.0 * delta)

    cd = 2.0 * omega_a
    d_cd = 2.0 * d_omega_a
    omega_eff_t = np.hypot(omega_eff, cd)
    gamma = np.unwrap(_fill_undefined(np.arctan2(cd, omega_eff), omega_eff_t == 0),
                      axis=-1) + phi_L
    gamma_dot = _safe_div(d_cd * omega_eff - cd * d_omega_eff, omega_eff_t**2)
    return {
        "omega_eff": omega_eff,
        "delta_eff": delta_eff,
        "omega_a": omega_a,
        "gamma": gamma,
        "gamma_dot": gamma_dot,
        "omega_eff_t": omega_eff_t,
        "delta_eff_t": delta_eff + gamma_dot,
        "theta": theta,
    }


def is_singular(P, S, omega0):
    """True where both reference pulses effectively vanish (per row)."""
    return np.any(P * P + S * S < SINGULAR_FLOOR * omega0**2, axis=-1)


def effective_frame(
    ref: ReferencePulses, cfg: SystemConfig, adiabatic: bool = False
) -> FrameSamples:
    """Effective two-level and rotated-frame quantities for ``ref``.

    Derivatives come from the analytic Gaussian-sum derivatives carried by
    ``ref``.  With ``adiabatic=True`` the counter-diabatic term is dropped,
    so the physical pulses reproduce the reference pulses.

    Raises
    ------
    SingularMixingAngle
        If ``Omega_P**2 + Omega_S**2`` drops below ``1e-24 Omega_0**2``.
    """
    if is_singular(ref.omega_P, ref.omega_S, cfg.omega0):
        raise SingularMixingAngle("singular mixing angle: both pulses vanish")
    arrays = frame_arrays(
        ref.omega_P, ref.omega_S, ref.d_omega_P, ref.d_omega_S,
        ref.dd_omega_P, ref.dd_omega_S, cfg.delta, cfg.phi_L, adiabatic,
    )
    return FrameSamples(times=ref.times, phi_L=cfg.phi_L, **arrays)


def counter_diabatic_term(frame: FrameSamples, k: int) -> np.ndarray:
    """Counter-diabatic Hamiltonian at grid index ``k`` (rad/s)."""
    n = len(frame.times)
    if not -n <= k < n:
        raise IndexError(f"grid index {k} out of range for {n} points")
    wa = frame.omega_a[k]
    return np.array([[0.0, 1j * wa], [-1j * wa, 0.0]])


def physical_arrays(delta_eff_t, omega_eff_t, delta):
    """Vectorised inversion of the elimination formulas.

    Returns ``(omega_P_t, omega_S_t, min_radicand)``.  The small radicand
    ``R - |Delta|`` is formed as ``Omega**2 / (R + |Delta|)`` to avoid
    cancellation.
    """
    R = np.hypot(delta_eff_t, omega_eff_t)
    big = R + np.abs(delta_eff_t)
    small = _safe_div(omega_eff_t**2, big)
    pos = delta_eff_t >= 0
    rad_P = 2.0 * delta * np.where(pos, big, small)
    rad_S = 2.0 * delta * np.where(pos, small, big)
    min_rad = np.minimum(rad_P.min(axis=-1), rad_S.min(axis=-1))
    return (np.sqrt(np.clip(rad_P, 0.0, None)), np.sqrt(np.clip(rad_S, 0.0, None)),
            min_rad)


def physical_pulses(frame: FrameSamples, cfg: SystemConfig) -> PhysicalPulses:
    """Pump and Stokes pulses realising the rotated Hamiltonian.

    Raises
    ------
    NonPhysicalFrame
        If a radicand is negative beyond round-off, or a pulse is not finite.
    """
    P_t, S_t, min_rad = physical_arrays(frame.delta_eff_t, frame.omega_eff_t, cfg.delta)
    if min_rad < -1e-12 * cfg.omega0**2:
        raise NonPhysicalFrame(f"non-physical frame: radicand {min_rad:.3g} < 0")
    if not (np.all(np.isfinite(P_t)) and np.all(np.isfinite(S_t))):
        raise NonPhysicalFrame("non-physical frame: non-finite pulse values")
    return PhysicalPulses(frame.times, P_t, S_t)


def frame_from_physical(pulses: PhysicalPulses, cfg: SystemConfig):
    """``(Omega_eff, Delta_eff)`` of arbitrary pulses via the elimination formulas."""
    P, S = pulses.omega_P_t, pulses.omega_S_t
    return P * S / (2.0 * cfg.delta), (P * P - S * S) / (4.0 * cfg.delta)
