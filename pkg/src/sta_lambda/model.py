"""Reference-pulse parametrization for the Lambda system.

The pump and Stokes reference pulses are two time-shifted copies of one shape
function ``f``: a base Gaussian of width ``T/6`` plus ``N`` free Gaussians::

    f(s) = A * (exp(-s**2 / (T/6)**2) + sum_n a_n exp(-(s - t0_n)**2 / w_n**2))
    Omega_P(t) = Omega_0 f(t - T/2 - T/10)
    Omega_S(t) = Omega_0 f(-t + T/2 - T/10)

Both pulses sample ``f`` on the same interval ``s in [-0.6 T, 0.4 T]``, which is
also the grid used to fix the normalisation ``A`` (``max f = 1``).  Negative
amplitudes are allowed; the sum is clipped at zero before use.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BoundaryConditionError, DegenerateParametrization

TWO_PI = 2.0 * np.pi

#: Rabi-frequency scale, 2 pi x 5 MHz.
DEFAULT_OMEGA0 = TWO_PI * 5e6
#: One-photon detuning at which the Gaussian baseline (T = 0.4 ms) has a peak
#: physical Rabi frequency of 1.14 Omega_0; see ``cost.calibrate_baseline``.
DEFAULT_DELTA = TWO_PI * 2447.36307e6

BASE_WIDTH_FRACTION = 1.0 / 6.0
PULSE_SHIFT_FRACTION = 0.1


@dataclass(frozen=True)
class SystemConfig:
    """Physical constants and numerical resolution.

    Parameters
    ----------
    delta : float
        One-photon detuning in rad/s.
    omega0 : float
        Rabi-frequency scale in rad/s.
    phi_L : float
        Fixed relative laser phase in radians.
    grid_points : int
        Number of uniform time samples on ``[0, T]``.
    boundary_tol : float
        Largest accepted ratio ``Omega_P(0) / Omega_S(0)``.
    q_scale : float
        Multiplier applied to the raw sensitivity integral.
    """

    delta: float = DEFAULT_DELTA
    omega0: float = DEFAULT_OMEGA0
    phi_L: float = 0.0
    grid_points: int = 2001
    boundary_tol: float = 9e-4
    q_scale: float = 1.0

    def __post_init__(self):
        if not (self.delta > 0 and self.omega0 > 0):
            raise ValueError("delta and omega0 must be positive")
        ratio = self.delta / self.omega0
        if ratio < 20:
            raise ValueError(
                f"delta/omega0 = {ratio:.3g} < 20: adiabatic elimination invalid"
            )
        if ratio < 100:
            warnings.warn(
                f"delta/omega0 = {ratio:.3g} < 100; elimination error may be "
                "noticeable",
                stacklevel=3,
            )
        if int(self.grid_points) != self.grid_points or self.grid_points < 3:
            raise ValueError("grid_points must be an integer >= 3")
        if not (0 < self.boundary_tol < 1):
            raise ValueError("boundary_tol must lie in (0, 1)")
        if not (math.isfinite(self.phi_L) and self.q_scale > 0):
            raise ValueError("phi_L must be finite and q_scale positive")


def _as_floats(values: Sequence[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(values, dtype=float).ravel())


@dataclass(frozen=True)
class PulseParameters:
    """Control vector ``{a_n, t0_n, w_n}`` plus duration ``T`` (seconds)."""

    amplitudes: tuple[float, ...]
    centers: tuple[float, ...]
    widths: tuple[float, ...]
    duration: float
    _vector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a, t0, w = (_as_floats(x) for x in (self.amplitudes, self.centers, self.widths))
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "centers", t0)
        object.__setattr__(self, "widths", w)
        object.__setattr__(self, "duration", float(self.duration))
        if not (len(a) == len(t0) == len(w)):
            raise ValueError("amplitudes, centers and widths differ in length")
        vec = np.array(a + t0 + w, dtype=float)
        if not np.all(np.isfinite(vec)) or not math.isfinite(self.duration):
            raise ValueError("pulse parameters must be finite")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if any(x <= 0 for x in w):
            raise ValueError("all Gaussian widths must be positive")
        vec.setflags(write=False)
        object.__setattr__(self, "_vector", vec)

    @property
    def n_gaussians(self) -> int:
        return len(self.amplitudes)

    def to_vector(self) -> np.ndarray:
        """Flat ``[a_1..a_N, t0_1..t0_N, w_1..w_N]`` in SI units."""
        return self._vector.copy()

    @classmethod
    def from_vector(cls, vector, duration: float) -> "PulseParameters":
        v = np.asarray(vector, dtype=float)
        if v.size % 3:
            raise ValueError("parameter vector length must be a multiple of 3")
        n = v.size // 3
        return cls(v[:n], v[n : 2 * n], v[2 * n :], duration)

    @classmethod
    def gaussian(cls, duration: float, n_gaussians: int = 0) -> "PulseParameters":
        """The plain Gaussian reference, padded with zero-amplitude terms."""
        n = n_gaussians
        return cls(
            np.zeros(n),
            np.linspace(-0.25, 0.25, n) * duration if n > 1 else np.zeros(n),
            np.full(n, duration / 6.0),
            duration,
        )

    def to_json_dict(self) -> dict:
        return {
            "T_ms": self.duration * 1e3,
            "gaussians": [
                {"a": a, "t0_ms": t0 * 1e3, "w_ms": w * 1e3}
                for a, t0, w in zip(self.amplitudes, self.centers, self.widths)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PulseParameters":
        if not isinstance(data, dict) or set(data) != {"T_ms", "gaussians"}:
            raise ValueError('params JSON needs exactly the keys "T_ms" and "gaussians"')
        rows = data["gaussians"]
        if not isinstance(rows, list):
            raise ValueError('"gaussians" must be a list')
        for row in rows:
            if not isinstance(row, dict) or set(row) != {"a", "t0_ms", "w_ms"}:
                raise ValueError('each Gaussian needs exactly "a", "t0_ms", "w_ms"')
        return cls(
            [r["a"] for r in rows],
            [r["t0_ms"] * 1e-3 for r in rows],
            [r["w_ms"] * 1e-3 for r in rows],
            data["T_ms"] * 1e-3,
        )


@dataclass(frozen=True)
class ReferencePulses:
    """Sampled reference pulses and their analytic time derivatives (rad/s)."""

    times: np.ndarray
    omega_P: np.ndarray
    omega_S: np.ndarray
    d_omega_P: np.ndarray
    d_omega_S: np.ndarray
    dd_omega_P: np.ndarray
    dd_omega_S: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def boundary_ratio(self) -> float:
        """``Omega_P(0)/Omega_S(0)``, equal to ``Omega_S(T)/Omega_P(T)`` by symmetry."""
        return boundary_ratio(self.omega_P, self.omega_S)


def boundary_ratio(omega_P: np.ndarray, omega_S: np.ndarray) -> np.ndarray | float:
    p0 = omega_P[..., 0]
    s0 = omega_S[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(s0 > 0, p0 / np.where(s0 > 0, s0, 1.0), np.inf)
    return float(r) if np.ndim(r) == 0 else r


def shape_grid(duration: float, grid_points: int) -> np.ndarray:
    """Arguments of ``f`` visited by the pump pulse over ``[0, T]``."""
    shift = 0.5 * duration + PULSE_SHIFT_FRACTION * duration
    return np.linspace(-shift, duration - shift, grid_points)


def _raw_shape(s, amplitudes, centers, widths, duration):
    """Unnormalised Gaussian sum and its first two derivatives.

    ``s`` has shape (M,); the parameter arrays have shape (..., N).  Output
    arrays have shape (..., M).
    """
    s = np.asarray(s, dtype=float)
    a = np.asarray(amplitudes, dtype=float)[..., None]
    t0 = np.asarray(centers, dtype=float)[..., None]
    w = np.asarray(widths, dtype=float)[..., None]

    sig2 = (BASE_WIDTH_FRACTION * duration) ** 2
    base = np.exp(-(s**2) / sig2)
    g = base.copy()
    dg = -2.0 * s / sig2 * base
    ddg = (4.0 * s**2 / sig2**2 - 2.0 / sig2) * base

    if a.shape[-2] == 0:
        shape = a.shape[:-2] + s.shape
        return (np.broadcast_to(g, shape).copy(), np.broadcast_to(dg, shape).copy(),
                np.broadcast_to(ddg, shape).copy())

    u = s - t0
    w2 = w * w
    e = a * np.exp(-(u * u) / w2)
    g = g + e.sum(axis=-2)
    dg = dg + (-2.0 * u / w2 * e).sum(axis=-2)
    ddg = ddg + ((4.0 * u * u / (w2 * w2) - 2.0 / w2) * e).sum(axis=-2)
    return g, dg, ddg


def normalized_shape(s, amplitudes, centers, widths, duration):
    """Clipped, normalised shape ``f`` with derivatives, plus a validity mask.

    Returns ``(f, df, ddf, ok)`` where ``ok`` is False for parameter sets whose
    unnormalised sum has a non-positive maximum over ``s``.  Rows that are not
    ok contain zeros.
    """
    g, dg, ddg = _raw_shape(s, amplitudes, centers, widths, duration)
    gmax = g.max(axis=-1)
    ok = gmax > 0
    norm = np.where(ok, gmax, 1.0)[..., None]
    keep = (g > 0) & ok[..., None]
    f = np.where(keep, g / norm, 0.0)
    df = np.where(keep, dg / norm, 0.0)
    ddf = np.where(keep, ddg / norm, 0.0)
    return f, df, ddf, ok


def eval_parametrization(
    params: PulseParameters, t, grid_points: int = 2001
) -> np.ndarray | float:
    """Evaluate ``f(t)`` with the normalisation fixed on the pulse grid.

    Raises
    ------
    DegenerateParametrization
        If the unnormalised sum is never positive on the grid.
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be finite")
    s = shape_grid(params.duration, grid_points)
    a, t0, w = params.amplitudes, params.centers, params.widths
    g_grid = _raw_shape(s, a, t0, w, params.duration)[0]
    gmax = g_grid.max()
    if not gmax > 0:
        raise DegenerateParametrization(
            "degenerate parametrization: Gaussian sum has max <= 0"
        )
    g = _raw_shape(t_arr.ravel(), a, t0, w, params.duration)[0].reshape(t_arr.shape)
    f = np.clip(g / gmax, 0.0, None)
    return float(f) if f.ndim == 0 else f


def pulses_from_shape(f, df, ddf, omega0):
    """Pump/Stokes samples from the shape on :func:`shape_grid`.

    The Stokes pulse visits the same arguments in reverse order, so on the
    uniform grid it is the exact mirror image of the pump.
    """
    P = omega0 * f
    dP = omega0 * df
    ddP = omega0 * ddf
    return P, P[..., ::-1], dP, -dP[..., ::-1], ddP, ddP[..., ::-1]


def reference_pulses(
    params: PulseParameters, cfg: SystemConfig, check_boundary: bool = True
) -> ReferencePulses:
    """Sample pump and Stokes reference pulses on ``cfg.grid_points`` points.

    Raises
    ------
    DegenerateParametrization
        If ``f`` has no positive maximum.
    BoundaryConditionError
        If ``Omega_P(0)/Omega_S(0)`` exceeds ``cfg.boundary_tol`` and
        ``check_boundary`` is set.
    """
    T = params.duration
    s = shape_grid(T, cfg.grid_points)
    f, df, ddf, ok = normalized_shape(s, params.amplitudes, params.centers,
                                      params.widths, T)
    if not ok:
        raise DegenerateParametrization(
            "degenerate parametrization: Gaussian sum has max <= 0"
        )
    P, S, dP, dS, ddP, ddS = pulses_from_shape(f, df, ddf, cfg.omega0)
    ref = ReferencePulses(np.linspace(0.0, T, cfg.grid_points), P, S, dP, dS, ddP, ddS)
    if check_boundary:
        r = ref.boundary_ratio
        if not r <= cfg.boundary_tol:
            raise BoundaryConditionError(
                f"boundary ratio Omega_P(0)/Omega_S(0) = {r:.3g} exceeds "
                f"{cfg.boundary_tol:.3g}"
            )
    return ref
