"""Fused single-candidate evaluation used by screening and local search.

``candidate_score`` runs the same computation as
``model.reference_pulses -> sta.effective_frame -> sta.physical_pulses ->
robustness.sensitivity`` in one compiled loop; the array implementation in
those modules remains the reference and the two are tested against each
other.  The counter-diabatic phase is never formed explicitly: the rotated
coupling ``Omega_t exp(+-i gamma)`` equals ``Omega_eff +- 2i Omega_a``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numba
import numpy as np

from .model import BASE_WIDTH_FRACTION, SystemConfig, shape_grid
from .sta import SINGULAR_FLOOR


@numba.njit(cache=True)
def _score(x, s, h, duration, omega0, delta, boundary_tol):
    m = s.shape[0]
    n = x.shape[0] // 3
    sig2 = (BASE_WIDTH_FRACTION * duration) ** 2
    g = np.empty(m)
    dg = np.empty(m)
    ddg = np.empty(m)
    gmax = -np.inf
    for k in range(m):
        sk = s[k]
        base = math.exp(-sk * sk / sig2)
        v = base
        dv = -2.0 * sk / sig2 * base
        ddv = (4.0 * sk * sk / (sig2 * sig2) - 2.0 / sig2) * base
        for j in range(n):
            w2 = x[2 * n + j] * x[2 * n + j]
            u = sk - x[n + j]
            e = x[j] * math.exp(-u * u / w2)
            v += e
            dv += -2.0 * u / w2 * e
            ddv += (4.0 * u * u / (w2 * w2) - 2.0 / w2) * e
        g[k] = v
        dg[k] = dv
        ddg[k] = ddv
        if v > gmax:
            gmax = v
    if not gmax > 0.0:
        return np.nan, np.nan, False
    for j in range(n):
        if not x[2 * n + j] > 0.0:
            return np.nan, np.nan, False
    for k in range(m):
        if g[k] > 0.0:
            g[k] = omega0 * (g[k] / gmax)
            dg[k] = omega0 * (dg[k] / gmax)
            ddg[k] = omega0 * (ddg[k] / gmax)
        else:
            g[k] = 0.0
            dg[k] = 0.0
            ddg[k] = 0.0
    # the Stokes pulse is the pump mirrored in time
    if not g[m - 1] > 0.0 or not g[0] / g[m - 1] <= boundary_tol:
        return np.nan, np.nan, False

    energy = np.empty(m)
    coupling = np.empty(m, dtype=np.complex128)
    peak = 0.0
    floor = SINGULAR_FLOOR * omega0 * omega0
    for k in range(m):
        P = g[k]
        dP = dg[k]
        ddP = ddg[k]
        S = g[m - 1 - k]
        dS = -dg[m - 1 - k]
        ddS = ddg[m - 1 - k]
        R2 = P * P + S * S
        if R2 < floor:
            return np.nan, np.nan, False
        om_e = P * S / (2.0 * delta)
        de_e = (P * P - S * S) / (4.0 * delta)
        d_om_e = (dP * S + P * dS) / (2.0 * delta)
        wr = dP * S - dS * P
        om_a = wr / R2
        d_om_a = ((ddP * S - ddS * P) * R2 - wr * 2.0 * (P * dP + S * dS)) / (R2 * R2)
        cd = 2.0 * om_a
        om_t2 = om_e * om_e + cd * cd
        g_dot = 0.0
        if om_t2 > 0.0:
            g_dot = (2.0 * d_om_a * om_e - cd * d_om_e) / om_t2
        de_t = de_e + g_dot
        om_t = math.sqrt(om_t2)
        r = math.hypot(de_t, om_t)
        big = r + abs(de_t)
        pk = math.sqrt(2.0 * delta * big)
        if pk > peak:
            peak = pk
        energy[k] = 0.5 * math.hypot(de_e, om_e)
        # cos and sin of the mixing angle atan2(P, S)
        rr = math.sqrt(R2)
        c = S / rr
        sn = P / rr
        # <a-| U Ht U^dagger |a0>
        m12 = -0.5 * complex(om_e, -cd)
        m21 = -0.5 * complex(om_e, cd)
        coupling[k] = sn * (-0.5 * de_t * c - m12 * sn) + c * (m21 * c - 0.5 * de_t * sn)

    # running dynamical phase, same scheme as robustness.cumulative_simpson_uniform
    xi = np.zeros(m)
    for k in range(2, m, 2):
        xi[k] = xi[k - 2] + h / 3.0 * (energy[k - 2] + 4.0 * energy[k - 1] + energy[k])
    for k in range(1, m - 1, 2):
        xi[k] = xi[k - 1] + h / 12.0 * (5.0 * energy[k - 1] + 8.0 * energy[k] - energy[k + 1])
    if m % 2 == 0:
        xi[m - 1] = xi[m - 2] + h / 12.0 * (-energy[m - 3] + 8.0 * energy[m - 2]
                                            + 5.0 * energy[m - 1])
    end = m if m % 2 == 1 else m - 1
    acc = 0.0 + 0.0j
    for k in range(end):
        wgt = 1.0 if (k == 0 or k == end - 1) else (4.0 if k % 2 == 1 else 2.0)
        acc += wgt * coupling[k] * complex(math.cos(-2.0 * xi[k]), math.sin(-2.0 * xi[k]))
    acc *= h / 3.0
    if end < m:
        for k in (m - 2, m - 1):
            acc += 0.5 * h * coupling[k] * complex(math.cos(-2.0 * xi[k]),
                                                   math.sin(-2.0 * xi[k]))
    q = acc.real * acc.real + acc.imag * acc.imag
    if not (math.isfinite(peak) and math.isfinite(q)):
        return np.nan, np.nan, False
    return peak / omega0, q, True


@numba.njit(cache=True)
def _score_many(X, s, h, duration, omega0, delta, boundary_tol):
    b = X.shape[0]
    peaks = np.empty(b)
    qs = np.empty(b)
    oks = np.empty(b, dtype=np.bool_)
    for i in range(b):
        p, q, ok = _score(X[i], s, h, duration, omega0, delta, boundary_tol)
        peaks[i] = p
        qs[i] = q
        oks[i] = ok
    return peaks, qs, oks


@lru_cache(maxsize=32)
def _grid(duration: float, grid_points: int):
    s = shape_grid(duration, grid_points)
    s.flags.writeable = False
    return s, duration / (grid_points - 1)


def candidate_score(vector, duration: float, cfg: SystemConfig):
    """``(omega_peak, q, ok)`` for one flat parameter vector."""
    s, h = _grid(float(duration), int(cfg.grid_points))
    peak, q, ok = _score(np.ascontiguousarray(vector, dtype=float), s, h,
                         float(duration), float(cfg.omega0), float(cfg.delta),
                         float(cfg.boundary_tol))
    return peak, cfg.q_scale * q, bool(ok)


def candidate_scores(vectors, duration: float, cfg: SystemConfig):
    """Row-wise :func:`candidate_score` over a 2-D array of vectors."""
    X = np.ascontiguousarray(np.atleast_2d(vectors), dtype=float)
    s, h = _grid(float(duration), int(cfg.grid_points))
    peaks, qs, oks = _score_many(X, s, h, float(duration), float(cfg.omega0),
                                 float(cfg.delta), float(cfg.boundary_tol))
    return peaks, cfg.q_scale * qs, oks
