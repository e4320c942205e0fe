"""Grid-scan kernels for the brute-force measurement search.

Each kernel exists twice: a scalar-loop version compiled with numba and a
vectorized pure-numpy version.  The active backend is chosen per call or
through the FRIOSIM_BACKEND environment variable ("numba" | "numpy");
numba is the default when importable.  Both versions evaluate candidates
in the same lexicographic order and break ties by keeping the first
minimum, so results are backend-independent.

All candidate measurements are valid by construction: the scans skip
parameter combinations whose inconclusive element would leave the
operator interval [0, I], which is exactly the positivity/completeness
check on this family.
"""
from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "BACKEND_ENV_VAR",
    "available_backends",
    "default_backend",
    "resolve_backend",
    "covariant_scan",
    "covariant_direction_scan",
    "unconstrained_scan",
]

BACKEND_ENV_VAR = "FRIOSIM_BACKEND"

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

_FEAS_TOL = 1e-12


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if _HAVE_NUMBA else ("numpy",)


def default_backend() -> str:
    env = os.environ.get(BACKEND_ENV_VAR, "").strip().lower()
    if env in ("numba", "numpy"):
        if env == "numba" and not _HAVE_NUMBA:
            return "numpy"
        return env
    return "numba" if _HAVE_NUMBA else "numpy"


def resolve_backend(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    b = backend.strip().lower()
    if b not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}; use 'numba' or 'numpy'")
    if b == "numba" and not _HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    return b


# --------------------------------------------------------------------------
# covariant family: inconclusive element diag(a, b) with
# a*cos^2(theta) + b*sin^2(theta) = q; conclusive elements are the
# minimum-error operators sandwiched by sqrt(I - diag(a, b)).


def _cov_scan_loop(n, cos_t, sin_t, q, a_grid):
    c2 = cos_t * cos_t
    s2 = sin_t * sin_t
    best_pe = np.inf
    best_a = np.nan
    for i in range(a_grid.size):
        a = a_grid[i]
        if a < -_FEAS_TOL or a > 1.0 + _FEAS_TOL:
            continue
        b = (q - a * c2) / s2
        if b < -_FEAS_TOL or b > 1.0 + _FEAS_TOL:
            continue
        if a < 0.0:
            a = 0.0
        if b < 0.0:
            b = 0.0
        elif b > 1.0:
            b = 1.0
        amp = math.sqrt(1.0 - a) * cos_t + math.sqrt(1.0 - b) * sin_t
        pe = 1.0 - q - amp * amp / n
        if pe < best_pe:
            best_pe = pe
            best_a = a_grid[i]
    return best_pe, best_a


def _cov_scan_numpy(n, cos_t, sin_t, q, a_grid):
    c2 = cos_t * cos_t
    s2 = sin_t * sin_t
    a = a_grid
    b = (q - a * c2) / s2
    ok = (a >= -_FEAS_TOL) & (a <= 1.0 + _FEAS_TOL) & (b >= -_FEAS_TOL) & (b <= 1.0 + _FEAS_TOL)
    if not ok.any():
        return np.inf, np.nan
    ac = np.clip(a, 0.0, 1.0)
    bc = np.clip(b, 0.0, 1.0)
    amp = np.sqrt(1.0 - ac) * cos_t + np.sqrt(1.0 - bc) * sin_t
    pe = np.where(ok, 1.0 - q - amp * amp / n, np.inf)
    i = int(np.argmin(pe))
    return float(pe[i]), float(a_grid[i])


# --------------------------------------------------------------------------
# covariant n=2 family with one free conclusive direction: E0 = |w><w|
# parameterized by Bloch angles (pol, azi), E1 = I - E0, both sandwiched by
# sqrt(I - diag(a, b)).


def _cov_dir_scan_loop(cos_t, sin_t, q, a_grid, pol_grid, azi_grid):
    c2 = cos_t * cos_t
    s2 = sin_t * sin_t
    best_pe = np.inf
    best_a = np.nan
    best_pol = np.nan
    best_azi = np.nan
    for i in range(a_grid.size):
        a = a_grid[i]
        if a < -_FEAS_TOL or a > 1.0 + _FEAS_TOL:
            continue
        b = (q - a * c2) / s2
        if b < -_FEAS_TOL or b > 1.0 + _FEAS_TOL:
            continue
        aa = min(max(a, 0.0), 1.0)
        bb = min(max(b, 0.0), 1.0)
        g0 = math.sqrt(1.0 - aa) * cos_t
        g1 = math.sqrt(1.0 - bb) * sin_t
        norm1 = g0 * g0 + g1 * g1
        for jp in range(pol_grid.size):
            half = 0.5 * pol_grid[jp]
            cw = math.cos(half)
            sw = math.sin(half)
            cw2 = cw * cw
            sw2 = sw * sw
            cross = 2.0 * cw * sw * g0 * g1
            base = cw2 * g0 * g0 + sw2 * g1 * g1
            for ka in range(azi_grid.size):
                cosazi = math.cos(azi_grid[ka])
                w0 = base + cross * cosazi  # |<w|gamma_0>|^2
                w1 = base - cross * cosazi  # |<w|gamma_1>|^2, gamma_1 flips sign of g1
                pc = 0.5 * (w0 + norm1 - w1)
                pe = 1.0 - q - pc
                if pe < best_pe:
                    best_pe = pe
                    best_a = a_grid[i]
                    best_pol = pol_grid[jp]
                    best_azi = azi_grid[ka]
    return best_pe, best_a, best_pol, best_azi


def _cov_dir_scan_numpy(cos_t, sin_t, q, a_grid, pol_grid, azi_grid):
    c2 = cos_t * cos_t
    s2 = sin_t * sin_t
    best_pe = np.inf
    best = (np.nan, np.nan, np.nan)
    half = 0.5 * pol_grid
    cw = np.cos(half)[:, None]
    sw = np.sin(half)[:, None]
    cosazi = np.cos(azi_grid)[None, :]
    for i in range(a_grid.size):  # chunk over a to bound memory
        a = float(a_grid[i])
        if a < -_FEAS_TOL or a > 1.0 + _FEAS_TOL:
            continue
        b = (q - a * c2) / s2
        if b < -_FEAS_TOL or b > 1.0 + _FEAS_TOL:
            continue
        aa = min(max(a, 0.0), 1.0)
        bb = min(max(b, 0.0), 1.0)
        g0 = math.sqrt(1.0 - aa) * cos_t
        g1 = math.sqrt(1.0 - bb) * sin_t
        norm1 = g0 * g0 + g1 * g1
        base = (cw * g0) ** 2 + (sw * g1) ** 2
        cross = (2.0 * g0 * g1) * cw * sw * cosazi
        pc = 0.5 * ((base + cross) + norm1 - (base - cross))
        pe = 1.0 - q - pc
        j = int(np.argmin(pe))
        v = float(pe.ravel()[j])
        if v < best_pe:
            best_pe = v
            jp, ka = divmod(j, azi_grid.size)
            best = (a, float(pol_grid[jp]), float(azi_grid[ka]))
    return (best_pe, *best)


# --------------------------------------------------------------------------
# unconstrained n=2 family: inconclusive element (c/2)(I + m . sigma) with
# m = r * (sin mu cos nu, sin mu sin nu, cos mu) and c fixed by the
# inconclusive-rate constraint; the conclusive split of the remainder
# G = I - Pi_? is optimized in closed form over projective two-outcome
# measurements (including the trivial 0/I split), which is exact for the
# linear objective.


def _uncon_scan_loop(sin2t, cos2t, q, r_grid, mu_grid, nu_grid):
    best_pe = np.inf
    best_r = np.nan
    best_mu = np.nan
    best_nu = np.nan
    for i in range(r_grid.size):
        r = r_grid[i]
        for j in range(mu_grid.size):
            mu = mu_grid[j]
            smu = math.sin(mu)
            uz = math.cos(mu)
            for k in range(nu_grid.size):
                nu = nu_grid[k]
                ux = smu * math.cos(nu)
                uy = smu * math.sin(nu)
                den = 1.0 + r * uz * cos2t
                c = 2.0 * q / den
                if c * (1.0 + r) * 0.5 > 1.0 + _FEAS_TOL:
                    continue  # I - Pi_? would have a negative eigenvalue
                g0 = 1.0 - 0.5 * c
                gn = 0.5 * c * r
                lp = g0 + gn
                lm = g0 - gn
                if lm < 0.0:
                    lm = 0.0
                sp = math.sqrt(lp)
                sm = math.sqrt(lm)
                h0 = 0.5 * (sp + sm)
                h1 = 0.5 * (sp - sm)
                # a_vec = -h1 * u;  b0 = (sin2t, 0, cos2t), b1 = (-sin2t, 0, cos2t)
                ab0 = -h1 * (ux * sin2t + uz * cos2t)
                ab1 = -h1 * (-ux * sin2t + uz * cos2t)
                h00 = h0 * h0
                h11 = h1 * h1
                t00 = 0.5 * (h00 + h11 + 2.0 * h0 * ab0)
                t10 = 0.5 * (h00 + h11 + 2.0 * h0 * ab1)
                coef = h00 - h11
                dab = ab0 - ab1
                dx = 0.5 * (coef * 2.0 * sin2t + 2.0 * dab * (-h1 * ux))
                dy = 0.5 * (2.0 * dab * (-h1 * uy))
                dz = 0.5 * (2.0 * dab * (-h1 * uz))
                dn = math.sqrt(dx * dx + dy * dy + dz * dz)
                pc = 0.5 * (t00 + t10 + dn)
                if t00 > pc:
                    pc = t00
                if t10 > pc:
                    pc = t10
                pe = 1.0 - q - pc
                if pe < best_pe:
                    best_pe = pe
                    best_r = r
                    best_mu = mu
                    best_nu = nu
    return best_pe, best_r, best_mu, best_nu


def _uncon_scan_numpy(sin2t, cos2t, q, r_grid, mu_grid, nu_grid):
    best_pe = np.inf
    best = (np.nan, np.nan, np.nan)
    smu = np.sin(mu_grid)[:, None]
    uz = np.cos(mu_grid)[:, None]
    ux = smu * np.cos(nu_grid)[None, :]
    uy = smu * np.sin(nu_grid)[None, :]
    for i in range(r_grid.size):  # chunk over r to bound memory
        r = float(r_grid[i])
        den = 1.0 + r * uz * cos2t
        c = 2.0 * q / den
        ok = c * (1.0 + r) * 0.5 <= 1.0 + _FEAS_TOL
        if not ok.any():
            continue
        g0 = 1.0 - 0.5 * c
        gn = 0.5 * c * r
        lp = g0 + gn
        lm = np.maximum(g0 - gn, 0.0)
        sp = np.sqrt(lp)
        sm = np.sqrt(lm)
        h0 = 0.5 * (sp + sm)
        h1 = 0.5 * (sp - sm)
        ab0 = -h1 * (ux * sin2t + uz * cos2t)
        ab1 = -h1 * (-ux * sin2t + uz * cos2t)
        h00 = h0 * h0
        h11 = h1 * h1
        t00 = 0.5 * (h00 + h11 + 2.0 * h0 * ab0)
        t10 = 0.5 * (h00 + h11 + 2.0 * h0 * ab1)
        coef = h00 - h11
        dab = ab0 - ab1
        dx = 0.5 * (coef * 2.0 * sin2t + 2.0 * dab * (-h1 * ux))
        dy = 0.5 * (2.0 * dab * (-h1 * uy))
        dz = 0.5 * (2.0 * dab * (-h1 * uz))
        dn = np.sqrt(dx * dx + dy * dy + dz * dz)
        pc = np.maximum(0.5 * (t00 + t10 + dn), np.maximum(t00, t10))
        pe = np.where(ok, 1.0 - q - pc, np.inf)
        j = int(np.argmin(pe))
        v = float(pe.ravel()[j])
        if v < best_pe:
            best_pe = v
            jm, kn = divmod(j, nu_grid.size)
            best = (r, float(mu_grid[jm]), float(nu_grid[kn]))
    return (best_pe, *best)


if _HAVE_NUMBA:
    _cov_scan_nb = njit(cache=True)(_cov_scan_loop)
    _cov_dir_scan_nb = njit(cache=True)(_cov_dir_scan_loop)
    _uncon_scan_nb = njit(cache=True)(_uncon_scan_loop)


def covariant_scan(n, theta, q, a_grid, backend=None):
    be = resolve_backend(backend)
    args = (n, math.cos(theta), math.sin(theta), q, np.ascontiguousarray(a_grid, dtype=np.float64))
    if be == "numba":
        return _cov_scan_nb(*args)
    return _cov_scan_numpy(*args)


def covariant_direction_scan(theta, q, a_grid, pol_grid, azi_grid, backend=None):
    be = resolve_backend(backend)
    args = (
        math.cos(theta),
        math.sin(theta),
        q,
        np.ascontiguousarray(a_grid, dtype=np.float64),
        np.ascontiguousarray(pol_grid, dtype=np.float64),
        np.ascontiguousarray(azi_grid, dtype=np.float64),
    )
    if be == "numba":
        return _cov_dir_scan_nb(*args)
    return _cov_dir_scan_numpy(*args)


def unconstrained_scan(theta, q, r_grid, mu_grid, nu_grid, backend=None):
    be = resolve_backend(backend)
    args = (
        math.sin(2.0 * theta),
        math.cos(2.0 * theta),
        q,
        np.ascontiguousarray(r_grid, dtype=np.float64),
        np.ascontiguousarray(mu_grid, dtype=np.float64),
        np.ascontiguousarray(nu_grid, dtype=np.float64),
    )
    if be == "numba":
        return _uncon_scan_nb(*args)
    return _uncon_scan_numpy(*args)
