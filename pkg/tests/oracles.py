"""Shared independent oracles used by module and acceptance tests.

Everything here is deliberately written against closed forms or brute
force, not against the package's own code paths, so agreement is
evidence rather than tautology.
"""

import math

import numpy as np
from scipy.special import erfcinv as sp_erfcinv


def df_power_vector(bers, gains, rate_bps, noise_power_w, eta_t, eta_r, eta_d,
                    wavelength_m):
    """Per-hop minimum powers, vectorized via scipy's erfcinv."""
    hbar_c = 6.62e-34 * 2.55e8
    kappa = math.sqrt(2.0 * rate_bps * hbar_c / (eta_d * wavelength_m))
    a = sp_erfcinv(2.0 * np.asarray(bers)) * kappa
    need = a * a + 2.0 * a * math.sqrt(noise_power_w)
    return need / (np.asarray(gains) * eta_t * eta_r)


def grid_min_total_power(gains, rate_bps, ber_target, noise_power_w,
                         eta_t=0.9, eta_r=0.9, eta_d=0.16,
                         wavelength_m=532e-9, rounds=4, pts_by_dim=None):
    """Zoomed grid search over the active-constraint manifold.

    The chain-BER constraint fixes the last hop's BER through the parity
    product (1-2p_H) = (1-2target)/prod(1-2p_k), so the search runs over
    the H-1 free coordinates on a refining grid.
    """
    gains = np.asarray(gains, dtype=float)
    hops = gains.size
    if hops == 1:
        return float(
            df_power_vector([ber_target], gains, rate_bps, noise_power_w,
                            eta_t, eta_r, eta_d, wavelength_m)[0]
        ), np.array([ber_target])
    free = hops - 1
    if pts_by_dim is None:
        pts_by_dim = {1: 400, 2: 60, 3: 26}[free]
    lows = np.full(free, 1e-12)
    highs = np.full(free, ber_target)
    best_total, best_p = math.inf, None
    target_parity = 1.0 - 2.0 * ber_target
    for _ in range(rounds):
        axes = [np.linspace(lows[i], highs[i], pts_by_dim) for i in range(free)]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=1)
        parity = np.prod(1.0 - 2.0 * flat, axis=1)
        last = 0.5 * (1.0 - target_parity / parity)
        ok = (last > 0) & (last <= 0.5)
        total = np.full(flat.shape[0], math.inf)
        if np.any(ok):
            full = np.column_stack([flat[ok], last[ok]])
            powers = df_power_vector(
                full, gains, rate_bps, noise_power_w, eta_t, eta_r, eta_d,
                wavelength_m,
            )
            total[ok] = powers.sum(axis=1)
        k = int(np.argmin(total))
        if total[k] < best_total:
            best_total = float(total[k])
            best_p = np.append(flat[k], 0.5 * (1.0 - target_parity / np.prod(1.0 - 2.0 * flat[k])))
        widths = (highs - lows) / (pts_by_dim - 1)
        center = flat[k]
        lows = np.maximum(1e-12, center - 2.0 * widths)
        highs = np.minimum(ber_target, center + 2.0 * widths)
    return best_total, best_p


def bisection_scan_min_power(evaluate, lo, hi, resolution=1e-12):
    """Find the smallest feasible power by scanning a monotone predicate.

    ``evaluate(power) -> bool`` must be monotone (False below threshold,
    True above).  Plain interval halving down to ``resolution`` relative,
    kept independent of the package's own bisection.
    """
    if not evaluate(hi):
        return math.inf
    while (hi - lo) > resolution * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if evaluate(mid):
            hi = mid
        else:
            lo = mid
    return hi
