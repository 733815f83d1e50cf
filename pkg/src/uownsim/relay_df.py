"""Decode-and-forward chains: exact end-to-end BER and power allocation.

A decoded bit survives the path only if the number of hop errors is
even, so the end-to-end BER is the odd mass of a Poisson-Binomial count
over the per-hop BERs.  The minimum-total-power allocation fixes every
hop at the target rate and splits the error budget across hops by a
projected-gradient descent in log-BER coordinates; the objective is
convex (each per-hop power is convex in its BER) and the error-budget
constraint is kept active throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import OpticsConfig
from .errors import DomainError, InfeasibleError, SolverError
from .link_budget import NoiseModel, erfc_inv, min_tx_power, rate_power_scale

_MAX_BRUTE_HOPS = 20
_BER_FLOOR = 1e-18
_BER_CEIL = 0.5 - 1e-12


@dataclass(frozen=True)
class DfPath:
    """An ordered decode-and-forward chain with its per-hop figures."""

    hops: tuple
    gains: np.ndarray
    bers: np.ndarray
    rates_bps: np.ndarray
    powers_w: np.ndarray

    def __post_init__(self):
        for name in ("gains", "bers", "rates_bps", "powers_w"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if len(self.hops) < 1:
            raise DomainError("a path needs at least one hop")
        if np.any((self.bers <= 0) | (self.bers > 0.5)):
            raise DomainError("hop BERs must lie in (0, 0.5]")


def e2e_ber_df(bers) -> float:
    """End-to-end BER of a decode-and-forward chain.

    Odd mass of the Poisson-Binomial error count, accumulated by an
    O(H^2) generating-function convolution over the hops.
    """
    p = np.atleast_1d(np.asarray(bers, dtype=float))
    if p.size < 1:
        raise DomainError("BER vector must be non-empty")
    if np.any((p < 0) | (p > 0.5)):
        raise DomainError("hop BERs must lie in [0, 0.5]")
    dist = np.zeros(p.size + 1)
    dist[0] = 1.0
    for k, ph in enumerate(p):
        dist[1 : k + 2] = dist[1 : k + 2] * (1.0 - ph) + dist[0 : k + 1] * ph
        dist[0] *= 1.0 - ph
    return float(np.sum(dist[1::2]))


def brute_force_e2e_ber(bers) -> float:
    """Exact reference: enumerate all error patterns with an odd count."""
    p = np.atleast_1d(np.asarray(bers, dtype=float))
    h = p.size
    if h > _MAX_BRUTE_HOPS:
        raise DomainError(f"enumeration over 2^{h} patterns refused (max {_MAX_BRUTE_HOPS} hops)")
    if np.any((p < 0) | (p > 0.5)):
        raise DomainError("hop BERs must lie in [0, 0.5]")
    idx = np.arange(1 << h, dtype=np.uint32)
    bits = (idx[:, None] >> np.arange(h, dtype=np.uint32)) & 1
    pattern_prob = np.where(bits == 1, p, 1.0 - p).prod(axis=1)
    odd = (bits.sum(axis=1) & 1) == 1
    return float(pattern_prob[odd].sum())


def e2e_rate_df(rates_bps) -> float:
    """Bottleneck rate of the chain: the slowest hop sets the pace."""
    r = np.atleast_1d(np.asarray(rates_bps, dtype=float))
    if r.size < 1:
        raise DomainError("rate vector must be non-empty")
    return float(r.min())


def uniform_feasible_ber(ber_target: float, hops: int) -> float:
    """Equal per-hop BER whose chain exactly meets the end-to-end target."""
    if not 0 < ber_target <= 0.5:
        raise DomainError("target BER must lie in (0, 0.5]")
    if hops < 1:
        raise DomainError("need at least one hop")
    # chain odd-mass of h equal hops: (1 - (1-2p)^h)/2
    return 0.5 * -math.expm1(math.log1p(-2.0 * ber_target) / hops)


def erfc_inv_curvatures(ber: float):
    """Second derivatives of erfc_inv(2p) and of its square, at p = ``ber``.

    Both are positive on (0, 0.5), which makes the per-hop power convex
    in its BER share.
    """
    if not 0 < ber < 0.5:
        raise DomainError("BER must lie in (0, 0.5)")
    u = erfc_inv(2.0 * ber)
    e2 = math.exp(min(2.0 * u * u, 700.0))
    return 2.0 * math.pi * u * e2, 2.0 * math.pi * (2.0 * u * u + 1.0) * e2


def tx_power_ber_derivatives(ber: float, rate_bps: float, gain: float,
                             eta_t: float, eta_r: float, eta_d: float,
                             noise: NoiseModel, wavelength_m: float):
    """First and second derivative of the hop's minimum power in its BER."""
    if gain <= 0:
        raise InfeasibleError("no finite power closes a link with zero gain")
    kappa = rate_power_scale(rate_bps, wavelength_m, eta_d)
    sqrt_pn = math.sqrt(noise.noise_power_w)
    coeff = 1.0 / (gain * eta_t * eta_r)
    u = erfc_inv(2.0 * ber)
    du = -math.sqrt(math.pi) * math.exp(min(u * u, 700.0))
    first = coeff * 2.0 * kappa * (kappa * u + sqrt_pn) * du
    dd_u, dd_u2 = erfc_inv_curvatures(ber)
    second = coeff * (kappa * kappa * dd_u2 + 2.0 * kappa * sqrt_pn * dd_u)
    return first, second


@dataclass(frozen=True)
class DfPowerSolution:
    bers: np.ndarray
    powers_w: np.ndarray
    total_power_w: float
    kkt_residual: float
    constraint_gap: float
    iterations: int


def _objective(p, coeff, kappa, sqrt_pn):
    u = np.array([erfc_inv(2.0 * ph) for ph in p])
    a = kappa * u
    f = float(np.sum(coeff * (a * a + 2.0 * a * sqrt_pn)))
    e1 = np.exp(np.minimum(u * u, 700.0))
    dfdp = coeff * 2.0 * kappa * (a + sqrt_pn) * (-math.sqrt(math.pi) * e1)
    e2 = np.exp(np.minimum(2.0 * u * u, 700.0))
    d2fdp2 = coeff * 2.0 * math.pi * (
        kappa * kappa * (2.0 * u * u + 1.0) + 2.0 * kappa * sqrt_pn * u
    ) * e2
    return f, dfdp, d2fdp2


def _constraint(p, log_target):
    e2e = e2e_ber_df(p)
    c = math.log(e2e) - log_target
    # leave-one-out parity products give the exact gradient of log e2e
    s = np.sum(np.log1p(-2.0 * p))
    dcdp = np.exp(s - np.log1p(-2.0 * p)) / e2e
    return c, dcdp


def min_power_df(gains, rate_bps: float, ber_target: float, noise: NoiseModel,
                 optics: OpticsConfig, wavelength_m: float,
                 max_iterations: int = 10_000) -> DfPowerSolution:
    """Split the end-to-end error budget to minimize total transmit power.

    Every hop runs at the end-to-end target rate; the chain BER is pinned
    to the target (the constraint is active at any optimum because power
    falls when any hop's BER share grows).  Projected gradient on log-BER
    coordinates with Newton restoration onto the constraint manifold and
    a backtracking line search; stationarity is certified by the KKT
    residual.
    """
    g = np.atleast_1d(np.asarray(gains, dtype=float))
    hops = g.size
    if hops < 1:
        raise DomainError("need at least one hop")
    if np.any(g <= 0):
        raise InfeasibleError("every hop needs a positive channel gain")
    if not 0 < ber_target <= 0.5:
        raise DomainError("target BER must lie in (0, 0.5]")
    if e2e_ber_df(np.full(hops, 1e-15)) > ber_target:
        raise InfeasibleError("end-to-end BER target below the chain's floor")

    def powers_for(p):
        return np.array([
            min_tx_power(rate_bps, ph, gh, optics.eta_t, optics.eta_r,
                         optics.eta_d, noise, wavelength_m)
            for ph, gh in zip(p, g)
        ])

    def finish(p, kkt, gap, iters):
        powers = powers_for(p)
        return DfPowerSolution(
            bers=p, powers_w=powers, total_power_w=float(powers.sum()),
            kkt_residual=kkt, constraint_gap=gap, iterations=iters,
        )

    if ber_target == 0.5:
        return finish(np.full(hops, 0.5), 0.0, 0.0, 0)
    if hops == 1:
        return finish(np.array([ber_target]), 0.0, 0.0, 0)

    kappa = rate_power_scale(rate_bps, wavelength_m, optics.eta_d)
    sqrt_pn = math.sqrt(noise.noise_power_w)
    coeff = 1.0 / (g * optics.eta_t * optics.eta_r)
    log_target = math.log(ber_target)
    z_lo, z_hi = math.log(_BER_FLOOR), math.log(_BER_CEIL)

    def restore(z):
        # pull the point back onto the constraint along its gradient
        for _ in range(4):
            p = np.exp(z)
            c, dcdp = _constraint(p, log_target)
            if abs(c) <= 1e-13:
                break
            gz = dcdp * p
            z = np.clip(z - c * gz / float(gz @ gz), z_lo, z_hi)
        return z

    z = restore(np.log(np.full(hops, uniform_feasible_ber(ber_target, hops))))
    p = np.exp(z)
    f, dfdp, d2fdp2 = _objective(p, coeff, kappa, sqrt_pn)
    step = 1.0
    kkt = math.inf
    it = 0
    stalls = 0
    for it in range(1, max_iterations + 1):
        c, dcdp = _constraint(p, log_target)
        gf = dfdp * p
        gc = dcdp * p
        mu = float(gf @ gc) / float(gc @ gc)
        kkt = float(np.linalg.norm(gf - mu * gc)) / max(1.0, float(np.linalg.norm(gf)))
        if kkt <= 1e-8 and abs(c) <= 1e-10:
            break
        # Newton-scaled tangent direction; each hop's power is strictly
        # convex in its BER so the diagonal metric is positive
        inv = 1.0 / d2fdp2
        mu_m = float((dcdp * inv) @ dfdp) / float((dcdp * inv) @ dcdp)
        d_p = -inv * (dfdp - mu_m * dcdp)
        direction = d_p / p
        slope = float(dfdp @ d_p)
        if slope >= 0:  # numerically flat; fall back to plain descent
            direction = -(gf - mu * gc)
            slope = float(gf @ direction)
        accepted = False
        for _ in range(80):
            trial = restore(np.clip(z + step * direction, z_lo, z_hi))
            p_try = np.exp(trial)
            f_try, df_try, d2f_try = _objective(p_try, coeff, kappa, sqrt_pn)
            if f_try <= f + 1e-4 * step * slope or (step <= 1e-10 and f_try < f):
                z, p, f, dfdp, d2fdp2 = trial, p_try, f_try, df_try, d2f_try
                step = min(step * 2.0, 1.0)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            stalls += 1
            step = 1.0
            if stalls >= 3:
                break
        else:
            stalls = 0
    c, _ = _constraint(p, log_target)
    if kkt > 1e-8:
        raise SolverError(
            f"power split failed to reach stationarity (residual {kkt:.2e})"
        )
    return finish(p, kkt, abs(c), it)
