"""Optical amplify-and-forward relaying.

Relays re-amplify the incoming optical field without retiming it, so local
background/dark noise and amplifier spontaneous emission accumulate along the
chain instead of being regenerated away.  The sink SNR of an H-hop chain with
per-hop electrical SNRs ``gamma_h`` is

    gamma_sink = 1 / (prod_h (1 + 1/gamma_h) - 1)

and the end-to-end OOK error probability is

    BER = 0.5 * erfc(sqrt(T * p0 / 2) * (sqrt(1 + gamma_sink) - 1))

Note on the bracket: writing ``Pi = prod(1 + 1/gamma_h)``, the factor
``sqrt(Pi / (Pi - 1)) - 1`` equals ``sqrt(1 + gamma_sink) - 1`` identically,
which grows with every per-hop SNR, so the BER above is monotone decreasing
in each ``gamma_h`` as it must be.  A casual reading of the ``Pi`` form can
suggest the opposite limit; the two forms are the same function and the
monotone-correct one is implemented here.

``simulate_af_chain`` propagates signal, accumulated local noise, and ASE
power hop by hop and cross-checks the recursion against the expanded
product-sum closed forms; the two routes must agree to 1e-12 relative or the
simulation refuses to return.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc as _erfc

from .errors import DomainError, InfeasibleError, SolverError
from .link_budget import (
    LIGHT_SPEED_WATER_M_S,
    PLANCK_J_S,
    erfc_inv,
)

VACUUM_LIGHT_SPEED_M_S = 3.0e8

_CHAIN_AGREEMENT_RTOL = 1e-12


@dataclass(frozen=True)
class AmplifierModel:
    """Optical amplifier noise parameters shared by every relay.

    ASE power injected by a relay running at power gain ``A`` is
    ``hbar * carrier_hz * (A - 1) * n_sp * bandwidth_hz``, clamped at zero
    for sub-unity gains (an attenuating stage adds no spontaneous photons).
    """

    n_sp: float = 2.0
    carrier_hz: float = VACUUM_LIGHT_SPEED_M_S / 532e-9
    bandwidth_hz: float = 1e9

    def __post_init__(self):
        if not self.n_sp >= 1.0:
            raise DomainError(f"n_sp must be >= 1, got {self.n_sp}")
        if not self.carrier_hz > 0.0:
            raise DomainError(f"carrier_hz must be positive, got {self.carrier_hz}")
        if not self.bandwidth_hz > 0.0:
            raise DomainError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")

    @classmethod
    def for_link(cls, wavelength_m: float = 532e-9, pulse_s: float = 1e-9,
                 n_sp: float = 2.0) -> "AmplifierModel":
        """Carrier from the vacuum wavelength, bandwidth from the slot rate."""
        if not wavelength_m > 0.0 or not pulse_s > 0.0:
            raise DomainError("wavelength_m and pulse_s must be positive")
        return cls(n_sp=n_sp, carrier_hz=VACUUM_LIGHT_SPEED_M_S / wavelength_m,
                   bandwidth_hz=1.0 / pulse_s)

    def ase_power_w(self, amplifier_gain):
        """Spontaneous-emission power added after a gain stage, >= 0."""
        gain = np.asarray(amplifier_gain, dtype=float)
        excess = np.maximum(gain - 1.0, 0.0)
        out = PLANCK_J_S * self.carrier_hz * excess * self.n_sp * self.bandwidth_hz
        return float(out) if out.ndim == 0 else out


def amp_gain(tx_power_w, gain, eta_t: float, eta_r: float,
             noise_power_w: float):
    """Relay power gain that restores the transmit level to ``tx_power_w``.

    The relay input is ``tx * eta_t * eta_r * G + P_n`` (signal plus local
    noise); dividing the target output by it gives the required gain.  ASE is
    neglected in this fixed point, so the restored level is exact only with
    spontaneous emission switched off.
    """
    tx = np.asarray(tx_power_w, dtype=float)
    g = np.asarray(gain, dtype=float)
    if np.any(tx < 0.0) or np.any(g < 0.0):
        raise DomainError("tx_power_w and gain must be non-negative")
    if not noise_power_w > 0.0:
        raise DomainError(f"noise_power_w must be positive, got {noise_power_w}")
    out = tx / (g * eta_t * eta_r * tx + noise_power_w)
    return float(out) if out.ndim == 0 else out


def hop_snr(tx_power_w, gain, eta_t: float, eta_r: float,
            noise_power_w: float):
    """Electrical SNR of one hop: received signal over local noise power."""
    tx = np.asarray(tx_power_w, dtype=float)
    g = np.asarray(gain, dtype=float)
    if np.any(tx < 0.0) or np.any(g < 0.0):
        raise DomainError("tx_power_w and gain must be non-negative")
    if not noise_power_w > 0.0:
        raise DomainError(f"noise_power_w must be positive, got {noise_power_w}")
    out = g * eta_t * eta_r * tx / noise_power_w
    return float(out) if out.ndim == 0 else out


def sink_snr(snrs) -> float:
    """Chain SNR 1 / (prod(1 + 1/gamma_h) - 1), evaluated in log space.

    Bounded above by min(snrs) and exact for a single hop.
    """
    g = np.asarray(snrs, dtype=float).ravel()
    if g.size == 0:
        raise DomainError("need at least one hop SNR")
    if np.any(g <= 0.0) or not np.all(np.isfinite(g)):
        raise DomainError("hop SNRs must be positive and finite")
    log_prod = np.sum(np.log1p(1.0 / g))
    return float(1.0 / np.expm1(log_prod))


@dataclass(frozen=True)
class AfChainState:
    """Per-node power bookkeeping for a simulated AF chain.

    ``received_w[h]`` is the total power entering node ``h+1`` (relays first,
    sink last) and splits exactly into the three component arrays.  The
    transmitted array covers the relays only; the source emits the configured
    power and the sink does not retransmit.
    """

    received_w: np.ndarray
    transmitted_w: np.ndarray
    signal_w: np.ndarray
    local_noise_w: np.ndarray
    ase_w: np.ndarray
    amp_gains: np.ndarray

    @property
    def hops(self) -> int:
        return self.received_w.size

    @property
    def sink_snr(self) -> float:
        """Signal over total accumulated noise at the sink input."""
        noise = self.local_noise_w[-1] + self.ase_w[-1]
        return float(self.signal_w[-1] / noise)


def _closed_form_received(tx_power_w: float, gains: np.ndarray,
                          amp_gains: np.ndarray, eta_t: float, eta_r: float,
                          noise_power_w: float, ase_w: np.ndarray,
                          hop: int) -> float:
    """Expanded product-sum expression for the power entering node ``hop``.

    Three contributions: the source signal through every stage, one local
    noise term per traversed receiver, and one ASE term per upstream relay.
    Kept deliberately literal (explicit products) as the independent check
    on the recursion.
    """
    etas = eta_t * eta_r
    total = tx_power_w * np.prod(amp_gains[:hop - 1]) * etas ** hop \
        * np.prod(gains[:hop])
    for i in range(1, hop + 1):
        total += noise_power_w * np.prod(amp_gains[i - 1:hop - 1]) \
            * etas ** (hop - i) * np.prod(gains[i:hop])
    for i in range(1, hop):
        total += ase_w[i - 1] * np.prod(amp_gains[i:hop - 1]) \
            * etas ** (hop - i) * np.prod(gains[i:hop])
    return float(total)


def simulate_af_chain(tx_power_w: float, gains, eta_t: float, eta_r: float,
                      noise_power_w: float,
                      amplifier: AmplifierModel | None = None,
                      include_ase: bool = True) -> AfChainState:
    """Propagate signal, local noise, and ASE through an AF chain.

    ``gains`` are the composite channel gains of hops 1..H; each of the
    H - 1 relays amplifies back to ``tx_power_w`` (ASE excluded from the
    fixed point) and the sink only receives.  Raises SolverError if the
    hop-by-hop recursion and the closed-form expansion disagree beyond
    1e-12 relative on any node.
    """
    g = np.asarray(gains, dtype=float).ravel()
    if g.size == 0:
        raise DomainError("need at least one hop gain")
    if np.any(g < 0.0):
        raise DomainError("channel gains must be non-negative")
    if not tx_power_w >= 0.0:
        raise DomainError(f"tx_power_w must be non-negative, got {tx_power_w}")
    if not noise_power_w > 0.0:
        raise DomainError(f"noise_power_w must be positive, got {noise_power_w}")
    if amplifier is None:
        amplifier = AmplifierModel()

    hops = g.size
    etas = eta_t * eta_r
    amp_gains = amp_gain(tx_power_w, g[:hops - 1], eta_t, eta_r, noise_power_w)
    amp_gains = np.atleast_1d(np.asarray(amp_gains, dtype=float))
    if include_ase:
        ase_inject = np.atleast_1d(np.asarray(
            amplifier.ase_power_w(amp_gains), dtype=float))
    else:
        ase_inject = np.zeros_like(amp_gains)

    received = np.empty(hops)
    transmitted = np.empty(hops - 1)
    signal = np.empty(hops)
    local = np.empty(hops)
    ase = np.empty(hops)

    sig_tx, loc_tx, ase_tx = float(tx_power_w), 0.0, 0.0
    for h in range(hops):
        signal[h] = sig_tx * etas * g[h]
        local[h] = loc_tx * etas * g[h] + noise_power_w
        ase[h] = ase_tx * etas * g[h]
        received[h] = signal[h] + local[h] + ase[h]
        if h < hops - 1:
            a = amp_gains[h]
            sig_tx = a * signal[h]
            loc_tx = a * local[h]
            ase_tx = a * ase[h] + ase_inject[h]
            transmitted[h] = sig_tx + loc_tx + ase_tx

    for h in range(1, hops + 1):
        closed = _closed_form_received(tx_power_w, g, amp_gains, eta_t, eta_r,
                                       noise_power_w, ase_inject, h)
        scale = max(abs(closed), abs(received[h - 1]), 1e-300)
        if abs(closed - received[h - 1]) > _CHAIN_AGREEMENT_RTOL * scale:
            raise SolverError(
                f"AF chain recursion and closed form disagree at node {h}: "
                f"{received[h - 1]!r} vs {closed!r}")

    return AfChainState(received_w=received, transmitted_w=transmitted,
                        signal_w=signal, local_noise_w=local, ase_w=ase,
                        amp_gains=amp_gains)


def e2e_ber_af(chain_snr: float, count_off: float, pulse_s: float) -> float:
    """OOK error probability at the sink of an AF chain.

    ``count_off`` is the off-slot photon arrival rate (dark plus background
    counts) and ``chain_snr`` the accumulated sink SNR.  The detection factor
    ``sqrt(1 + chain_snr) - 1`` is evaluated in its cancellation-free form.
    """
    if not chain_snr >= 0.0:
        raise DomainError(f"chain_snr must be non-negative, got {chain_snr}")
    if not count_off >= 0.0 or not pulse_s > 0.0:
        raise DomainError("count_off must be >= 0 and pulse_s > 0")
    bracket = chain_snr / (np.sqrt(1.0 + chain_snr) + 1.0)
    return float(0.5 * _erfc(np.sqrt(pulse_s * count_off / 2.0) * bracket))


def e2e_rate_af(snrs, ber_target: float, noise_power_w: float,
                wavelength_m: float = 532e-9, eta_d: float = 0.16) -> float:
    """Largest OOK rate meeting ``ber_target`` at the sink of an AF chain.

    Inverts the sink BER expression for the slot rate when the off-slot
    count comes from the noise power at that same rate, which removes the
    pulse duration from the result.
    """
    if not 0.0 < ber_target <= 0.5:
        raise DomainError(f"ber_target must lie in (0, 0.5], got {ber_target}")
    if not noise_power_w > 0.0:
        raise DomainError(f"noise_power_w must be positive, got {noise_power_w}")
    gamma = sink_snr(snrs)
    bracket = gamma / (np.sqrt(1.0 + gamma) + 1.0)
    q = erfc_inv(2.0 * ber_target)
    if q == 0.0:
        return float("inf")
    return float(noise_power_w * eta_d * wavelength_m * bracket ** 2
                 / (2.0 * PLANCK_J_S * LIGHT_SPEED_WATER_M_S * q ** 2))


@dataclass(frozen=True)
class AfPowerSolution:
    """Common transmit power and relay gains meeting a rate target."""

    tx_power_w: float
    amp_gains: np.ndarray
    snrs: np.ndarray
    total_power_w: float
    rate_bps: float


def min_power_af(gains, rate_target: float, ber_target: float,
                 max_tx_power_w: float, eta_t: float, eta_r: float,
                 noise_power_w: float, wavelength_m: float = 532e-9,
                 eta_d: float = 0.16, rel_tol: float = 1e-12) -> AfPowerSolution:
    """Minimise total AF chain power subject to an end-to-end rate floor.

    Every transmitter (source and relays) runs at the same optical power, so
    the objective is hops * P_t and the achieved rate is monotone increasing
    in P_t; the smallest feasible power is found by bisection on
    [0, max_tx_power_w] to ``rel_tol`` relative width, returning the feasible
    endpoint.  Raises InfeasibleError when even the power cap misses the
    rate target.
    """
    g = np.asarray(gains, dtype=float).ravel()
    if g.size == 0:
        raise DomainError("need at least one hop gain")
    if np.any(g <= 0.0):
        raise DomainError("channel gains must be positive")
    if not rate_target > 0.0:
        raise DomainError(f"rate_target must be positive, got {rate_target}")
    if not max_tx_power_w > 0.0:
        raise DomainError(f"max_tx_power_w must be positive, got {max_tx_power_w}")

    def rate_at(p_t: float) -> float:
        snrs = hop_snr(p_t, g, eta_t, eta_r, noise_power_w)
        return e2e_rate_af(snrs, ber_target, noise_power_w, wavelength_m, eta_d)

    if rate_at(max_tx_power_w) < rate_target:
        raise InfeasibleError(
            f"rate target {rate_target:.6g} bps unreachable at the "
            f"{max_tx_power_w:.6g} W power cap over {g.size} hops")

    lo, hi = 0.0, float(max_tx_power_w)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # interval at float resolution
            break
        if rate_at(mid) >= rate_target:
            hi = mid
        else:
            lo = mid

    snrs = np.atleast_1d(np.asarray(
        hop_snr(hi, g, eta_t, eta_r, noise_power_w), dtype=float))
    amp_gains = np.atleast_1d(np.asarray(
        amp_gain(hi, g[:g.size - 1], eta_t, eta_r, noise_power_w), dtype=float))
    return AfPowerSolution(tx_power_w=float(hi), amp_gains=amp_gains,
                           snrs=snrs, total_power_w=float(g.size * hi),
                           rate_bps=rate_at(hi))
