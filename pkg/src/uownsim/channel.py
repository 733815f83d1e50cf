"""Water attenuation and line-of-sight channel gain for optical links.

The channel model has two multiplicative pieces: an exponential
Beer-Lambert propagation loss set by the water's extinction coefficient,
and a geometric collection gain set by the receiver aperture, the angular
offset between the beam axis and the aperture normal, and the transmitter
divergence.  Both pieces accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Extinction coefficients [1/m] at 532 nm for the three canonical water
# types used throughout: absorption is 70% and scattering 30% of the total.
WATER_EXTINCTION = {
    "pure": 0.056,
    "ocean": 0.1514,
    "coastal": 0.398,
}

_ABSORPTION_FRACTION = 0.7


@dataclass(frozen=True)
class WaterProfile:
    """Optical properties of the medium at a single wavelength."""

    wavelength_m: float
    absorption: float
    scattering: float
    extinction: float

    def __post_init__(self):
        if self.wavelength_m <= 0:
            raise DomainError("wavelength must be positive")
        if self.absorption < 0 or self.scattering < 0:
            raise DomainError("absorption and scattering must be nonnegative")
        if not math.isclose(
            self.extinction, self.absorption + self.scattering, rel_tol=0, abs_tol=1e-12
        ):
            raise DomainError("extinction must equal absorption + scattering")


def water_preset(kind: str, wavelength_m: float = 532e-9) -> WaterProfile:
    """Return the canonical profile for ``kind`` in {pure, ocean, coastal}."""
    try:
        e = WATER_EXTINCTION[kind]
    except KeyError:
        raise DomainError(
            f"unknown water type {kind!r}; expected one of {sorted(WATER_EXTINCTION)}"
        ) from None
    a = _ABSORPTION_FRACTION * e
    return WaterProfile(
        wavelength_m=wavelength_m, absorption=a, scattering=e - a, extinction=e
    )


@dataclass(frozen=True)
class OpticsConfig:
    """Transceiver front-end parameters shared by every node."""

    aperture_m2: float = math.pi * 0.025**2
    fov_rad: float = math.pi / 2
    refractive_index: float = 1.5
    theta_min_rad: float = 0.01
    theta_max_rad: float = 0.25
    eta_t: float = 0.9
    eta_r: float = 0.9
    eta_d: float = 0.16

    def __post_init__(self):
        if self.aperture_m2 <= 0:
            raise DomainError("aperture area must be positive")
        if not 0 < self.fov_rad <= math.pi / 2:
            raise DomainError("field of view must lie in (0, pi/2]")
        if self.refractive_index < 1:
            raise DomainError("refractive index must be >= 1")
        if not 0 < self.theta_min_rad <= self.theta_max_rad:
            raise DomainError("need 0 < theta_min <= theta_max")
        if self.theta_max_rad > math.pi:
            raise DomainError("theta_max beyond pi is meaningless")
        for name in ("eta_t", "eta_r", "eta_d"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise DomainError(f"{name} must lie in (0, 1]")


def _as_float_or_array(x):
    # collapse 0-d results back to plain floats for scalar callers
    if np.ndim(x) == 0:
        return float(x)
    return x


def propagation_loss(distance_m, phi_rad, extinction):
    """Beer-Lambert loss exp(-e * d / cos(phi)) along the slant path.

    ``distance_m`` is the perpendicular separation between the transmitter
    plane and the receiver plane; dividing by cos(phi) yields the actual
    traversed length.  Negative distances and |phi| >= pi/2 have no
    physical meaning here and raise.
    """
    d = np.asarray(distance_m, dtype=float)
    phi = np.asarray(phi_rad, dtype=float)
    if np.any(d < 0):
        raise DomainError("distance must be nonnegative")
    cos_phi = np.cos(phi)
    if np.any(cos_phi <= 0):
        raise DomainError("incidence angle must satisfy cos(phi) > 0")
    return _as_float_or_array(np.exp(-extinction * d / cos_phi))


def concentrator_gain(psi_rad, fov_rad, refractive_index):
    """Idealized non-imaging concentrator gain, zero outside the field of view."""
    psi = np.abs(np.asarray(psi_rad, dtype=float))
    if np.any(psi > math.pi):
        raise DomainError("psi must lie in [-pi, pi]")
    sin_fov = math.sin(fov_rad)
    inside = refractive_index**2 / sin_fov**2
    return _as_float_or_array(np.where(psi <= fov_rad, inside, 0.0))


def geometric_gain(
    distance_m,
    phi_rad,
    psi_rad,
    theta_half_rad,
    optics: OpticsConfig,
):
    """Aperture collection gain for a diverging beam.

    The transmitted power spreads over a spherical cap of half-angle
    ``theta_half_rad``; the receiver intercepts an effective area
    A * cos(phi) at range ``distance_m`` and concentrates by its FOV gain.
    Returns 0 where the receiver looks away (|phi| >= pi/2) or sits
    outside the concentrator's field of view.
    """
    d = np.asarray(distance_m, dtype=float)
    phi = np.asarray(phi_rad, dtype=float)
    theta = np.asarray(theta_half_rad, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    if np.any((theta <= 0) | (theta > math.pi)):
        raise DomainError("divergence half-angle must lie in (0, pi]")
    cos_phi = np.cos(phi)
    cap = 2 * math.pi * (1 - np.cos(theta))
    xi = concentrator_gain(psi_rad, optics.fov_rad, optics.refractive_index)
    raw = optics.aperture_m2 / d**2 * cos_phi * xi / cap
    return _as_float_or_array(np.where(cos_phi > 0, raw, 0.0))


def composite_gain(
    distance_m,
    phi_rad,
    psi_rad,
    theta_half_rad,
    water: WaterProfile,
    optics: OpticsConfig,
):
    """Channel gain L * g combining water loss and the geometric pickup.

    Where the geometric factor is exactly zero (receiver facing away or
    out of FOV) the composite gain is zero without evaluating the
    exponential, whose slant path would be undefined at cos(phi) <= 0.
    """
    d = np.asarray(distance_m, dtype=float)
    phi = np.asarray(phi_rad, dtype=float)
    g = np.asarray(
        geometric_gain(distance_m, phi_rad, psi_rad, theta_half_rad, optics),
        dtype=float,
    )
    live = g > 0
    out = np.zeros(np.broadcast(d, phi, g).shape)
    if np.any(live):
        d_b, phi_b, g_b = np.broadcast_arrays(d, phi, g)
        loss = propagation_loss(d_b[live], phi_b[live], water.extinction)
        out[live] = loss * g_b[live]
    return _as_float_or_array(out)
