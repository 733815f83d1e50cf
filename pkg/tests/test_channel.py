import math

import numpy as np
import pytest

from uownsim.channel import (
    WATER_EXTINCTION,
    OpticsConfig,
    WaterProfile,
    composite_gain,
    concentrator_gain,
    geometric_gain,
    propagation_loss,
    water_preset,
)
from uownsim.errors import DomainError

# Frozen oracles, computed independently with mpmath at 40 digits.
LOSS_OCEAN_10M = 0.22002810297334574839
LOSS_COASTAL_25M_PHI03 = 2.9974053456803833426e-5
LOSS_PURE_60M = 0.034735258944738560307
APERTURE_5CM = 1.963495408493620774e-3
GAIN_10M_BORESIGHT_THETA025 = 2.2617554621189614722e-4
GAIN_10M_TILTED_THETA01 = 1.2963219310673158201e-3
COMPOSITE_OCEAN_10M_TILTED = 2.5051774218290216248e-4

OPTICS = OpticsConfig()
OCEAN = water_preset("ocean")


def test_water_presets_match_published_extinctions():
    assert WATER_EXTINCTION == {"pure": 0.056, "ocean": 0.1514, "coastal": 0.398}
    for kind, e in WATER_EXTINCTION.items():
        w = water_preset(kind)
        assert w.extinction == e
        assert w.absorption == pytest.approx(0.7 * e, rel=1e-15)
        assert w.absorption + w.scattering == pytest.approx(e, abs=1e-15)
        assert w.wavelength_m == 532e-9


def test_water_preset_rejects_unknown_kind():
    with pytest.raises(DomainError):
        water_preset("brackish")


def test_water_profile_rejects_inconsistent_extinction():
    with pytest.raises(DomainError):
        WaterProfile(wavelength_m=532e-9, absorption=0.1, scattering=0.1, extinction=0.3)


def test_default_optics_aperture_is_five_cm_disk():
    assert OPTICS.aperture_m2 == pytest.approx(APERTURE_5CM, rel=1e-15)


def test_propagation_loss_against_frozen_values():
    assert propagation_loss(10.0, 0.0, OCEAN.extinction) == pytest.approx(
        LOSS_OCEAN_10M, rel=1e-14
    )
    assert propagation_loss(25.0, 0.3, WATER_EXTINCTION["coastal"]) == pytest.approx(
        LOSS_COASTAL_25M_PHI03, rel=1e-14
    )
    assert propagation_loss(60.0, 0.0, WATER_EXTINCTION["pure"]) == pytest.approx(
        LOSS_PURE_60M, rel=1e-14
    )


def test_propagation_loss_multiplies_over_concatenated_spans():
    rng = np.random.default_rng(7)
    d1 = rng.uniform(0.1, 40.0, size=200)
    d2 = rng.uniform(0.1, 40.0, size=200)
    e = OCEAN.extinction
    whole = propagation_loss(d1 + d2, 0.0, e)
    split = propagation_loss(d1, 0.0, e) * propagation_loss(d2, 0.0, e)
    np.testing.assert_allclose(whole, split, rtol=1e-12)


def test_propagation_loss_monotone_in_distance_extinction_and_tilt():
    d = np.linspace(0.5, 80.0, 64)
    losses = propagation_loss(d, 0.0, OCEAN.extinction)
    assert np.all(np.diff(losses) < 0)
    assert propagation_loss(20.0, 0.0, 0.056) > propagation_loss(20.0, 0.0, 0.398)
    # a tilted path is longer, hence lossier
    assert propagation_loss(20.0, 0.6, 0.1514) < propagation_loss(20.0, 0.0, 0.1514)


def test_propagation_loss_domain_errors():
    with pytest.raises(DomainError):
        propagation_loss(-1.0, 0.0, 0.1514)
    with pytest.raises(DomainError):
        propagation_loss(5.0, 1.6, 0.1514)
    with pytest.raises(DomainError):
        propagation_loss(np.array([1.0, 2.0]), np.array([0.1, 1.8]), 0.1514)


def test_concentrator_gain_inside_and_outside_fov():
    n, fov = OPTICS.refractive_index, OPTICS.fov_rad
    inside = n**2 / math.sin(fov) ** 2
    assert concentrator_gain(0.0, fov, n) == pytest.approx(inside, rel=1e-15)
    assert concentrator_gain(fov, fov, n) == pytest.approx(inside, rel=1e-15)
    assert concentrator_gain(-0.3, fov, n) == concentrator_gain(0.3, fov, n)
    # narrow-FOV receiver rejects off-axis arrivals entirely
    assert concentrator_gain(0.5, 0.4, n) == 0.0


def test_geometric_gain_against_frozen_values():
    assert geometric_gain(10.0, 0.0, 0.0, 0.25, OPTICS) == pytest.approx(
        GAIN_10M_BORESIGHT_THETA025, rel=1e-14
    )
    assert geometric_gain(10.0, 0.4, 0.7, 0.1, OPTICS) == pytest.approx(
        GAIN_10M_TILTED_THETA01, rel=1e-14
    )


def test_geometric_gain_inverse_square_and_divergence_behaviour():
    g_near = geometric_gain(5.0, 0.0, 0.0, 0.1, OPTICS)
    g_far = geometric_gain(10.0, 0.0, 0.0, 0.1, OPTICS)
    assert g_near / g_far == pytest.approx(4.0, rel=1e-12)
    # widening the beam spreads power over a larger cap
    thetas = np.linspace(0.02, 1.5, 50)
    g = geometric_gain(10.0, 0.0, 0.0, thetas, OPTICS)
    assert np.all(np.diff(g) < 0)


def test_geometric_gain_zero_when_receiver_faces_away():
    assert geometric_gain(10.0, 2.0, 0.0, 0.25, OPTICS) == 0.0


def test_geometric_gain_domain_errors():
    with pytest.raises(DomainError):
        geometric_gain(0.0, 0.0, 0.0, 0.25, OPTICS)
    with pytest.raises(DomainError):
        geometric_gain(10.0, 0.0, 0.0, 0.0, OPTICS)
    with pytest.raises(DomainError):
        geometric_gain(10.0, 0.0, 0.0, 3.5, OPTICS)


def test_composite_gain_against_frozen_value():
    got = composite_gain(10.0, 0.4, 0.7, 0.1, OCEAN, OPTICS)
    assert got == pytest.approx(COMPOSITE_OCEAN_10M_TILTED, rel=1e-14)


def test_composite_gain_is_product_of_parts():
    rng = np.random.default_rng(21)
    d = rng.uniform(1.0, 60.0, size=300)
    phi = rng.uniform(-1.4, 1.4, size=300)
    psi = rng.uniform(-math.pi, math.pi, size=300)
    theta = rng.uniform(0.01, 0.25, size=300)
    combined = composite_gain(d, phi, psi, theta, OCEAN, OPTICS)
    expected = propagation_loss(d, phi, OCEAN.extinction) * geometric_gain(
        d, phi, psi, theta, OPTICS
    )
    np.testing.assert_allclose(combined, expected, rtol=1e-13)
    assert np.all(combined >= 0)
    assert np.all(combined < 1)


def test_composite_gain_zero_branch_skips_slant_path():
    # cos(phi) <= 0 would blow up the exponential; the composite must
    # short-circuit to zero instead of raising.
    out = composite_gain(
        np.array([10.0, 10.0]),
        np.array([0.0, 2.2]),
        0.0,
        0.25,
        OCEAN,
        OPTICS,
    )
    assert out[1] == 0.0
    assert out[0] > 0
    assert composite_gain(10.0, 0.0, 1.7, 0.25, OCEAN, OPTICS) == 0.0


def test_scalar_inputs_yield_python_floats():
    assert isinstance(propagation_loss(10.0, 0.0, 0.1514), float)
    assert isinstance(geometric_gain(10.0, 0.0, 0.0, 0.25, OPTICS), float)
    assert isinstance(composite_gain(10.0, 0.0, 0.0, 0.25, OCEAN, OPTICS), float)
