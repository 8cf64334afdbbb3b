"""Field-model tests.

Frozen expected values were computed before the implementation with two
independent quadratures (mpmath adaptive and a 4e5-point trapezoid) that
agree to all quoted digits.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from helpers import brute_force_pearl_bz, flux_through_disc
from nvscan.config import MaterialParams, Vortex, VortexConfiguration
from nvscan.constants import FLUX_QUANTUM
from nvscan.errors import ModelDomainError
from nvscan.fieldmodel import (FieldSample, london_depth, meissner_edge_field,
                               monopole_vortex_field, pearl_length,
                               pearl_vortex_field, total_field)

Z_NV = 110e-9

# Exact kernel values at rho=0, z=110 nm (independent quadrature, 7 digits).
PEARL_BZ_ON_AXIS = {
    0.0: 2.719884e-2,
    0.5e-6: 4.104903e-3,
    1.5e-6: 1.662858e-3,
    5.0e-6: 5.544860e-4,
}


def test_pearl_monopole_limit_closed_form():
    # Lambda = 0 reduces to a surface monopole: Phi0/(2 pi z^2) on axis.
    _, bz = pearl_vortex_field(0.0, Z_NV, 0.0)
    assert bz == pytest.approx(FLUX_QUANTUM / (2 * math.pi * Z_NV**2), rel=1e-6)
    assert bz == pytest.approx(27.2e-3, rel=1e-3)


@pytest.mark.parametrize("lam", sorted(PEARL_BZ_ON_AXIS))
def test_pearl_on_axis_frozen_values(lam):
    _, bz = pearl_vortex_field(0.0, Z_NV, lam)
    assert bz == pytest.approx(PEARL_BZ_ON_AXIS[lam], rel=2e-6)


@pytest.mark.parametrize("rho,lam", [(0.0, 0.0), (0.3e-6, 1.5e-6),
                                     (2.0e-6, 1.5e-6), (1.0e-6, 0.2e-6)])
def test_pearl_agrees_with_brute_force_quadrature(rho, lam):
    _, bz = pearl_vortex_field(rho, Z_NV, lam)
    assert bz == pytest.approx(brute_force_pearl_bz(rho, Z_NV, lam), rel=1e-4)


def test_pearl_infinite_length_screens_completely():
    assert pearl_vortex_field(0.5e-6, Z_NV, math.inf) == (0.0, 0.0)


def test_pearl_rejects_bad_domain():
    with pytest.raises(ModelDomainError):
        pearl_vortex_field(0.0, 0.0, 1e-6)
    with pytest.raises(ModelDomainError):
        pearl_vortex_field(-1e-6, Z_NV, 1e-6)


@pytest.mark.parametrize("lam", [0.0, 1.5e-6])
def test_flux_quantization_full_plane(lam):
    # Exact property of the kernel at k -> 0: the half-space flux is Phi0.
    radius = 1000 * (Z_NV + lam)  # captures all but ~(z+lam)/R = 1e-3
    flux = flux_through_disc(Z_NV, lam, radius)
    assert flux == pytest.approx(FLUX_QUANTUM, rel=3e-3)


@pytest.mark.parametrize("z,lam,expected", [
    (110e-9, 0.0, 0.98000), (110e-9, 1.0e-6, 0.97783), (1.0e-6, 1.0e-6, 0.96006)])
def test_flux_capture_within_50x_radius(z, lam, expected):
    # A disc of radius 50*max(z, Lambda) captures 96-98% of the flux; the
    # missing tail is ~(z+Lambda)/R (fractions frozen from mpmath).
    flux = flux_through_disc(z, lam, 50 * max(z, lam))
    assert flux / FLUX_QUANTUM == pytest.approx(expected, abs=2e-3)
    assert 0.955 * FLUX_QUANTUM < flux < 1.0001 * FLUX_QUANTUM


def test_monopole_on_axis_and_at_depth():
    _, bz0 = monopole_vortex_field(0.0, Z_NV, 0.0)
    assert bz0 == pytest.approx(FLUX_QUANTUM / (2 * math.pi * Z_NV**2), rel=1e-12)
    _, bz = monopole_vortex_field(0.0, Z_NV, 1.5e-6)
    assert bz == pytest.approx(127.0e-6, rel=5e-3)


def test_monopole_flux_is_phi0():
    h = Z_NV + 0.8e-6

    def integrand(rho):
        return 2 * math.pi * rho * monopole_vortex_field(rho, Z_NV, 0.8e-6)[1]

    flux, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
    assert flux == pytest.approx(FLUX_QUANTUM, rel=1e-9)


def test_monopole_bz_decays_monotonically():
    rho = np.linspace(0.0, 20e-6, 400)
    _, bz = monopole_vortex_field(rho, Z_NV, 0.5e-6)
    assert np.all(np.diff(bz) < 0)
    assert bz[-1] < 1e-3 * bz[0]


def test_monopole_converges_to_pearl_far_above_film():
    # 5% agreement holds for z >= 45*Lambda (at z = 10*Lambda the gap is ~18%).
    lam = 0.2e-6
    z = 45 * lam
    for rho in [0.0, 0.3 * z, z, 3 * z, 10 * z]:
        pr, pz = pearl_vortex_field(rho, z, lam)
        mr, mz = monopole_vortex_field(rho, z, 0.0)
        diff = math.hypot(pr - mr, pz - mz) / math.hypot(pr, pz)
        assert diff < 0.05


def test_pearl_length_two_fluid_form():
    material = MaterialParams(t_c_k=1.25, lambda0_m=161e-9)
    lam0 = london_depth(material, 1e-9)
    assert lam0 == pytest.approx(161e-9, rel=1e-6)
    assert london_depth(material, 1.0) == pytest.approx(
        161e-9 / math.sqrt(1 - (1.0 / 1.25) ** 4), rel=1e-12)
    assert math.isinf(pearl_length(material, 50e-9, 1.25))
    assert math.isinf(pearl_length(material, 50e-9, 2.0))
    near = pearl_length(material, 50e-9, 1.2499999)
    assert near > 1.0  # diverges approaching Tc


def _scene(**kwargs):
    defaults = dict(temperature_k=0.35, bias_bz_t=0.4e-3)
    defaults.update(kwargs)
    return VortexConfiguration(**defaults)


def test_meissner_zero_at_and_above_tc():
    for temp in (1.25, 2.0):
        scene = _scene(temperature_k=temp)
        assert np.all(meissner_edge_field((2.5e-6, 0.0, Z_NV), scene) == 0.0)


def test_meissner_peak_is_linear_in_temperature():
    material = MaterialParams(edge_slope_t_per_k=200e-6)
    scene = _scene(temperature_k=0.75, material=material)
    xs = np.linspace(0.0, 5e-6, 2001)  # crosses the edge at x = 2.5 um
    peak = max(abs(meissner_edge_field((x, 0.0, Z_NV), scene)[2]) for x in xs)
    assert peak == pytest.approx(100e-6, rel=1e-9)

    scene1 = _scene(temperature_k=0.65, material=material)
    scene2 = _scene(temperature_k=1.05, material=material)
    b1 = meissner_edge_field((2.5e-6, 0.0, Z_NV), scene1)[2]
    b2 = meissner_edge_field((2.5e-6, 0.0, Z_NV), scene2)[2]
    assert b1 / b2 == pytest.approx((1.25 - 0.65) / (1.25 - 1.05), rel=1e-12)


def test_total_field_normal_state_is_bias_bit_exact():
    bias = 1e-3
    for scene in (_scene(temperature_k=3.0, bias_bz_t=bias,
                         vortices=[Vortex(x_m=0.0, y_m=0.0)]),
                  _scene(temperature_k=0.69, bias_bz_t=6e-3,
                         vortices=[Vortex(x_m=0.0, y_m=0.0)])):
        sample = total_field((0.3e-6, -0.2e-6, Z_NV), scene)
        assert sample.b[0] == 0.0 and sample.b[1] == 0.0
        assert sample.b[2] == scene.bias_bz_t


def test_total_field_far_from_disc_is_bias():
    scene = _scene(temperature_k=0.35, bias_bz_t=0.7e-3)
    sample = total_field((200e-6, 0.0, Z_NV), scene)
    np.testing.assert_allclose(sample.b, [0.0, 0.0, 0.7e-3], rtol=0, atol=1e-18)


def test_total_field_superposition_of_vortices():
    material = MaterialParams(edge_slope_t_per_k=0.0)
    v1, v2 = Vortex(x_m=-0.8e-6, y_m=0.2e-6), Vortex(x_m=1.1e-6, y_m=-0.5e-6)
    both = _scene(material=material, vortices=[v1, v2])
    only1 = _scene(material=material, vortices=[v1])
    only2 = _scene(material=material, vortices=[v2])
    pos = (0.4e-6, 0.3e-6, Z_NV)
    bias = np.array([0.0, 0.0, both.bias_bz_t])
    combined = total_field(pos, both).b
    summed = total_field(pos, only1).b + total_field(pos, only2).b - bias
    np.testing.assert_allclose(combined, summed, rtol=1e-14)


def test_total_field_axisymmetry_of_single_vortex():
    scene = _scene(bias_bz_t=0.0, vortices=[Vortex(x_m=0.0, y_m=0.0)],
                   material=MaterialParams(edge_slope_t_per_k=0.0))
    rho = 0.9e-6
    reference = None
    for phi in np.linspace(0.0, 2 * math.pi, 7):
        b = total_field((rho * math.cos(phi), rho * math.sin(phi), Z_NV), scene).b
        b_rho, b_z = math.hypot(b[0], b[1]), b[2]
        if reference is None:
            reference = (b_rho, b_z)
        else:
            assert b_rho == pytest.approx(reference[0], rel=1e-12)
            assert b_z == pytest.approx(reference[1], rel=1e-12)


def test_total_field_pearl_model_path():
    scene = _scene(vortices=[Vortex(x_m=0.0, y_m=0.0)], vortex_model="pearl",
                   bias_bz_t=0.0, material=MaterialParams(edge_slope_t_per_k=0.0))
    lam = pearl_length(scene.material, scene.geometry.thickness_m, scene.temperature_k)
    sample = total_field((0.0, 0.0, Z_NV), scene)
    _, expected = pearl_vortex_field(0.0, Z_NV, lam)
    assert sample.b[2] == pytest.approx(expected, rel=1e-9)


def test_total_field_rejects_points_below_film():
    with pytest.raises(ModelDomainError):
        total_field((0.0, 0.0, 0.0), _scene())


def test_vortex_outside_disc_rejected():
    with pytest.raises(ValueError):
        VortexConfiguration(temperature_k=0.35,
                            vortices=[Vortex(x_m=3.0e-6, y_m=0.0)])


def test_field_sample_carries_position():
    sample = total_field((1e-6, 2e-6, Z_NV), _scene())
    assert isinstance(sample, FieldSample)
    assert sample.position == (1e-6, 2e-6, Z_NV)
