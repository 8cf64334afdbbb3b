"""Shared test oracles, independent of the code paths they check."""

import numpy as np

from nvscan.config import PulseSequence, SpectrumModelParams
from nvscan.sensor import expected_pl


def poisson_crlb_sigma_center(freqs, params: SpectrumModelParams,
                              sequence: PulseSequence, center_hz: float,
                              repetitions: int) -> float:
    """Cramer-Rao bound on the center-frequency estimate for Poisson counts.

    Fisher information by direct summation I_jk = sum_i dl_j dl_k / lambda_i
    with numerical (central-difference) derivatives of the expected counts,
    over the four free parameters (baseline scale, center, contrast, width).
    """
    def lam(p):
        scaled = params.model_copy(update={
            "count_rate_hz": params.count_rate_hz * p[0],
            "contrast": p[2],
            "linewidth_fwhm_hz": p[3]})
        return repetitions * expected_pl(freqs, scaled, p[1], sequence.t_int_s)

    p0 = np.array([1.0, center_hz, params.contrast, params.linewidth_fwhm_hz])
    steps = np.array([1e-7, 1.0, 1e-8, 1e-1])
    derivs = []
    for j in range(4):
        dp = np.zeros(4)
        dp[j] = steps[j]
        derivs.append((lam(p0 + dp) - lam(p0 - dp)) / (2 * steps[j]))
    lam0 = lam(p0)
    fisher = np.empty((4, 4))
    for j in range(4):
        for k in range(4):
            fisher[j, k] = np.sum(derivs[j] * derivs[k] / lam0)
    return float(np.sqrt(np.linalg.inv(fisher)[1, 1]))


def brute_force_pearl_bz(rho, z, pearl_length_m, n=400_000):
    """Trapezoid evaluation of the Pearl b_z Hankel integral on [0, 40/z]."""
    from scipy import special
    from nvscan.constants import FLUX_QUANTUM

    k = np.linspace(0.0, 40.0 / z, n)
    integrand = k * np.exp(-k * z) * special.j0(k * rho) / (1.0 + k * pearl_length_m)
    return FLUX_QUANTUM / (2 * np.pi) * np.trapezoid(integrand, k)


def flux_through_disc(z, lam, radius, bz=None):
    """Flux of b_z through a disc of `radius` at height z, by Gauss-Legendre
    panels: linear panels across the near-axis spike, geometric panels over
    the 1/rho^2 tail."""
    import math
    from nvscan.fieldmodel import pearl_vortex_field

    if bz is None:
        bz = lambda rho: pearl_vortex_field(rho, z, lam)[1]
    nodes, weights = np.polynomial.legendre.leggauss(20)

    def panel(a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        values = np.array([2 * np.pi * r * bz(r) for r in mid + half * nodes])
        return half * float(weights @ values)

    spike = sorted({min(e, radius) for e in (0.0, z, 5 * z, 20 * z, 10 * (z + lam))})
    total = sum(panel(a, b) for a, b in zip(spike[:-1], spike[1:]))
    start = spike[-1]
    if radius > start:
        n = 2 * max(1, int(math.ceil(math.log10(radius / start)))) + 1
        edges = np.geomspace(start, radius, n)
        total += sum(panel(a, b) for a, b in zip(edges[:-1], edges[1:]))
    return total
