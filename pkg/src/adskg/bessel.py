"""Closed-form reference data for the exact toy models.

On the toys the spatial operator has eigenfunctions sqrt(x) J_nu(omega x)
with J_nu(omega L) = 0, so eigenvalues and boundary amplitudes reduce to
Bessel-zero arithmetic.  scipy only tabulates zeros for integer order, so
the finder below brackets sign changes of J_nu by a fixed-step scan
(consecutive zeros of J_nu are separated by at least ~3 for nu >= 0) and
polishes them with brentq.  These values feed the eigensolver comparisons
and the boundary-coefficient checks; they never come from the solver under
test.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as _gamma
from scipy.special import jv

from .geometry import MetricModel

__all__ = ["bessel_zeros", "toy_frequencies", "toy_boundary_amplitudes", "toy_line_weights"]

_SCAN_STEP = 0.5


def bessel_zeros(nu: float, count: int) -> np.ndarray:
    """First `count` positive zeros of J_nu, nu >= 0, by scan + brentq."""
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if count < 1:
        raise ValueError("count must be >= 1")
    zeros = []
    # all positive zeros of J_nu lie above nu; start just below the first
    x = max(nu, 0.1) + 1e-9 if nu > 0 else 1e-9
    f_prev = jv(nu, x)
    while len(zeros) < count:
        x_next = x + _SCAN_STEP
        f_next = jv(nu, x_next)
        if f_prev == 0.0:
            zeros.append(x)
        elif f_prev * f_next < 0.0:
            zeros.append(brentq(lambda z: jv(nu, z), x, x_next, xtol=1e-14, rtol=8.9e-16))
        x, f_prev = x_next, f_next
    return np.array(zeros[:count])


def toy_frequencies(model: MetricModel, count: int, m: int = 0) -> np.ndarray:
    """omega_k for a toy model: zeros of J_nu scaled by 1/L, transverse shift
    added in quadrature."""
    if not model.is_toy:
        raise ValueError("closed-form frequencies exist only for the toy models")
    j = bessel_zeros(model.nu, count)
    return np.sqrt((j / model.L) ** 2 + model.transverse_mu(m))


def toy_boundary_amplitudes(model: MetricModel, count: int) -> np.ndarray:
    """Leading coefficients c_k of the normalized toy modes at the boundary.

    The L^2(0, L)-normalized mode is sqrt(2)/(L |J_{nu+1}(j_k)|) sqrt(x)
    J_nu(j_k x / L), and J_nu(z) ~ (z/2)^nu / Gamma(nu+1) for small z, so
    x^{-(nu+1/2)} phi_k -> c_k = sqrt(2)/(L |J_{nu+1}(j_k)|) (omega_k/2)^nu
    / Gamma(nu+1), with omega_k = j_k / L.
    """
    if not model.is_toy:
        raise ValueError("closed-form amplitudes exist only for the toy models")
    nu, L = model.nu, model.L
    j = bessel_zeros(nu, count)
    omega = j / L
    norm = math.sqrt(2.0) / (L * np.abs(jv(nu + 1.0, j)))
    return norm * (omega / 2.0) ** nu / _gamma(nu + 1.0)


def toy_line_weights(model: MetricModel, count: int) -> np.ndarray:
    """Spectral-line weights c_k^2 / (2 omega_k) of the toy boundary kernel."""
    c = toy_boundary_amplitudes(model, count)
    omega = bessel_zeros(model.nu, count) / model.L
    return c**2 / (2.0 * omega)
