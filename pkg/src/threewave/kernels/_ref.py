"""Pure-numpy reference implementation of the hot kernels.

Used as the import-time fallback when the compiled extension is missing and
as the ground truth the compiled path is tested against.
"""

import numpy as np

COMPILED = False


def _rhs(p1, p2, p3, alpha, e, power_coeff):
    # i dpsi/dt = -|psi|^{p-2} psi - alpha * (three-wave partner)
    if power_coeff != 0.0:
        a1 = power_coeff * (p1.real**2 + p1.imag**2) ** e
        a2 = power_coeff * (p2.real**2 + p2.imag**2) ** e
        a3 = power_coeff * (p3.real**2 + p3.imag**2) ** e
        f1 = 1j * (a1 * p1 + alpha * p3 * p2.conj())
        f2 = 1j * (a2 * p2 + alpha * p3 * p1.conj())
        f3 = 1j * (a3 * p3 + alpha * p1 * p2)
    else:
        f1 = 1j * alpha * p3 * p2.conj()
        f2 = 1j * alpha * p3 * p1.conj()
        f3 = 1j * alpha * p1 * p2
    return f1, f2, f3


def nonlinear_rk4(psi, dt, alpha, p, power_coeff=1.0):
    """One classical RK4 step of the pointwise coupling ODE, in place.

    psi is the (3, n) complex128 component stack; the ODE has no spatial
    coupling, so the step is a pointwise map.
    """
    e = 0.5 * (p - 2.0)
    p1, p2, p3 = psi[0], psi[1], psi[2]
    k1 = _rhs(p1, p2, p3, alpha, e, power_coeff)
    k2 = _rhs(
        p1 + 0.5 * dt * k1[0], p2 + 0.5 * dt * k1[1], p3 + 0.5 * dt * k1[2], alpha, e, power_coeff
    )
    k3 = _rhs(
        p1 + 0.5 * dt * k2[0], p2 + 0.5 * dt * k2[1], p3 + 0.5 * dt * k2[2], alpha, e, power_coeff
    )
    k4 = _rhs(p1 + dt * k3[0], p2 + dt * k3[1], p3 + dt * k3[2], alpha, e, power_coeff)
    c = dt / 6.0
    for i in range(3):
        psi[i] += c * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return psi
