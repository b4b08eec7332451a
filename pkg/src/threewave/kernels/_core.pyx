# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: fused pointwise RK4 for the three-wave coupling ODE.

Loop structure and arithmetic mirror kernels._ref.nonlinear_rk4; the fused
per-point evaluation avoids the dozen array temporaries the numpy path
allocates per stage.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport pow

COMPILED = True

ctypedef double complex cplx


cdef inline cplx _f1(cplx z1, cplx z2, cplx z3, double alpha, double e, double pc) noexcept nogil:
    cdef double r2 = z1.real * z1.real + z1.imag * z1.imag
    cdef cplx v = alpha * z3 * z2.conjugate()
    if pc != 0.0:
        v = v + pc * pow(r2, e) * z1
    return 1j * v


cdef inline cplx _f2(cplx z1, cplx z2, cplx z3, double alpha, double e, double pc) noexcept nogil:
    cdef double r2 = z2.real * z2.real + z2.imag * z2.imag
    cdef cplx v = alpha * z3 * z1.conjugate()
    if pc != 0.0:
        v = v + pc * pow(r2, e) * z2
    return 1j * v


cdef inline cplx _f3(cplx z1, cplx z2, cplx z3, double alpha, double e, double pc) noexcept nogil:
    cdef double r2 = z3.real * z3.real + z3.imag * z3.imag
    cdef cplx v = alpha * z1 * z2
    if pc != 0.0:
        v = v + pc * pow(r2, e) * z3
    return 1j * v


def nonlinear_rk4(cplx[:, ::1] psi, double dt, double alpha, double p, double power_coeff=1.0):
    """One classical RK4 step of the pointwise coupling ODE, in place."""
    cdef double e = 0.5 * (p - 2.0)
    cdef double pc = power_coeff
    cdef Py_ssize_t n = psi.shape[1]
    cdef Py_ssize_t m
    cdef cplx z1, z2, z3, a1, a2, a3, b1, b2, b3
    cdef cplx k11, k12, k13, k21, k22, k23, k31, k32, k33, k41, k42, k43
    cdef double h = 0.5 * dt, c = dt / 6.0
    with nogil:
        for m in range(n):
            z1 = psi[0, m]; z2 = psi[1, m]; z3 = psi[2, m]
            k11 = _f1(z1, z2, z3, alpha, e, pc)
            k12 = _f2(z1, z2, z3, alpha, e, pc)
            k13 = _f3(z1, z2, z3, alpha, e, pc)
            a1 = z1 + h * k11; a2 = z2 + h * k12; a3 = z3 + h * k13
            k21 = _f1(a1, a2, a3, alpha, e, pc)
            k22 = _f2(a1, a2, a3, alpha, e, pc)
            k23 = _f3(a1, a2, a3, alpha, e, pc)
            a1 = z1 + h * k21; a2 = z2 + h * k22; a3 = z3 + h * k23
            k31 = _f1(a1, a2, a3, alpha, e, pc)
            k32 = _f2(a1, a2, a3, alpha, e, pc)
            k33 = _f3(a1, a2, a3, alpha, e, pc)
            b1 = z1 + dt * k31; b2 = z2 + dt * k32; b3 = z3 + dt * k33
            k41 = _f1(b1, b2, b3, alpha, e, pc)
            k42 = _f2(b1, b2, b3, alpha, e, pc)
            k43 = _f3(b1, b2, b3, alpha, e, pc)
            psi[0, m] = z1 + c * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
            psi[1, m] = z2 + c * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
            psi[2, m] = z3 + c * (k13 + 2.0 * k23 + 2.0 * k33 + k43)
    return np.asarray(psi)
