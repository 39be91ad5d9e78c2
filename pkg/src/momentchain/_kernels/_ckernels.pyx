# cython: language_level=3
"""Compiled inner loops for register-wise dense linear algebra.

Same call signatures as ``_pykernels``; the ``idx2d`` argument is accepted for
interface parity but unused here (``base``/``offsets`` carry the same data
without materializing the full index matrix).
"""

from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

NAME = "cython"


def apply_matrix_kernel(const double complex[::1] amps,
                        const double complex[:, ::1] matrix,
                        const long long[::1] base,
                        const long long[::1] offsets,
                        object idx2d,
                        double complex[::1] out):
    cdef Py_ssize_t nb = base.shape[0]
    cdef Py_ssize_t d = offsets.shape[0]
    cdef Py_ssize_t b, j, k
    cdef long long s
    cdef double complex acc
    cdef double complex* buf = <double complex*> malloc(d * sizeof(double complex))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for b in range(nb):
                s = base[b]
                for k in range(d):
                    buf[k] = amps[s + offsets[k]]
                for j in range(d):
                    acc = 0
                    for k in range(d):
                        acc = acc + matrix[j, k] * buf[k]
                    out[s + offsets[j]] = acc
    finally:
        free(buf)


def marginal_kernel(const double complex[::1] amps,
                    const long long[::1] base,
                    const long long[::1] offsets,
                    object idx2d,
                    double[::1] out):
    cdef Py_ssize_t nb = base.shape[0]
    cdef Py_ssize_t d = offsets.shape[0]
    cdef Py_ssize_t b, j
    cdef long long s
    cdef double complex a
    with nogil:
        for j in range(d):
            out[j] = 0.0
        for b in range(nb):
            s = base[b]
            for j in range(d):
                a = amps[s + offsets[j]]
                out[j] = out[j] + a.real * a.real + a.imag * a.imag
