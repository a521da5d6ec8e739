# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled cube-sweep kernels.

For one cube side these sweep every anchor of a component-flattened
cell array and return the q-mean oscillation per anchor (-1 marks
anchors whose cube is invalid).  Semantics match
``oscilab.kernels._ref`` exactly; only speed differs.
"""

import numpy as np

from libc.math cimport fabs, pow, sqrt


def osc_sweep_2d(const double[:, :, ::1] vals,
                 const unsigned char[:, ::1] valid,
                 Py_ssize_t side, double q):
    cdef Py_ssize_t ax = vals.shape[0] - side + 1
    cdef Py_ssize_t ay = vals.shape[1] - side + 1
    cdef Py_ssize_t ncomp = vals.shape[2]
    if valid.shape[0] != ax or valid.shape[1] != ay:
        raise ValueError("validity mask does not match anchor counts")
    out = np.full((ax, ay), -1.0)
    mean = np.empty(ncomp)
    cdef double[:, ::1] out_v = out
    cdef double[::1] mean_v = mean
    cdef Py_ssize_t a, b, i, j, c
    cdef double count = <double> (side * side)
    cdef double acc, dev, dev2, v
    with nogil:
        for a in range(ax):
            for b in range(ay):
                if not valid[a, b]:
                    continue
                for c in range(ncomp):
                    mean_v[c] = 0.0
                for i in range(a, a + side):
                    for j in range(b, b + side):
                        for c in range(ncomp):
                            mean_v[c] += vals[i, j, c]
                for c in range(ncomp):
                    mean_v[c] /= count
                acc = 0.0
                for i in range(a, a + side):
                    for j in range(b, b + side):
                        dev2 = 0.0
                        for c in range(ncomp):
                            dev = vals[i, j, c] - mean_v[c]
                            dev2 += dev * dev
                        if q == 2.0:
                            acc += dev2
                        elif q == 1.0:
                            acc += sqrt(dev2)
                        else:
                            acc += pow(sqrt(dev2), q)
                acc /= count
                if q == 2.0:
                    out_v[a, b] = sqrt(acc)
                elif q == 1.0:
                    out_v[a, b] = acc
                else:
                    out_v[a, b] = pow(acc, 1.0 / q)
    return out


def osc_sweep_3d(const double[:, :, :, ::1] vals,
                 const unsigned char[:, :, ::1] valid,
                 Py_ssize_t side, double q):
    cdef Py_ssize_t ax = vals.shape[0] - side + 1
    cdef Py_ssize_t ay = vals.shape[1] - side + 1
    cdef Py_ssize_t az = vals.shape[2] - side + 1
    cdef Py_ssize_t ncomp = vals.shape[3]
    if valid.shape[0] != ax or valid.shape[1] != ay or valid.shape[2] != az:
        raise ValueError("validity mask does not match anchor counts")
    out = np.full((ax, ay, az), -1.0)
    mean = np.empty(ncomp)
    cdef double[:, :, ::1] out_v = out
    cdef double[::1] mean_v = mean
    cdef Py_ssize_t a, b, d, i, j, k, c
    cdef double count = <double> (side * side * side)
    cdef double acc, dev, dev2
    with nogil:
        for a in range(ax):
            for b in range(ay):
                for d in range(az):
                    if not valid[a, b, d]:
                        continue
                    for c in range(ncomp):
                        mean_v[c] = 0.0
                    for i in range(a, a + side):
                        for j in range(b, b + side):
                            for k in range(d, d + side):
                                for c in range(ncomp):
                                    mean_v[c] += vals[i, j, k, c]
                    for c in range(ncomp):
                        mean_v[c] /= count
                    acc = 0.0
                    for i in range(a, a + side):
                        for j in range(b, b + side):
                            for k in range(d, d + side):
                                dev2 = 0.0
                                for c in range(ncomp):
                                    dev = vals[i, j, k, c] - mean_v[c]
                                    dev2 += dev * dev
                                if q == 2.0:
                                    acc += dev2
                                elif q == 1.0:
                                    acc += sqrt(dev2)
                                else:
                                    acc += pow(sqrt(dev2), q)
                    acc /= count
                    if q == 2.0:
                        out_v[a, b, d] = sqrt(acc)
                    elif q == 1.0:
                        out_v[a, b, d] = acc
                    else:
                        out_v[a, b, d] = pow(acc, 1.0 / q)
    return out
