# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the two-hidden-layer policy/value MLP.

Same math as the NumPy reference in _purepy.py, fused into single C loops to
cut per-call overhead on the small matrices the rollout hot path uses.
"""

import numpy as np

from libc.math cimport tanh


def act2(double[:, ::1] w1, double[::1] b1,
         double[:, ::1] w2, double[::1] b2,
         double[:, ::1] wp, double[::1] bp,
         double[:, ::1] wv, double[::1] bv,
         double[::1] x):
    """Single-observation fused forward; returns (logits, value)."""
    cdef Py_ssize_t n_in = x.shape[0]
    cdef Py_ssize_t n1 = w1.shape[0]
    cdef Py_ssize_t n2 = w2.shape[0]
    cdef Py_ssize_t na = wp.shape[0]
    h1 = np.empty(n1)
    h2 = np.empty(n2)
    logits = np.empty(na)
    cdef double[::1] h1v = h1
    cdef double[::1] h2v = h2
    cdef double[::1] lg = logits
    cdef Py_ssize_t i, k
    cdef double acc, value

    for i in range(n1):
        acc = b1[i]
        for k in range(n_in):
            acc += w1[i, k] * x[k]
        h1v[i] = tanh(acc)
    for i in range(n2):
        acc = b2[i]
        for k in range(n1):
            acc += w2[i, k] * h1v[k]
        h2v[i] = tanh(acc)
    for i in range(na):
        acc = bp[i]
        for k in range(n2):
            acc += wp[i, k] * h2v[k]
        lg[i] = acc
    value = bv[0]
    for k in range(n2):
        value += wv[0, k] * h2v[k]
    return logits, value


def forward2(double[:, ::1] w1, double[::1] b1,
             double[:, ::1] w2, double[::1] b2,
             double[:, ::1] wp, double[::1] bp,
             double[:, ::1] wv, double[::1] bv,
             double[:, ::1] X):
    """Batched fused forward; returns (logits, values, H1, H2)."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_in = X.shape[1]
    cdef Py_ssize_t n1 = w1.shape[0]
    cdef Py_ssize_t n2 = w2.shape[0]
    cdef Py_ssize_t na = wp.shape[0]
    H1 = np.empty((n, n1))
    H2 = np.empty((n, n2))
    logits = np.empty((n, na))
    values = np.empty(n)
    cdef double[:, ::1] h1 = H1
    cdef double[:, ::1] h2 = H2
    cdef double[:, ::1] lg = logits
    cdef double[::1] vals = values
    cdef Py_ssize_t s, i, k
    cdef double acc

    for s in range(n):
        for i in range(n1):
            acc = b1[i]
            for k in range(n_in):
                acc += w1[i, k] * X[s, k]
            h1[s, i] = tanh(acc)
        for i in range(n2):
            acc = b2[i]
            for k in range(n1):
                acc += w2[i, k] * h1[s, k]
            h2[s, i] = tanh(acc)
        for i in range(na):
            acc = bp[i]
            for k in range(n2):
                acc += wp[i, k] * h2[s, k]
            lg[s, i] = acc
        acc = bv[0]
        for k in range(n2):
            acc += wv[0, k] * h2[s, k]
        vals[s] = acc
    return logits, values, H1, H2


def backward2(double[:, ::1] w1, double[:, ::1] w2,
              double[:, ::1] wp, double[:, ::1] wv,
              double[:, ::1] X, double[:, ::1] H1, double[:, ::1] H2,
              double[:, ::1] dlogits, double[::1] dvalues):
    """Batched fused backward pass for the forward2 graph.

    Returns grads [gw1, gb1, gw2, gb2, gwp, gbp, gwv, gbv].
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_in = X.shape[1]
    cdef Py_ssize_t n1 = w1.shape[0]
    cdef Py_ssize_t n2 = w2.shape[0]
    cdef Py_ssize_t na = wp.shape[0]

    gw1 = np.zeros((n1, n_in))
    gb1 = np.zeros(n1)
    gw2 = np.zeros((n2, n1))
    gb2 = np.zeros(n2)
    gwp = np.zeros((na, n2))
    gbp = np.zeros(na)
    gwv = np.zeros((1, n2))
    gbv = np.zeros(1)
    cdef double[:, ::1] gw1v = gw1
    cdef double[::1] gb1v = gb1
    cdef double[:, ::1] gw2v = gw2
    cdef double[::1] gb2v = gb2
    cdef double[:, ::1] gwpv = gwp
    cdef double[::1] gbpv = gbp
    cdef double[:, ::1] gwvv = gwv
    cdef double[::1] gbvv = gbv

    dh2 = np.empty(n2)
    dz2 = np.empty(n2)
    dh1 = np.empty(n1)
    dz1 = np.empty(n1)
    cdef double[::1] dh2v = dh2
    cdef double[::1] dz2v = dz2
    cdef double[::1] dh1v = dh1
    cdef double[::1] dz1v = dz1
    cdef Py_ssize_t s, i, k
    cdef double d, dv

    for s in range(n):
        for k in range(n2):
            dh2v[k] = 0.0
        for i in range(na):
            d = dlogits[s, i]
            gbpv[i] += d
            for k in range(n2):
                gwpv[i, k] += d * H2[s, k]
                dh2v[k] += d * wp[i, k]
        dv = dvalues[s]
        gbvv[0] += dv
        for k in range(n2):
            gwvv[0, k] += dv * H2[s, k]
            dh2v[k] += dv * wv[0, k]

        for i in range(n2):
            dz2v[i] = dh2v[i] * (1.0 - H2[s, i] * H2[s, i])
        for k in range(n1):
            dh1v[k] = 0.0
        for i in range(n2):
            d = dz2v[i]
            gb2v[i] += d
            for k in range(n1):
                gw2v[i, k] += d * H1[s, k]
                dh1v[k] += d * w2[i, k]

        for i in range(n1):
            dz1v[i] = dh1v[i] * (1.0 - H1[s, i] * H1[s, i])
        for i in range(n1):
            d = dz1v[i]
            gb1v[i] += d
            for k in range(n_in):
                gw1v[i, k] += d * X[s, k]

    return [gw1, gb1, gw2, gb2, gwp, gbp, gwv, gbv]
