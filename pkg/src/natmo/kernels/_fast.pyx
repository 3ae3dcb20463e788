# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled MLP evaluation kernel.

Fused per-point propagation of values, input derivatives (order <= 2) and
parameter Jacobians through an affine/activation layer stack.  Mirrors
natmo.kernels.pyref.mlp_eval (same packing, same returns); the Python
wrapper in natmo.kernels validates shapes before dispatching here.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

cdef enum:
    ACT_TANH = 0
    ACT_SIGMOID = 1


cdef inline void _act_chain(int act_id, double z, double* s) noexcept nogil:
    cdef double t, sg, e, s1
    if act_id == ACT_TANH:
        t = tanh(z)
        s1 = 1.0 - t * t
        s[0] = t
        s[1] = s1
        s[2] = -2.0 * t * s1
        s[3] = -2.0 * s1 * (s1 - 2.0 * t * t)
    else:
        if z >= 0.0:
            sg = 1.0 / (1.0 + exp(-z))
        else:
            e = exp(z)
            sg = e / (1.0 + e)
        s1 = sg * (1.0 - sg)
        s[0] = sg
        s[1] = s1
        s[2] = s1 * (1.0 - 2.0 * sg)
        s[3] = s1 * (1.0 - 2.0 * sg) * (1.0 - 2.0 * sg) - 2.0 * s1 * s1


def mlp_eval(const double[:, ::1] x, const double[::1] theta, const long[::1] widths,
             int act_id, int order, bint want_jac):
    cdef Py_ssize_t m = x.shape[0]
    cdef int n_layers = widths.shape[0] - 1
    cdef int maxw = 0
    cdef int l
    for l in range(widths.shape[0]):
        if widths[l] > maxw:
            maxw = <int> widths[l]
    cdef Py_ssize_t d = theta.shape[0]
    cdef bint ord1 = order >= 1
    cdef bint ord2 = order >= 2

    v_arr = np.empty(m)
    vx_arr = np.empty(m) if ord1 else None
    vxx_arr = np.empty(m) if ord2 else None
    j_arr = np.empty((m, d)) if want_jac else None
    jx_arr = np.empty((m, d)) if (want_jac and ord1) else None
    jxx_arr = np.empty((m, d)) if (want_jac and ord2) else None

    cdef double[::1] v = v_arr
    cdef double[::1] vx = vx_arr if ord1 else v_arr
    cdef double[::1] vxx = vxx_arr if ord2 else v_arr
    cdef double[:, ::1] jout = j_arr if want_jac else v_arr[:, None]
    cdef double[:, ::1] jxout = jx_arr if (want_jac and ord1) else v_arr[:, None]
    cdef double[:, ::1] jxxout = jxx_arr if (want_jac and ord2) else v_arr[:, None]

    # per-point scratch, reused across points
    u_b = np.empty(maxw); ux_b = np.empty(maxw); uxx_b = np.empty(maxw)
    z_b = np.empty(maxw); zx_b = np.empty(maxw); zxx_b = np.empty(maxw)
    cdef double[::1] u = u_b, ux = ux_b, uxx = uxx_b
    cdef double[::1] z = z_b, zx = zx_b, zxx = zxx_b
    cdef Py_ssize_t jcols = d if want_jac else 1
    ju_b = np.zeros((maxw, jcols)); jux_b = np.zeros((maxw, jcols)); juxx_b = np.zeros((maxw, jcols))
    jz_b = np.zeros((maxw, jcols)); jzx_b = np.zeros((maxw, jcols)); jzxx_b = np.zeros((maxw, jcols))
    cdef double[:, ::1] ju = ju_b, jux = jux_b, juxx = juxx_b
    cdef double[:, ::1] jz = jz_b, jzx = jzx_b, jzxx = jzxx_b

    cdef Py_ssize_t j, off, newoff, wbase, bbase
    cdef int ni, no, o, i, c
    cdef double acc, accx, accxx, w_oi, s0, s1, s2, s3, a0, a1, a2, jv, jvx, jvxx
    cdef double s[4]

    with nogil:
        for j in range(m):
            ni = <int> widths[0]
            for i in range(ni):
                u[i] = x[j, i]
            if ord1:
                ux[0] = 1.0
            if ord2:
                uxx[0] = 0.0
            off = 0
            for l in range(n_layers):
                ni = <int> widths[l]
                no = <int> widths[l + 1]
                wbase = off
                bbase = off + no * ni
                newoff = off + no * (ni + 1)
                for o in range(no):
                    acc = theta[bbase + o]
                    accx = 0.0
                    accxx = 0.0
                    for i in range(ni):
                        w_oi = theta[wbase + o * ni + i]
                        acc += w_oi * u[i]
                        if ord1:
                            accx += w_oi * ux[i]
                        if ord2:
                            accxx += w_oi * uxx[i]
                    z[o] = acc
                    if ord1:
                        zx[o] = accx
                    if ord2:
                        zxx[o] = accxx
                if want_jac:
                    for o in range(no):
                        for c in range(newoff):
                            jz[o, c] = 0.0
                        if ord1:
                            for c in range(newoff):
                                jzx[o, c] = 0.0
                        if ord2:
                            for c in range(newoff):
                                jzxx[o, c] = 0.0
                        if off > 0:
                            for i in range(ni):
                                w_oi = theta[wbase + o * ni + i]
                                if w_oi != 0.0:
                                    for c in range(off):
                                        jz[o, c] += w_oi * ju[i, c]
                                    if ord1:
                                        for c in range(off):
                                            jzx[o, c] += w_oi * jux[i, c]
                                    if ord2:
                                        for c in range(off):
                                            jzxx[o, c] += w_oi * juxx[i, c]
                        for i in range(ni):
                            jz[o, wbase + o * ni + i] = u[i]
                            if ord1:
                                jzx[o, wbase + o * ni + i] = ux[i]
                            if ord2:
                                jzxx[o, wbase + o * ni + i] = uxx[i]
                        jz[o, bbase + o] = 1.0
                if l < n_layers - 1:
                    for o in range(no):
                        _act_chain(act_id, z[o], s)
                        s0 = s[0]; s1 = s[1]; s2 = s[2]; s3 = s[3]
                        if want_jac:
                            a0 = 0.0; a1 = 0.0; a2 = 0.0
                            if ord1:
                                a0 = s2 * zx[o]
                            if ord2:
                                a1 = s3 * zx[o] * zx[o] + s2 * zxx[o]
                                a2 = 2.0 * s2 * zx[o]
                            for c in range(newoff):
                                jv = jz[o, c]
                                ju[o, c] = s1 * jv
                                if ord1:
                                    jvx = jzx[o, c]
                                    jux[o, c] = a0 * jv + s1 * jvx
                                    if ord2:
                                        jvxx = jzxx[o, c]
                                        juxx[o, c] = a1 * jv + a2 * jvx + s1 * jvxx
                        if ord2:
                            uxx[o] = s2 * zx[o] * zx[o] + s1 * zxx[o]
                        if ord1:
                            ux[o] = s1 * zx[o]
                        u[o] = s0
                else:
                    v[j] = z[0]
                    if ord1:
                        vx[j] = zx[0]
                    if ord2:
                        vxx[j] = zxx[0]
                    if want_jac:
                        for c in range(d):
                            jout[j, c] = jz[0, c]
                            if ord1:
                                jxout[j, c] = jzx[0, c]
                            if ord2:
                                jxxout[j, c] = jzxx[0, c]
                off = newoff

    return (v_arr, vx_arr, vxx_arr, j_arr, jx_arr, jxx_arr)
