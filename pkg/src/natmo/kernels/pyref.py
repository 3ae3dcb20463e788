"""NumPy reference implementation of the MLP evaluation kernel.

The compiled backend (``natmo.kernels._fast``) mirrors this module and must
agree with it to float64 roundoff; the equivalence is enforced by tests.

Conventions shared by both backends:

* ``widths = (n_0, n_1, ..., n_L)`` with ``n_L == 1``; hidden layers apply
  the activation, the final layer is affine.
* ``theta`` packs, per layer, ``W_l.ravel()`` (shape ``(n_l, n_{l-1})``,
  C order) followed by ``b_l``.
* ``order`` selects how many derivatives with respect to the (scalar) input
  to propagate (0, 1 or 2); ``want_jac`` additionally propagates the
  parameter Jacobian of every returned quantity.

Returns a 6-tuple ``(v, vx, vxx, jac, jac_x, jac_xx)`` where entries not
requested are ``None``; ``v``-like entries have shape ``(m,)``, Jacobians
``(m, d)``.
"""

from __future__ import annotations

import numpy as np

TANH = 0
SIGMOID = 1


def param_count(widths) -> int:
    return int(sum(widths[l + 1] * (widths[l] + 1) for l in range(len(widths) - 1)))


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act_chain(z, act_id, need1, need2, need3):
    """Activation value and derivatives up to third order, as needed."""
    s1 = s2 = s3 = None
    if act_id == TANH:
        t = np.tanh(z)
        if need1:
            s1 = 1.0 - t * t
        if need2:
            s2 = -2.0 * t * s1
        if need3:
            s3 = -2.0 * s1 * (s1 - 2.0 * t * t)
        return t, s1, s2, s3
    if act_id == SIGMOID:
        s = _sigmoid(z)
        if need1:
            s1 = s * (1.0 - s)
        if need2:
            s2 = s1 * (1.0 - 2.0 * s)
        if need3:
            s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1
        return s, s1, s2, s3
    raise ValueError(f"unknown activation id {act_id}")


def mlp_eval(x, theta, widths, act_id, order=0, want_jac=False):
    x = np.ascontiguousarray(x, dtype=np.float64)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    m = x.shape[0]
    n_layers = len(widths) - 1
    need1 = want_jac or order >= 1
    need2 = order >= 2 or (order >= 1 and want_jac)
    need3 = order >= 2 and want_jac

    u = x
    ux = np.ones((m, 1)) if order >= 1 else None
    uxx = np.zeros((m, 1)) if order >= 2 else None
    ju = jux = juxx = None
    off = 0
    for layer in range(n_layers):
        ni, no = int(widths[layer]), int(widths[layer + 1])
        w = theta[off : off + no * ni].reshape(no, ni)
        b = theta[off + no * ni : off + no * (ni + 1)]
        newoff = off + no * (ni + 1)

        z = u @ w.T + b
        zx = ux @ w.T if order >= 1 else None
        zxx = uxx @ w.T if order >= 2 else None

        jz = jzx = jzxx = None
        if want_jac:
            jz = np.zeros((m, no, newoff))
            if off:
                np.matmul(w, ju, out=jz[:, :, :off])
            for o in range(no):
                jz[:, o, off + o * ni : off + (o + 1) * ni] = u
                jz[:, o, off + no * ni + o] = 1.0
            if order >= 1:
                jzx = np.zeros((m, no, newoff))
                if off:
                    np.matmul(w, jux, out=jzx[:, :, :off])
                for o in range(no):
                    jzx[:, o, off + o * ni : off + (o + 1) * ni] = ux
            if order >= 2:
                jzxx = np.zeros((m, no, newoff))
                if off:
                    np.matmul(w, juxx, out=jzxx[:, :, :off])
                for o in range(no):
                    jzxx[:, o, off + o * ni : off + (o + 1) * ni] = uxx

        if layer < n_layers - 1:
            s0, s1, s2, s3 = _act_chain(z, act_id, need1, need2, need3)
            if want_jac:
                ju = s1[:, :, None] * jz
                if order >= 1:
                    jux = (s2 * zx)[:, :, None] * jz + s1[:, :, None] * jzx
                if order >= 2:
                    juxx = (
                        (s3 * zx * zx + s2 * zxx)[:, :, None] * jz
                        + (2.0 * s2 * zx)[:, :, None] * jzx
                        + s1[:, :, None] * jzxx
                    )
            if order >= 2:
                uxx = s2 * zx * zx + s1 * zxx
            if order >= 1:
                ux = s1 * zx
            u = s0
        else:
            u, ux, uxx = z, zx, zxx
            ju, jux, juxx = jz, jzx, jzxx
        off = newoff

    v = u[:, 0].copy()
    vx = ux[:, 0].copy() if order >= 1 else None
    vxx = uxx[:, 0].copy() if order >= 2 else None
    jac = np.ascontiguousarray(ju[:, 0, :]) if want_jac else None
    jac_x = np.ascontiguousarray(jux[:, 0, :]) if want_jac and order >= 1 else None
    jac_xx = np.ascontiguousarray(juxx[:, 0, :]) if want_jac and order >= 2 else None
    return v, vx, vxx, jac, jac_x, jac_xx
