"""Pure numpy implementations of the blockwise rotation kernels.

Shapes used throughout:

* ``params``: ``(n_relations, n_blocks, P)`` float64 with ``P = 1`` (angle),
  ``4`` (quaternion, w-x-y-z, normalised on use) or ``m * k`` (Householder
  normals, used as stored).
* ``rel``: ``(n,)`` int64 relation index per row.
* ``x``/``g``: ``(n, n_blocks, k)`` float64.
"""
import numpy as np

ANGLE, QUAT, HOUSEHOLDER = 0, 1, 2


def quat_matrix(q):
    """Rotation matrices ``(..., 3, 3)`` for unit quaternions ``(..., 4)``."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def _quat_matrix_vjp(q, M):
    """Pull ``dL/dR`` (``M``) back to ``dL/dq`` for unit ``q``."""
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = lambda i, j: M[..., i, j]  # noqa: E731
    gw = 2 * (-z * m(0, 1) + y * m(0, 2) + z * m(1, 0) - x * m(1, 2) - y * m(2, 0) + x * m(2, 1))
    gx = 2 * (y * m(0, 1) + z * m(0, 2) + y * m(1, 0) - 2 * x * m(1, 1) - w * m(1, 2)
              + z * m(2, 0) + w * m(2, 1) - 2 * x * m(2, 2))
    gy = 2 * (-2 * y * m(0, 0) + x * m(0, 1) + w * m(0, 2) + x * m(1, 0) + z * m(1, 2)
              - w * m(2, 0) + z * m(2, 1) - 2 * y * m(2, 2))
    gz = 2 * (-2 * z * m(0, 0) - w * m(0, 1) + x * m(0, 2) + w * m(1, 0) - 2 * z * m(1, 1)
              + y * m(1, 2) + x * m(2, 0) + y * m(2, 1))
    return np.stack([gw, gx, gy, gz], axis=-1)


def _normalise(q):
    n = np.sqrt(np.sum(q * q, axis=-1, keepdims=True))
    return q / n, n


def rotate(kind, params, rel, x, inverse=False):
    p = params[rel]
    if kind == ANGLE:
        th = -p[..., 0] if inverse else p[..., 0]
        c, s = np.cos(th), np.sin(th)
        x0, x1 = x[..., 0], x[..., 1]
        return np.stack([c * x0 - s * x1, s * x0 + c * x1], axis=-1)
    if kind == QUAT:
        R = quat_matrix(_normalise(p)[0])
        sub = "nbji,nbj->nbi" if inverse else "nbij,nbj->nbi"
        return np.einsum(sub, R, x)
    k = x.shape[-1]
    U = p.reshape(p.shape[:2] + (-1, k))
    order = range(U.shape[2] - 1, -1, -1) if inverse else range(U.shape[2])
    y = x.copy()
    for j in order:
        u = U[:, :, j]
        y -= 2.0 * u * np.sum(u * y, axis=-1, keepdims=True)
    return y


def rotate_vjp(kind, params, rel, x, g, inverse=False, grad_params=None):
    """Return ``dL/dx`` and add ``dL/dparams`` into ``grad_params``."""
    if grad_params is None:
        grad_params = np.zeros_like(params)
    p = params[rel]
    if kind == ANGLE:
        sign = -1.0 if inverse else 1.0
        th = sign * p[..., 0]
        c, s = np.cos(th), np.sin(th)
        x0, x1 = x[..., 0], x[..., 1]
        g0, g1 = g[..., 0], g[..., 1]
        gth = g0 * (-s * x0 - c * x1) + g1 * (c * x0 - s * x1)
        gx = np.stack([c * g0 + s * g1, -s * g0 + c * g1], axis=-1)
        np.add.at(grad_params, rel, (sign * gth)[..., None])
        return gx, grad_params
    if kind == QUAT:
        qh, qn = _normalise(p)
        R = quat_matrix(qh)
        if inverse:
            gx = np.einsum("nbij,nbj->nbi", R, g)
            M = np.einsum("nbi,nbj->nbij", x, g)
        else:
            gx = np.einsum("nbji,nbj->nbi", R, g)
            M = np.einsum("nbi,nbj->nbij", g, x)
        gqh = _quat_matrix_vjp(qh, M)
        gq = (gqh - qh * np.sum(qh * gqh, axis=-1, keepdims=True)) / qn
        np.add.at(grad_params, rel, gq)
        return gx, grad_params
    k = x.shape[-1]
    U = p.reshape(p.shape[:2] + (-1, k))
    m = U.shape[2]
    order = list(range(m - 1, -1, -1)) if inverse else list(range(m))
    states = [x]
    y = x
    for j in order:
        u = U[:, :, j]
        y = y - 2.0 * u * np.sum(u * y, axis=-1, keepdims=True)
        states.append(y)
    gU = np.zeros_like(U)
    gy = g
    for step in range(m - 1, -1, -1):
        j = order[step]
        u = U[:, :, j]
        xin = states[step]
        ux = np.sum(u * xin, axis=-1, keepdims=True)
        ug = np.sum(u * gy, axis=-1, keepdims=True)
        gU[:, :, j] = -2.0 * (ux * gy + ug * xin)
        gy = gy - 2.0 * u * ug
    np.add.at(grad_params, rel, gU.reshape(p.shape))
    return gy, grad_params


def query_distances(queries, centers, threads=1):
    """Euclidean distances ``(m, E)`` from each query row to every center row."""
    queries = np.atleast_2d(queries)
    out = np.empty((queries.shape[0], centers.shape[0]))
    for i, q in enumerate(queries):
        diff = centers - q
        out[i] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return out


def scatter_add_rows(out, idx, rows, scale=1.0):
    """``out[idx[i]] += scale * rows[i]``, in row order."""
    np.add.at(out, idx, scale * rows)
    return out


def adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
    """In-place Adam step on flat arrays; ``bc1``/``bc2`` are the bias corrections."""
    m *= b1
    m += (1 - b1) * g
    v *= b2
    v += (1 - b2) * g * g
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
