"""Vectorized numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` function for function and are used when the
compiled extension is unavailable (or ``KDMETA_PURE_PYTHON=1``).
"""

import numpy as np

SQUARINGS = 3


def sgcs_columns(w, w_hat):
    """Per-column squared cosine similarity for stacks of shape (B, n, L)."""
    inner = np.einsum("bnl,bnl->bl", w.conj(), w_hat)
    nw = np.einsum("bnl,bnl->bl", w.real, w.real) + np.einsum("bnl,bnl->bl", w.imag, w.imag)
    nh = np.einsum("bnl,bnl->bl", w_hat.real, w_hat.real) + np.einsum(
        "bnl,bnl->bl", w_hat.imag, w_hat.imag
    )
    return (inner.real**2 + inner.imag**2) / (nw * nh)


def sgcs_grad(w, w_hat):
    """Per-sample SGCS and its gradient with respect to ``w_hat``.

    The gradient is returned packed as ``d/d re + 1j * d/d im``.
    """
    n_sb = w.shape[2]
    inner = np.einsum("bnl,bnl->bl", w.conj(), w_hat)
    nw = np.einsum("bnl,bnl->bl", w.real, w.real) + np.einsum("bnl,bnl->bl", w.imag, w.imag)
    nh = np.einsum("bnl,bnl->bl", w_hat.real, w_hat.real) + np.einsum(
        "bnl,bnl->bl", w_hat.imag, w_hat.imag
    )
    c2 = inner.real**2 + inner.imag**2
    vals = (c2 / (nw * nh)).sum(axis=1) / n_sb
    scale = 2.0 / (n_sb * nw * nh)
    grad = scale[:, None, :] * (inner[:, None, :] * w - (c2 / nh)[:, None, :] * w_hat)
    return vals, grad


def principal_eigh(a, tol, maxiter):
    """Dominant eigenpair of each Hermitian PSD matrix in a (B, n, n) stack.

    Power iteration on ``A^(2^SQUARINGS)`` with the residual measured on ``A``
    itself. ``iters[b] == -1`` flags a matrix that did not converge.
    """
    bsz, n, _ = a.shape
    vecs = np.zeros((bsz, n), dtype=np.complex128)
    vals = np.zeros(bsz)
    iters = np.zeros(bsz, dtype=np.int64)
    diag = np.real(np.einsum("bii->bi", a))
    tr = diag.sum(axis=1)
    zero = tr <= 0.0
    vecs[zero, 0] = 1.0

    live = np.flatnonzero(~zero)
    if live.size == 0:
        return vecs, vals, iters
    A = a[live]
    m = A / tr[live, None, None]
    for _ in range(SQUARINGS):
        m = m @ m
        m /= np.real(np.einsum("bii->b", m))[:, None, None]
    start = np.argmax(diag[live], axis=1)
    x = A[np.arange(live.size), :, start]
    x /= np.linalg.norm(x, axis=1, keepdims=True)

    active = np.ones(live.size, dtype=bool)
    count = np.zeros(live.size, dtype=np.int64)
    lam = np.zeros(live.size)
    for it in range(1, maxiter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        y = np.einsum("bij,bj->bi", A[idx], xa)
        la = np.real(np.einsum("bi,bi->b", xa.conj(), y))
        r = np.linalg.norm(y - la[:, None] * xa, axis=1)
        done = r <= tol * np.abs(la)
        lam[idx] = la
        count[idx[done]] = it
        active[idx[done]] = False
        step = idx[~done]
        if step.size:
            z = np.einsum("bij,bj->bi", m[step], x[step])
            x[step] = z / np.linalg.norm(z, axis=1, keepdims=True)
    count[active] = -1
    vecs[live] = x
    vals[live] = lam
    iters[live] = count
    return vecs, vals, iters


def mgs(x, reorth_tol=1e-10):
    """Modified Gram-Schmidt on the columns of ``x`` (n, k), k <= n.

    Returns ``(q, min_pivot)``. A second pass runs when the first leaves
    ``max|Q^H Q - I| > reorth_tol``.
    """
    q = np.array(x, dtype=np.complex128, copy=True)
    k = q.shape[1]
    min_pivot = np.inf
    for _pass in range(2):
        for j in range(k):
            v = q[:, j]
            for i in range(j):
                v = v - (q[:, i].conj() @ v) * q[:, i]
            nrm = np.linalg.norm(v)
            if _pass == 0:
                min_pivot = min(min_pivot, nrm)
            if nrm < 1e-300:
                return q, 0.0
            q[:, j] = v / nrm
        resid = np.max(np.abs(q.conj().T @ q - np.eye(k)))
        if resid <= reorth_tol:
            break
    return q, float(min_pivot)
