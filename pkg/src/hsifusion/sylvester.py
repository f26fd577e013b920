"""Solver for the coefficient update ``Q1 C + C Q2 = Q3``.

``C`` and ``Q3`` are ``L x WH`` mode-3 unfoldings, ``Q1 = (FR)^T FR + 3 mu I``
is a small SPD matrix and ``Q2 = (BS)(BS)^T`` is applied matrix-free as
blur -> keep the decimation grid -> adjoint blur.  Diagonalising ``Q1``
decouples the equation into ``L`` SPD systems ``(lambda_i I + Q2) c = q``.
"""

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import ParameterError, SolverError

DENSE_MAX_PIXELS = 4096


class SpatialOperator:
    """``B S`` and its adjoint for a fixed ``W x H`` grid, with the OTF cached."""

    def __init__(self, model, w, h):
        model.check_hr_dims((w, h))
        self.model = model
        self.w, self.h = w, h
        self.d = model.factor
        self.otf = model.otf(w, h)
        mask = np.zeros((w, h))
        mask[:: self.d, :: self.d] = 1.0
        self.mask = mask

    def _conv(self, z, otf):
        zf = np.fft.fft2(z, axes=(0, 1))
        if z.ndim == 3:
            otf = otf[:, :, None]
        return np.fft.ifft2(zf * otf, axes=(0, 1)).real

    def blur(self, z):
        return self._conv(z, self.otf)

    def blur_t(self, z):
        return self._conv(z, self.otf.conj())

    def forward(self, z):
        """Blur and decimate (``Z B S`` band by band)."""
        return self.blur(z)[:: self.d, :: self.d]

    def adjoint(self, x):
        """Zero-insert and apply the adjoint blur (``X (B S)^T``)."""
        up = np.zeros((self.w, self.h) + x.shape[2:])
        up[:: self.d, :: self.d] = x
        return self.blur_t(up)

    def gram(self, z):
        """``Q2`` applied to images: blur, mask to the sample grid, adjoint blur."""
        m = self.mask if z.ndim == 2 else self.mask[:, :, None]
        return self.blur_t(self.blur(z) * m)


def sylvester_q1(basis, srf, mu):
    fr = np.atleast_2d(srf) @ basis
    return fr.T @ fr + 3.0 * mu * np.eye(basis.shape[1])


def _row_to_image(r, w, h):
    return r.reshape(w, h, order="F")


def _image_to_row(im):
    return im.ravel(order="F")


def apply_q2_rows(c, op):
    """``C Q2`` for an ``L x WH`` matrix ``C``."""
    ims = c.T.reshape(op.w, op.h, c.shape[0], order="F")
    out = op.gram(ims)
    return out.reshape(op.w * op.h, c.shape[0], order="F").T


def sylvester_residual(c, q1, q3, op):
    """Relative residual ``||Q1 C + C Q2 - Q3||_F / ||Q3||_F``."""
    r = q1 @ c + apply_q2_rows(c, op) - q3
    nq = np.linalg.norm(q3)
    return np.linalg.norm(r) / nq if nq > 0 else np.linalg.norm(r)


def dense_q2(op):
    n = op.w * op.h
    if n > DENSE_MAX_PIXELS:
        raise ParameterError(f"dense Sylvester backend is limited to {DENSE_MAX_PIXELS} pixels, got {n}")
    return apply_q2_rows(np.eye(n), op)


def solve_sylvester(q3, q1, op, backend="cg", tol=1e-10, maxiter=500, x0=None):
    """Solve ``Q1 C + C Q2 = Q3`` for ``C`` (``L x WH``).

    ``backend="cg"`` runs conjugate gradients on each rotated row with
    matrix-free ``Q2``; ``backend="dense"`` forms ``Q2`` explicitly and is
    only meant for small verification problems.
    """
    lam, p = np.linalg.eigh(q1)
    if lam.min() <= 0:
        raise ParameterError("Q1 must be positive definite (mu > 0)")
    q3r = p.T @ q3
    n = q3.shape[1]
    out = np.empty_like(q3r)
    if backend == "dense":
        q2 = dense_q2(op)
        for i, li in enumerate(lam):
            out[i] = np.linalg.solve(q2 + li * np.eye(n), q3r[i])
        return p @ out
    if backend != "cg":
        raise ParameterError(f"unknown Sylvester backend {backend!r}")
    x0r = None if x0 is None else p.T @ x0
    for i, li in enumerate(lam):
        def matvec(v, li=li):
            v = np.asarray(v).ravel()
            return li * v + _image_to_row(op.gram(_row_to_image(v, op.w, op.h)))

        a = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
        b = q3r[i]
        if not np.any(b):
            out[i] = 0.0
            continue
        xi, info = cg(a, b, x0=None if x0r is None else x0r[i], rtol=tol, atol=0.0, maxiter=maxiter)
        if info != 0:
            res = np.linalg.norm(matvec(xi) - b) / np.linalg.norm(b)
            raise SolverError(f"CG did not converge on rotated row {i} within {maxiter} iterations", res)
        out[i] = xi
    return p @ out
