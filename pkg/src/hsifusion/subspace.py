"""Spectral subspace learned from the low-resolution HSI."""

import numpy as np

from .errors import ParameterError
from .tensor import mode_n_product, unfold


def fix_signs(u):
    """Flip columns so that each column's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def estimate_basis(x, n_atoms):
    """Orthonormal ``S x L`` basis: the leading left singular vectors of ``X_(3)``."""
    n_bands = x.shape[2]
    if not 1 <= n_atoms < n_bands:
        raise ParameterError(f"subspace dimension must satisfy 1 <= L < S={n_bands}, got L={n_atoms}")
    x3 = unfold(x, 3)
    if not np.any(x3):
        raise ParameterError("cannot estimate a spectral basis from an all-zero image")
    u, _, _ = np.linalg.svd(x3, full_matrices=False)
    return fix_signs(u[:, :n_atoms])


def project(z, basis):
    """Coefficients ``C = Z x_3 R^T``."""
    return mode_n_product(z, basis.T, 3)


def reconstruct(c, basis):
    """Image ``Z = C x_3 R``."""
    return mode_n_product(c, basis, 3)
