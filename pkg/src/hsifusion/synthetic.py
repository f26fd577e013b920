"""Synthetic low-rank scenes with piecewise-constant coefficient maps."""

import numpy as np


def orthonormal_basis(n_bands, n_atoms, rng):
    """Random orthonormal basis spanning smooth spectra (Gaussian bumps).

    The first atom is a positive, slowly varying spectrum.
    """
    lam = np.linspace(0.0, 1.0, n_bands)
    cols = [1.0 + 0.3 * np.sin(np.pi * lam)]
    for _ in range(n_atoms - 1):
        centre, width = rng.uniform(0.0, 1.0), rng.uniform(0.1, 0.3)
        cols.append(np.exp(-((lam - centre) ** 2) / (2.0 * width**2)))
    q, _ = np.linalg.qr(np.stack(cols, axis=1))
    if q[:, 0].sum() < 0:
        q[:, 0] = -q[:, 0]
    return q


def piecewise_constant_maps(w, h, n_atoms, n_regions, rng, mean=(2.0, 4.0), spread=0.5):
    """Voronoi-cell coefficient maps; atom 0 carries a positive offset."""
    seeds = rng.uniform(0, [w, h], size=(n_regions, 2))
    ii, jj = np.meshgrid(np.arange(w), np.arange(h), indexing="ij")
    d = (ii[..., None] - seeds[:, 0]) ** 2 + (jj[..., None] - seeds[:, 1]) ** 2
    region = np.argmin(d, axis=2)
    vals = rng.uniform(-spread, spread, size=(n_regions, n_atoms))
    vals[:, 0] = rng.uniform(*mean, size=n_regions)
    return vals[region]


def block_srf(n_msi, n_hsi, overlap=1):
    """Nonnegative row-stochastic response: overlapping contiguous band blocks."""
    edges = np.linspace(0, n_hsi, n_msi + 1)
    f = np.zeros((n_msi, n_hsi))
    for i in range(n_msi):
        lo = max(int(np.floor(edges[i])) - overlap, 0)
        hi = min(int(np.ceil(edges[i + 1])) + overlap, n_hsi)
        f[i, lo:hi] = 1.0
    return f / f.sum(axis=1, keepdims=True)


def synthetic_scene(w=64, h=64, n_bands=16, n_atoms=4, n_regions=24, seed=0):
    """Return ``(z, basis, coeffs)`` with ``z = coeffs x_3 basis``."""
    rng = np.random.default_rng(seed)
    basis = orthonormal_basis(n_bands, n_atoms, rng)
    coeffs = piecewise_constant_maps(w, h, n_atoms, n_regions, rng)
    z = np.einsum("whl,sl->whs", coeffs, basis)
    return z, basis, coeffs
