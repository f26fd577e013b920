import numpy as np

from hsifusion.metrics import evaluate
from hsifusion.report import plot_band_curves, plot_convergence, plot_error_map
from hsifusion.solver import LogRow
from hsifusion.synthetic import block_srf, orthonormal_basis, piecewise_constant_maps, synthetic_scene
from hsifusion.subspace import reconstruct

PNG = b"\x89PNG\r\n\x1a\n"


def rows(n=6):
    return [LogRow(i, 10.0**-i, (1.0 / i,) * 3, (2.0 / i,) * 3, 5.0) for i in range(1, n + 1)]


def test_figures_written(tmp_path, rng):
    plot_convergence(rows(), tmp_path / "c.png")
    plot_convergence(rows(), tmp_path / "c2.png", psnr_trace=list(range(6)))
    ref = rng.random((8, 8, 3)) + 0.1
    plot_band_curves(evaluate(ref, ref + 0.01, 4), tmp_path / "b.png")
    plot_error_map(rng.random((8, 8)) * 0.1, tmp_path / "e.png", title="band 0")
    for name in ("c.png", "c2.png", "b.png", "e.png"):
        assert (tmp_path / name).read_bytes()[:8] == PNG


def test_figures_deterministic(tmp_path):
    plot_convergence(rows(), tmp_path / "a.png")
    plot_convergence(rows(), tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_synthetic_scene_structure():
    z, basis, c = synthetic_scene(32, 32, 12, 3, n_regions=5, seed=2)
    assert z.shape == (32, 32, 12) and basis.shape == (12, 3) and c.shape == (32, 32, 3)
    np.testing.assert_allclose(basis.T @ basis, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(reconstruct(c, basis), z, atol=1e-14)
    # piecewise constant: few distinct coefficient vectors
    assert len(np.unique(c.reshape(-1, 3), axis=0)) <= 5
    z2, _, _ = synthetic_scene(32, 32, 12, 3, n_regions=5, seed=2)
    np.testing.assert_array_equal(z, z2)


def test_synthetic_helpers(rng):
    b = orthonormal_basis(10, 4, rng)
    np.testing.assert_allclose(b.T @ b, np.eye(4), atol=1e-12)
    m = piecewise_constant_maps(8, 6, 2, 3, rng)
    assert m.shape == (8, 6, 2)
    f = block_srf(4, 16)
    assert f.shape == (4, 16) and np.all(f >= 0)
    np.testing.assert_allclose(f.sum(axis=1), 1, atol=1e-12)
