"""ADMM fusion of a low-resolution HSI and a high-resolution MSI.

The HR-HSI is modelled as ``Z = C x_3 R`` with ``R`` learned from the LR-HSI.
The coefficients ``C`` minimise

    ||X - R C B S||^2 + ||Y - F R C||^2 + sum_n sum_t alpha_t ||grad_t(C)^n||_LTNN

where ``grad_t(C)^n`` is the n-th patch group of the periodic gradient of
``C`` along mode ``t``.  Splitting ``G_t = C`` and ``H_t = grad_t(G_t)`` gives
the iteration C -> H -> G -> multipliers implemented in :func:`solve`.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import patches
from .degradation import DegradationModel, upsample_nearest
from .errors import DimensionError, NonFiniteError, ParameterError
from .ltnn import ltnn_prox, ltnn_value
from .subspace import estimate_basis, project, reconstruct
from .sylvester import SpatialOperator, solve_sylvester, sylvester_q1
from .tensor import fold, grad, grad_adjoint, grad_gram_eigenvalues, mode_n_product, unfold

log = logging.getLogger(__name__)

MODES = (1, 2, 3)
LOG_HEADER = "iter,rel_change,feas_g1,feas_g2,feas_g3,feas_h1,feas_h2,feas_h3,data_fid"

# per-dataset settings: ((alpha1, alpha2, alpha3), mu)
PRESETS = {
    "pavia": ((0.3, 0.03, 0.009), 0.05),
    "indian_pines": ((0.02, 0.03, 0.03), 0.04),
    "balloons": ((0.25, 0.2, 0.1), 0.09),
    "houston": ((0.08, 0.2, 0.05), 0.05),
}


@dataclass
class SolverConfig:
    alpha: tuple = (0.3, 0.03, 0.009)
    mu: float = 0.05
    n_atoms: int = 10
    n_groups: int = 400
    sqrt_q: int = 4
    eps: float = 1e-2
    max_iters: int = 50
    tol: float = 1e-4
    seed: int = 0
    sylvester: str = "cg"
    cg_tol: float = 1e-10
    cg_maxiter: int = 500
    # "group" would take gradients inside each K_n x L x q group tensor;
    # that variant cannot use the FFT G-update and is not implemented.
    gradient_domain: str = "full"

    def __post_init__(self):
        self.alpha = tuple(float(a) for a in self.alpha)
        if len(self.alpha) != 3 or any(a < 0 for a in self.alpha):
            raise ParameterError(f"alpha must be three nonnegative values, got {self.alpha}")
        if not self.mu > 0:
            raise ParameterError(f"mu must be positive, got {self.mu}")
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")
        if not self.eps > 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if self.n_atoms < 1 or self.n_groups < 1 or self.sqrt_q < 1 or self.max_iters < 1:
            raise ParameterError("n_atoms, n_groups, sqrt_q and max_iters must be positive")
        if self.sylvester not in ("cg", "dense"):
            raise ParameterError(f"sylvester backend must be 'cg' or 'dense', got {self.sylvester!r}")
        if self.gradient_domain == "group":
            raise NotImplementedError("group-wise gradients are not implemented; use gradient_domain='full'")
        if self.gradient_domain != "full":
            raise ParameterError(f"unknown gradient_domain {self.gradient_domain!r}")

    @classmethod
    def preset(cls, name, **overrides):
        alpha, mu = PRESETS[name]
        return cls(alpha=alpha, mu=mu, **overrides)


class LogRow(NamedTuple):
    iter: int
    rel_change: float
    feas_g: tuple
    feas_h: tuple
    data_fid: float

    def as_csv(self):
        vals = [self.rel_change, *self.feas_g, *self.feas_h, self.data_fid]
        return ",".join([str(self.iter)] + [repr(float(v)) for v in vals])


class KktResiduals(NamedTuple):
    r_g: tuple
    r_h: tuple
    r_stat: float
    r_mult: tuple

    def max(self):
        return max(*self.r_g, *self.r_h, self.r_stat, *self.r_mult)


@dataclass
class SolverState:
    C: np.ndarray
    G: list
    H: list
    M: list
    V: list
    iteration: int = 0
    log: list = field(default_factory=list)

    @classmethod
    def feasible_start(cls, c0):
        return cls(
            C=c0.copy(),
            G=[c0.copy() for _ in MODES],
            H=[grad(c0, t) for t in MODES],
            M=[np.zeros_like(c0) for _ in MODES],
            V=[np.zeros_like(c0) for _ in MODES],
        )

    def feasibility(self):
        fg = tuple(float(np.linalg.norm(g - self.C)) for g in self.G)
        fh = tuple(float(np.linalg.norm(h - grad(g, t))) for t, h, g in zip(MODES, self.H, self.G))
        return fg, fh


class FusionProblem:
    """Observations, basis and operators shared by every ADMM step."""

    def __init__(self, x, y, basis, model):
        w, h = y.shape[:2]
        d = model.factor
        if x.shape[:2] != (w // d, h // d) or w % d or h % d:
            raise DimensionError(f"LR-HSI {x.shape} and HR-MSI {y.shape} inconsistent with factor {d}")
        if model.srf.shape != (y.shape[2], x.shape[2]):
            raise DimensionError(f"SRF {model.srf.shape} must be (MSI bands, HSI bands) = {(y.shape[2], x.shape[2])}")
        if basis.shape[0] != x.shape[2]:
            raise DimensionError(f"basis {basis.shape} does not match {x.shape[2]} bands")
        self.x, self.y, self.basis, self.model = x, y, basis, model
        self.op = SpatialOperator(model, w, h)
        self.fr = model.srf @ basis
        # (FR)^T Y + R^T X (BS)^T as a W x H x L tensor
        self.q3_data = mode_n_product(y, self.fr.T, 3) + project(self.op.adjoint(x), basis)

    @property
    def coeff_shape(self):
        return self.y.shape[:2] + (self.basis.shape[1],)

    def data_residuals(self, c):
        rx = reconstruct(self.op.forward(c), self.basis) - self.x
        ry = mode_n_product(c, self.fr, 3) - self.y
        return rx, ry

    def data_fidelity(self, c):
        rx, ry = self.data_residuals(c)
        return float(np.sum(rx**2) + np.sum(ry**2))


def build_q3(problem, state, mu):
    """Right-hand side ``Q3`` of the C-update as an ``L x WH`` matrix."""
    acc = problem.q3_data.copy()
    for g, m in zip(state.G, state.M):
        acc += mu * g + 0.5 * m
    return unfold(acc, 3)


def update_C(problem, state, config):
    mu = config.mu
    q1 = sylvester_q1(problem.basis, problem.model.srf, mu)
    q3 = build_q3(problem, state, mu)
    c3 = solve_sylvester(
        q3, q1, problem.op, backend=config.sylvester, tol=config.cg_tol,
        maxiter=config.cg_maxiter, x0=unfold(state.C, 3),
    )
    return fold(c3, 3, problem.coeff_shape)


def update_H(state, partition, config):
    mu = config.mu
    out = []
    for t, g, v, a in zip(MODES, state.G, state.V, config.alpha):
        target = grad(g, t) - v / (2.0 * mu)
        if a == 0:
            out.append(target)
            continue
        tau = a / (2.0 * mu)
        groups = patches.gather_groups(target, partition)
        groups = [ltnn_prox(gr, tau, config.eps) for gr in groups]
        out.append(patches.scatter_groups(groups, partition, target.shape[2]))
    return out


def update_G(state, config):
    """Exact solve of ``(I + grad_t^T grad_t) G_t = C - M_t/2mu + grad_t^T(H_t + V_t/2mu)``."""
    mu = config.mu
    out = []
    for t, h, m, v in zip(MODES, state.H, state.M, state.V):
        rhs = state.C - m / (2.0 * mu) + grad_adjoint(h + v / (2.0 * mu), t)
        out.append(solve_grad_normal(rhs, t))
    return out


def solve_grad_normal(rhs, mode):
    ax = mode - 1
    n = rhs.shape[ax]
    shape = [1, 1, 1]
    shape[ax] = n
    denom = (1.0 + grad_gram_eigenvalues(n)).reshape(shape)
    return np.fft.ifft(np.fft.fft(rhs, axis=ax) / denom, axis=ax).real


def update_multipliers(state, mu):
    m = [mk + 2.0 * mu * (g - state.C) for mk, g in zip(state.M, state.G)]
    v = [vk + 2.0 * mu * (h - grad(g, t)) for t, vk, h, g in zip(MODES, state.V, state.H, state.G)]
    return m, v


def kkt_residuals(state, problem):
    """Norms of the KKT equations of the constrained problem at ``state``.

    Stationarity in ``C``:
    ``R^T (R C BS - X)(BS)^T + (FR)^T (FR C - Y) - 0.5 * sum_t M_t``.
    """
    fg, fh = state.feasibility()
    rx, ry = problem.data_residuals(state.C)
    stat = project(problem.op.adjoint(rx), problem.basis) + mode_n_product(ry, problem.fr.T, 3)
    stat = stat - 0.5 * sum(state.M)
    r_mult = tuple(
        float(np.linalg.norm(m - grad_adjoint(v, t))) for t, m, v in zip(MODES, state.M, state.V)
    )
    return KktResiduals(fg, fh, float(np.linalg.norm(stat)), r_mult)


def regularizer_value(c, partition, alpha, eps):
    """Regularizer value ``sum_n sum_t alpha_t * LTNN(grad_t(C)^n)``."""
    total = 0.0
    for t, a in zip(MODES, alpha):
        if a == 0:
            continue
        for gr in patches.gather_groups(grad(c, t), partition):
            total += a * ltnn_value(gr, eps)
    return total


def initial_coefficients(x, basis, factor):
    return project(upsample_nearest(x, factor), basis)


def baseline_fusion(x, basis, factor):
    """Subspace projection of the nearest-neighbour upsampled LR-HSI."""
    return reconstruct(initial_coefficients(x, basis, factor), basis)


def _check_finite(name, arrs, it):
    for a in arrs:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(it, name)


@dataclass
class FusionResult:
    z: np.ndarray
    log: list
    kkt: KktResiduals
    state: SolverState
    basis: np.ndarray
    partition: patches.ClusterPartition
    converged: bool


def solve(x, y, model: DegradationModel, config: SolverConfig, basis=None, partition=None, callback=None):
    """Run the full fusion pipeline and return a :class:`FusionResult`.

    ``basis`` and ``partition`` default to the SVD basis of ``x`` and the
    k-means++ grouping of ``y``.  ``callback(state)`` is invoked after every
    iteration.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if basis is None:
        basis = estimate_basis(x, config.n_atoms)
    if partition is None:
        partition = patches.learn_partition(y, config.n_groups, config.sqrt_q, seed=config.seed)
    problem = FusionProblem(x, y, basis, model)
    state = SolverState.feasible_start(initial_coefficients(x, basis, model.factor))
    mu = config.mu
    converged = False
    for it in range(1, config.max_iters + 1):
        c_new = update_C(problem, state, config)
        _check_finite("C", [c_new], it)
        nrm = np.linalg.norm(c_new)
        rel = float(np.linalg.norm(c_new - state.C) / nrm) if nrm > 0 else 0.0
        state.C = c_new
        state.H = update_H(state, partition, config)
        _check_finite("H", state.H, it)
        state.G = update_G(state, config)
        _check_finite("G", state.G, it)
        state.M, state.V = update_multipliers(state, mu)
        state.iteration = it
        fg, fh = state.feasibility()
        row = LogRow(it, rel, fg, fh, problem.data_fidelity(state.C))
        state.log.append(row)
        log.debug("iter %d rel_change %.3e", it, rel)
        if callback is not None:
            callback(state)
        if rel <= config.tol:
            converged = True
            break
    kkt = kkt_residuals(state, problem)
    z = reconstruct(state.C, basis)
    return FusionResult(z, state.log, kkt, state, basis, partition, converged)


def write_log_csv(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(LOG_HEADER + "\n")
        for r in rows:
            fh.write(r.as_csv() + "\n")


def read_log_csv(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != LOG_HEADER:
            raise ValueError(f"unexpected convergence log header {header!r}")
        for line in fh:
            v = line.strip().split(",")
            if not v[0]:
                continue
            f = [float(s) for s in v[1:]]
            rows.append(LogRow(int(v[0]), f[0], tuple(f[1:4]), tuple(f[4:7]), f[7]))
    return rows
