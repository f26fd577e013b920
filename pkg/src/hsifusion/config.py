"""Run configuration for the ``fuse`` command, validated before any work starts."""

import json
from dataclasses import asdict, dataclass, fields

from .degradation import parse_kernel
from .errors import ParameterError
from .solver import SolverConfig

REQUIRED = ("hsi", "msi", "srf", "out")


@dataclass
class RunConfig:
    hsi: str = None
    msi: str = None
    srf: str = None
    out: str = None
    log: str = None
    ref: str = None
    figures: str = None
    groups_csv: str = None
    kernel: str = "gaussian:7:2"
    factor: int = 4
    n_atoms: int = 10
    n_groups: int = 400
    sqrt_q: int = 4
    alpha: tuple = (0.3, 0.03, 0.009)
    mu: float = 0.05
    eps: float = 1e-2
    tol: float = 1e-4
    max_iters: int = 50
    seed: int = 0
    sylvester: str = "cg"

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ParameterError(f"unknown configuration key(s): {', '.join(unknown)}")
        return cls(**mapping)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ParameterError(f"{path}: configuration must be a JSON object")
        return cls.from_mapping(data)

    def missing(self):
        return [name for name in REQUIRED if getattr(self, name) in (None, "")]

    def solver_config(self):
        return SolverConfig(
            alpha=tuple(self.alpha), mu=float(self.mu), n_atoms=int(self.n_atoms),
            n_groups=int(self.n_groups), sqrt_q=int(self.sqrt_q), eps=float(self.eps),
            max_iters=int(self.max_iters), tol=float(self.tol), seed=int(self.seed),
            sylvester=self.sylvester,
        )

    def validate(self):
        """Raise :class:`ParameterError` on any invalid value; returns the solver config."""
        if self.missing():
            raise ParameterError(f"missing required setting(s): {', '.join(self.missing())}")
        parse_kernel(self.kernel)
        if int(self.factor) < 1:
            raise ParameterError(f"factor must be a positive integer, got {self.factor}")
        if len(tuple(self.alpha)) != 3:
            raise ParameterError(f"alpha needs three values, got {self.alpha}")
        return self.solver_config()

    def to_dict(self):
        return asdict(self)
