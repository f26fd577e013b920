import json

import pytest

from hsifusion.config import RunConfig
from hsifusion.errors import ParameterError
from hsifusion.solver import SolverConfig


def test_defaults_match_reference_parameters():
    cfg = RunConfig()
    sc = cfg.solver_config()
    assert isinstance(sc, SolverConfig)
    assert sc.alpha == (0.3, 0.03, 0.009) and sc.mu == 0.05 and sc.n_atoms == 10 and sc.n_groups == 400
    assert cfg.kernel == "gaussian:7:2" and cfg.factor == 4
    assert cfg.missing() == ["hsi", "msi", "srf", "out"]


def test_unknown_keys_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"hsi": "a", "lambda": 3}))
    with pytest.raises(ParameterError, match="lambda"):
        RunConfig.from_json(p)
    p.write_text("[1, 2]")
    with pytest.raises(ParameterError):
        RunConfig.from_json(p)


def test_validate(tmp_path):
    cfg = RunConfig.from_mapping(dict(hsi="a", msi="b", srf="c", out="d", mu=0.1, alpha=[0.1, 0.2, 0.3]))
    sc = cfg.validate()
    assert sc.mu == 0.1 and sc.alpha == (0.1, 0.2, 0.3)
    assert RunConfig.from_mapping(cfg.to_dict()) == cfg
    for bad in (dict(kernel="box"), dict(factor=0), dict(alpha=[1, 2]), dict(mu=-1), dict(out=None)):
        with pytest.raises(ParameterError):
            RunConfig.from_mapping({**cfg.to_dict(), **bad}).validate()
