import json

import pytest

from mescsim.config import ConfigError, load_config, read_config
from mescsim.simulator import Policy


def test_defaults():
    cfg = load_config(None)
    assert cfg.count == 1
    assert cfg.sim.sys == cfg.system
    assert cfg.experiment.sim is cfg.sim


def test_sections_propagate():
    cfg = load_config({
        "system": {"t_sr": 4000},
        "gen": {"n_tasks": 5},
        "sim": {"policy": "amc", "overrun_prob": 0.3},
        "experiment": {"sets_per_point": 7},
        "count": 3,
    })
    assert cfg.sim.sys.t_sr == 4000
    assert cfg.sim.policy is Policy.AMC
    assert cfg.experiment.gen.n_tasks == 5
    assert cfg.experiment.sets_per_point == 7
    assert cfg.count == 3


@pytest.mark.parametrize("doc", [
    {"bogus": {}},
    {"sim": {"speed": 2}},
    {"profile": {"warp": 1}},
    {"gen": {"crit_proportion": 2}},
    {"system": {"t_sr": 100, "y_cpu_check": 100}},
    {"count": 0},
    [1, 2],
])
def test_rejects_bad_documents(doc):
    with pytest.raises(ConfigError):
        load_config(doc)


def test_read_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"gen": {"seed": 4}}))
    assert read_config(p).gen.seed == 4
    with pytest.raises(ConfigError):
        read_config(tmp_path / "missing.json")
    p.write_text("{")
    with pytest.raises(ConfigError):
        read_config(p)
