from pathlib import Path

import pytest

from gossipage import config, experiments
from gossipage.experiments import Result

CONFIGS = sorted(Path(__file__).resolve().parents[1].glob("configs/**/*.ini"))


def test_registry_has_every_criterion():
    assert sorted(e.exp_id for e in experiments.REGISTRY.values()) == list(range(1, 16))
    assert experiments.get("7").name == experiments.get("age_aware_schemes").name


def test_unknown_experiment():
    with pytest.raises(KeyError):
        experiments.get("nope")


def test_unknown_parameter_rejected():
    with pytest.raises(KeyError):
        experiments.get("moments").params({"warp": 1})


def test_csv_rows_are_sorted_and_exact():
    res = Result(0, "t")
    res.row(8, "b", "x", 2, 0.1 + 0.2, None, None, "")
    res.row(4, "a", "x", 1, 1 / 3, 0.5, 2.0, "exact")
    lines = res.csv_text().splitlines()
    assert lines[0] == ",".join(experiments.COLUMNS)
    assert lines[1].startswith("4,a,x,1,0.3333333333333333,0.5,2.0,exact")
    assert "0.30000000000000004" in lines[2]


def test_checks_decide_pass():
    res = Result(0, "t")
    res.check("a", True, "")
    assert res.passed
    res.check("b", False, "")
    assert not res.passed
    assert "FAIL" in res.summary()


@pytest.mark.parametrize("name", ["toy_and_closed_forms", "moments", "renewal"])
def test_quick_runs_are_byte_identical(name):
    e = experiments.get(name)
    assert e.run(seed=3, quick=True).csv_text() == e.run(seed=3, quick=True).csv_text()


def test_seed_changes_simulated_output():
    e = experiments.get("moments")
    assert e.run(seed=1, quick=True).csv_text() != e.run(seed=2, quick=True).csv_text()


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: f"{p.parent.name}/{p.name}")
def test_shipped_configs_load(path):
    raw = config.read_raw(path.read_text())
    exp = experiments.get(raw["experiment"]["name"])
    schema = {"experiment": {"name": "", "seed": 0, "threads": 1, "quick": False},
              "params": exp.defaults, "output": {"path": ""}}
    vals = config.parse(path.read_text(), schema, str(path))
    overrides = {k: v for k, v in vals["params"].items() if k in raw.get("params", {})}
    exp.params(overrides, vals["experiment"]["quick"])
    assert path.name.startswith(f"{exp.exp_id:02d}_")
