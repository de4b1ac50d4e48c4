import orjson
import pytest

from conftest import DATA_DIR
from windflex.config import LEVEL_PRESETS, ReserveConfig, load_run_config, parse_run_config, settings
from windflex.errors import ConfigError


def _doc(**extra):
    return {"name": "t", "data": {"grid_case": "toy_case.json", "synthetic": {"days": 10}}, **extra}


def test_toy_config_loads(toy_config_path):
    cfg = load_run_config(toy_config_path)
    assert cfg.name == "toy"
    assert cfg.resolve(cfg.data.grid_case) == (DATA_DIR / "toy_case.json").resolve()
    assert cfg.run_id().startswith("toy-") and cfg.run_id().endswith("-s42")


def test_hash_is_stable_and_sensitive():
    a = parse_run_config(_doc(), DATA_DIR)
    b = parse_run_config(_doc(), DATA_DIR)
    assert a.config_hash() == b.config_hash()
    assert a.with_overrides(seed=1).config_hash() != a.config_hash()
    assert a.with_overrides(**{"reserve.level": 2}).reserve.level == 2


def test_overrides_keep_base_dir():
    cfg = parse_run_config(_doc(), DATA_DIR).with_overrides(**{"stressor.n_scenarios": 7})
    assert cfg.stressor.n_scenarios == 7
    assert cfg.base_dir == DATA_DIR.resolve()


@pytest.mark.parametrize("doc, match", [
    (_doc(policy="regional"), "policy"),
    (_doc(unknown=1), "unknown"),
    ({"name": "t", "data": {"grid_case": "toy_case.json"}}, "data.synthetic"),
    (_doc(penalties={"redispatch_in": 9.0, "redispatch_out": 5.0}), "redispatch_in"),
    (_doc(penalties={"redispatch_in": 5.0, "redispatch_out": 5.0}), "redispatch_in"),
    (_doc(name="has space"), "name"),
    (_doc(reserve={"level": 6}), "reserve.level"),
])
def test_invalid_documents(doc, match):
    with pytest.raises(ConfigError, match=match):
        parse_run_config(doc, DATA_DIR)


def test_missing_referenced_file(tmp_path):
    with pytest.raises(ConfigError, match="nowhere.json"):
        parse_run_config({"data": {"grid_case": "nowhere.json", "synthetic": {}}}, tmp_path)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON") as info:
        load_run_config(bad)
    assert info.value.exit_code == 2


def test_environment_overrides_solver(monkeypatch):
    monkeypatch.setattr(settings, "threads", 3)
    monkeypatch.setattr(settings, "solver", "appsi_highs")
    cfg = parse_run_config(_doc(), DATA_DIR)
    assert cfg.solver.threads == 3
    assert cfg.solver.name == "appsi_highs"


def test_level_values():
    r = ReserveConfig(method="risk", level=2)
    assert r.level_value() == LEVEL_PRESETS["risk"][1]
    assert r.level_value("extent", 5) == 0.25
    assert ReserveConfig(method="probability", value=0.9).level_value() == 0.9
    assert all(len(v) == 5 and list(v) == sorted(v) for v in LEVEL_PRESETS.values())


def test_config_file_round_trip(tmp_path):
    (tmp_path / "toy_case.json").write_bytes((DATA_DIR / "toy_case.json").read_bytes())
    path = tmp_path / "run.json"
    path.write_bytes(orjson.dumps(_doc(seed=9)))
    assert load_run_config(path).seed == 9
