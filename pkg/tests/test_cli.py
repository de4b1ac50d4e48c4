import orjson
import pytest

from conftest import DATA_DIR, requires_solver
from windflex.cli import build_parser, main


def test_parser_knows_every_stage():
    parser = build_parser()
    for cmd in ("ingest", "fit", "stress", "size", "scuc", "rt", "evaluate", "pipeline"):
        args = parser.parse_args([cmd, "--config", "c.json", "--seed", "3"])
        assert args.cmd == cmd and args.seed == 3
    with pytest.raises(SystemExit):
        parser.parse_args(["fit"])


def test_simulate_writes_inputs(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path), "--days", "3"]) == 0
    for name in ("history", "forecast", "actual"):
        assert (tmp_path / f"{name}.csv").exists()
    assert "history:" in capsys.readouterr().out


def test_bad_config_exits_with_data_code(tmp_path):
    assert main(["fit", "--config", str(tmp_path / "absent.json")]) == 2


def test_stage_out_of_order_exits_with_data_code(tmp_path, toy_config_path):
    assert main(["size", "--config", str(toy_config_path), "--out", str(tmp_path / "run")]) == 2


@requires_solver
@pytest.mark.slow
def test_pipeline_command(tmp_path, capsys):
    doc = orjson.loads((DATA_DIR / "toy_config.json").read_bytes())
    doc["data"]["grid_case"] = str(DATA_DIR / "toy_case.json")
    doc["data"]["synthetic"]["days"] = 20
    doc["stressor"]["n_scenarios"] = 40
    path = tmp_path / "cfg.json"
    path.write_bytes(orjson.dumps(doc))
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(path), "--seed", "5", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "-s5: rt_total=" in printed
    assert (out / "report.json").exists()
    assert not (out / "INCOMPLETE").exists()
