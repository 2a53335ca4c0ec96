import csv
import io

import pytest

from gossipage.cli import OK, TOLERANCE_FAILURE, USAGE_ERROR, main


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_exact_toy_like_line(capsys):
    assert main(["exact", "--kind", "line", "--n", "2"]) == OK
    rows = _rows(capsys.readouterr().out)
    assert [r["node"] for r in rows] == ["1", "2"]
    assert all(r["analytic_kind"] == "exact" for r in rows)


def test_exact_fc_matches_closed_form(capsys):
    from gossipage.analytic import fc_closed_form
    assert main(["exact", "--kind", "fully_connected", "--n", "5"]) == OK
    rows = _rows(capsys.readouterr().out)
    assert float(rows[0]["analytic"]) == pytest.approx(float(fc_closed_form(5, 1.0, 1.0, 1.0)[0]), rel=1e-9)


def test_exact_subsets_file(tmp_path):
    out = tmp_path / "sub.csv"
    assert main(["exact", "--kind", "ring", "--n", "3", "--subsets", "--out", str(out)]) == OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("subset_bitmask")
    assert len(lines) == 1 + 7


def test_simulate_writes_average_row(tmp_path):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--kind", "fully_connected", "--n", "4", "--horizon", "200", "--replications", "2",
               "--out", str(out)])
    assert rc == OK
    rows = _rows(out.read_text())
    assert [r["node"] for r in rows].count("avg") == 1
    assert sum(r["node"].isdigit() for r in rows) == 4


def test_simulate_is_reproducible(tmp_path):
    args = ["simulate", "--kind", "ring", "--n", "5", "--horizon", "100", "--replications", "2", "--seed", "4"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == OK
    assert main(args + ["--out", str(b)]) == OK
    assert a.read_bytes() == b.read_bytes()


def test_mdp_tiny_instance(capsys):
    assert main(["mdp", "--x-max", "4"]) == OK
    cap = capsys.readouterr()
    assert cap.out.splitlines()[0] == "b,XC,X1,action"
    assert "threshold in X_C: True" in cap.err


def test_fit_expectation(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("n,v_hat,protocol\n" + "".join(f"{n},{n ** 0.5},a\n" for n in (4, 16, 64))
                    + "4,1,b\n16,1,b\n64,1,b\n")
    out = tmp_path / "fit.txt"
    assert main(["fit", str(data), "--where", "protocol=a", "--expect", "0.45,0.55", "--out", str(out)]) == OK
    assert float(out.read_text().split()[1]) == pytest.approx(0.5, abs=1e-12)
    assert main(["fit", str(data), "--where", "protocol=b", "--expect", "0.45,0.55"]) == TOLERANCE_FAILURE


def test_unknown_kind_is_usage_error():
    assert main(["exact", "--kind", "moebius", "--n", "4"]) == USAGE_ERROR


def test_bad_flag_is_usage_error():
    assert main(["simulate", "--bogus"]) == USAGE_ERROR


def test_unwritable_output_is_usage_error():
    assert main(["exact", "--n", "3", "--out", "/nonexistent/dir/x.csv"]) == USAGE_ERROR


def test_config_section_feeds_defaults(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[exact]\nkind = ring\nn = 4\n")
    assert main(["exact", "--config", str(cfg)]) == OK
    assert len(_rows(capsys.readouterr().out)) == 4


def test_config_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[exact]\nnodes = 4\n")
    assert main(["exact", "--config", str(cfg)]) == USAGE_ERROR


def test_sweep_config_unknown_param_rejected(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[experiment]\nname = moments\n[params]\nwarp = 9\n")
    assert main(["sweep", "--config", str(cfg)]) == USAGE_ERROR


def test_sweep_unknown_experiment():
    assert main(["sweep", "--experiment", "nope"]) == USAGE_ERROR


def test_sweep_list(capsys):
    assert main(["sweep", "--list"]) == OK
    assert len(capsys.readouterr().out.splitlines()) == 15


def test_sweep_passing_config(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["sweep", "--config", "configs/quick/02_toy_and_closed_forms.ini", "--out", str(out)]) == OK
    assert out.read_text().startswith("n,protocol,param,node,v_hat,se,analytic,analytic_kind")


def test_sweep_failing_check_exits_one(tmp_path):
    # at quick sizes the fully distributed scheme misses its target
    out = tmp_path / "o.csv"
    assert main(["sweep", "--config", "configs/quick/07_age_aware_schemes.ini", "--out", str(out)]) \
        == TOLERANCE_FAILURE
