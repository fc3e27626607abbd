import json

import pytest

from robustexotic.cli import EXIT_INPUT, EXIT_NA, EXIT_OK, main
from robustexotic.examples import NAMES, example_paths, lattice_market


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_price_bin2(capsys):
    code, out, _ = _run(capsys, "price", "--example", "bin2")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["primal_original"] == doc["dual_enlarged"] == "1/2"


def test_output_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["price", "--example", "gap", "--out", str(a)]) == EXIT_OK
    assert main(["price", "--example", "gap", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_missing_file(capsys, tmp_path):
    code, _, err = _run(capsys, "price", "--market", str(tmp_path / "nope.json"), "--actions", "x.json")
    assert code == EXIT_INPUT
    assert err.startswith("market_model: file not found")


def test_malformed_market(capsys, tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text('{"horizon": 1}')
    _, apath = example_paths("bin2")
    code, _, err = _run(capsys, "price", "--market", str(bad), "--actions", str(apath))
    assert code == EXIT_INPUT and err.startswith("market_model:")


def test_missing_arguments(capsys):
    code, _, err = _run(capsys, "price")
    assert code == EXIT_INPUT and "--example" in err


def test_path_budget(capsys):
    code, _, err = _run(capsys, "price", "--example", "swing-gas", "--budget-paths", "100")
    assert code == EXIT_INPUT and "budget" in err


def test_arbitrage_exit_code(capsys, tmp_path):
    mpath = tmp_path / "arb.json"
    mpath.write_text(json.dumps(lattice_market(4, [1, 2], [["1/2", "1/2"]], 2)))
    _, apath = example_paths("bin2")
    code, out, _ = _run(capsys, "check-na", "--market", str(mpath), "--actions", str(apath))
    assert code == EXIT_NA
    assert json.loads(out)["original"]["holds"] is False
    code, _, err = _run(capsys, "hedge", "--market", str(mpath), "--actions", str(apath))
    assert code == EXIT_NA and err.startswith("arbitrage:")


def test_hedge_csv(capsys):
    code, out, _ = _run(capsys, "hedge", "--example", "bin2")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "kind,level,atom_key,values"
    assert lines[1] == "capital,0,,1/2"
    assert "position,0,|0,-1/2" in lines


def test_hedge_refuses_static_options(capsys):
    code, _, err = _run(capsys, "hedge", "--example", "gap")
    assert code == EXIT_INPUT and err.startswith("dp_engine:")


def test_dump_values_row_count(capsys, tmp_path):
    target = tmp_path / "v.csv"
    assert main(["dump-values", "--example", "bin2", "--dump-values", str(target)]) == EXIT_OK
    lines = target.read_text().splitlines()
    # header, level 2: 4 leaves x 3 prefixes ((1, 1) is pruned), level 1: 2 nodes x 2, level 0: 1 atom
    assert len(lines) == 1 + 12 + 4 + 1


def test_gap_command(capsys):
    code, out, _ = _run(capsys, "gap", "--example", "gap")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["flags"]["naive_lt_dual"] and doc["flags"]["primal_eq_dual"]


@pytest.mark.parametrize("name", [n for n in NAMES if n != "swing-gas"])
def test_every_example_prices(capsys, name):
    code, out, _ = _run(capsys, "price", "--example", name)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["flags"]["primal_eq_dual"]


def test_swing_float_dp(capsys):
    code, out, _ = _run(capsys, "dump-values", "--example", "swing-gas", "--mode", "float")
    assert code == EXIT_OK
    assert out.splitlines()[1].split(",")[2] == "7500.0"
