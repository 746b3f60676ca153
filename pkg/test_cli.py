import csv
import json
import math

import numpy as np
import pytest
from inline_snapshot import snapshot

from spatial_ssf import cli
from spatial_ssf.lsf import default_config_path


def _rows(path):
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _gen(capsys, *args):
    assert cli.main(["gen", *args]) == 0
    return json.loads(capsys.readouterr().out)


def test_parser_defaults():
    args = cli.build_parser().parse_args(["eval"])
    spec = cli.spec_from_args(args)
    assert spec.command == "eval"
    assert spec.config == default_config_path()
    assert (spec.mts, spec.radius_m, spec.bs_height_m, spec.mt_height_m) == (
        500,
        200.0,
        10.0,
        1.5,
    )
    assert spec.out_dir.name == "out"


def test_parser_reads_gen_positions():
    args = cli.build_parser().parse_args(["gen", "--tx", "1,2,3", "--rx", "4 5 6"])
    spec = cli.spec_from_args(args)
    assert spec.tx == (1.0, 2.0, 3.0)
    assert spec.rx == (4.0, 5.0, 6.0)
    assert spec.condition == "LOS"


def test_parser_rejects_malformed_position(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args(["gen", "--tx", "1,2"])
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert len(err.strip().splitlines()) == 1
    assert err.startswith("error: UsageError: spatial-ssf gen: ")
    assert "--tx" in err


@pytest.mark.parametrize(
    "argv", [[], ["bogus"], ["eval", "--mts", "many"], ["max-as", "--dimension", "diagonal"]]
)
def test_usage_errors_are_one_line(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2
    lines = capsys.readouterr().err.strip().splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("error: UsageError: spatial-ssf")


@pytest.mark.parametrize(
    "kwargs",
    [{"mts": 0}, {"radius_m": 0.0}, {"bs_height_m": -1.0}, {"seed": -3}, {"workers": 0}],
)
def test_run_spec_validation(kwargs):
    with pytest.raises(ValueError):
        cli.RunSpec(command="eval", config=default_config_path(), **kwargs)


def test_kf_grid():
    assert cli.kf_grid(-30.0, 30.0, 2.0).tolist()[:3] == [-30.0, -28.0, -26.0]
    assert cli.kf_grid(-30.0, 30.0, 2.0).size == 31
    assert cli.kf_grid(5.0, 5.0, 1.0).tolist() == [5.0]
    with pytest.raises(ValueError):
        cli.kf_grid(0.0, 1.0, 0.0)


def test_place_mts_stay_inside_cell():
    mts = cli.place_mts(1000, 200.0, 1.5, seed=3)
    assert mts.shape == (1000, 3)
    assert np.all(np.hypot(mts[:, 0], mts[:, 1]) <= 200.0)
    assert np.all(mts[:, 2] == 1.5)
    assert np.array_equal(mts, cli.place_mts(1000, 200.0, 1.5, seed=3))


def test_eval_with_one_mt(tmp_path):
    assert cli.main(["eval", "--mts", "1", "--out", str(tmp_path)]) == 0
    for parameter in ("ds", "asd", "asa", "esd", "esa"):
        rows = _rows(tmp_path / f"{parameter}.csv")
        assert tuple(rows[0]) == cli.EVAL_HEADER
        keys = [(r[0], r[1]) for r in rows[1:]]
        assert len(keys) == len(set(keys)) == 6
    summary = _rows(tmp_path / "summary.csv")
    assert len(summary) == 1 + 5 * 2 * 3


def test_csv_headers():
    assert cli.EVAL_HEADER == snapshot(
        ("frequency_ghz", "condition", "input_value", "output_value")
    )
    assert cli.SUMMARY_HEADER == snapshot(
        (
            "parameter",
            "condition",
            "frequency_ghz",
            "input_median",
            "output_median",
            "median_ratio",
            "unit",
        )
    )
    assert cli.ACF_HEADER == snapshot(("d_lambda_m", "distance_m", "empirical_rho", "target_rho"))
    assert cli.MAX_AS_HEADER == snapshot(("kf_db", "dimension", "achieved_as_deg"))


def test_eval_output_is_byte_identical_across_runs_and_workers(tmp_path):
    base = ["eval", "--mts", "4", "--seed", "11"]
    assert cli.main([*base, "--out", str(tmp_path / "a")]) == 0
    assert cli.main([*base, "--out", str(tmp_path / "b")]) == 0
    assert cli.main([*base, "--workers", "3", "--out", str(tmp_path / "c")]) == 0
    for name in ("ds.csv", "asa.csv", "summary.csv"):
        first = (tmp_path / "a" / name).read_bytes()
        assert first == (tmp_path / "b" / name).read_bytes()
        assert first == (tmp_path / "c" / name).read_bytes()
        assert b"\r\n" not in first


def test_eval_frequency_override(tmp_path):
    argv = ["eval", "--mts", "2", "--frequencies-ghz", "6", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    rows = _rows(tmp_path / "ds.csv")[1:]
    assert {r[0] for r in rows} == {"6"}
    assert len(rows) == 2 * 2


def test_gen_powers_sum_to_one(capsys):
    doc = _gen(capsys, "--seed", "5")
    assert doc["condition"] == "LOS"
    assert doc["frequencies_ghz"] == [1.0, 6.0, 60.0]
    assert len(doc["powers"]) == 3
    for powers in doc["powers"]:
        assert len(powers) == len(doc["delays_s"])
        assert math.fsum(powers) == pytest.approx(1.0, abs=1e-12)
    assert doc["delays_s"][0] == 0.0


def test_gen_json_keys(capsys):
    assert sorted(_gen(capsys)) == snapshot(
        [
            "aoa_az_rad",
            "aoa_el_rad",
            "aod_az_rad",
            "aod_el_rad",
            "condition",
            "delays_s",
            "frequencies_ghz",
            "powers",
            "rx_pos",
            "tx_pos",
        ]
    )


def test_gen_swapped_link_has_identical_delays(capsys):
    fwd = _gen(capsys, "--tx", "0,0,10", "--rx", "40,-25,1.5", "--seed", "2")
    rev = _gen(capsys, "--tx", "40,-25,1.5", "--rx", "0,0,10", "--seed", "2")
    assert fwd["delays_s"] == rev["delays_s"]
    assert fwd["powers"] == rev["powers"]
    assert fwd["aod_az_rad"] == rev["aoa_az_rad"]
    assert fwd["aoa_el_rad"] == rev["aod_el_rad"]


def test_gen_single_frequency_and_nlos(capsys):
    doc = _gen(capsys, "--condition", "NLOS", "--frequencies-ghz", "28")
    assert doc["condition"] == "NLOS"
    assert len(doc["powers"]) == 1
    assert len(doc["delays_s"]) == 19


def test_gen_writes_file_and_trace(tmp_path, capsys):
    assert cli.main(["gen", "--out", str(tmp_path), "--trace"]) == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "stage timings" in captured.err
    doc = json.loads((tmp_path / "gen.json").read_text(encoding="utf-8"))
    assert len(doc["powers"]) == 3


def test_acf_check_rows(tmp_path):
    assert cli.main(["acf-check", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "acf_check.csv")
    assert tuple(rows[0]) == cli.ACF_HEADER
    body = [[float(x) for x in r] for r in rows[1:]]
    assert sorted({r[0] for r in body}) == [12.0, 15.0]
    assert len(body) == 2 * 17
    for d_lambda, d, empirical, target in body:
        if d == 0.0:
            assert empirical == 1.0
        if d == 2 * d_lambda:
            assert target == pytest.approx(math.exp(-2.0), abs=1e-6)
        if d == d_lambda == 15.0:
            assert empirical == pytest.approx(math.exp(-1.0), abs=0.07)


def test_max_as_single_point(tmp_path):
    argv = [
        "max-as",
        "--kf-min",
        "0",
        "--kf-max",
        "0",
        "--trials",
        "2",
        "--dimension",
        "azimuth",
        "--out",
        str(tmp_path),
    ]
    assert cli.main(argv) == 0
    rows = _rows(tmp_path / "max_as.csv")
    assert tuple(rows[0]) == cli.MAX_AS_HEADER
    assert len(rows) == 2
    assert rows[1][:2] == ["0", "azimuth"]
    assert 0.0 < float(rows[1][2]) < 180.0


def _single_error_line(capsys) -> str:
    err = capsys.readouterr().err
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return lines[0]


def test_coincident_link_ends_fail_cleanly(capsys):
    assert cli.main(["gen", "--tx", "1,1,1", "--rx", "1,1,1"]) == 1
    assert _single_error_line(capsys).startswith("error: ValueError: ")


def test_missing_config_fails_cleanly(tmp_path, capsys):
    assert cli.main(["gen", "--config", str(tmp_path / "nope.toml")]) == 1
    assert _single_error_line(capsys).startswith("error: ConfigError: cannot read config")


def test_invalid_config_names_field(tmp_path, capsys):
    text = default_config_path().read_text(encoding="utf-8").replace(
        "path_count = 12", "path_count = 1"
    )
    path = tmp_path / "bad.toml"
    path.write_text(text, encoding="utf-8")
    assert cli.main(["eval", "--config", str(path), "--out", str(tmp_path)]) == 1
    line = _single_error_line(capsys)
    assert "LOS.path_count: path_count must be ≥ 2" in line


def test_invalid_run_spec_fails_cleanly(capsys):
    assert cli.main(["eval", "--mts", "0"]) == 1
    assert _single_error_line(capsys) == "error: ValueError: MT count must be >= 1"
