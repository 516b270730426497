import csv
import json

import numpy as np
import pytest
import yaml

from dempc import io
from dempc.cases import lebanon_case, lebanon_day
from dempc.cli import EXIT_INPUT, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, main
from dempc.errors import InputError, StructuralError


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("case")
    return io.generate_lebanon_synthetic(d)


def _case_dict(files):
    return yaml.safe_load(files[0].read_text())


def test_case_round_trip(files):
    case = io.load_case(files[0])
    ref = lebanon_case()
    assert case.network == ref.network and case.fleet == ref.fleet
    assert case.partition.areas == ref.partition.areas
    assert case.aladin == ref.aladin and case.horizon == ref.horizon
    assert io.case_to_dict(case) == io.case_to_dict(ref)


def test_profile_round_trip(files):
    day, kw = io.load_profiles(files[1], io.load_case(files[0]))
    ref_day, ref_kw = lebanon_day()
    for k in io.PROFILE_KINDS:
        assert np.array_equal(kw[k], ref_kw[k])
    assert np.array_equal(day.forecast.p_ds, ref_day.forecast.p_ds)
    assert np.array_equal(day.realized.dc_a, ref_day.realized.dc_a)
    assert day.n_intervals == 288


def test_missing_branch_field_is_named(files):
    data = _case_dict(files)
    del data["network"]["branches"][3]["x"]
    with pytest.raises(InputError, match=r"case\.network\.branches\[3\]: missing field 'x'"):
        io.case_from_dict(data)


def test_wrong_type_is_named(files):
    data = _case_dict(files)
    data["network"]["buses"][2]["v_min"] = "low"
    with pytest.raises(InputError, match=r"buses\[2\]\.v_min: expected float"):
        io.case_from_dict(data)
    data = _case_dict(files)
    data["fleet"]["gc"][0]["colour"] = 1
    with pytest.raises(InputError, match="unknown fields"):
        io.case_from_dict(data)


def test_overlapping_areas_rejected(files):
    data = _case_dict(files)
    data["partition"]["areas"][1].append(data["partition"]["areas"][0][0])
    with pytest.raises(StructuralError, match="is in areas"):
        io.case_from_dict(data)


def test_invalid_network_rejected(files):
    data = _case_dict(files)
    data["network"]["branches"][0]["r"] = 0.0
    data["network"]["branches"][0]["x"] = 0.0
    with pytest.raises(StructuralError, match="zero series impedance"):
        io.case_from_dict(data)


def _rewrite(path, out, edit):
    with path.open() as fh:
        rows = list(csv.reader(fh))
    rows = edit(rows)
    with out.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    return out


def test_profile_errors(files, tmp_path):
    case = io.load_case(files[0])
    gap = _rewrite(files[1], tmp_path / "gap.csv", lambda r: r[:5] + r[6:])
    with pytest.raises(InputError, match="uniform grid|rows"):
        io.read_profiles(gap, case)
    unknown = _rewrite(files[1], tmp_path / "unknown.csv",
                       lambda r: r + [[r[1][0], "ghost", "p_ds", "0.0"]])
    with pytest.raises(InputError, match="unknown devices"):
        io.read_profiles(unknown, case)
    kind = _rewrite(files[1], tmp_path / "kind.csv", lambda r: r[:1] + [[r[1][0], r[1][1], "wind", "1"]] + r[1:])
    with pytest.raises(InputError, match="unknown series kind"):
        io.read_profiles(kind, case)
    bad = _rewrite(files[1], tmp_path / "bad.csv", lambda r: r[:1] + [r[1][:3] + ["abc"]] + r[2:])
    with pytest.raises(InputError, match="bad.csv:2"):
        io.read_profiles(bad, case)
    with pytest.raises(InputError, match="not found"):
        io.read_profiles(tmp_path / "none.csv", case)


def test_manifest_is_json(tmp_path):
    from dempc.sim import SimConfig
    m = io.run_manifest(lebanon_case(), sim=SimConfig(), out=tmp_path, x=np.arange(2.0))
    path = io.write_manifest(m, tmp_path / "m.json")
    back = json.loads(path.read_text())
    assert back["settings"]["x"] == [0.0, 1.0]
    assert back["case"]["network"]["base_mva"] == 10.0


def test_cli_exit_codes(files, tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["run-day", "--mode", "fast"]) == EXIT_USAGE
    assert main(["solve", "--case", str(tmp_path / "none.yaml"), "--profiles", str(files[1])]) == EXIT_INPUT
    assert main(["solve", "--case", str(files[0])]) == EXIT_INPUT
    assert main(["solve", "--t", "999"]) == EXIT_INPUT
    assert main(["--threads", "0", "solve"]) == EXIT_INPUT
    assert main(["generate-case", "--out", str(tmp_path / "gen")]) == EXIT_OK
    assert (tmp_path / "gen" / "case.yaml").read_bytes() == files[0].read_bytes()


def test_cli_solve_writes_outputs(files, tmp_path, capsys):
    out = tmp_path / "solve"
    code = main(["solve", "--mode", "both", "--t", "100", "--case", str(files[0]),
                 "--profiles", str(files[1]), "--out", str(out)])
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "deviation" in text
    assert {p.name for p in out.iterdir()} == {"solve.csv", "aladin_log.csv", "manifest.json"}
    settings = json.loads((out / "manifest.json").read_text())["settings"]
    assert settings["t"] == 100 and settings["mode"] == "both"


def test_cli_check_derivatives(capsys):
    assert main(["check-derivatives", "--points", "2"]) == EXIT_OK
    assert "flagged 0" in capsys.readouterr().out
    # an impossible threshold is reported as a failure
    assert main(["check-derivatives", "--points", "1", "--threshold", "0"]) == EXIT_SOLVER


def test_cli_short_runs_are_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run-day", "--mode", "both", "--intervals", "3", "--out", str(out)]) == EXIT_OK
        outs.append(out)
    for f in ("intervals.csv", "generation.csv", "deviation.csv", "consensus.csv", "summary.txt"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
