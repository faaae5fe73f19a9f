import re

import numpy as np
import pytest

from primebias import biasmodel as bm
from primebias import cli
from primebias import families as fam
from primebias import groups as gr
from primebias import zerodata as zd
from primebias.errors import DataMissingError, InputError, InvariantError


def read_csv(path):
    """(header_lines, column_names, data_rows) from one emitted file."""
    header, rows = [], []
    columns = None
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            header.append(line)
        elif columns is None:
            columns = line.split(",")
        else:
            rows.append(line.split(","))
    return header, columns, rows


# -- configuration


def test_config_file_parsing(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "[family]\n"
        "family = cyclotomic  # which catalog entry\n"
        "q = 4\n"
        "\n"
        "[run]\n"
        "cache-dir = /tmp/zeros\n")
    assert cli.parse_config_file(str(path)) == {
        "family": "cyclotomic", "q": "4", "cache_dir": "/tmp/zeros"}


def test_config_file_rejects_bad_lines(tmp_path):
    for body, fragment in [
            ("family cyclotomic\n", "key = value"),
            ("colour = blue\n", "unknown key"),
            ("q = 4\nq = 5\n", "duplicate"),
            ("subcommand = race\n", "unknown key"),
    ]:
        path = tmp_path / "bad.cfg"
        path.write_text(body)
        with pytest.raises(InputError, match=fragment):
            cli.parse_config_file(str(path))
    with pytest.raises(InputError, match="cannot read"):
        cli.parse_config_file(str(tmp_path / "missing.cfg"))


def test_run_config_validation():
    with pytest.raises(InputError):
        cli.RunConfig(subcommand="frobnicate")
    with pytest.raises(InputError):
        cli.RunConfig(subcommand="race", xmax=1)
    with pytest.raises(InputError):
        cli.RunConfig(subcommand="race", samples=0)
    with pytest.raises(InputError):
        cli.RunConfig(subcommand="race", checkpoints=1)
    with pytest.raises(InputError):
        cli.RunConfig(subcommand="density", precision=0.5)


def test_flags_override_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("xmax = 5000\nseed = 3\n")
    cfg = cli.parse_args(["race", "--config", str(path), "--xmax", "7000"])
    assert cfg.xmax == 7000
    assert cfg.seed == 3
    cfg = cli.parse_args(["race", "--config", str(path)])
    assert cfg.xmax == 5000


def test_config_coercion_failure(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("xmax = soon\n")
    assert cli.main(["race", "--config", str(path)]) == 2


def test_config_hash_ignores_execution_keys():
    base = cli.RunConfig(subcommand="race", family="cyclotomic", q=4)
    moved = cli.RunConfig(subcommand="race", family="cyclotomic", q=4,
                          workers=16, out="/tmp/a", cache_dir="/tmp/b")
    changed = cli.RunConfig(subcommand="race", family="cyclotomic", q=3)
    assert cli.config_hash(base) == cli.config_hash(moved)
    assert cli.config_hash(base) != cli.config_hash(changed)
    assert re.fullmatch(r"[0-9a-f]{12}", cli.config_hash(base))


def test_parse_assumptions():
    a = cli.parse_assumptions("ac,grh,li")
    assert a.ac and a.grh and a.li and not a.bm
    assert cli.parse_assumptions("li").grh  # LI pulls in GRH
    a = cli.parse_assumptions("grh,bm:2")
    assert a.bm and a.m0 == 2 and not a.li
    assert cli.parse_assumptions("grh,bm").m0 == 1
    assert cli.parse_assumptions("grh,ord-flip").ord_term_sign == -1
    assert not cli.parse_assumptions("").ac
    with pytest.raises(InputError):
        cli.parse_assumptions("grh,psi")
    with pytest.raises(InputError):
        cli.parse_assumptions("bm:x")


# -- catalog plumbing


def test_build_family_dispatch():
    assert cli.build_family(cli.RunConfig(
        subcommand="table", family="cyclotomic", q=5)).label == "cyclotomic"
    assert cli.build_family(cli.RunConfig(
        subcommand="table", family="quadratic", d=5)).label == "quadratic"
    spec = cli.build_family(cli.RunConfig(
        subcommand="table", family="multiquadratic", primes="3,5"))
    assert spec.label == "multiquadratic"
    assert cli.build_family(cli.RunConfig(
        subcommand="table", family="radical", a=3, p=5)).label == "radical"


def test_build_family_errors():
    for cfg in [
            cli.RunConfig(subcommand="table"),
            cli.RunConfig(subcommand="table", family="cyclotomic"),
            cli.RunConfig(subcommand="table", family="quadratic"),
            cli.RunConfig(subcommand="table", family="multiquadratic"),
            cli.RunConfig(subcommand="table", family="multiquadratic",
                          primes="3,x"),
            cli.RunConfig(subcommand="table", family="radical", a=3),
            cli.RunConfig(subcommand="table", family="icosahedral"),
    ]:
        with pytest.raises(InputError):
            cli.build_family(cfg)


def test_build_race():
    spec = fam.cyclotomic_extension(4)
    t = cli.build_race(spec, "race:3,1")
    group = spec.group()
    # normalized indicators: |G|/|C| = 2 for both residue classes mod 4
    assert t.values[group.class_names.index("3")] == 2
    assert t.values[group.class_names.index("1")] == -2
    single = cli.build_race(spec, "race:3")
    assert single.values[group.class_names.index("3")] == 2
    balanced = cli.build_race(spec, "one-minus-r")
    assert balanced.values == pytest.approx(
        1.0 - gr.root_count(spec.group(), 2).values)
    for bad in (None, "", "race:", "race:1,3,2", "first-to-win"):
        with pytest.raises(InputError):
            cli.build_race(spec, bad)


def test_load_zero_sources_bundled():
    spec = fam.cyclotomic_extension(4)
    cfg = cli.RunConfig(subcommand="bias", family="cyclotomic", q=4,
                        t="race:3,1")
    t = cli.build_race(spec, cfg.t)
    zeros = cli.load_zero_sources(cfg, spec, t)
    nontrivial = 1 - spec.group_plus.trivial_char_index
    assert set(zeros) == {nontrivial}
    assert zeros[nontrivial].label == "dirichlet-4"


def test_load_zero_sources_truncates():
    spec = fam.cyclotomic_extension(4)
    cfg = cli.RunConfig(subcommand="bias", family="cyclotomic", q=4,
                        t="race:3,1", height=200.0)
    t = cli.build_race(spec, cfg.t)
    zeros = cli.load_zero_sources(cfg, spec, t)
    (zs,) = zeros.values()
    assert zs.height == pytest.approx(200.0)
    assert zs.ordinates[-1] <= 200.0


def test_load_zero_sources_synthetic_cache(tmp_path, monkeypatch):
    monkeypatch.delenv(cli.CACHE_ENV, raising=False)
    spec = fam.quadratic_extension(5)
    cfg = cli.RunConfig(subcommand="bias", family="quadratic", d=5,
                        t="race:1,0", zeros="synthetic:11:400",
                        cache_dir=str(tmp_path))
    t = cli.build_race(spec, cfg.t)
    first = cli.load_zero_sources(cfg, spec, t)
    assert list(tmp_path.iterdir())  # populated the cache
    again = cli.load_zero_sources(cfg, spec, t)
    third = cli.load_zero_sources(cfg, spec, t)
    for idx in first:
        # cache files round ordinates to 9 decimals, so reads are near-exact
        assert np.allclose(first[idx].ordinates, again[idx].ordinates,
                           atol=1e-8)
        assert np.array_equal(again[idx].ordinates, third[idx].ordinates)
        assert first[idx].synthetic


def test_load_zero_sources_file_assignment(tmp_path):
    zs = zd.ZeroSet(label="file-test", ordinates=[5.0, 9.0],
                    multiplicities=[1, 1], height=12.0)
    path = tmp_path / "char1.zeros"
    zd.save_zeros(zs, str(path))
    spec = fam.cyclotomic_extension(4)
    cfg = cli.RunConfig(subcommand="bias", family="cyclotomic", q=4,
                        t="race:3,1", zeros=f"1={path}")
    t = cli.build_race(spec, cfg.t)
    zeros = cli.load_zero_sources(cfg, spec, t)
    assert list(zeros) == [1]
    assert zeros[1].ordinates.tolist() == [5.0, 9.0]


def test_load_zero_sources_bad_specs():
    spec = fam.cyclotomic_extension(4)
    t = cli.build_race(spec, "race:3,1")
    for source in ("synthetic", "synthetic:x", "synthetic:1:2:3:4",
                   "justapath", "x=/nope"):
        cfg = cli.RunConfig(subcommand="bias", family="cyclotomic", q=4,
                            t="race:3,1", zeros=source)
        with pytest.raises(InputError):
            cli.load_zero_sources(cfg, spec, t)


# -- CSV emission


def test_fmt_values():
    assert cli._fmt(None) == ""
    assert cli._fmt(float("nan")) == "nan"
    assert cli._fmt(float("inf")) == "inf"
    assert cli._fmt(float("-inf")) == "-inf"
    assert cli._fmt(0.1234567890123456) == "0.123456789012"
    assert cli._fmt(3) == "3"
    assert cli._fmt("label") == "label"


def test_render_csv_header_block():
    cfg = cli.RunConfig(subcommand="table", family="cyclotomic", q=4)
    text = cli.render_csv(cfg, ("a", "b"), [(1, 2), {"a": 3, "b": None}],
                          heights=[("character-1", 100.0)],
                          flags=["shape only: x", "shape only: x"])
    lines = text.splitlines()
    assert lines[0] == "# primebias table"
    assert lines[1] == f"# config-hash: {cli.config_hash(cfg)}"
    assert lines[2].startswith("# assume: ")
    assert lines[3] == "# truncation-heights: character-1=100"
    assert lines[4] == "# non-certified: shape only: x"  # deduplicated
    assert lines[5] == "# columns: a,b"
    assert lines[6] == "a,b"
    assert lines[7] == "1,2"
    assert lines[8] == "3,"


# -- subcommands end to end


def test_table_subcommand(tmp_path):
    assert cli.main(["table", "--family", "cyclotomic", "--q", "4",
                     "--out", str(tmp_path)]) == 0
    header, columns, rows = read_csv(tmp_path / "table.csv")
    assert columns == ["char_index", "degree", "real", "f_2", "log_conductor"]
    assert len(rows) == 2
    by_index = {row[0]: row for row in rows}
    trivial = str(fam.cyclotomic_extension(4).group_plus.trivial_char_index)
    assert float(by_index[trivial][4]) == pytest.approx(0.0)
    other = rows[1 - int(trivial)]
    assert float(other[4]) == pytest.approx(np.log(4.0))
    assert other[3] == "2"  # conductor exponent of the odd character at 2


def test_bias_subcommand(tmp_path, capsys):
    assert cli.main(["bias", "--family", "cyclotomic", "--q", "4",
                     "--t", "race:3,1", "--out", str(tmp_path)]) == 0
    header, columns, rows = read_csv(tmp_path / "bias.csv")
    assert columns == list(bm.REPORT_COLUMNS)
    row = dict(zip(columns, rows[0]))
    assert float(row["mean"]) == pytest.approx(2.0)
    assert float(row["variance"]) == pytest.approx(0.6137117051263771,
                                                   rel=1e-9)
    assert float(row["B"]) == pytest.approx(2.5529822328761904, rel=1e-9)
    assert any("truncation-heights: character-1=" in h for h in header)
    _, phi_cols, phi_rows = read_csv(tmp_path / "phi.csv")
    assert phi_cols == ["xi", "abs_phi"]
    assert phi_rows[0] == ["0", "1"]
    assert float(phi_rows[-1][1]) < 1e-6  # envelope cut where phi is tiny
    assert "mean 2, variance 0.613711705126" in capsys.readouterr().out


def test_density_subcommand(tmp_path):
    assert cli.main(["density", "--family", "cyclotomic", "--q", "4",
                     "--t", "race:3,1", "--samples", "20000", "--seed", "5",
                     "--precision", "1e-4", "--out", str(tmp_path)]) == 0
    _, columns, rows = read_csv(tmp_path / "density.csv")
    row = dict(zip(columns, rows[0]))
    assert float(row["delta_inversion"]) == pytest.approx(0.99621818,
                                                          abs=1e-6)
    mc = float(row["delta_mc"])
    se = float(row["mc_se"])
    assert abs(mc - 0.99621818) < 4 * se + 1e-4
    assert float(row["delta_gaussian"]) == pytest.approx(0.9946597527845829,
                                                         abs=1e-6)


def test_race_subcommand_and_worker_determinism(tmp_path, capsys):
    out1 = tmp_path / "w1"
    out4 = tmp_path / "w4"
    args = ["race", "--family", "cyclotomic", "--q", "4", "--t", "race:3,1",
            "--xmax", "100000", "--checkpoints", "300"]
    assert cli.main(args + ["--workers", "1", "--out", str(out1)]) == 0
    assert cli.main(args + ["--workers", "4", "--out", str(out4)]) == 0
    for name in ("race.csv", "race-plot.csv"):
        assert (out1 / name).read_bytes() == (out4 / name).read_bytes()
    _, columns, rows = read_csv(out1 / "race.csv")
    assert columns == ["x", "count_1", "count_3", "E"]
    assert len(rows) == 300
    last = rows[-1]
    assert int(last[1]) == 4783 and int(last[2]) == 4808
    assert "empirical density 1.000000" in capsys.readouterr().out


def test_bounds_subcommand(tmp_path):
    assert cli.main(["bounds", "--family", "radical", "--a", "3", "--p", "5",
                     "--xmax", "10000", "--out", str(tmp_path)]) == 0
    _, columns, rows = read_csv(tmp_path / "bounds.csv")
    assert columns[:2] == ["class", "least_prime"]
    found = {row[0]: int(row[1]) for row in rows}
    assert found == {"id": 41, "unipotent": 11, "t2": 2, "t3": 13, "t4": 19}
    for row in rows:
        if row[2]:  # a concrete first-prime bound exists
            assert row[5] == "1"  # every least prime sits below it


def test_validate_subcommand(capsys):
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert re.search(r"all \d+ checks passed", out)
    assert "FAIL" not in out


# -- exit codes


def test_exit_code_invalid_family():
    assert cli.main(["bias", "--family", "icosahedral", "--t", "race:1"]) == 2


def test_exit_code_missing_zero_data():
    # complex quartic characters mod 5 have no bundled zero files
    assert cli.main(["bias", "--family", "cyclotomic", "--q", "5",
                     "--t", "race:2,1"]) == 3


def test_exit_code_mapping(monkeypatch):
    def raiser(exc):
        def runner(cfg):
            raise exc
        return runner

    monkeypatch.setitem(cli._RUNNERS, "validate",
                        raiser(InputError("bad knob")))
    assert cli.main(["validate"]) == 2
    monkeypatch.setitem(cli._RUNNERS, "validate",
                        raiser(DataMissingError("no zeros")))
    assert cli.main(["validate"]) == 3
    monkeypatch.setitem(cli._RUNNERS, "validate",
                        raiser(InvariantError("broken")))
    assert cli.main(["validate"]) == 4
