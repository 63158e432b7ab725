import subprocess
import sys

import pytest

from hetnet import cli
from hetnet.analytic import compose_su
from hetnet.params import ParameterError, Topology, fig3_params, fig4_params
from hetnet.sweep import (
    ConfigError, SweepSpec, bundled_config, emit_csv, emit_plot, load_config, parse_config_text,
    read_csv, run_sweep,
)

MINIMAL = """
topology = cap
lambda_sc_prime = 1.5e-5
lambda_ut_m = 3e-5
sweep = gamma
from = 0.1
to = 0.9
steps = 9
realizations = 100
seed = 4
"""


def test_bundled_configs_reproduce_reference_sets():
    c3 = load_config(bundled_config("fig3.conf"))
    assert c3.params == fig3_params() and c3.topology is Topology.COVERAGE
    c4 = load_config(bundled_config("fig4.conf"))
    assert c4.params == fig4_params() and c4.topology is Topology.CAPACITY
    assert c4.sweep == SweepSpec("gamma", 0.1, 0.9, 9)


def test_missing_key_uses_default_and_is_flagged():
    cfg = parse_config_text(MINIMAL)
    assert cfg.params.eta == 1.45
    assert "eta" in cfg.run.defaults_applied
    recs = run_sweep(cfg, "theory")
    assert all("default:eta" in r.flags for r in recs)


def test_unknown_key_names_key_and_line():
    with pytest.raises(ConfigError, match=r"<config>:3: unknown key 'etaa'"):
        parse_config_text("topology = cov\n# note\netaa = 2\n")


def test_bad_value_and_missing_equals():
    with pytest.raises(ConfigError, match="bad value for alpha"):
        parse_config_text("alpha = four\n")
    with pytest.raises(ConfigError, match=":1: expected"):
        parse_config_text("alpha 4\n")


def test_validation_errors_pass_through_verbatim():
    with pytest.raises(ParameterError) as err:
        parse_config_text("alpha = 2\n")
    assert err.value.violations == ["alpha must exceed 2"]


def test_storage_units():
    cfg = parse_config_text("chunk_size_bytes = 5e8\nF_sc = 2 GByte\nF = 1000\n")
    assert cfg.params.F_sc == 4.0 and cfg.params.F == 1000.0
    with pytest.raises(ConfigError, match="unknown unit"):
        parse_config_text("F_sc = 4 parsecs\n")


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/x.conf")


def test_sweep_spec_checks():
    assert SweepSpec("R_c", 10, 100, 3, "log").values() == pytest.approx([10, 31.6227766, 100])
    for bad in (("nope", 0, 1, 3), ("gamma", 1, 0, 3), ("gamma", 0, 1, 1), ("gamma", 0, 1, 3, "cubic"),
                ("gamma", 0, 1, 3, "log")):
        with pytest.raises(ConfigError):
            SweepSpec(*bad)


def test_invalid_sweep_point_is_identified():
    cfg = parse_config_text(MINIMAL.replace("to = 0.9", "to = 1.5"))
    with pytest.raises(ConfigError, match=r"sweep point gamma=1\.15: gamma out of \[0,1\]"):
        run_sweep(cfg, "theory")


@pytest.fixture(scope="module")
def both_records():
    return run_sweep(parse_config_text(MINIMAL), "both")


def test_record_cardinality(both_records):
    assert len(both_records) == 54
    theory = [r for r in both_records if r.source == "theory"]
    sim = [r for r in both_records if r.source == "sim"]
    assert all(r.ci_half_width == 0.0 and r.factors and r.seed is None for r in theory)
    assert all(r.n_samples == 100 and r.seed == 4 for r in sim)


def test_cache_dominance_in_sim(both_records):
    sim = {(r.value, r.variant): r.mean for r in both_records if r.source == "sim" and r.tier == "SU"}
    for v in {k[0] for k in sim}:
        assert sim[(v, "WithCache")] >= sim[(v, "NoCache")]


def test_theory_invariant_to_seed_and_realizations():
    a = run_sweep(parse_config_text(MINIMAL), "theory")
    b = run_sweep(parse_config_text(MINIMAL.replace("seed = 4", "seed = 8").replace("= 100", "= 300")), "theory")
    assert [(r.value, r.mean) for r in a] == [(r.value, r.mean) for r in b]


def test_fsc_sweep_theory_matches_logged_factors():
    text = MINIMAL.replace("sweep = gamma", "sweep = F_sc").replace("from = 0.1", "from = 0").replace(
        "to = 0.9", "to = 64")
    cfg = parse_config_text(text)
    for r in run_sweep(cfg, "theory"):
        if r.tier == "SU":
            f = r.factors
            assert r.mean == compose_su(cfg.params.tau_sc, f["C1"], f["C2"], f["C3"])
            assert r.mean == pytest.approx(cfg.params.tau_sc * (f["C1"] * f["C2"] + f["C1"] * f["C3"]
                                                                - f["C1"] * f["C2"] * f["C3"]), rel=1e-12)


def test_csv_round_trip_and_determinism(both_records, tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(both_records, p1)
    emit_csv(run_sweep(parse_config_text(MINIMAL), "both"), p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().splitlines()[0] == "sweep_var,value,topology,tier,variant,source,mean,ci,n,seed"
    rows = read_csv(p1)
    for row, rec in zip(rows, both_records):
        assert (row["value"], row["mean"], row["ci"], row["n"], row["seed"]) == \
            (rec.value, rec.mean, rec.ci_half_width, rec.n_samples, rec.seed)


def test_empty_records_write_nothing(tmp_path):
    path = tmp_path / "x.csv"
    with pytest.raises(ValueError):
        emit_csv([], path)
    assert not path.exists()
    with pytest.raises(ValueError):
        emit_plot([], tmp_path / "x.svg")


def test_plot_has_six_curves(both_records, tmp_path):
    path = tmp_path / "p.svg"
    labels = emit_plot(both_records, path)
    assert labels == ["MU The.", "SU The. (No Cache)", "SU The.", "MU Sim.", "SU Sim. (No Cache)", "SU Sim."]
    text = path.read_text()
    assert text.lstrip().startswith("<?xml") and "SU Sim. (No Cache)" in text


# --- command line ---

def _write(tmp_path, text, name="c.conf"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_cli_success(tmp_path, capsys):
    out = tmp_path / "out.csv"
    code = cli.main(["--config", str(_write(tmp_path, MINIMAL)), "--mode", "theory", "--steps", "3",
                     "--out", str(out), "--emit-plot", str(tmp_path / "o.svg")])
    assert code == 0
    assert len(read_csv(out)) == 9
    assert (tmp_path / "out.csv.meta.json").exists() and (tmp_path / "o.svg").exists()


def test_cli_overrides_sweep(tmp_path):
    out = tmp_path / "out.csv"
    code = cli.main(["--config", str(_write(tmp_path, MINIMAL)), "--mode", "theory", "--sweep", "F_sc",
                     "--from", "0", "--to", "16", "--steps", "2", "--out", str(out)])
    assert code == 0
    assert {r["sweep_var"] for r in read_csv(out)} == {"F_sc"}
    assert cli.main(["--config", str(_write(tmp_path, MINIMAL)), "--sweep", "F_sc", "--out", str(out)]) == 1


def test_cli_config_errors(tmp_path):
    out = tmp_path / "out.csv"
    assert cli.main(["--config", str(_write(tmp_path, "bogus = 1\n")), "--out", str(out)]) == 1
    # the capacity reference set has no room for holes in the coverage topology
    assert cli.main(["--config", str(bundled_config("fig4.conf")), "--topology", "cov", "--out", str(out)]) == 1
    assert not out.exists()


def test_cli_numeric_failure(tmp_path, monkeypatch):
    def boom(cfg):
        raise ArithmeticError("quadrature did not converge")

    monkeypatch.setattr(cli, "run_sweep", boom)
    assert cli.main(["--topology", "cap", "--out", str(tmp_path / "o.csv")]) == 2


def test_cli_dump_scenario(tmp_path):
    path = tmp_path / "pts.csv"
    assert cli.main(["--topology", "cap", "--dump-scenario", str(path)]) == 0
    roles = {line.split(",")[0] for line in path.read_text().splitlines()[1:]}
    assert roles == {"CR", "MBS", "SBS", "SU", "MU"}


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hetnet", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "--emit-plot" in res.stdout
