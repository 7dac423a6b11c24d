import json
import math

import numpy as np
import pytest
import yaml

from cfasync.expcli import cli
from cfasync.expcli.config import config_from_mapping, default_config, load_config
from cfasync.expcli.experiments import run_nmse_sweep, run_se_cdf, run_sum_se_sweep
from cfasync.expcli.io import read_rows, write_figure
from cfasync.netmodel import ConfigError


def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


# ---------------------------------------------------------------- config

def test_defaults_validate():
    for exp in ("fig1", "fig2", "fig3", "fig4", "validate"):
        default_config(exp).validate()


@pytest.mark.parametrize(
    "data,field",
    [
        ({"scene": {"L": 0}}, "scene.L"),
        ({"scene": {"pathloss": {"d0_m": -1.0}}}, "scene.pathloss"),
        ({"pilot": {"tau_p": 0}}, "pilot.tau_p"),
        ({"block": {"tau_c": 5}, "pilot": {"tau_p": 10}}, "block.tau_c"),
        ({"mc": {"trials": 1}}, "mc.trials"),
        ({"mc": {"tol_rel": 2.0}}, "mc.tol_rel"),
        ({"radio": {"bandwidth_hz": 0.0}}, "radio.bandwidth_hz"),
        ({"phase": {"c_ap": 1e-18}}, "phase"),
        ({"sweep": {"antenna_settings": [[100]]}}, "sweep.antenna_settings[0]"),
        ({"scene": {"correlation": {"kind": "bogus"}}}, "scene.correlation.kind"),
    ],
)
def test_invalid_values_report_field(data, field):
    with pytest.raises(ConfigError) as ei:
        config_from_mapping(data, "fig3")
    assert ei.value.field.startswith(field)


@pytest.mark.parametrize(
    "data,field",
    [
        ({"scene": {"M": 3}}, "scene.M"),
        ({"bogus": 1}, "bogus"),
        ({"scene": {"pathloss": {"slope": 3}}}, "scene.pathloss.slope"),
    ],
)
def test_unknown_keys_rejected(data, field):
    with pytest.raises(ConfigError) as ei:
        config_from_mapping(data, "fig3")
    assert ei.value.field == field
    assert "unknown key" in str(ei.value)


@pytest.mark.parametrize("data", [{"scene": {"L": "ten"}}, {"scene": {"L": 2.5}}, {"scene": {"wrap_around": 1}}, {"mc": {"tol_rel": "x"}}])
def test_type_errors(data):
    with pytest.raises(ConfigError):
        config_from_mapping(data, "fig3")


def test_experiment_mismatch():
    with pytest.raises(ConfigError, match="experiment"):
        config_from_mapping({"experiment": "fig1"}, "fig3")


def test_db_conversions():
    cfg = config_from_mapping({"powers": {"p_dbm": 20.0, "p_d_dbm": 30.0}, "noise": {"sigma2_dbm": -90.0}}, "fig3")
    assert math.isclose(cfg.p, 0.1)
    assert math.isclose(cfg.p_d, 1.0)
    assert math.isclose(cfg.sigma2, 1e-12)
    ph = cfg.phase_params(-20.0, -30.0)
    assert math.isclose(ph.sigma2_ap, 1e-2)
    assert math.isclose(ph.sigma2_ue, 1e-3)
    assert cfg.phase_params(-math.inf, -math.inf).total == 0.0
    assert math.isclose(cfg.T_s, 1.0 / cfg.radio.bandwidth_hz)


def test_oscillator_constants():
    cfg = config_from_mapping({"phase": {"sigma2_ap_db": None, "sigma2_ue_db": None, "c_ap": 1e-18, "c_ue": 1e-17}}, "fig3")
    ph = cfg.phase_params()
    assert ph.sigma2_ue > ph.sigma2_ap > 0


def test_hash_ignores_output_dir():
    a = default_config("fig3")
    b = default_config("fig3")
    b.out_dir = "elsewhere"
    assert a.hash() == b.hash()
    b.seed = 2
    assert a.hash() != b.hash()


def test_bad_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("scene: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(p, "fig3")


# ---------------------------------------------------------------- cli

def test_cli_validate_pass(tmp_path, capsys):
    assert cli.main(["validate", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert "validation pass" in capsys.readouterr().out
    cols, rows = read_rows(tmp_path / "validate.csv")
    assert cols[:3] == ["ue", "instant", "mode"]
    assert len(rows) == 36
    meta = json.loads((tmp_path / "validate.json").read_text())
    assert meta["summary"]["status"] == "pass"


def test_cli_validate_short_run_inconclusive(tmp_path):
    assert cli.main(["validate", "--out", str(tmp_path), "--trials", "100"]) == cli.EXIT_INCONCLUSIVE


def test_cli_validate_corrupted_fails(tmp_path):
    assert cli.main(["validate", "--out", str(tmp_path), "--trials", "4000", "--corrupt", "numerator"]) == cli.EXIT_FAIL


def test_cli_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, {"scene": {"nope": 1}})
    assert cli.main(["fig3", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert "scene.nope" in capsys.readouterr().err


def test_cli_missing_config(tmp_path):
    assert cli.main(["fig3", "--config", str(tmp_path / "none.yaml")]) == cli.EXIT_USAGE


@pytest.mark.parametrize("argv", [[], ["fig9"], ["fig1", "--seed", "-1"], ["fig1", "--seed", str(2**64)], ["fig1", "--trials", "0"]])
def test_cli_usage_errors(argv):
    with pytest.raises(SystemExit) as ei:
        cli.main(argv)
    assert ei.value.code == cli.EXIT_USAGE


def test_cli_accepts_u64_seed(tmp_path):
    cfg = _write(tmp_path, {"sweep": {"sigma2_db": [-40.0], "tau_p": [10]}})
    assert cli.main(["fig1", "--config", cfg, "--seed", str(2**64 - 1), "--out", str(tmp_path)]) == cli.EXIT_OK
    assert json.loads((tmp_path / "fig1.json").read_text())["seed"] == 2**64 - 1


def test_sidecar_reproduces_run(tmp_path):
    cfg = _write(tmp_path, {"num_scenes": 2, "sweep": {"sigma2_db": [-40.0, -20.0]}, "scene": {"L": 30, "K": 6}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["fig3", "--config", cfg, "--seed", "77", "--out", str(a)]) == 0
    assert cli.main(["fig3", "--config", str(a / "fig3.json"), "--out", str(b)]) == 0
    assert (a / "fig3.csv").read_bytes() == (b / "fig3.csv").read_bytes()
    assert (a / "fig3.json").read_bytes() == (b / "fig3.json").read_bytes()
    meta = json.loads((a / "fig3.json").read_text())
    for key in ("schema_version", "experiment", "columns", "seed", "config_hash", "code_version", "kernel_backend", "config"):
        assert key in meta
    assert meta["seed"] == 77


def test_workers_do_not_change_output(tmp_path):
    base = {"num_scenes": 2, "sweep": {"sigma2_db": [-40.0, -30.0, -20.0]}, "scene": {"L": 30, "K": 6}}
    one = run_sum_se_sweep(config_from_mapping(base, "fig3"))
    base["sweep"]["workers"] = 3
    many = run_sum_se_sweep(config_from_mapping(base, "fig3"))
    assert one.rows == many.rows


def test_csv_round_trip(tmp_path):
    fd = run_sum_se_sweep(config_from_mapping({"num_scenes": 2, "sweep": {"sigma2_db": [-30.0]}, "scene": {"L": 20, "K": 4}}, "fig3"))
    csv_path, _ = write_figure(fd, tmp_path)
    cols, rows = read_rows(csv_path)
    assert tuple(cols) == fd.columns
    for got, want in zip(rows, fd.rows):
        assert float(got[0]) == want[0]
        assert got[1:3] == [want[1], want[2]]
        assert float(got[3]) == want[3]


# ---------------------------------------------------------------- experiments

def test_fig1_trivial_limit():
    # no phase noise, no pilot sharing, identity correlation at 30 dB pilot SNR
    cfg = config_from_mapping({"scene": {"K": 10}, "sweep": {"sigma2_db": [-math.inf, -40.0], "tau_p": [10]}}, "fig1")
    fd = run_nmse_sweep(cfg)
    nm = {r[0]: r[2] for r in fd.rows}
    assert math.isclose(nm[-math.inf], 1 - 1000 / 1001, rel_tol=1e-9)
    assert nm[-40.0] > nm[-math.inf]


def test_fig1_shape():
    cfg = config_from_mapping({"scene": {"K": 20}, "sweep": {"sigma2_db": [-50.0, -30.0, -10.0], "tau_p": [10, 20]}}, "fig1")
    fd = run_nmse_sweep(cfg)
    assert len(fd.rows) == 6
    for tp in (10, 20):
        m = [r[2] for r in fd.rows if r[1] == tp]
        assert m == sorted(m)
        assert all(0 <= x <= 1 for x in m)
    assert fd.summary["crossings"][0]["tau_p_small"] == 10


@pytest.fixture(scope="module")
def small_fig2():
    cfg = config_from_mapping(
        {
            "num_scenes": 2,
            "scene": {"L": 20, "K": 6, "N": 2},
            "pilot": {"tau_p": 4},
            "block": {"tau_c": 100},
            "mc": {"trials": 4000, "instants": [5, 50, 100]},
        },
        "fig2",
    )
    return run_se_cdf(cfg)


@pytest.mark.parametrize("case", ["ideal", "delay"])
def test_fig2_mc_matches_closed_form(small_fig2, case):
    assert small_fig2.summary[case]["mc_status"] == "pass"
    assert small_fig2.summary[case]["mc_max_rel_err_se"] < 0.03


def test_fig2_oscillator_matches_drift_corrected(small_fig2):
    assert small_fig2.summary["oscillator"]["mc_status_drift_corrected"] == "pass"


def test_fig2_rows(small_fig2):
    s = small_fig2.summary
    assert s["oscillator"]["median_se"] < s["ideal"]["median_se"]
    # delay phases alone do not change co-DU SE
    assert math.isclose(s["delay"]["median_se"], s["ideal"]["median_se"], rel_tol=1e-12)
    for case in ("ideal", "oscillator", "delay"):
        cdf = [r[3] for r in small_fig2.rows if r[0] == case and r[1] == "closed"]
        se = [r[2] for r in small_fig2.rows if r[0] == case and r[1] == "closed"]
        assert len(cdf) == 12 and cdf[-1] == 1.0
        assert np.all(np.diff(se) >= 0)
