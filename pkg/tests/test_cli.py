"""End-to-end runs of the command line tool, in process via main(argv).

Exit code contract: 0 success, 2 unreadable files, 3 rejected input or
settings, 4 numerical breakdown.
"""

import json

import numpy as np
import pytest

import armm.cli as cli
from armm.baselines import clustering_accuracy
from armm.cli import main
from armm.em import WmmConfig, fit as fit_wmm
from armm.errors import NumericalFailure
from armm.features import panel_features
from armm.panel_io import read_panel, write_panel
from armm.simulate import ArmaSpec, simulate_panel


@pytest.fixture(scope="module")
def two_group_panel(tmp_path_factory):
    """Well separated pair of AR(1) populations, phi 0.9 vs -0.9."""
    specs = [
        ArmaSpec(phi=(0.9,), theta=(), sigma2=1.0, n=120, count=15, group=1),
        ArmaSpec(phi=(-0.9,), theta=(), sigma2=1.0, n=120, count=15, group=2),
    ]
    panel, labels = simulate_panel(specs, np.random.default_rng(11))
    path = tmp_path_factory.mktemp("fixtures") / "two_group.csv"
    write_panel(path, panel)
    return str(path), labels


@pytest.fixture(scope="module")
def one_group_panel(tmp_path_factory):
    specs = [ArmaSpec(phi=(0.5,), theta=(), sigma2=1.0, n=80, count=20, group=1)]
    panel, _ = simulate_panel(specs, np.random.default_rng(5))
    path = tmp_path_factory.mktemp("fixtures") / "one_group.csv"
    write_panel(path, panel)
    return str(path)


# ---- simulate -------------------------------------------------------------


def test_simulate_stock_case_panel_and_labels(tmp_path):
    out = tmp_path / "panel.csv"
    labs = tmp_path / "labels.csv"
    code = main(
        ["simulate", "--case", "1", "--seed", "3",
         "--out", str(out), "--labels-out", str(labs)]
    )
    assert code == 0
    panel = read_panel(out)
    assert len(panel) == 200
    assert all(s.values.size == 100 for s in panel)
    lines = labs.read_text().splitlines()
    assert lines[0] == "id,group"
    groups = [int(row.split(",")[1]) for row in lines[1:]]
    assert len(groups) == 200
    assert groups.count(1) == 100 and groups.count(2) == 100


def test_simulate_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["simulate", "--case", "2", "--seed", "9", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_defaults_to_stdout(capsys):
    assert main(["simulate", "--case", "5", "--seed", "0"]) == 0
    outp = capsys.readouterr().out
    assert outp.startswith("id,t,value\n")
    assert len(outp.splitlines()) == 1 + 200 * 100


def test_simulate_custom_spec_file(tmp_path):
    spec = [
        {"phi": [0.5], "sigma2": 1.0, "n": 30, "count": 3, "group": 1},
        {"theta": [0.4], "sigma2": 2.0, "n": 40, "count": 2, "group": 2},
    ]
    spec_path = tmp_path / "blocks.json"
    spec_path.write_text(json.dumps(spec))
    out = tmp_path / "panel.csv"
    labs = tmp_path / "labels.csv"
    code = main(
        ["simulate", "--spec", str(spec_path),
         "--out", str(out), "--labels-out", str(labs)]
    )
    assert code == 0
    panel = read_panel(out)
    assert [s.values.size for s in panel] == [30, 30, 30, 40, 40]
    groups = [int(r.split(",")[1]) for r in labs.read_text().splitlines()[1:]]
    assert groups == [1, 1, 1, 2, 2]


def test_simulate_needs_exactly_one_source(tmp_path, capsys):
    spec_path = tmp_path / "blocks.json"
    spec_path.write_text("[]")
    assert main(["simulate"]) == 3
    assert main(["simulate", "--case", "1", "--spec", str(spec_path)]) == 3
    assert "exactly one" in capsys.readouterr().err


def test_simulate_rejects_explosive_spec(tmp_path, capsys):
    spec_path = tmp_path / "blocks.json"
    spec_path.write_text(json.dumps([{"phi": [1.01], "sigma2": 1.0, "n": 50}]))
    assert main(["simulate", "--spec", str(spec_path)]) == 3
    assert "stationar" in capsys.readouterr().err


@pytest.mark.parametrize(
    "payload",
    [
        "{not json",
        "{}",
        "[]",
        '[{"phi": [0.5], "sigma2": 1.0, "n": 50, "order": 2}]',
        '[{"phi": [0.5], "n": 50}]',
        '[{"phi": [0.5], "sigma2": 1.0}]',
    ],
)
def test_simulate_rejects_bad_spec_files(tmp_path, payload):
    spec_path = tmp_path / "blocks.json"
    spec_path.write_text(payload)
    assert main(["simulate", "--spec", str(spec_path)]) == 3


def test_simulate_unknown_case(capsys):
    assert main(["simulate", "--case", "9"]) == 3
    assert "case" in capsys.readouterr().err


# ---- fit ------------------------------------------------------------------


def run_fit(panel_path, out_path, *extra):
    argv = [
        "fit", panel_path, "--groups", "2", "--restarts", "3",
        "--seed", "1", "--out", str(out_path), *extra,
    ]
    return main(argv)


def test_fit_recovers_separated_groups(two_group_panel, tmp_path):
    path, truth = two_group_panel
    out = tmp_path / "fit.json"
    assert run_fit(path, out) == 0
    doc = json.loads(out.read_text())
    assert doc["converged"]
    fitted = [doc["labels"][s] for s in sorted(doc["labels"])]
    assert clustering_accuracy(truth, fitted) == 1.0
    assert doc["pi"] == pytest.approx([0.5, 0.5], abs=1e-6)
    assert len(doc["groups"]) == 2
    for grp in doc["groups"]:
        assert len(grp["phi"]) == 2
        assert len(grp["phi_se"]) == 2
        se = [np.sqrt(grp["coef_cov"][j][j]) for j in range(2)]
        assert grp["phi_se"] == pytest.approx(se, rel=1e-12)
    assert len(doc["sigma2"]) == 30


def test_fit_single_group(one_group_panel, tmp_path, capsys):
    out = tmp_path / "fit.json"
    code = main(
        ["fit", one_group_panel, "--groups", "1", "--restarts", "1",
         "--out", str(out)]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["pi"] == [1.0]
    assert set(doc["labels"].values()) == {1}


def test_fit_output_is_deterministic(two_group_panel, tmp_path):
    path, _ = two_group_panel
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run_fit(path, a) == 0
    assert run_fit(path, b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_fit_report_round_trips(two_group_panel, tmp_path):
    path, _ = two_group_panel
    out = tmp_path / "fit.json"
    assert run_fit(path, out) == 0
    doc = json.loads(out.read_text())
    panel = read_panel(path)
    feats = panel_features(panel, 3)
    config = WmmConfig(
        n_groups=2, window=3, variant="em2", max_iter=500,
        tol=1e-8, n_restarts=3, seed=1,
    )
    refit = fit_wmm(feats, config)
    # serialized floats must parse back to the exact in-memory values
    assert doc["loglik"] == refit.loglik
    assert doc["pi"] == [float(v) for v in refit.pi]
    assert doc["lambda"] == [float(v) for v in refit.lam]


def test_fit_labels_are_a_fixed_point(two_group_panel, tmp_path):
    path, _ = two_group_panel
    out = tmp_path / "fit.json"
    assert run_fit(path, out) == 0
    doc = json.loads(out.read_text())
    panel = read_panel(path)
    feats = panel_features(panel, 3)
    ids = [s.id for s in panel]
    labels0 = np.array([doc["labels"][sid] - 1 for sid in ids])
    config = WmmConfig(
        n_groups=2, window=3, variant="em2", n_restarts=1,
        init="labels", init_labels=labels0, seed=0,
    )
    refit = fit_wmm(feats, config)
    # saturated responsibilities can stop the run with lambda still drifting,
    # so the fixed point is the assignment, not the exact likelihood value
    assert list(refit.labels) == list(labels0)
    assert refit.converged
    assert refit.n_iter <= 5
    assert [float(v) for v in refit.pi] == pytest.approx(doc["pi"], abs=1e-12)
    assert refit.loglik == pytest.approx(doc["loglik"], rel=0.01)


def test_fit_missing_panel_exit_2(tmp_path, capsys):
    assert main(["fit", str(tmp_path / "nope.csv"), "--groups", "2"]) == 2
    assert "io error" in capsys.readouterr().err


def test_fit_malformed_row_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,t,value\ns1,1,0.5\na,b,c\n")
    assert main(["fit", str(bad), "--groups", "2"]) == 3
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize(
    "extra",
    [["--groups", "0"], ["--groups", "2", "--lags", "0"],
     ["--groups", "2", "--restarts", "0"]],
)
def test_fit_rejects_bad_settings(two_group_panel, extra, capsys):
    path, _ = two_group_panel
    assert main(["fit", path, *extra]) == 3
    assert capsys.readouterr().err.startswith("armm: invalid input")


def test_fit_numerical_failure_exit_4(two_group_panel, tmp_path, monkeypatch, capsys):
    path, _ = two_group_panel

    def explode(*a, **kw):
        raise NumericalFailure("no usable restart")

    monkeypatch.setattr(cli, "fit_wmm", explode)
    assert main(["fit", path, "--groups", "2"]) == 4
    assert "numerical failure" in capsys.readouterr().err


def test_fit_writes_stdout_without_out_flag(two_group_panel, capsys):
    path, _ = two_group_panel
    argv = ["fit", path, "--groups", "2", "--restarts", "1", "--seed", "1"]
    assert main(argv) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["command"] == "fit"
    assert doc["config"]["n_restarts"] == 1


def test_fit_normalized_flag_reaches_report(two_group_panel, tmp_path):
    path, _ = two_group_panel
    out = tmp_path / "fit.json"
    assert run_fit(path, out, "--normalized") == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["normalized"] is True
    assert doc["converged"]


# ---- select ---------------------------------------------------------------


def test_select_prefers_single_group(one_group_panel, capsys):
    code = main(
        ["select", one_group_panel, "--gmin", "1", "--gmax", "2",
         "--restarts", "3", "--seed", "0"]
    )
    captured = capsys.readouterr()
    assert code == 0
    lines = captured.out.splitlines()
    assert lines[0] == "G,BIC,AIC"
    assert len(lines) == 3
    assert "selected G=1 by bic" in captured.err


def test_select_prefers_two_groups_when_present(two_group_panel, tmp_path, capsys):
    path, _ = two_group_panel
    out = tmp_path / "select.json"
    code = main(
        ["select", path, "--gmin", "1", "--gmax", "3", "--restarts", "3",
         "--seed", "0", "--out", str(out)]
    )
    captured = capsys.readouterr()
    assert code == 0
    assert "selected G=2 by bic" in captured.err
    doc = json.loads(out.read_text())
    assert doc["selected_G"] == 2
    assert doc["selected"]["bic"] == 2
    assert [e["n_groups"] for e in doc["entries"]] == [1, 2, 3]
    assert doc["failed"] == {}
    # the table rows carry full precision, the BIC column ordered by G
    bics = {e["n_groups"]: e["bic"] for e in doc["entries"]}
    assert bics[2] < bics[1]


def test_select_aic_criterion(one_group_panel, capsys):
    code = main(
        ["select", one_group_panel, "--gmin", "1", "--gmax", "1",
         "--restarts", "1", "--criterion", "aic"]
    )
    assert code == 0
    assert "by aic" in capsys.readouterr().err


def test_select_rejects_inverted_range(one_group_panel, capsys):
    assert main(["select", one_group_panel, "--gmin", "3", "--gmax", "2"]) == 3
    assert "exceeds" in capsys.readouterr().err


# ---- bench ----------------------------------------------------------------


def test_bench_writes_three_documents(tmp_path):
    prefix = tmp_path / "bench"
    code = main(
        ["bench", "--cases", "1", "--methods", "acf", "--reps", "2",
         "--seed", "0", "--out", str(prefix)]
    )
    assert code == 0
    tidy = (tmp_path / "bench.csv").read_text().splitlines()
    assert tidy[0] == "case,method,mean_accuracy,sd_accuracy,reps_ok,reps_failed"
    assert tidy[1].startswith("1,acf,")
    table = (tmp_path / "bench_table.csv").read_text().splitlines()
    assert table[0] == "case,acf"
    meta = json.loads((tmp_path / "bench_meta.json").read_text())
    assert meta["seed"] == 0
    assert meta["cases"] == [1]


def test_bench_stdout_is_deterministic(capsys):
    argv = ["bench", "--cases", "5", "--methods", "pic", "--reps", "2"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_bench_unknown_method(capsys):
    assert main(["bench", "--cases", "1", "--methods", "dtw", "--reps", "1"]) == 3


def test_bench_rejects_junk_case_list(capsys):
    assert main(["bench", "--cases", "1,x", "--reps", "1"]) == 3
    assert "comma list" in capsys.readouterr().err


# ---- parser ---------------------------------------------------------------


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("armm ")
