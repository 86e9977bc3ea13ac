import dataclasses
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sfekit import (
    ConfigError,
    DatasetSpec,
    ExperimentConfig,
    PsoParams,
    build_report,
    derive_seed,
    emit_convergence,
    format_report,
    load_config,
    load_runs,
    run_experiment,
    write_config,
)
from sfekit.cli import main
from sfekit.config import validate
from sfekit.harness import _report_to_json

from util import blob_dataset, write_dataset_csv


@pytest.fixture()
def corpus(tmp_path):
    pa = tmp_path / "alpha.csv"
    pb = tmp_path / "beta.csv"
    write_dataset_csv(pa, blob_dataset(25, 10, seed=2, name="alpha"))
    write_dataset_csv(pb, blob_dataset(24, 8, seed=5, name="beta"))
    return tmp_path, str(pa), str(pb)


def small_cfg(*paths, **over):
    base = dict(
        algorithms=("sfe", "bpso", "sfe_pso"),
        datasets=tuple(
            DatasetSpec(name=os.path.splitext(os.path.basename(p))[0], path=p)
            for p in paths
        ),
        runs=2,
        budget=60,
        folds=4,
        seed=3,
        pso=PsoParams(pop_size=5),
        warmup_fes=30,
        stagnation_window=10,
    )
    base.update(over)
    return ExperimentConfig(**base)


def strip_timing(obj):
    if isinstance(obj, dict):
        return {
            k: strip_timing(v)
            for k, v in obj.items()
            if k not in ("mean_time_s", "wall_time_s")
        }
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


# ------------------------------------------------------------------- seeds

def test_derive_seed_is_stable_and_spread():
    assert derive_seed(1, "sfe", "alpha", 0) == derive_seed(1, "sfe", "alpha", 0)
    seen = {
        derive_seed(s, algo, ds, r)
        for s in (1, 2)
        for algo in ("sfe", "bpso")
        for ds in ("alpha", "beta")
        for r in range(5)
    }
    assert len(seen) == 40
    assert all(0 <= s < 2**64 for s in seen)


# ------------------------------------------------------------------ config

def test_config_roundtrip(corpus, tmp_path):
    _, pa, pb = corpus
    cfg = small_cfg(pa, pb, reference="sfe", fixed_folds=True)
    path = tmp_path / "exp.ini"
    write_config(cfg, str(path))
    back = load_config(str(path))
    assert back == dataclasses.replace(cfg, out="")


def test_config_parses_all_sections(corpus, tmp_path):
    root, pa, _ = corpus
    ini = tmp_path / "exp.ini"
    ini.write_text(
        "[experiment]\n"
        "algorithms = sfe, sfe_ec:hillclimb\n"
        "runs = 4\nbudget = 90\nfolds = 3\nseed = 11\nfold_mean = yes\n"
        "[sfe]\nur_max = 0.25\nun_policy = random_fraction\n"
        "[pso]\npop_size = 7\nc2 = 1.25\n"
        "[hybrid]\nwarmup_fes = 40\nstagnation_window = 20\n"
        "[dataset:alpha]\npath = alpha.csv\n"
    )
    cfg = load_config(str(ini))
    assert cfg.algorithms == ("sfe", "sfe_ec:hillclimb")
    assert (cfg.runs, cfg.budget, cfg.folds, cfg.seed) == (4, 90, 3, 11)
    assert cfg.fold_mean and not cfg.fixed_folds
    assert cfg.sfe.ur_max == 0.25 and cfg.sfe.un_policy == "random_fraction"
    assert cfg.pso.pop_size == 7 and cfg.pso.c2 == 1.25
    assert (cfg.warmup_fes, cfg.stagnation_window) == (40, 20)
    assert cfg.datasets[0].path == pa  # relative path resolved to the file


def test_config_rejects_unknown_keys(tmp_path, corpus):
    _, pa, _ = corpus
    ini = tmp_path / "exp.ini"
    ini.write_text(f"[experiment]\nbudgett = 5\n[dataset:a]\npath = {pa}\n")
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(str(ini))
    ini.write_text(f"[experiment]\nruns = 2\n[sfe]\nurmax = 0.3\n[dataset:a]\npath = {pa}\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(str(ini))


def test_validate_catches_bad_matrices(corpus):
    _, pa, _ = corpus
    with pytest.raises(ConfigError, match="unknown algorithm"):
        validate(small_cfg(pa, algorithms=("sfe", "genetic")))
    with pytest.raises(ConfigError, match="duplicate algorithm"):
        validate(small_cfg(pa, algorithms=("sfe", "sfe")))
    with pytest.raises(ConfigError, match="no datasets"):
        validate(small_cfg())
    with pytest.raises(ConfigError, match="not found"):
        validate(small_cfg(pa + ".missing"))
    with pytest.raises(ConfigError, match="reference"):
        validate(small_cfg(pa, reference="bpso", algorithms=("sfe",)))
    with pytest.raises(ConfigError, match="folds"):
        validate(small_cfg(pa, folds=1))
    validate(small_cfg(pa, algorithms=("sfe_ec:identity",)))  # engine names resolve


# ---------------------------------------------------------------- running

def test_run_experiment_produces_full_outputs(corpus, tmp_path):
    _, pa, pb = corpus
    cfg = small_cfg(pa, pb)
    out = tmp_path / "out"
    report = run_experiment(cfg, str(out))

    assert report.reference == "sfe_pso"
    assert sorted(report.cells) == sorted(
        (a, d) for a in cfg.algorithms for d in ("alpha", "beta")
    )
    for stats in report.cells.values():
        assert stats.n_runs == 2 and stats.n_failed == 0
        assert stats.worst <= stats.mean <= stats.best
    # two non-reference algorithms on two datasets, each with >= 2 runs
    assert len(report.marks) == 4
    assert set(report.friedman) == set(cfg.algorithms)
    assert report.failures == []

    assert (out / "config.ini").is_file()
    assert (out / "report.json").is_file()
    assert (out / "report.txt").is_file()
    for d in ("alpha", "beta"):
        for a in cfg.algorithms:
            for r in range(2):
                assert (out / "runs" / d / a / f"run_{r:04d}.jsonl").is_file()

    text = format_report(report)
    assert "alpha" in text and "beta" in text and "ref" in text
    payload = json.loads((out / "report.json").read_text())
    assert payload["cells"]["sfe"]["alpha"]["n_runs"] == 2


def test_run_jsonl_records_meta_trace_final(corpus, tmp_path):
    _, pa, _ = corpus
    cfg = small_cfg(pa, algorithms=("sfe",), runs=1)
    out = tmp_path / "out"
    run_experiment(cfg, str(out))
    lines = (out / "runs" / "alpha" / "sfe" / "run_0000.jsonl").read_text().splitlines()
    meta, trace, final = (json.loads(x) for x in lines)
    assert meta["type"] == "meta" and meta["budget"] == 60
    assert meta["seed"] == derive_seed(3, "sfe", "alpha", 0)
    assert trace["type"] == "trace"
    assert trace["fes"] == list(range(1, 61))
    assert len(trace["best"]) == 60 and len(trace["nsel"]) == 60
    assert final["type"] == "final" and final["ok"]
    assert final["n_selected"] == len(final["selected_features"])


def test_rerun_is_identical_except_timing(corpus, tmp_path):
    _, pa, _ = corpus
    cfg = small_cfg(pa, algorithms=("sfe", "sfe_pso"))
    rep1 = run_experiment(cfg, str(tmp_path / "one"))
    rep2 = run_experiment(cfg, str(tmp_path / "two"))
    assert strip_timing(_report_to_json(rep1)) == strip_timing(_report_to_json(rep2))
    for d, a, r in [("alpha", x, i) for x in cfg.algorithms for i in range(2)]:
        f1 = (tmp_path / "one" / "runs" / d / a / f"run_{r:04d}.jsonl").read_text()
        f2 = (tmp_path / "two" / "runs" / d / a / f"run_{r:04d}.jsonl").read_text()
        recs1 = [strip_timing(json.loads(x)) for x in f1.splitlines()]
        recs2 = [strip_timing(json.loads(x)) for x in f2.splitlines()]
        assert recs1 == recs2


def test_worker_pool_matches_serial_run(corpus, tmp_path):
    _, pa, _ = corpus
    serial = small_cfg(pa, algorithms=("sfe", "bpso"), budget=40)
    pooled = dataclasses.replace(serial, workers=2)
    rep1 = run_experiment(serial, str(tmp_path / "serial"))
    rep2 = run_experiment(pooled, str(tmp_path / "pooled"))
    assert strip_timing(_report_to_json(rep1)) == strip_timing(_report_to_json(rep2))


def test_report_roundtrips_through_persisted_runs(corpus, tmp_path):
    _, pa, pb = corpus
    cfg = small_cfg(pa, pb)
    out = tmp_path / "out"
    rep1 = run_experiment(cfg, str(out))
    rep2 = build_report(cfg, load_runs(str(out)))
    assert _report_to_json(rep1) == _report_to_json(rep2)


def test_fold_seed_policy(corpus, tmp_path):
    _, pa, _ = corpus

    def fold_seeds(cfg, out):
        run_experiment(cfg, str(out))
        seeds = []
        for res in load_runs(str(out)):
            seeds.append(res.fold_seed)
        return seeds

    per_run = fold_seeds(small_cfg(pa, algorithms=("sfe",), runs=3, budget=20),
                         tmp_path / "per_run")
    assert len(set(per_run)) == 3
    shared = fold_seeds(
        small_cfg(pa, algorithms=("sfe", "bpso"), runs=3, budget=20, fixed_folds=True),
        tmp_path / "shared",
    )
    assert len(set(shared)) == 1


def test_failed_runs_are_recorded_not_fatal(tmp_path):
    # a single-instance class makes the CV split impossible for every run
    rows = ["1.0,2.0,0", "2.0,1.0,0", "3.0,4.0,0", "4.0,3.0,0", "5.0,6.0,1"]
    csv = tmp_path / "lonely.csv"
    csv.write_text("\n".join(rows) + "\n")
    cfg = small_cfg(str(csv), algorithms=("sfe", "bpso"), folds=2, budget=20)
    out = tmp_path / "out"
    report = run_experiment(cfg, str(out))
    assert len(report.failures) == 4  # 2 algorithms x 2 runs
    assert all("single instance" in f["error"] for f in report.failures)
    for stats in report.cells.values():
        assert stats.n_runs == 0 and stats.n_failed == 2
        assert np.isnan(stats.mean)
    assert report.friedman == {} and report.marks == {}
    # the failure is visible in the persisted record and the text report
    rec = (out / "runs" / "lonely" / "sfe" / "run_0000.jsonl").read_text()
    assert '"ok": false' in rec
    assert "failed run(s)" in format_report(report)


# ------------------------------------------------------------- convergence

def test_emit_convergence_curves(corpus, tmp_path):
    _, pa, _ = corpus
    cfg = small_cfg(pa, algorithms=("sfe", "bpso"), runs=3, budget=40)
    out = tmp_path / "out"
    run_experiment(cfg, str(out))
    dest = tmp_path / "curves"
    written = emit_convergence(str(out), str(dest))
    assert sorted(os.path.basename(p) for p in written) == [
        "alpha__bpso.csv", "alpha__sfe.csv",
    ]
    for path in written:
        lines = open(path).read().splitlines()
        assert lines[0] == "fes,mean_best_accuracy,mean_selected"
        body = [line.split(",") for line in lines[1:]]
        assert [int(r[0]) for r in body] == list(range(1, len(body) + 1))
        acc = [float(r[1]) for r in body]
        assert all(a <= b for a, b in zip(acc, acc[1:]))
        assert all(np.isfinite(float(r[2])) for r in body)
    assert len(open(written[1]).read().splitlines()) == 41  # sfe spends all 40


# --------------------------------------------------------------------- cli

def write_ini(tmp_path, pa, pb=None):
    extra = "[dataset:beta]\npath = beta.csv\n" if pb else ""
    ini = tmp_path / "exp.ini"
    ini.write_text(
        "[experiment]\n"
        "algorithms = sfe, bpso\n"
        "runs = 2\nbudget = 40\nfolds = 4\nseed = 3\n"
        "[pso]\npop_size = 5\n"
        "[hybrid]\nwarmup_fes = 30\nstagnation_window = 10\n"
        "[dataset:alpha]\npath = alpha.csv\n" + extra
    )
    return str(ini)


def test_cli_run_report_converge(corpus, tmp_path, capsys):
    root, pa, pb = corpus
    ini = write_ini(root, pa, pb)
    out = str(tmp_path / "out")

    assert main(["run", "--config", ini, "--out", out]) == 0
    printed = capsys.readouterr().out
    assert "alpha" in printed and "report.json" in printed
    assert os.path.isfile(os.path.join(out, "report.txt"))

    assert main(["report", out]) == 0
    assert "alpha" in capsys.readouterr().out

    dest = str(tmp_path / "curves")
    assert main(["converge", out, "--out", dest]) == 0
    listed = capsys.readouterr().out.splitlines()
    assert len(listed) == 4 and all(p.endswith(".csv") for p in listed)


def test_cli_refuses_dirty_out_dir(corpus, tmp_path, capsys):
    root, pa, _ = corpus
    ini = write_ini(root, pa)
    out = str(tmp_path / "out")
    assert main(["run", "--config", ini, "--out", out, "--runs", "1"]) == 0
    capsys.readouterr()
    assert main(["run", "--config", ini, "--out", out, "--runs", "1"]) == 2
    assert "not empty" in capsys.readouterr().err
    assert main(["run", "--config", ini, "--out", out, "--runs", "1", "--force"]) == 0


def test_cli_algo_and_dataset_filters(corpus, tmp_path, capsys):
    root, pa, pb = corpus
    ini = write_ini(root, pa, pb)
    out = str(tmp_path / "out")
    assert main(["run", "--config", ini, "--out", out,
                 "--algo", "sfe", "--dataset", "beta"]) == 0
    payload = json.loads(open(os.path.join(out, "report.json")).read())
    assert payload["algorithms"] == ["sfe"]
    assert payload["datasets"] == ["beta"]


def test_cli_adhoc_csv_dataset(corpus, tmp_path, capsys):
    root, pa, _ = corpus
    extra = tmp_path / "extra.csv"
    write_dataset_csv(extra, blob_dataset(20, 6, seed=9, name="extra"))
    ini = write_ini(root, pa)
    out = str(tmp_path / "out")
    assert main(["run", "--config", ini, "--out", out, "--algo", "sfe",
                 "--dataset", str(extra)]) == 0
    payload = json.loads(open(os.path.join(out, "report.json")).read())
    assert payload["datasets"] == ["extra"]


def test_cli_error_paths(corpus, tmp_path, capsys):
    root, pa, _ = corpus
    bad = tmp_path / "bad.ini"
    bad.write_text(f"[experiment]\nalgorithms = genetic\n[dataset:a]\npath = {pa}\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "unknown algorithm" in capsys.readouterr().err
    assert main(["report", str(tmp_path / "nowhere")]) == 2
    assert main(["run", "--config", write_ini(root, pa), "--out",
                 str(tmp_path / "o"), "--dataset", "nosuchname"]) == 2


def test_cli_failure_exit_code(tmp_path, capsys):
    rows = ["1.0,2.0,0", "2.0,1.0,0", "3.0,4.0,0", "4.0,3.0,0", "5.0,6.0,1"]
    csv = tmp_path / "lonely.csv"
    csv.write_text("\n".join(rows) + "\n")
    ini = tmp_path / "exp.ini"
    ini.write_text(
        "[experiment]\nalgorithms = sfe\nruns = 1\nbudget = 10\nfolds = 2\n"
        "[dataset:lonely]\npath = lonely.csv\n"
    )
    assert main(["run", "--config", str(ini), "--out", str(tmp_path / "out")]) == 1


def test_cli_default_out_dir_env(corpus, tmp_path, capsys, monkeypatch):
    root, pa, _ = corpus
    monkeypatch.setenv("SFEKIT_OUT", str(tmp_path / "envroot"))
    ini = write_ini(root, pa)
    assert main(["run", "--config", ini, "--runs", "1", "--algo", "sfe"]) == 0
    assert os.path.isfile(str(tmp_path / "envroot" / "exp" / "report.json"))


def test_console_script_entry_point(corpus, tmp_path):
    root, pa, _ = corpus
    ini = write_ini(root, pa)
    out = str(tmp_path / "out")
    proc = subprocess.run(
        [sys.executable, "-m", "sfekit.cli", "run", "--config", ini,
         "--out", out, "--runs", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "report.json" in proc.stdout
