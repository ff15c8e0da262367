import csv
import io

import numpy as np
import pytest

from rsvlbfgs import harness as H
from rsvlbfgs import verification as V

SMALL_KARCHER = ["kind=karcher", "n=4", "count=8", "cond=10", "mb=2", "T=3", "M=2", "R=1",
                 "rsv-lbfgs.eta1=0.2", "rsv-lbfgs.eta2=0.5", "rsvrg.eta1=0.2"]
SMALL_EIG = ["kind=eig", "d=8", "N=40", "gap=0.2", "mb=4", "T=3", "M=3", "option=2",
             "algorithms=rsv-lbfgs,rsvrg,vr-pca", "eta1=0.1", "eta2=0.3"]


def _set_args(items):
    out = []
    for kv in items:
        out += ["--set", kv]
    return out


def _run(tmp_path, name, items=SMALL_KARCHER, extra=()):
    out = tmp_path / name
    code = H.main(["run", "--out", str(out), *_set_args(items), *extra])
    return code, out


def test_spec_layering(tmp_path):
    f = tmp_path / "spec.txt"
    f.write_text("# comment\nmb=7\nT=9  # trailing\n\nrsvrg.eta1=0.25\n")
    args = H.build_parser().parse_args(["run", "--out", "x", "--preset", "karcher-desk", "--spec", str(f),
                                        "--set", "T=4"])
    spec = H.build_spec(args)
    assert spec.config["mb"] == 7  # file beats preset
    assert spec.config["T"] == 4  # flag beats file
    assert spec.optimizer_config("rsvrg").eta1 == 0.25
    assert spec.optimizer_config("rsv-lbfgs").eta1 == 0.3  # preset value kept
    assert spec.n == 20 and spec.cond == 100.0


def test_spec_rejects_bad_input(tmp_path):
    with pytest.raises(H.UsageError):
        H.ExperimentSpec.from_items({"bogus": "1"})
    with pytest.raises(H.UsageError):
        H.ExperimentSpec.from_items({"nope.eta1": "1"})
    with pytest.raises(H.UsageError):
        H.ExperimentSpec.from_items({"kind": "karcher", "algorithms": "vr-pca"})
    with pytest.raises(H.UsageError):
        H.ExperimentSpec.from_items({"mb": "1000"})
    f = tmp_path / "s.txt"
    f.write_text("no equals sign\n")
    with pytest.raises(H.UsageError):
        H.read_spec_file(f)


def test_algorithm_seeds_are_derived_and_stable():
    a = H.ExperimentSpec.from_items({"seed": "3"})
    b = H.ExperimentSpec.from_items({"seed": "3", "algorithms": "rsvrg"})
    assert a.algorithm_seed("rsvrg") == b.algorithm_seed("rsvrg")
    assert a.algorithm_seed("rsvrg") != a.algorithm_seed("rsv-lbfgs")
    assert a.algorithm_seed("rsvrg") != H.ExperimentSpec.from_items({"seed": "4"}).algorithm_seed("rsvrg")


def test_presets_are_valid():
    for name, items in H.PRESETS.items():
        spec = H.ExperimentSpec.from_items(items)
        assert spec.config["tol"] == 1e-14, name


def test_generate_same_seed_same_fingerprint(tmp_path, capsys):
    for name in ("a", "b"):
        assert H.main(["generate", "--out", str(tmp_path / f"{name}.rslb"), *_set_args(SMALL_EIG)]) == 0
    fps = capsys.readouterr().out.split()
    assert len(fps) == 2 and fps[0] == fps[1]
    assert "sha256=" + fps[0] in (tmp_path / "a.txt").read_text()


def test_run_bundle_and_replay(tmp_path):
    code, out = _run(tmp_path, "b1")
    assert code == 0
    manifest = (out / "manifest.txt").read_text()
    assert "dataset_sha256=" in manifest and "result.rsv-lbfgs.status=ok" in manifest
    for alg in ("rsv-lbfgs", "rsvrg"):
        rows = list(csv.DictReader(io.StringIO((out / f"{alg}.csv").read_text())))
        passes = [float(r["passes"]) for r in rows]
        assert np.all(np.diff(passes) == 2.0)
        assert all(float(r["error"]) >= 0 for r in rows)
    assert (out / "rsv-lbfgs.pairs.npz").exists()
    # replay from the manifest alone, and from the stored dataset
    assert H.main(["run", "--spec", str(out / "manifest.txt"), "--out", str(tmp_path / "b2")]) == 0
    assert H.main(["run", "--spec", str(out / "manifest.txt"), "--dataset", str(out / "dataset.rslb"),
                   "--out", str(tmp_path / "b3"), "--jobs", "2"]) == 0
    for alg in ("rsv-lbfgs", "rsvrg"):
        ref = (out / f"{alg}.csv").read_bytes()
        assert (tmp_path / "b2" / f"{alg}.csv").read_bytes() == ref
        assert (tmp_path / "b3" / f"{alg}.csv").read_bytes() == ref


def test_karcher_error_at_oracle_is_tiny(tmp_path):
    code, out = _run(tmp_path, "b")
    data, _ = H.load_dataset(out / "dataset.rslb")
    err, _, W = H.ground_truth(data)
    assert err(W) < 1e-18


def test_run_rejects_hash_mismatch(tmp_path):
    code = H.main(["run", "--out", str(tmp_path / "x"), *_set_args(SMALL_KARCHER + ["dataset_sha256=00"])])
    assert code == 1


def test_run_reports_divergence(tmp_path):
    code, out = _run(tmp_path, "div", SMALL_KARCHER + ["rsvrg.eta1=50", "T=30"])
    assert code == 2
    assert "result.rsvrg.status=diverged" in (out / "manifest.txt").read_text()
    assert (out / "rsvrg.csv").read_text().startswith("passes,objective,error\n")


def test_inner_measurements_flag(tmp_path):
    code, out = _run(tmp_path, "inner", SMALL_KARCHER + ["inner_every=2"])
    assert code == 0
    rows = (out / "rsvrg.inner.csv").read_text().splitlines()
    assert rows[0] == "passes,objective,error" and len(rows) == 1 + 3 * 2
    # inner measurements do not change the per-epoch trace
    code, plain = _run(tmp_path, "plain")
    assert (out / "rsvrg.csv").read_bytes() == (plain / "rsvrg.csv").read_bytes()


def test_usage_errors_exit_one(tmp_path, capsys):
    assert H.main(["run", "--out", str(tmp_path), "--preset", "nope"]) == 1
    assert H.main(["run", "--out", str(tmp_path), "--set", "mb=0"]) == 1
    assert H.main(["run", "--out", str(tmp_path), "--set", "novalue"]) == 1
    assert H.main(["run", "--out", str(tmp_path), "--jobs", "0"]) == 1
    assert H.main(["diagnose", "--dataset", str(tmp_path / "missing.rslb")]) == 1
    with pytest.raises(SystemExit) as info:
        H.main(["frobnicate"])
    assert info.value.code == 1


@pytest.mark.parametrize("items", [SMALL_KARCHER, SMALL_EIG], ids=["karcher", "eig"])
def test_diagnose_bundle(tmp_path, items, capsys):
    code, out = _run(tmp_path, "b", items)
    assert code == 0
    assert H.main(["diagnose", "--bundle", str(out), "--trials", "20", "--triangles", "50"]) == 0
    rows = list(csv.DictReader(io.StringIO((out / "diagnostics.csv").read_text())))
    checks = {r["check"] for r in rows}
    assert {"fd_gradient", "triangle", "two_loop_vs_dense", "hessian_bounds", "pairs", "linear_rate"} <= checks
    assert all(r["pass"] == "1" for r in rows)


def test_diagnose_dataset_only(tmp_path, capsys):
    path = tmp_path / "d.rslb"
    H.main(["generate", "--out", str(path), *_set_args(SMALL_KARCHER)])
    assert H.main(["diagnose", "--dataset", str(path), "--trials", "10", "--triangles", "20"]) == 0
    assert (tmp_path / "diagnostics.txt").exists()


def test_diagnose_failure_exit_code(tmp_path, monkeypatch, capsys):
    path = tmp_path / "d.rslb"
    H.main(["generate", "--out", str(path), *_set_args(SMALL_KARCHER)])

    def failing(*a, **k):
        return V.DiagnosticReport().add("fd_gradient", "max_scaled_error", 1.0, 1e-4)

    monkeypatch.setattr(H.V, "fd_gradient_check", failing)
    assert H.main(["diagnose", "--dataset", str(path), "--trials", "4", "--triangles", "4"]) == 3
    assert "fd_gradient/max_scaled_error" in capsys.readouterr().err


def test_export_merged_csv(tmp_path, capsys):
    code, out = _run(tmp_path, "b")
    assert H.main(["export", "--bundle", str(out)]) == 0
    lines = (out / "merged.csv").read_text().splitlines()
    assert lines[0] == "passes,rsv-lbfgs,rsvrg"
    assert all(len(line.split(",")) == 3 for line in lines)
    script = (out / "plot.gp").read_text()
    assert "set logscale y" in script and "number of passes over full dataset" in script


def test_export_empty_trace_is_error(tmp_path, capsys):
    code, out = _run(tmp_path, "b")
    (out / "rsvrg.csv").write_text("passes,objective,error\n")
    assert H.main(["export", "--bundle", str(out)]) == 1
    with pytest.raises(H.ExportError):
        H.export_bundle(out)
