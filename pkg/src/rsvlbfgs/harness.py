"""Command-line experiment harness: generate, run, diagnose, export.

Every parameter lives in a flat ``key=value`` spec (one key per line).
Defaults come from :class:`ExperimentSpec`, an optional ``--preset`` and
``--spec`` file are layered on top, and ``--set key=value`` flags win last.
Per-algorithm settings use a dotted prefix, e.g. ``rsvrg.eta1=0.3``.

A run writes a *bundle* directory::

    dataset.rslb            binary dataset (see dataio)
    manifest.txt            the full spec plus dataset hash and run status
    <alg>.csv               passes,objective,error (one row per epoch)
    <alg>.txt               config and pair statistics
    <alg>.epochs.csv        per-epoch optimizer diagnostics
    rsv-lbfgs.pairs.npz     end-of-epoch L-BFGS memories (for diagnose)

``run --spec bundle/manifest.txt`` reproduces the traces byte for byte.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 failed diagnostics.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import verification as V
from .dataio import DatasetFormatError, header_text, load_dataset, save_dataset
from .lbfgs import CorrectionPair, LbfgsMemory
from .optimizers import DivergenceError, OptimizerConfig, RunTrace, run_rsv_lbfgs, run_rsvrg, run_vr_pca
from .problems import (
    EIG_KIND,
    KARCHER_KIND,
    KarcherProblem,
    OracleError,
    RayleighProblem,
    eig_error,
    gen_eig_data,
    gen_spd_data,
    karcher_error,
    karcher_oracle,
    top_eig_oracle,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_DIAGNOSTICS = 0, 1, 2, 3

RUNNERS = {"rsv-lbfgs": run_rsv_lbfgs, "rsvrg": run_rsvrg, "vr-pca": run_vr_pca}
# fixed ids so adding an algorithm never changes another one's seed
_ALG_IDS = {"rsv-lbfgs": 1, "rsvrg": 2, "vr-pca": 3}
_X0_ID = 0

_CONFIG_KEYS = {f.name: f.type for f in fields(OptimizerConfig) if f.name != "seed"}
_DATA_KEYS = {"karcher": ("n", "count", "cond"), "eig": ("d", "N", "gap")}

PRESETS: dict[str, dict[str, str]] = {
    "karcher-desk": {
        "kind": "karcher", "n": "20", "count": "50", "cond": "100", "mb": "10",
        "R": "1", "M": "2", "option": "1", "T": "25", "tol": "1e-14",
        "algorithms": "rsv-lbfgs,rsvrg",
        "rsv-lbfgs.eta1": "0.3", "rsv-lbfgs.eta2": "0.7", "rsvrg.eta1": "0.3",
    },
    "eig-desk": {
        "kind": "eig", "d": "100", "N": "10000", "gap": "0.05", "mb": "100",
        "R": "1", "M": "10", "option": "2", "T": "30", "tol": "1e-14", "curvature_eps": "0.8",
        "algorithms": "rsv-lbfgs,rsvrg,vr-pca",
        "rsv-lbfgs.eta1": "0.05", "rsv-lbfgs.eta2": "0.5", "rsvrg.eta1": "0.2", "vr-pca.eta1": "0.5",
    },
}
for _cond, _mb in (("10", "50"), ("100", "5"), ("1000", "50")):
    PRESETS[f"karcher-full-cond{_cond}"] = {
        **PRESETS["karcher-desk"], "n": "100", "count": "1000", "cond": _cond, "mb": _mb, "T": "50",
    }
for _gap, _R in (("0.005", "5"), ("0.01", "10"), ("0.05", "10"), ("0.1", "10")):
    PRESETS[f"eig-full-gap{_gap}"] = {
        **PRESETS["eig-desk"], "d": "1000", "N": "100000", "gap": _gap, "R": _R, "T": "50",
        "curvature_eps": "1e-8", "rsv-lbfgs.eta1": "0.001", "rsv-lbfgs.eta2": "0.1",
    }


class UsageError(ValueError):
    pass


def _parse_bool(s):
    return s.strip().lower() in ("1", "true", "yes", "on")


def _convert(tp: str, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if "int" in tp:
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    return float(raw)


@dataclass
class ExperimentSpec:
    kind: str = KARCHER_KIND
    n: int = 20
    count: int = 50
    cond: float = 100.0
    d: int = 100
    N: int = 10_000
    gap: float = 0.05
    seed: int = 0
    algorithms: tuple[str, ...] = ("rsv-lbfgs", "rsvrg")
    config: dict = field(default_factory=dict)  # shared OptimizerConfig overrides
    per_alg: dict = field(default_factory=dict)  # alg -> OptimizerConfig overrides
    inner_every: int = 0
    dataset_sha256: str | None = None

    # -- construction --------------------------------------------------
    @classmethod
    def from_items(cls, items: dict[str, str]) -> "ExperimentSpec":
        spec = cls()
        for key, raw in items.items():
            spec.set(key, raw)
        spec.validate()
        return spec

    def set(self, key: str, raw: str):
        key = key.strip()
        if key.startswith("result."):
            return  # run outcomes recorded in a manifest
        if "." in key:
            alg, sub = key.split(".", 1)
            if alg not in RUNNERS:
                raise UsageError(f"unknown algorithm prefix in {key!r}")
            if sub not in _CONFIG_KEYS:
                raise UsageError(f"unknown optimizer key {sub!r}")
            self.per_alg.setdefault(alg, {})[sub] = _convert(_CONFIG_KEYS[sub], raw)
        elif key in _CONFIG_KEYS:
            self.config[key] = _convert(_CONFIG_KEYS[key], raw)
        elif key == "kind":
            self.kind = raw.strip()
        elif key == "algorithms":
            self.algorithms = tuple(a.strip() for a in raw.split(",") if a.strip())
        elif key in ("n", "count", "d", "N", "seed", "inner_every"):
            setattr(self, key, int(float(raw)))
        elif key in ("cond", "gap"):
            setattr(self, key, float(raw))
        elif key == "dataset_sha256":
            self.dataset_sha256 = raw.strip() or None
        else:
            raise UsageError(f"unknown spec key {key!r}")

    def validate(self):
        if self.kind not in _DATA_KEYS:
            raise UsageError(f"kind must be one of {sorted(_DATA_KEYS)}")
        if not self.algorithms:
            raise UsageError("no algorithms selected")
        for a in self.algorithms:
            if a not in RUNNERS:
                raise UsageError(f"unknown algorithm {a!r}")
            if a == "vr-pca" and self.kind != EIG_KIND:
                raise UsageError("vr-pca only applies to the eigenvector problem")
        try:
            for a in self.algorithms:
                self.optimizer_config(a).validate(self.n_components)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    # -- derived values ------------------------------------------------
    @property
    def n_components(self):
        return self.count if self.kind == KARCHER_KIND else self.N

    def algorithm_seed(self, alg: str) -> int:
        return int(np.random.SeedSequence([self.seed, _ALG_IDS[alg]]).generate_state(1)[0])

    def optimizer_config(self, alg: str) -> OptimizerConfig:
        kw = {**self.config, **self.per_alg.get(alg, {})}
        return OptimizerConfig(**kw, seed=self.algorithm_seed(alg))

    def generate(self):
        if self.kind == KARCHER_KIND:
            return gen_spd_data(self.n, self.count, self.cond, self.seed)
        return gen_eig_data(self.d, self.N, self.gap, self.seed)

    def adopt_dataset(self, data):
        """Take generator parameters from an existing dataset."""
        p = data.params()
        self.kind = p["kind"]
        for k in _DATA_KEYS[self.kind]:
            setattr(self, k, p[k])

    def items(self) -> list[tuple[str, str]]:
        out = [("kind", self.kind)]
        out += [(k, repr(getattr(self, k))) for k in _DATA_KEYS[self.kind]]
        out += [("seed", str(self.seed)), ("algorithms", ",".join(self.algorithms))]
        out += [(k, repr(v)) for k, v in sorted(self.config.items())]
        for alg in sorted(self.per_alg):
            out += [(f"{alg}.{k}", repr(v)) for k, v in sorted(self.per_alg[alg].items())]
        out.append(("inner_every", str(self.inner_every)))
        if self.dataset_sha256:
            out.append(("dataset_sha256", self.dataset_sha256))
        return out


def read_spec_file(path) -> dict[str, str]:
    items = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        items[k.strip()] = v.strip()
    return items


def build_spec(args) -> ExperimentSpec:
    items: dict[str, str] = {}
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(sorted(PRESETS))}")
        items.update(PRESETS[args.preset])
    if getattr(args, "spec", None):
        items.update(read_spec_file(args.spec))
    for kv in getattr(args, "set", None) or []:
        if "=" not in kv:
            raise UsageError(f"--set expects key=value, got {kv!r}")
        k, v = kv.split("=", 1)
        items[k.strip()] = v.strip()
    try:
        return ExperimentSpec.from_items(items)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# run


def make_problem(data):
    return KarcherProblem(data) if data.kind == KARCHER_KIND else RayleighProblem(data)


def ground_truth(data):
    """``(error_fn, summary)`` from the oracle for ``data``."""
    if data.kind == KARCHER_KIND:
        W = karcher_oracle(data)
        return (lambda X: karcher_error(X, W)), {"oracle": "karcher_fixed_point"}, W
    e, z = top_eig_oracle(data)
    return (lambda x: eig_error(x, data, e)), {"oracle": "dense_eigh", "e_star": repr(e)}, z


def _epochs_csv(trace: RunTrace) -> str:
    if not trace.epochs:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(trace.epochs[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(trace.epochs)
    return buf.getvalue()


def _save_pairs(path, snapshots):
    """Store memories as padded arrays: z, y (S, M, *shape), base (S, *shape), size (S,)."""
    if not snapshots:
        return
    S = len(snapshots)
    Mmax = max(len(s) for s in snapshots)
    shape = snapshots[0][0].z.shape
    z = np.zeros((S, Mmax) + shape)
    y = np.zeros_like(z)
    base = np.zeros((S,) + shape)
    size = np.zeros(S, dtype=np.int64)
    for k, snap in enumerate(snapshots):
        size[k] = len(snap)
        base[k] = snap[0].base
        for j, p in enumerate(snap):
            z[k, j], y[k, j] = p.z, p.y
    np.savez(path, z=z, y=y, base=base, size=size)


def load_pairs(path, manifold) -> list[list[CorrectionPair]]:
    with np.load(path) as f:
        z, y, base, size = f["z"], f["y"], f["base"], f["size"]
    return [[CorrectionPair.build(manifold, base[k], z[k, j], y[k, j]) for j in range(size[k])]
            for k in range(len(size))]


def _run_one(alg, spec, data, problem, x0, error_fn, outdir: Path):
    cfg = spec.optimizer_config(alg)
    snapshots, inner_rows = [], []
    m = cfg.inner_count(problem.n_components)

    def callback(info):
        if alg == "rsv-lbfgs" and info["i"] == m - 1 and len(info["memory"]):
            snapshots.append(info["memory"].snapshot())
        if spec.inner_every and info["i"] % spec.inner_every == 0:
            x = info["x"]
            passes = 2.0 * info["epoch"] + 1.0 + info["i"] / m
            inner_rows.append((passes, problem.value(x), error_fn(x)))

    status = "ok"
    try:
        target = data if alg == "vr-pca" else problem
        trace = RUNNERS[alg](target, cfg, x0=x0, error_fn=error_fn, callback=callback)
    except DivergenceError as exc:
        trace, status = exc.trace, "diverged"
    (outdir / f"{alg}.csv").write_text(trace.to_csv())
    (outdir / f"{alg}.txt").write_text(trace.sidecar())
    (outdir / f"{alg}.epochs.csv").write_text(_epochs_csv(trace))
    if inner_rows:
        (outdir / f"{alg}.inner.csv").write_text(
            "passes,objective,error\n" + "".join(f"{a:.17g},{b:.17g},{c:.17g}\n" for a, b, c in inner_rows))
    if snapshots:
        _save_pairs(outdir / f"{alg}.pairs.npz", snapshots)
    return alg, status, trace


def cmd_run(spec: ExperimentSpec, outdir: Path, dataset: Path | None = None, jobs: int = 1, log=print) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    target = outdir / "dataset.rslb"
    if dataset is not None:
        data, fp = load_dataset(dataset)
        if spec.dataset_sha256 and spec.dataset_sha256 != fp:
            raise UsageError(f"dataset hash {fp} does not match the spec's {spec.dataset_sha256}")
        spec.adopt_dataset(data)
        if Path(dataset).resolve() != target.resolve():
            shutil.copyfile(dataset, target)
    else:
        data = spec.generate()
        fp = save_dataset(data, target)
        if spec.dataset_sha256 and spec.dataset_sha256 != fp:
            raise UsageError(f"regenerated dataset hash {fp} does not match the spec's {spec.dataset_sha256}")
    spec.dataset_sha256 = fp
    spec.validate()
    manifest = spec.items()
    try:
        error_fn, summary, _ = ground_truth(data)
    except OracleError as exc:
        manifest.append(("result.oracle", f"failed: {exc}"))
        _write_manifest(outdir, manifest)
        log(f"oracle failure: {exc}")
        return EXIT_NUMERIC
    manifest += [(f"result.{k}", v) for k, v in summary.items()]
    problem = make_problem(data)
    x0 = problem.initial_point(np.random.default_rng(np.random.SeedSequence([spec.seed, _X0_ID])))
    args = [(a, spec, data, problem, x0, error_fn, outdir) for a in spec.algorithms]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda a: _run_one(*a), args))
    else:
        results = [_run_one(*a) for a in args]
    code = EXIT_OK
    for alg, status, trace in results:
        manifest += [(f"result.{alg}.seed", str(spec.algorithm_seed(alg))), (f"result.{alg}.status", status),
                     (f"result.{alg}.final_error", f"{trace.error[-1]:.6g}")]
        log(f"{alg}: {status}, {len(trace) - 1} epochs, final error {trace.error[-1]:.3e}")
        if status != "ok":
            code = EXIT_NUMERIC
    _write_manifest(outdir, manifest)
    return code


def _write_manifest(outdir, items):
    (outdir / "manifest.txt").write_text("".join(f"{k}={v}\n" for k, v in items))


# ---------------------------------------------------------------------------
# diagnose


def _synthetic_memory(manifold, x, depth, rng):
    mem = LbfgsMemory(manifold, depth)
    mem.base = x
    while len(mem) < depth:
        z = manifold.random_tangent(x, rng)
        mem.offer(x, z, z + 0.5 * manifold.random_tangent(x, rng))
    return mem


def diagnose(data, bundle: Path | None = None, trials: int = 100, triangles: int = 1000, seed: int = 0):
    """Run the diagnostic suite on a dataset and, if given, a run bundle."""
    rng = np.random.default_rng(seed)
    problem = make_problem(data)
    Mf = problem.manifold
    report = V.DiagnosticReport(provenance={"dataset": data.params(), "seed": seed})
    _, _, x_star = ground_truth(data)
    x0 = problem.initial_point(rng)
    report.extend(V.fd_gradient_check(problem, x0, trials, rng))
    report.extend(V.fd_gradient_check(problem, x_star, max(1, trials // 10), rng, components=False))
    c_delta = V.SPD_CURVATURE_LOWER if data.kind == KARCHER_KIND else V.SPHERE_CURVATURE_LOWER
    report.extend(V.triangle_check(Mf, c_delta, triangles, rng))
    consts = V.smoothness_convexity_probe(problem, max(1, trials // 4), rng, center=x_star, radius=0.5)
    report.add("probe", "L_hat", consts.L)
    report.add("probe", "S_hat", consts.S)

    basis = V.orthonormal_basis(Mf, x0)
    mem = _synthetic_memory(Mf, x0, 2, rng)
    report.extend(V.two_loop_vs_dense(mem, Mf.random_tangent(x0, rng), basis=basis))

    gammas = []
    eta2, T, observed = 0.1, 1, None
    pairs_file = bundle / "rsv-lbfgs.pairs.npz" if bundle is not None else None
    if pairs_file is not None and pairs_file.exists():
        spec = ExperimentSpec.from_items(read_spec_file(bundle / "manifest.txt"))
        cfg = spec.optimizer_config("rsv-lbfgs")
        eta2 = cfg.eta2
        snapshots = load_pairs(pairs_file, Mf)
        failed = 0
        filtered = 0
        for snap in snapshots:
            rep = V.hessian_bounds_check(Mf, snap, cfg.M)
            failed += not rep.passed
            filtered += int(rep.get("hessian_bounds", "filtered_pairs").measured)
            if rep.passed and len(snap):
                gammas.append((rep.get("hessian_bounds", "gamma_hat").measured, rep.get("hessian_bounds", "Gamma_hat").measured))
        report.add("hessian_bounds", "snapshots", len(snapshots))
        report.add("hessian_bounds", "snapshots_failed", failed, 0)
        report.add("hessian_bounds", "filtered_pairs", filtered)
        if snapshots:
            last = snapshots[-1]
            m = LbfgsMemory(Mf, cfg.M)
            m.pairs.extend(last)
            m.base = last[0].base
            report.extend(V.two_loop_vs_dense(m, Mf.random_tangent(m.base, rng)))
        side = dict(line.split("=", 1) for line in (bundle / "rsv-lbfgs.txt").read_text().splitlines())
        report.add("pairs", "rejected", float(side["pairs_rejected"]))
        report.add("pairs", "accepted", float(side["pairs_accepted"]))
        errs = [float(r["error"]) for r in csv.DictReader(io.StringIO((bundle / "rsv-lbfgs.csv").read_text()))]
        T = max(1, len(errs) - 1)
        observed = V.geometric_rate(errs)
    if gammas and consts.S > 0:
        consts.gamma_lo = min(g for g, _ in gammas)
        consts.Gamma_hi = max(G for _, G in gammas)
        report.extend(V.rate_report_rows(V.linear_rate_report(consts, eta2, T), observed))
    else:
        report.add("linear_rate", "applicable", 0.0)
    return report


# ---------------------------------------------------------------------------
# export


class ExportError(ValueError):
    pass


def read_trace_csv(path) -> list[dict[str, float]]:
    rows = list(csv.DictReader(io.StringIO(Path(path).read_text())))
    return [{k: float(v) for k, v in r.items()} for r in rows]


def export_bundle(bundle: Path, outdir: Path | None = None) -> tuple[Path, Path]:
    """Merged ``passes,<alg>...`` error CSV plus a gnuplot script."""
    outdir = outdir or bundle
    spec = ExperimentSpec.from_items(read_spec_file(bundle / "manifest.txt"))
    series = {}
    for alg in spec.algorithms:
        path = bundle / f"{alg}.csv"
        if not path.exists():
            raise ExportError(f"missing trace {path}")
        rows = read_trace_csv(path)
        if not rows:
            raise ExportError(f"trace {path} is empty")
        series[alg] = {r["passes"]: r["error"] for r in rows}
    passes = sorted(set().union(*series.values()))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["passes", *series])
    for p in passes:
        w.writerow([f"{p:.17g}"] + [f"{s[p]:.17g}" if p in s else "" for s in series.values()])
    outdir.mkdir(parents=True, exist_ok=True)
    merged = outdir / "merged.csv"
    merged.write_text(buf.getvalue())
    title = f"{spec.kind} " + " ".join(f"{k}={getattr(spec, k)}" for k in _DATA_KEYS[spec.kind])
    plots = ", \\\n     ".join(
        f"'merged.csv' using 1:{j + 2} with linespoints title '{alg}'" for j, alg in enumerate(series))
    script = (
        "set datafile separator ','\n"
        "set datafile missing ''\n"
        "set key top right\n"
        "set logscale y\n"
        "set format y '10^{%L}'\n"
        "set xlabel 'number of passes over full dataset'\n"
        "set ylabel 'error'\n"
        f"set title '{title}'\n"
        "set terminal pngcairo size 800,600\n"
        "set output 'errors.png'\n"
        f"plot {plots}\n"
    )
    gp = outdir / "plot.gp"
    gp.write_text(script)
    return merged, gp


# ---------------------------------------------------------------------------
# CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_spec_args(p):
    p.add_argument("--spec", help="key=value spec file (a bundle manifest works too)")
    p.add_argument("--preset", help=f"one of: {', '.join(sorted(PRESETS))}")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one spec key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rsvlbfgs", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    _add_spec_args(g)
    g.add_argument("--out", required=True, help="dataset file to write")

    r = sub.add_parser("run", help="run the selected algorithms and write a bundle")
    _add_spec_args(r)
    r.add_argument("--dataset", help="existing dataset file (otherwise generated from the spec)")
    r.add_argument("--out", required=True, help="bundle directory")
    r.add_argument("--jobs", type=int, default=1, help="run algorithms concurrently")

    d = sub.add_parser("diagnose", help="run the diagnostic suite")
    src = d.add_mutually_exclusive_group(required=True)
    src.add_argument("--dataset", help="dataset file")
    src.add_argument("--bundle", help="bundle directory from `run`")
    d.add_argument("--out", help="directory for diagnostics.{txt,csv} (default: bundle or dataset dir)")
    d.add_argument("--trials", type=int, default=100)
    d.add_argument("--triangles", type=int, default=1000)
    d.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("export", help="merge traces and emit a gnuplot script")
    e.add_argument("--bundle", required=True)
    e.add_argument("--out", help="output directory (default: the bundle)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            spec = build_spec(args)
            data = spec.generate()
            out = Path(args.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            fp = save_dataset(data, out)
            out.with_suffix(".txt").write_text(header_text(data, fp))
            print(fp)
            return EXIT_OK
        if args.command == "run":
            if args.jobs < 1:
                raise UsageError("--jobs must be >= 1")
            spec = build_spec(args)
            return cmd_run(spec, Path(args.out), Path(args.dataset) if args.dataset else None, args.jobs)
        if args.command == "diagnose":
            bundle = Path(args.bundle) if args.bundle else None
            path = bundle / "dataset.rslb" if bundle else Path(args.dataset)
            data, fp = load_dataset(path)
            report = diagnose(data, bundle, args.trials, args.triangles, args.seed)
            report.provenance["dataset_sha256"] = fp
            out = Path(args.out) if args.out else (bundle or path.parent)
            out.mkdir(parents=True, exist_ok=True)
            (out / "diagnostics.txt").write_text(report.to_text())
            (out / "diagnostics.csv").write_text(report.to_csv())
            print(report.to_text(), end="")
            if not report.passed:
                names = ", ".join(f"{r.check}/{r.name}" for r in report.failures())
                print(f"failed checks: {names}", file=sys.stderr)
                return EXIT_DIAGNOSTICS
            return EXIT_OK
        if args.command == "export":
            merged, gp = export_bundle(Path(args.bundle), Path(args.out) if args.out else None)
            print(merged)
            print(gp)
            return EXIT_OK
    except (UsageError, ExportError, DatasetFormatError, FileNotFoundError) as exc:
        print(f"rsvlbfgs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE  # unreachable: subcommand is required


if __name__ == "__main__":
    sys.exit(main())
