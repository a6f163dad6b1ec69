"""Command-line front end.

Subcommands
-----------
validate  check an experiment file and report problems
run       run the experiment described by a file (or a run manifest)
sweep     run a cartesian sweep, with axes from the file or ``--axis``

Every run writes CSV tables, ``summary.json``, ``manifest.json`` (enough to
repeat the run with ``run --config manifest.json``) and ``plot.py``.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, expand_sweep, load_document, parse_document, validate_document
from .coverage import AnalyticSettings, CoverageQuery, config_hash, median_rate, rate_coverage_analytic
from .order_statistics import IntensityMeasures, LinkPowerDistribution, los_fraction
from .quadrature import QuadratureSettings, QuadratureWarning
from .simulator import CapacityWarning, empirical_cdf_tk, empirical_los_fraction, empirical_rate_coverage_many

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
ENGINE_MODES = {"analytic": "coverage_analytic", "sim": "coverage_sim", "both": "coverage_both"}


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if np.isnan(x) else f"{x:.17g}"


def write_atomic(path: Path, text: str):
    """Write through a temporary file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    write_atomic(path, "\n".join(lines) + "\n")


class Run:
    """Collects outputs of one invocation."""

    def __init__(self, out: Path, document: dict):
        self.out = out
        self.document = document
        self.files: dict[str, str] = {}
        self.kinds: dict[str, str] = {}
        self.summary: dict = {}
        self.cache: dict = {}

    def csv(self, name, kind, header, rows):
        path = self.out / name
        write_csv(path, header, rows)
        self.files[name] = hashlib.sha256(path.read_bytes()).hexdigest()
        self.kinds[name] = kind

    def settings(self, doc):
        tol = doc["experiment"].get("tolerance", 1e-5)
        return AnalyticSettings(outer=QuadratureSettings(relative_tolerance=tol))


def _sim(doc):
    sim = {"n_realizations": 100000, "base_seed": 0, "window_radius": None}
    sim.update(doc["experiment"].get("sim", {}))
    return sim


def _suffix(tag):
    return f"__{tag}" if tag else ""


def _cdf_verify(run: Run, doc, tag):
    spec = parse_document(doc)
    exp = doc["experiment"]
    idx = exp.get("operator_index", 0)
    op = spec.config.operators[idx]
    measures = IntensityMeasures(op.density, spec.config.propagation)
    sim = _sim(doc)
    ks = {}
    for k in exp["ranks"]:
        dist = LinkPowerDistribution(measures, k)
        grid = spec.grid_values()
        if grid is None:
            count = (spec.grid or {}).get("count", 200)
            grid = np.geomspace(dist.quantile(1e-4), dist.quantile(1 - 1e-4), count)
        ecdf = empirical_cdf_tk(spec.config, idx, k, sim["n_realizations"], sim["base_seed"], sim["window_radius"])
        ks[str(k)] = ecdf.ks_distance(dist.cdf)
        rows = zip(grid, dist.cdf(grid), ecdf(grid))
        run.csv(f"cdf_verify_K{k}{_suffix(tag)}.csv", "cdf", ["t_linear", "cdf_analytic", "cdf_empirical"], rows)
        print(f"K={k}: KS distance {ks[str(k)]:.5f} ({sim['n_realizations']} realizations)")
    run.summary.setdefault("ks_distance", {})[tag or "base"] = ks


def _los_ratio(run: Run, doc, tag, engine):
    spec = parse_document(doc)
    exp = doc["experiment"]
    idx = exp.get("operator_index", 0)
    op = spec.config.operators[idx]
    measures = IntensityMeasures(op.density, spec.config.propagation)
    ranks = list(exp["ranks"])
    analytic = [los_fraction(k, measures) for k in ranks]
    if engine == "analytic":
        empirical = [None] * len(ranks)
    else:
        sim = _sim(doc)
        empirical = list(empirical_los_fraction(spec.config, idx, ranks, sim["n_realizations"],
                                                sim["base_seed"], sim["window_radius"]))
    run.csv(f"los_ratio{_suffix(tag)}.csv", "los_ratio",
            ["k", "los_fraction_analytic", "los_fraction_empirical"], zip(ranks, analytic, empirical))
    run.summary.setdefault("los_fraction", {})[tag or "base"] = dict(zip(map(str, ranks), analytic))


def _coverage(run: Run, points, baseline: bool):
    """Coverage curves for ``points`` = [(doc, tag)], simulating shared-geometry points together."""
    jobs = []
    for doc, tag in points:
        spec = parse_document(doc)
        jobs.append((doc, tag, spec))
        if baseline:
            base_doc = copy.deepcopy(doc)
            base_doc["network"]["operators"] = base_doc["network"]["operators"][:1]
            jobs.append((base_doc, f"{tag}__no_sharing" if tag else "no_sharing", parse_document(base_doc)))
    medians = {}
    sim_jobs = {}
    for doc, tag, spec in jobs:
        mode = doc["experiment"]["mode"]
        gamma = spec.grid_values()
        if mode in ("coverage_analytic", "coverage_both"):
            key = (config_hash(spec.config), tuple(gamma), doc["experiment"].get("tolerance"))
            if key not in run.cache:
                run.cache[key] = rate_coverage_analytic(CoverageQuery(spec.config, tuple(gamma)), run.settings(doc))
            curve = run.cache[key]
            run.csv(f"coverage_analytic{_suffix(tag)}.csv", "coverage_analytic",
                    ["gamma_bps", "coverage"], zip(curve.gamma, curve.coverage))
            medians.setdefault(tag, {})["analytic"] = _median_or_none(curve)
        if mode in ("coverage_sim", "coverage_both"):
            sim = _sim(doc)
            key = (json.dumps(sim, sort_keys=True), tuple(gamma), repr(spec.config.propagation))
            sim_jobs.setdefault(key, []).append((tag, spec, sim, gamma))
    for group in sim_jobs.values():
        # configs with matching leading operators share one sampling pass
        group.sort(key=lambda j: -len(j[1].config.operators))
        while group:
            widest = group[0][1].config
            share, rest = [], []
            for job in group:
                ops = job[1].config.operators
                same = all(a.density == b.density for a, b in zip(ops, widest.operators))
                (share if same else rest).append(job)
            sim = share[0][2]
            curves = empirical_rate_coverage_many([j[1].config for j in share], share[0][3],
                                                  sim["n_realizations"], sim["base_seed"], sim["window_radius"])
            for (tag, _, _, _), curve in zip(share, curves):
                run.csv(f"coverage_sim{_suffix(tag)}.csv", "coverage_sim",
                        ["gamma_bps", "coverage", "stderr"], zip(curve.gamma, curve.coverage, curve.stderr))
                medians.setdefault(tag, {})["sim"] = _median_or_none(curve)
            group = rest
    run.summary.setdefault("median_rate_bps", {}).update(medians)
    if baseline:
        gains = {}
        for doc, tag, _ in jobs:
            if tag.endswith("no_sharing"):
                continue
            base = medians.get(f"{tag}__no_sharing" if tag else "no_sharing", {})
            for engine, value in medians.get(tag, {}).items():
                if value is not None and base.get(engine):
                    gains.setdefault(tag or "base", {})[engine] = value / base[engine] - 1.0
        run.summary.setdefault("median_gain_over_no_sharing", {}).update(gains)
    for tag, m in medians.items():
        shown = ", ".join(f"{e} {v / 1e6:.1f} Mbit/s" if v else f"{e} n/a" for e, v in m.items())
        print(f"median rate [{tag or 'base'}]: {shown}")


def _median_or_none(curve):
    try:
        return median_rate(curve)
    except ValueError:
        return None


PLOT_TEMPLATE = '''"""Plot the CSV tables of this run (generated; edit freely)."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
FILES = {files!r}


def read(name):
    with open(HERE / name) as fh:
        rows = list(csv.DictReader(fh))
    return {{k: [float(r[k]) if r[k] else float("nan") for r in rows] for k in rows[0]}}


def main():
    groups = {{}}
    for name, kind in FILES.items():
        groups.setdefault(kind.split("_")[0], []).append((name, kind))
    for kind, items in groups.items():
        fig, ax = plt.subplots()
        for name, sub in items:
            d = read(name)
            label = name.rsplit(".", 1)[0]
            if kind == "coverage":
                style = "-" if sub.endswith("analytic") else "o"
                ax.plot([g / 1e6 for g in d["gamma_bps"]], d["coverage"], style, ms=3, label=label)
                ax.set_xlabel("rate threshold (Mbit/s)")
                ax.set_ylabel("rate coverage")
            elif kind == "cdf":
                ax.semilogx(d["t_linear"], d["cdf_analytic"], "-", label=label + " analytic")
                ax.semilogx(d["t_linear"], d["cdf_empirical"], "o", ms=2, label=label + " empirical")
                ax.set_xlabel("link power")
                ax.set_ylabel("CDF")
            else:
                ax.plot(d["k"], d["los_fraction_analytic"], "-", label=label + " analytic")
                ax.plot(d["k"], d["los_fraction_empirical"], "o", ms=3, label=label + " empirical")
                ax.set_xlabel("coordination set size")
                ax.set_ylabel("LoS fraction")
        ax.legend(fontsize=6)
        fig.savefig(HERE / f"{{kind}}.png", dpi=150)


if __name__ == "__main__":
    main()
'''


def _apply_overrides(doc: dict, args) -> dict:
    doc = copy.deepcopy(doc)
    exp = doc.setdefault("experiment", {})
    sim = exp.setdefault("sim", {}) if (args.seed is not None or args.realizations is not None) else None
    if args.seed is not None:
        sim["base_seed"] = args.seed
    if args.realizations is not None:
        sim["n_realizations"] = args.realizations
    if args.tolerance is not None:
        exp["tolerance"] = args.tolerance
    if getattr(args, "axis", None):
        axes = []
        for spec in args.axis:
            path, _, values = spec.partition("=")
            if not values:
                raise ConfigError([f"--axis {spec!r}: expected PATH=V1,V2,..."])
            axes.append({"path": path, "values": [json.loads(v) for v in values.split(",")]})
        inner = args.inner_mode or exp.get("sweep", {}).get("mode") or (
            exp["mode"] if exp.get("mode") != "sweep" else None)
        if inner is None:
            raise ConfigError(["sweep: give --inner-mode or a sweep section in the file"])
        sweep = {"mode": inner, "axes": axes}
        if args.no_sharing_baseline or exp.get("sweep", {}).get("no_sharing_baseline"):
            sweep["no_sharing_baseline"] = True
        exp["mode"] = "sweep"
        exp["sweep"] = sweep
    if args.engine is not None:
        target = ENGINE_MODES[args.engine]
        if exp.get("mode", "").startswith("coverage"):
            exp["mode"] = target
        if exp.get("mode") == "sweep" and exp.get("sweep", {}).get("mode", "").startswith("coverage"):
            exp["sweep"]["mode"] = target
    return doc


def execute(doc: dict, out: Path, engine: str | None = None) -> int:
    """Run a resolved experiment document, writing artifacts under ``out``."""
    spec = parse_document(doc)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(out, doc)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if spec.mode == "sweep":
            sweep = doc["experiment"]["sweep"]
            points = list(expand_sweep(doc))
            inner = sweep["mode"]
            if inner.startswith("coverage"):
                _coverage(run, points, sweep.get("no_sharing_baseline", False))
            else:
                for point, tag in points:
                    _dispatch(run, point, tag, inner, engine)
        else:
            _dispatch(run, doc, "", spec.mode, engine)
    health = [str(w.message) for w in caught if issubclass(w.category, QuadratureWarning)]
    notes = sorted({str(w.message) for w in caught if issubclass(w.category, CapacityWarning)})
    for msg in notes:
        print(f"warning: {msg}", file=sys.stderr)
    for msg in health:
        print(f"numerical health: {msg}", file=sys.stderr)
    run.summary["numerical_warnings"] = health
    write_atomic(out / "summary.json", json.dumps(run.summary, indent=2, sort_keys=True) + "\n")
    manifest = {
        "tool": "mmwave_coord",
        "version": __version__,
        "experiment_spec": doc,
        "seeds": {"base_seed": _sim(doc)["base_seed"]},
        "outputs": run.files,
        "numerical_warnings": health,
    }
    write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    write_atomic(out / "plot.py", PLOT_TEMPLATE.format(files=run.kinds))
    return EXIT_NUMERICAL if health else EXIT_OK


def _dispatch(run, doc, tag, mode, engine):
    if mode == "cdf_verify":
        _cdf_verify(run, doc, tag)
    elif mode == "los_ratio":
        _los_ratio(run, doc, tag, engine)
    else:
        _coverage(run, [(doc, tag)], False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmwave-coord", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    val = sub.add_parser("validate", help="check an experiment file")
    val.add_argument("--config", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name, help=f"{name} an experiment")
        p.add_argument("--config", required=True, help="experiment file or manifest.json")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="base seed for the simulator (u64)")
        p.add_argument("--realizations", type=int, help="Monte Carlo realizations")
        p.add_argument("--engine", choices=sorted(ENGINE_MODES), help="coverage engine(s)")
        p.add_argument("--tolerance", type=float, help="relative tolerance of the analytic engine")
        if name == "sweep":
            p.add_argument("--axis", action="append", default=[],
                           help="PATH=V1,V2,... (repeatable), e.g. network.operators[1].coord_size=0,3,6")
            p.add_argument("--inner-mode", choices=[m for m in ENGINE_MODES.values()] + ["cdf_verify", "los_ratio"])
            p.add_argument("--no-sharing-baseline", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_document(args.config)
        if args.command == "validate":
            report = validate_document(doc)
            print(report.render())
            return EXIT_OK if report.ok else EXIT_CONFIG
        if args.command == "sweep" and not args.axis and doc.get("experiment", {}).get("mode") != "sweep":
            raise ConfigError(["sweep: the file has no sweep section; pass --axis PATH=V1,V2"])
        doc = _apply_overrides(doc, args)
        report = validate_document(doc)
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
        if not report.ok:
            raise ConfigError(report.errors)
        return execute(doc, Path(args.out), args.engine)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
