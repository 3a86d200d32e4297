"""Command-line pipeline: input file (or generator) -> MF-DFA ->
IAAFT ensemble -> tests -> verdict report and plot-ready tables."""

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MultifractError, MalformedRow, NonMonotoneDates, NonPositivePrice, SeriesTooShort
from .ingest import load_price_csv, log_returns
from .mfdfa import (
    AnalysisConfig,
    analyze_returns,
    default_q_grid,
    default_scale_grid,
    fluctuation_surface,
    make_profile,
)
from .mftest import ensemble_statistics, format_report, verdict
from .surrogate import derive_seed, iaaft, IaaftConfig
from .synth import CascadeSpec, FbmSpec, binomial_cascade, fbm, gaussian_white_noise

ENV_PREFIX = "MULTIFRACT_"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_DATA_ERRORS = (MalformedRow, NonMonotoneDates, NonPositivePrice, SeriesTooShort,
                FileNotFoundError)


@dataclass(frozen=True)
class RunConfig:
    input_path: str = None
    synth_spec: str = None
    date_col: str = "date"
    value_col: str = "value"
    detrend_orders: tuple = (1,)
    q_min: float = -5.0
    q_max: float = 5.0
    q_step: float = 0.25
    s_min: int = 20
    s_max: int = 316
    s_count: int = 30
    surrogates: int = 1000
    seed: int = 0
    alpha_level: float = 0.05
    out_dir: str = "run"
    workers: int = 1

    def __post_init__(self):
        if self.surrogates < 2:
            raise ValueError("surrogate ensemble size must be >= 2")
        if not self.detrend_orders:
            raise ValueError("at least one detrend order required")
        if any(order not in (1, 2) for order in self.detrend_orders):
            raise ValueError("detrend orders must be a subset of {1, 2}")
        if not (self.input_path or self.synth_spec):
            raise ValueError("either an input path or a synth spec is required")

    def analysis_config(self, order):
        return AnalysisConfig(
            q_grid=default_q_grid(self.q_min, self.q_max, self.q_step),
            scale_grid=default_scale_grid(self.s_min, self.s_max, self.s_count),
            detrend_order=order,
        )


def parse_synth_spec(spec):
    """'kind:key=value,...' -> (kind, params). Kinds: cascade, fbm, noise."""
    kind, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, _, value = item.partition("=")
            params[key.strip()] = value.strip()
    return kind.strip(), params


def synth_series(spec):
    """Return series named by a synth spec string (used as returns input)."""
    kind, params = parse_synth_spec(spec)
    seed = int(params.get("seed", 0))
    if kind == "cascade":
        masses = binomial_cascade(CascadeSpec(
            levels=int(params.get("levels", 16)),
            p=float(params.get("p", 0.3)),
            seed=int(params["shuffle_seed"]) if "shuffle_seed" in params else None,
        ))
        return masses, f"cascade(levels={params.get('levels', 16)},p={params.get('p', 0.3)})"
    if kind == "fbm":
        path = fbm(FbmSpec(n=int(params.get("n", 16384)),
                           hurst=float(params.get("hurst", 0.5)), seed=seed))
        return np.diff(np.concatenate([[0.0], path])), f"fbm(H={params.get('hurst', 0.5)})"
    if kind == "noise":
        return gaussian_white_noise(int(params.get("n", 16384)), seed), "gaussian-noise"
    raise ValueError(f"unknown synth kind {kind!r}")


def load_returns(cfg):
    if cfg.synth_spec:
        values, label = synth_series(cfg.synth_spec)
        return np.asarray(values, dtype=float), label
    prices = load_price_csv(cfg.input_path, cfg.date_col, cfg.value_col)
    return log_returns(prices).values, prices.label


def _spectrum_for_member(args):
    values, acfg, seed, max_iter, tol = args
    surrogate = iaaft(values, IaaftConfig(max_iter, tol, seed))
    return analyze_returns(surrogate.values, acfg)


def surrogate_spectra(values, size, base_seed, acfg, workers=1,
                      max_iterations=1000, spectrum_tolerance=1e-8):
    """MF-DFA spectra of a deterministic surrogate ensemble.

    Per-member seeds derive from (base_seed, index), so the result is
    independent of worker count and member evaluation order.
    """
    jobs = [(values, acfg, derive_seed(base_seed, i), max_iterations,
             spectrum_tolerance) for i in range(size)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_spectrum_for_member, jobs, chunksize=8))
    return [_spectrum_for_member(job) for job in jobs]


def _write_table(path, header, columns, fmt="%.17g"):
    table = np.column_stack(columns)
    np.savetxt(path, table, delimiter="\t", header="\t".join(header),
               comments="", fmt=fmt)


def _fingerprint(cfg):
    if cfg.input_path:
        return hashlib.sha256(Path(cfg.input_path).read_bytes()).hexdigest()
    return hashlib.sha256(cfg.synth_spec.encode()).hexdigest()


def export_surface(surface, path):
    n_q, n_s = surface.F.shape
    q = np.repeat(surface.q_grid, n_s)
    s = np.tile(surface.scale_grid, n_q)
    _write_table(path, ["q", "s", "F", "excluded"],
                 [q, s, surface.F.ravel(), surface.excluded.ravel()])


def export_spectrum(spec, path):
    _write_table(path, ["q", "H", "stderr", "tau", "alpha", "f"],
                 [spec.q_grid, spec.H, spec.H_stderr, spec.tau, spec.alpha, spec.f])


def run_pipeline(cfg):
    """Full analysis per detrend order; writes all artifacts under the
    output directory and returns the per-order TestReports."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "INCOMPLETE"
    marker.write_text("run in progress\n")
    timings = {}
    reports = {}
    try:
        t0 = time.perf_counter()
        values, label = load_returns(cfg)
        timings["load"] = time.perf_counter() - t0

        for order in cfg.detrend_orders:
            acfg = cfg.analysis_config(order)
            tag = f"l{order}"

            t0 = time.perf_counter()
            surface = fluctuation_surface(make_profile(values), acfg)
            spectrum = analyze_returns(values, acfg)
            timings[f"mfdfa_{tag}"] = time.perf_counter() - t0

            t0 = time.perf_counter()
            spectra = surrogate_spectra(values, cfg.surrogates, cfg.seed, acfg,
                                        workers=cfg.workers)
            timings[f"ensemble_{tag}"] = time.perf_counter() - t0

            stats = ensemble_statistics(spectra)
            report = verdict(label, order, spectrum, stats,
                             significance_level=cfg.alpha_level)
            reports[order] = report

            export_surface(surface, out / f"surface_{tag}.tsv")
            export_spectrum(spectrum, out / f"spectrum_{tag}.tsv")
            _write_table(out / f"ensemble_stats_{tag}.tsv",
                         ["q", "H_mean", "H_std", "tau_mean", "tau_std",
                          "f_mean", "f_std"],
                         [stats.q_grid, stats.H_mean, stats.H_std,
                          stats.tau_mean, stats.tau_std,
                          stats.f_mean, stats.f_std])
            # raw samples, not binned counts; binning is the plotter's job
            np.savetxt(out / f"delta_alpha_samples_{tag}.tsv",
                       stats.delta_alpha_samples, fmt="%.17g",
                       header="delta_alpha", comments="")
            np.savetxt(out / f"delta_f_samples_{tag}.tsv",
                       stats.delta_f_samples, fmt="%.17g",
                       header="delta_f", comments="")
            (out / f"report_{tag}.json").write_text(
                json.dumps(report.to_dict(), indent=2, sort_keys=True))
            (out / f"report_{tag}.txt").write_text(format_report(report) + "\n")

        manifest = {
            "version": __version__,
            "config": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in vars(cfg).items()},
            "seeds": {"base": cfg.seed,
                      "members": [int(derive_seed(cfg.seed, i))
                                  for i in range(min(cfg.surrogates, 16))]},
            "input_fingerprint": _fingerprint(cfg),
            "timings_s": timings,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        marker.unlink()
    except BaseException:
        marker.write_text("run did not complete\n")
        raise
    return reports


def compare_orders(report_a, report_b):
    """Side-by-side comparison of two detrend orders on the same input."""
    if report_a["label"] != report_b["label"]:
        raise MultifractError("reports come from different inputs")
    rows = []
    for key, path in [
        ("H2", ("hurst", "H2")),
        ("delta_alpha", ("width_test", "delta_alpha")),
        ("p_value_width", ("width_test", "p_value")),
        ("delta_f", ("spectrum_difference_test", "delta_f")),
        ("p_value_f", ("spectrum_difference_test", "p_value")),
    ]:
        a = report_a[path[0]][path[1]]
        b = report_b[path[0]][path[1]]
        rows.append((key, a, b, abs(a - b)))
    disagreement = report_a["verdict"] != report_b["verdict"]
    return {
        "label": report_a["label"],
        "orders": (report_a["detrend_order"], report_b["detrend_order"]),
        "rows": rows,
        "verdicts": (report_a["verdict"], report_b["verdict"]),
        "verdict_disagreement": disagreement,
    }


def format_comparison(comparison):
    a, b = comparison["orders"]
    lines = [f"Series: {comparison['label']}",
             f"{'statistic':<16}{f'l={a}':>14}{f'l={b}':>14}{'abs diff':>14}"]
    for key, va, vb, diff in comparison["rows"]:
        lines.append(f"{key:<16}{va:>14.4f}{vb:>14.4f}{diff:>14.4f}")
    lines.append(f"verdicts: l={a}: {comparison['verdicts'][0]} | "
                 f"l={b}: {comparison['verdicts'][1]}")
    if comparison["verdict_disagreement"]:
        lines.append("WARNING: verdicts disagree between detrend orders")
    return "\n".join(lines)


def _env_default(flag, fallback, cast=str):
    raw = os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"))
    if raw is None:
        return fallback
    return cast(raw)


def _add_grid_flags(parser):
    parser.add_argument("--detrend-order", action="append", type=int,
                        choices=(1, 2), default=None,
                        help="polynomial detrend order; repeatable")
    parser.add_argument("--q-min", type=float,
                        default=_env_default("q-min", -5.0, float))
    parser.add_argument("--q-max", type=float,
                        default=_env_default("q-max", 5.0, float))
    parser.add_argument("--q-step", type=float,
                        default=_env_default("q-step", 0.25, float))
    parser.add_argument("--s-min", type=int,
                        default=_env_default("s-min", 20, int))
    parser.add_argument("--s-max", type=int,
                        default=_env_default("s-max", 316, int))
    parser.add_argument("--s-count", type=int,
                        default=_env_default("s-count", 30, int))


def _add_input_flags(parser):
    parser.add_argument("--input", default=_env_default("input", None))
    parser.add_argument("--synth", default=None,
                        help="generator spec, e.g. cascade:levels=16,p=0.3")
    parser.add_argument("--date-col",
                        default=_env_default("date-col", "date"))
    parser.add_argument("--value-col",
                        default=_env_default("value-col", "value"))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="multifract",
        description="MF-DFA multifractality analysis with IAAFT surrogate tests",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="full pipeline to verdict report")
    _add_input_flags(analyze)
    _add_grid_flags(analyze)
    analyze.add_argument("--surrogates", type=int,
                         default=_env_default("surrogates", 1000, int))
    analyze.add_argument("--seed", type=int,
                         default=_env_default("seed", 0, int))
    analyze.add_argument("--alpha-level", type=float,
                         default=_env_default("alpha-level", 0.05, float))
    analyze.add_argument("--out", default=_env_default("out", "run"))
    analyze.add_argument("--workers", type=int,
                         default=_env_default("workers", 1, int))

    spectrum = sub.add_parser("spectrum", help="MF-DFA only, no surrogates")
    _add_input_flags(spectrum)
    _add_grid_flags(spectrum)
    spectrum.add_argument("--out", default=_env_default("out", "run"))

    synth = sub.add_parser("synth", help="emit a generator series as CSV")
    synth.add_argument("--kind", required=True,
                       choices=("cascade", "fbm", "noise"))
    synth.add_argument("--levels", type=int, default=16)
    synth.add_argument("--p", type=float, default=0.3)
    synth.add_argument("--n", type=int, default=16384)
    synth.add_argument("--hurst", type=float, default=0.5)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="output CSV path")

    compare = sub.add_parser("compare", help="compare detrend orders of one run")
    compare.add_argument("--run-dir", required=True,
                         help="run directory holding report_l1.json and report_l2.json")
    compare.add_argument("--out", default=None, help="optional comparison output file")
    return parser


def _run_config_from_args(args):
    orders = tuple(sorted(set(args.detrend_order or [1])))
    return RunConfig(
        input_path=args.input,
        synth_spec=args.synth,
        date_col=args.date_col,
        value_col=args.value_col,
        detrend_orders=orders,
        q_min=args.q_min, q_max=args.q_max, q_step=args.q_step,
        s_min=args.s_min, s_max=args.s_max, s_count=args.s_count,
        surrogates=getattr(args, "surrogates", 2),
        seed=getattr(args, "seed", 0),
        alpha_level=getattr(args, "alpha_level", 0.05),
        out_dir=args.out,
        workers=getattr(args, "workers", 1),
    )


def _cmd_analyze(args):
    cfg = _run_config_from_args(args)
    reports = run_pipeline(cfg)
    for order, report in sorted(reports.items()):
        print(format_report(report))
        print()
    return EXIT_OK


def _cmd_spectrum(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    orders = tuple(sorted(set(args.detrend_order or [1])))
    cfg = RunConfig(
        input_path=args.input, synth_spec=args.synth,
        date_col=args.date_col, value_col=args.value_col,
        detrend_orders=orders,
        q_min=args.q_min, q_max=args.q_max, q_step=args.q_step,
        s_min=args.s_min, s_max=args.s_max, s_count=args.s_count,
        surrogates=2, out_dir=args.out,
    )
    values, label = load_returns(cfg)
    for order in orders:
        acfg = cfg.analysis_config(order)
        surface = fluctuation_surface(make_profile(values), acfg)
        spectrum = analyze_returns(values, acfg)
        export_surface(surface, out / f"surface_l{order}.tsv")
        export_spectrum(spectrum, out / f"spectrum_l{order}.tsv")
        print(f"{label} l={order}: H(2)={spectrum.H[np.argmin(np.abs(spectrum.q_grid - 2)) ]:.4f} "
              f"delta_alpha={spectrum.delta_alpha:.4f} delta_f={spectrum.delta_f:.4f}")
    return EXIT_OK


def _cmd_synth(args):
    if args.kind == "cascade":
        values = binomial_cascade(CascadeSpec(args.levels, args.p))
    elif args.kind == "fbm":
        path = fbm(FbmSpec(args.n, args.hurst, args.seed))
        values = np.diff(np.concatenate([[0.0], path]))
    else:
        values = gaussian_white_noise(args.n, args.seed)
    # synthesized calendar so the file round-trips through the CSV loader;
    # prices are exp of the cumulative series, so log-returns recover it
    start = date(2000, 1, 1)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("date,value\n")
        fh.write(f"{start.isoformat()},100\n")
        level = np.log(100.0)
        for i, v in enumerate(values):
            level += v
            fh.write(f"{(start + timedelta(days=i + 1)).isoformat()},"
                     f"{np.exp(level):.17g}\n")
    print(f"wrote {len(values) + 1} rows to {out}")
    return EXIT_OK


def _cmd_compare(args):
    run_dir = Path(args.run_dir)
    paths = [run_dir / "report_l1.json", run_dir / "report_l2.json"]
    for path in paths:
        if not path.exists():
            raise FileNotFoundError(f"missing {path}")
    report_a, report_b = (json.loads(p.read_text()) for p in paths)
    comparison = compare_orders(report_a, report_b)
    text = format_comparison(comparison)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, 0 on --help
        return exc.code if exc.code is not None else EXIT_CONFIG
    handlers = {
        "analyze": _cmd_analyze,
        "spectrum": _cmd_spectrum,
        "synth": _cmd_synth,
        "compare": _cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MultifractError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
