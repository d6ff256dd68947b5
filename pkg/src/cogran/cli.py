"""Command line entry point: ``cogran {gen-data,run,sweep,plot}``.

Exit status is 0 on success, 1 for configuration or usage errors and 2 for
failures while computing or writing results.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import nfis, rst
from .config import ConfigError, RunConfig, emit_config, load_config, with_overrides
from .dataset import DatasetError, gen_synthetic, normalize, save_csv
from .engine import read_trace_csv, run_coupled, write_trace_csv
from .plots import bar_chart, emit_plots, heatmap
from .som import save_prototypes
from .sweep import (
    aggregate_mean_ng,
    detect_transition,
    read_aggregate_csv,
    run_sweep,
    write_aggregate_csv,
    write_report_csv,
    write_sweep_csv,
)

log = logging.getLogger("cogran")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cogran", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    g.add_argument("--n", type=int, default=693)
    g.add_argument("--dim", type=int, default=3)
    g.add_argument("--noise", type=float, default=0.05)
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="one coupled close-open run")
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out")

    s = sub.add_parser("sweep", help="sweep coupling parameters")
    s.add_argument("--config")
    s.add_argument("--axis", help="name=start:stop:count or name=v1,v2,...")
    s.add_argument("--axis2")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("plot", help="re-render SVGs from a trace or aggregate CSV")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--kind", choices=("line", "bar", "heatmap"), required=True)
    p.add_argument("--out")
    return parser


def _resolve(args, **extra) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return with_overrides(cfg, seed=args.seed, out=args.out, **extra)


def _run_dir(cfg: RunConfig, kind: str) -> tuple[Path, str]:
    text = emit_config(cfg)
    stamp = hashlib.sha1(text.encode("utf-8")).hexdigest()[:10]
    out = Path(cfg.out) / f"{kind}-{stamp}"
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(text, encoding="utf-8")
    return out, text


def _prepared_data(cfg: RunConfig):
    train, test = cfg.split_data()
    train_n, info = normalize(train)
    return train_n, info.apply(test)


def cmd_gen_data(args) -> int:
    if args.n < 1 or args.dim < 1 or args.noise < 0:
        raise ConfigError("need --n >= 1, --dim >= 1 and --noise >= 0")
    data = gen_synthetic(args.n, args.dim, args.noise, args.seed)
    path = save_csv(data, args.out)
    print(path)
    return EXIT_OK


def _dump_regulator(trace, out: Path, feature_names) -> None:
    fitted = trace.final_regulator
    if isinstance(fitted, nfis.FuzzyModel):
        (out / "rules.txt").write_text("\n".join(nfis.format_rules(fitted, feature_names)) + "\n", encoding="utf-8")
        nfis.save_rules_csv(fitted, out / "rules.csv")
    elif isinstance(fitted, tuple):
        _, rules = fitted
        (out / "rules.txt").write_text("\n".join(rst.format_rules(rules, list(feature_names))) + "\n", encoding="utf-8")
        rst.save_rules_csv(rules, out / "rules.csv")
    if trace.final_grid is not None:
        save_prototypes(trace.final_grid, out / "prototypes.csv")


def cmd_run(args) -> int:
    cfg = _resolve(args)
    train, test = _prepared_data(cfg)
    out, _ = _run_dir(cfg, "run")
    trace = run_coupled(train, test, cfg.coupling(), cfg.regulator_spec(), cfg.seed, cfg.som_epochs)
    write_trace_csv(trace, out / "trace.csv")
    _dump_regulator(trace, out, train.feature_names)
    if len(trace):
        emit_plots(trace, out)
    print(out)
    if not trace.completed:
        log.error("%s", trace.diagnostic)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(args) -> int:
    extra = {}
    if args.axis:
        extra["axis1"] = args.axis
    if args.axis2:
        extra["axis2"] = args.axis2
    cfg = _resolve(args, **extra)
    spec = cfg.sweep_spec()
    if spec is None:
        raise ConfigError("sweep needs --axis or axis1 in the config")
    train, test = _prepared_data(cfg)
    out, _ = _run_dir(cfg, "sweep")
    result = run_sweep(spec, train, test, n_jobs=args.jobs)
    write_sweep_csv(result, out / "sweep.csv")
    write_aggregate_csv(result, out / "aggregate.csv")
    if result.two_axis:
        grid = result.grid("mean_ng")
        with np.errstate(all="ignore"):
            marginal = np.nanmean(grid, axis=1)
        axis, stat = spec.axis1[1], marginal
        name = "mean_ng_marginal"
    else:
        agg = aggregate_mean_ng(result)
        axis, stat, name = agg.axis, agg.stat, "mean_ng"
    keep = [k for k, v in enumerate(stat) if np.isfinite(v)]
    if len(keep) >= 3 and all(b >= a for a, b in zip(axis, axis[1:])):
        report = detect_transition([axis[k] for k in keep], [stat[k] for k in keep], name)
        write_report_csv(report, out / "report.csv")
    emit_plots(result, out)
    print(out)
    failed = [f for c in result.cells for f in c.failures]
    for msg in failed:
        log.error("%s", msg)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_plot(args) -> int:
    src = Path(args.source)
    if not src.is_file():
        raise ConfigError(f"no such file: {src}")
    out = Path(args.out) if args.out else src.parent
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "line":
        paths = emit_plots(read_trace_csv(src), out)
    else:
        rows = read_aggregate_csv(src)
        if not rows:
            raise ValueError(f"{src} has no rows")
        if args.kind == "bar":
            if any(r["axis2"] is not None for r in rows):
                raise ConfigError("bar plots need a single-axis aggregate CSV")
            svg = bar_chart([r["axis1"] for r in rows], [r["mean_ng"] for r in rows], "Mean NG", "axis1", "mean N_actual")
            path = out / "mean_ng_bar.svg"
        else:
            xs = sorted({r["axis1"] for r in rows})
            ys = sorted({r["axis2"] for r in rows if r["axis2"] is not None})
            if not ys:
                raise ConfigError("heatmaps need a two-axis aggregate CSV")
            grid = np.full((len(xs), len(ys)), np.nan)
            for r in rows:
                grid[xs.index(r["axis1"]), ys.index(r["axis2"])] = np.nan if r["mean_ng"] is None else r["mean_ng"]
            svg = heatmap(xs, ys, grid, "Mean NG", "axis1", "axis2")
            path = out / "mean_ng_heatmap.svg"
        path.write_text(svg, encoding="utf-8")
        paths = [path]
    for p in paths:
        print(p)
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "run": cmd_run, "sweep": cmd_sweep, "plot": cmd_plot}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DatasetError) as exc:
        print(f"cogran: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"cogran: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
