"""Command-line interface: ``gen-data``, ``run``, ``plot`` and ``compare``.

Exit status is 0 on success, 2 for configuration errors and 3 for
runtime errors.
"""

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import config as C
from .datagen import DataGenSpec, UnsupportedP, write_generated
from .plot import write_svg
from .runner import file_sha256, run_config, summarize_trace
from .trace import read_trace

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise C.ConfigError(message)


def _dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_gen_data(args):
    if args.preset == "paper":
        if args.n is not None or args.noise_sd is not None:
            raise C.ConfigError("--preset paper fixes n and noise-sd")
        try:
            spec = DataGenSpec.paper(args.seed, args.p if args.p is not None else 12)
        except UnsupportedP as exc:
            raise C.ConfigError(str(exc)) from None
    else:
        try:
            spec = DataGenSpec(args.n if args.n is not None else 100, args.p if args.p is not None else 12,
                               args.noise_sd if args.noise_sd is not None else 0.4, args.seed)
        except ValueError as exc:
            raise C.ConfigError(str(exc)) from None
    write_generated(args.out, spec)
    print(f"seed={spec.seed} n={spec.n} p={spec.p} noise_sd={spec.noise_sd!r} sha256={file_sha256(args.out)} out={args.out}")


def _run_overrides(args):
    out = {}
    for spec in C.KEYS:
        v = getattr(args, "key_" + spec.name, None)
        if v is not None:
            out[spec.name] = C.parse_value(spec.name, v)
    for item in args.set or ():
        if "=" not in item:
            raise C.ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        key = C.normalize_key(k)
        out[key] = C.parse_value(key, v)
    return out


def cmd_run(args):
    layers = [C.read_config(args.config)] if args.config else []
    layers.append(_run_overrides(args))
    cfg = C.resolve(*layers)
    summary_path = args.summary or os.path.splitext(args.out)[0] + ".json"
    _, summary = run_config(cfg, args.out, timing=args.timing)
    _dump_json(summary, summary_path)
    rej = summary["rejection"]
    print(f"algo={cfg['algo']} seed={cfg['seed']} slow_evals={summary['slow_evals']} "
          f"records={summary['records']} rejection_slow={_fmt(rej['slow'])} rejection_fast={_fmt(rej['fast'])} "
          f"mode_switches={summary['mode_switch_count']} trace={args.out} summary={summary_path}")


def cmd_plot(args):
    records = read_trace(args.trace)
    if not records:
        raise ValueError(f"{args.trace}: empty trace")
    write_svg(args.out, records, args.title or "")
    print(f"records={len(records)} out={args.out}")


def _fmt(v, digits=4):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def _compare_job(job):
    name, cfg, timing = job
    _, summary = run_config(cfg, timing=timing)
    return name, summary


def _compare_jobs(args):
    base = _run_overrides(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    jobs, loaded = [], []
    for item in args.items:
        stem = os.path.splitext(os.path.basename(item))[0]
        if item.endswith(".json"):
            with open(item) as fh:
                stored = json.load(fh)
            cfg = C.resolve(stored["config"])
            trace_path = os.path.splitext(item)[0] + ".csv"
            summary = summarize_trace(read_trace(trace_path), cfg, stored.get("data_sha256"))
            if "timing" in stored:
                summary["timing"] = stored["timing"]
            loaded.append((stem, summary))
            continue
        cfg_file = C.read_config(item)
        for seed in seeds or [None]:
            layer = dict(base)
            if seed is not None:
                layer["seed"] = seed
            cfg = C.resolve(cfg_file, layer)
            jobs.append((f"{stem}:s{cfg['seed']}", cfg, args.timing))
    return jobs, loaded


COMPARE_COLUMNS = ("name", "algo", "measure", "path", "rej_slow", "rej_fast", "slow_evals", "fast_evals",
                   "mode_switches", "ess_log_sigma")
TIMING_COLUMNS = ("sec_per_iter", "sec_per_slow_eval")


def compare_row(name, summary):
    cfg = summary["config"]
    row = {
        "name": name,
        "algo": cfg["algo"],
        "measure": cfg["measure"] if cfg["algo"].startswith("ensemble") else "",
        "path": summary["path"],
        "rej_slow": summary["rejection"]["slow"],
        "rej_fast": summary["rejection"]["fast"],
        "slow_evals": summary["slow_evals"],
        "fast_evals": summary["fast_evals"],
        "mode_switches": summary["mode_switch_count"],
        "ess_log_sigma": summary["ess_log_sigma"],
    }
    if "timing" in summary:
        row["sec_per_iter"] = summary["timing"]["sec_per_iter"]
        row["sec_per_slow_eval"] = summary["timing"]["sec_per_slow_eval"]
    return row


def render_table(rows, columns):
    cells = [[_fmt(r.get(c), 6 if c.startswith("sec") else 4) for c in columns] for r in rows]
    widths = [max(len(c), *(len(x[i]) for x in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(x.ljust(w) for x, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def render_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns])
    return buf.getvalue()


def cmd_compare(args):
    jobs, loaded = _compare_jobs(args)
    if len(jobs) + len(loaded) < 2:
        raise C.ConfigError("compare needs at least two runs")
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_compare_job, jobs))
    else:
        results = [_compare_job(j) for j in jobs]
    rows = [compare_row(n, s) for n, s in loaded + results]
    columns = COMPARE_COLUMNS + (TIMING_COLUMNS if args.timing else ())
    sys.stdout.write(render_table(rows, columns))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(render_csv(rows, columns))


def build_parser():
    p = _Parser(prog="ensmc", description="Ensemble MCMC for fast/slow variables on GP regression posteriors.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    g.add_argument("--preset", choices=("paper",), help="n=100, p=12, noise sd 0.4")
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--noise-sd", type=float)
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    def add_keys(sp):
        for spec in C.KEYS:
            flag = "--" + spec.name.replace("_", "-")
            flags = (flag, flag.lower()) if flag != flag.lower() else (flag,)
            sp.add_argument(*flags, dest="key_" + spec.name, metavar=spec.name.upper(), help=spec.help,
                            **({"choices": spec.choices} if spec.choices else {}))
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any configuration key")

    r = sub.add_parser("run", help="run one chain", formatter_class=argparse.RawDescriptionHelpFormatter,
                       epilog="configuration keys (file syntax 'key = value'):\n" + C.describe_keys())
    r.add_argument("--config", help="configuration file")
    add_keys(r)
    r.add_argument("--out", default="trace.csv", help="trace CSV path")
    r.add_argument("--summary", help="summary JSON path (default: trace path with .json)")
    r.add_argument("--timing", action="store_true", help="include wall-clock times in the summary")
    r.set_defaults(func=cmd_run)

    pl = sub.add_parser("plot", help="plot a trace as SVG")
    pl.add_argument("--trace", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--title")
    pl.add_argument("--seed", type=int, help="accepted for uniformity; plotting is deterministic")
    pl.set_defaults(func=cmd_plot)

    c = sub.add_parser("compare", help="run or load several configurations and tabulate",
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       epilog="ITEMS are configuration files, or summary .json files whose trace .csv sits alongside.")
    c.add_argument("items", nargs="+")
    add_keys(c)
    c.add_argument("--seeds", help="comma-separated seeds; each configuration runs once per seed")
    c.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    c.add_argument("--timing", action="store_true", help="add wall-clock columns")
    c.add_argument("--csv", help="also write the table as CSV")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except C.ConfigError as exc:
        print(f"ensmc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError, ArithmeticError, KeyError) as exc:
        print(f"ensmc: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
