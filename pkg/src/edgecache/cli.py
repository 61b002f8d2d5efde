"""Command-line interface.

Subcommands:
    gen-trace   render a generator spec (JSON) into a trace CSV
    simulate    run one policy over a trace and report hit ratios
    train-cec   train the ensemble selector on a trace
    run-cec     evaluate a trained selector checkpoint
    fif-select  oracle-assisted upper bound over an ensemble
    compare     tabulate hit ratios of prior report files

Reports are written as JSON plus a CSV of per-slot hit ratios, with
matplotlib figures rendered next to them (disable with --no-figures).
Exit status is 0 on success and nonzero with a diagnostic on any
configuration or parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from .agent import AgentConfig, load_agent, save_agent, train_selector
from .errors import ConfigError, TraceFormatError
from .policies import build_policies, build_policy, parse_policy_id
from .simulate import (
    DEFAULT_METRICS_SLOT,
    compare_reports,
    comparison_to_text,
    make_policy_factory,
    run_cec_simulation,
    run_fif_selector,
    run_policy_simulation,
    train_models_for,
)
from .traces import generate_trace_from_config, load_trace, save_trace, slice_trace


def _add_trace_args(parser):
    parser.add_argument("--trace", required=True, help="trace CSV file")
    parser.add_argument("--rebase", action="store_true", help="subtract the first timestamp (for epoch-based traces)")
    parser.add_argument("--skip", type=int, default=0, help="drop the first N requests")
    parser.add_argument("--limit", type=int, default=None, help="keep at most N requests after --skip")


def _add_report_args(parser):
    parser.add_argument("-o", "--out", default=None, help="report JSON path (CSV and figures are written alongside)")
    parser.add_argument("--warmup", type=int, default=0, help="exclude the first N requests from metrics")
    parser.add_argument("--metrics-slot", type=int, default=DEFAULT_METRICS_SLOT, help="requests per instantaneous-hit-ratio slot")
    parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def _add_model_args(parser):
    parser.add_argument("--train-frac", type=float, default=0.5, help="leading fraction of the trace used to train LSTM models")
    parser.add_argument("--epochs", type=int, default=20, help="training epochs for LSTM models")


def _load_trace(args):
    trace = load_trace(args.trace, rebase=args.rebase)
    if args.skip or args.limit is not None:
        trace = slice_trace(trace, args.skip, args.limit)
    return trace


def _load_ensemble(path, min_size: int = 2) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            ids = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(ids, list) or not all(isinstance(x, str) for x in ids):
        raise ConfigError(f"{path}: ensemble file must be a JSON list of policy-id strings")
    if len(ids) < min_size:
        raise ConfigError(f"{path}: this command needs at least {min_size} policies, got {len(ids)}")
    for pid in ids:
        parse_policy_id(pid)
    return ids


def _echo_config(args, controller, **extra) -> dict:
    cfg = {
        "controller": controller,
        "trace": str(args.trace),
        "capacity": args.capacity,
        "seed": getattr(args, "seed", None),
        "warmup": getattr(args, "warmup", 0),
        "metrics_slot": getattr(args, "metrics_slot", DEFAULT_METRICS_SLOT),
        "skip": args.skip,
        "limit": args.limit,
    }
    cfg.update(extra)
    return cfg


def _write_report(report, args, *, selection_figure=False):
    print(f"cumulative hit ratio: {report.cumulative_hit_ratio:.4f}")
    if report.selection:
        rates = report.selection["rates"]
        top = max(rates, key=rates.get)
        print(f"most selected policy: {top} ({rates[top]:.1%} of {report.selection['decisions']} decisions)")
    if not args.out:
        return
    out = Path(args.out)
    report.write_json(out)
    csv_path = out.with_suffix(".csv")
    report.write_csv(csv_path)
    written = [str(out), str(csv_path)]
    if not args.no_figures:
        from . import plots

        fig_path = out.with_suffix(".png")
        plots.save_hit_ratio_figure(report.slots, fig_path, title=f"{report.config.get('controller', 'run')}: instantaneous hit ratio")
        written.append(str(fig_path))
        if selection_figure and report.selection:
            sel_path = out.with_name(out.stem + "-selection.png")
            plots.save_selection_figure(report.selection["rates"], sel_path)
            written.append(str(sel_path))
    print("wrote " + ", ".join(written))


def _stopwatch(start, n):
    elapsed = time.perf_counter() - start
    rate = n / elapsed if elapsed > 0 else float("inf")
    print(f"processed {n} requests in {elapsed:.2f}s ({rate:,.0f} req/s)", file=sys.stderr)


# --- subcommand implementations --------------------------------------------


def cmd_gen_trace(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.spec}: not valid JSON ({exc})") from None
    trace = generate_trace_from_config(spec, args.seed)
    save_trace(trace, args.out)
    print(f"wrote {args.out}: {len(trace)} requests, {len(trace.catalog)} distinct items")
    return 0


def cmd_simulate(args) -> int:
    trace = _load_trace(args)
    parse_policy_id(args.policy)
    models = train_models_for([args.policy], trace, train_frac=args.train_frac, epochs=args.epochs, seed=args.seed)
    policy = build_policy(args.policy, trace=trace, models=models)
    start = time.perf_counter()
    report = run_policy_simulation(
        trace,
        policy,
        args.capacity,
        metrics_slot=args.metrics_slot,
        warmup=args.warmup,
        config=_echo_config(args, args.policy),
    )
    _stopwatch(start, len(trace))
    _write_report(report, args)
    return 0


def cmd_train_cec(args) -> int:
    trace = _load_trace(args)
    ids = _load_ensemble(args.ensemble)
    models = train_models_for(ids, trace, train_frac=args.train_frac, epochs=args.epochs, seed=args.seed)
    config = AgentConfig(
        decision_requests=args.decision_requests,
        sync_requests=args.sync_requests,
        lr=args.lr,
        passes=args.passes,
    )
    start = time.perf_counter()
    result = train_selector(
        trace,
        make_policy_factory(ids, trace, models),
        ids,
        args.capacity,
        config=config,
        seed=args.seed,
    )
    _stopwatch(start, len(trace) * config.passes)
    save_agent(args.out, result.agent, volume_cap=result.volume_cap, models=models)
    written = [str(args.out)]
    stem = Path(args.out)
    log_path = stem.with_name(stem.stem + "-train.csv")
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["decision_idx", "epsilon", "reward", "loss", "selected_policy"])
        for row in result.log:
            writer.writerow(
                [
                    row.decision_idx,
                    repr(row.epsilon),
                    repr(row.reward),
                    "" if row.loss is None else repr(row.loss),
                    row.selected_policy,
                ]
            )
    written.append(str(log_path))
    if not args.no_figures:
        from . import plots

        fig_path = stem.with_name(stem.stem + "-train.png")
        plots.save_training_figure(result.log, fig_path)
        written.append(str(fig_path))
    print(f"trained on {len(result.log)} decisions; wrote " + ", ".join(written))
    return 0


def cmd_run_cec(args) -> int:
    trace = _load_trace(args)
    agent, volume_cap, models = load_agent(args.agent)
    policies = build_policies(agent.ensemble_ids, trace=trace, models=models)
    start = time.perf_counter()
    report = run_cec_simulation(
        trace,
        agent,
        policies,
        args.capacity,
        volume_cap,
        metrics_slot=args.metrics_slot,
        warmup=args.warmup,
        config=_echo_config(args, "cec", agent=str(args.agent), ensemble=agent.ensemble_ids),
        dump_virtual_path=args.dump_virtual_hits,
    )
    _stopwatch(start, len(trace))
    _write_report(report, args, selection_figure=True)
    return 0


def cmd_fif_select(args) -> int:
    trace = _load_trace(args)
    ids = _load_ensemble(args.ensemble, min_size=1)
    models = train_models_for(ids, trace, train_frac=args.train_frac, epochs=args.epochs, seed=args.seed)
    policies = build_policies(ids, trace=trace, models=models)
    start = time.perf_counter()
    report = run_fif_selector(
        trace,
        policies,
        args.capacity,
        metrics_slot=args.metrics_slot,
        warmup=args.warmup,
        config=_echo_config(args, "fif-selector", ensemble=ids),
    )
    _stopwatch(start, len(trace))
    _write_report(report, args)
    return 0


def cmd_compare(args) -> int:
    reports = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            try:
                reports.append(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    comparison = compare_reports(reports)
    sys.stdout.write(comparison_to_text(comparison))
    if args.out:
        out = Path(args.out)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(comparison, sort_keys=True, indent=2) + "\n")
        csv_path = out.with_suffix(".csv")
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["controller", "hit_ratio"])
            for row in comparison["rows"]:
                writer.writerow([row["controller"], repr(row["hit_ratio"])])
        written = [str(out), str(csv_path)]
        if not args.no_figures:
            from . import plots

            fig_path = out.with_suffix(".png")
            plots.save_comparison_figure(comparison["rows"], fig_path)
            written.append(str(fig_path))
        print("wrote " + ", ".join(written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgecache", description="Trace-driven edge-cache simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="generate a synthetic trace from a JSON spec")
    p.add_argument("spec", help="generator spec JSON (kinds: zipf-irm, shot-noise, mix)")
    p.add_argument("-o", "--out", required=True, help="output trace CSV")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("simulate", help="run a single policy over a trace")
    _add_trace_args(p)
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--policy", required=True, help="policy id (e.g. lfu-inf, lfu-500, lru-2, fif, lstm-int)")
    p.add_argument("--seed", type=int, default=0)
    _add_model_args(p)
    _add_report_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-cec", help="train the ensemble policy selector")
    _add_trace_args(p)
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--ensemble", required=True, help="JSON list of policy ids")
    p.add_argument("--out", required=True, help="agent checkpoint path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--passes", type=int, default=AgentConfig.passes)
    p.add_argument("--decision-requests", type=int, default=AgentConfig.decision_requests)
    p.add_argument("--sync-requests", type=int, default=AgentConfig.sync_requests)
    p.add_argument("--lr", type=float, default=AgentConfig.lr)
    p.add_argument("--no-figures", action="store_true")
    _add_model_args(p)
    p.set_defaults(func=cmd_train_cec)

    p = sub.add_parser("run-cec", help="evaluate a trained selector")
    _add_trace_args(p)
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--agent", required=True, help="agent checkpoint from train-cec")
    p.add_argument("--dump-virtual-hits", default=None, help="write per-slot virtual hit ratios to this CSV")
    _add_report_args(p)
    p.set_defaults(func=cmd_run_cec)

    p = sub.add_parser("fif-select", help="oracle-assisted selector upper bound")
    _add_trace_args(p)
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--ensemble", required=True, help="JSON list of policy ids")
    p.add_argument("--seed", type=int, default=0)
    _add_model_args(p)
    _add_report_args(p)
    p.set_defaults(func=cmd_fif_select)

    p = sub.add_parser("compare", help="compare saved reports")
    p.add_argument("--reports", nargs="+", required=True, help="report JSON files")
    p.add_argument("-o", "--out", default=None, help="comparison JSON path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
