"""Command line entry point: ``pnsynth {train,synth,bench-synth,bench-opt,optimize,oracle}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .circuit import CircuitError, QasmError, parse_qasm, to_qasm
from .coupling import CouplingMapError, resolve_map
from .network import PauliNetwork, normalize
from .policy import WeightsFormatError, load_weights
from .resynth import (PRESETS, REGISTRY_ENV, MapViolation, ModelRegistry, optimize, preset,
                      synthesize_with_registry)
from .synthesizer import metrics, synthesize, verify

log = logging.getLogger("pnsynth")


def _ints(text: str) -> list[int]:
    """``"0,10,20"`` or ``"0:101:10"`` (start:stop:step)."""
    if ":" in text:
        return list(range(*map(int, text.split(":"))))
    return [int(t) for t in text.split(",") if t]


def _registry(args) -> ModelRegistry:
    if getattr(args, "registry", None):
        return ModelRegistry.from_dir(args.registry)
    return ModelRegistry.default()


def _load_network(path: str) -> PauliNetwork:
    text = Path(path).read_text()
    if path.endswith(".qasm"):
        return normalize(parse_qasm(text))
    return PauliNetwork.from_json(json.loads(text))


def _target(args, cmap) -> PauliNetwork:
    from .bench import random_network

    if args.random:
        n, m = args.random
        if n != cmap.n_qubits:
            raise ValueError(f"--random asks for {n} qubits but {cmap.name} has {cmap.n_qubits}")
        return random_network(cmap, m, np.random.default_rng(args.seed), args.paulis)
    if not args.network:
        raise ValueError("give a network file or --random N M")
    return _load_network(args.network)


def cmd_train(args) -> int:
    from .trainer import ConfigError, TrainConfig, curriculum_loop

    try:
        cfg = TrainConfig.load(args.config)
    except (ConfigError, ValueError, TypeError, OSError) as exc:
        print(f"error: bad training config {args.config}: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.jsonl"
    res = curriculum_loop(cfg, checkpoint_dir=out / "checkpoint", log_path=log_path, resume=args.resume)
    from .policy import save_weights

    (out / f"{res.net.metadata['cmap_name']}.pnw").write_bytes(save_weights(res.net))
    records = [json.loads(line) for line in log_path.read_text().splitlines() if line]
    if records:
        from .plotting import plot_training

        plot_training(records, out / "training.png")
    print(json.dumps({"d_c": res.d_c, "reached_target": res.reached_target,
                      "iterations": res.iterations, "elapsed_s": round(res.elapsed_s, 1)}))
    return 0


def cmd_synth(args) -> int:
    cmap = resolve_map(args.cmap)
    pn = _target(args, cmap)
    if args.weights:
        net = load_weights(Path(args.weights).read_bytes())
        res = synthesize(pn, cmap, net, args.runs, rng=args.seed, metric=args.metric)
        res.model = net.metadata.get("cmap_name")
    else:
        res = synthesize_with_registry(pn, cmap, _registry(args), args.runs, rng=args.seed, metric=args.metric)
        if res is None:
            print(f"error: no registered model matches coupling map {cmap.name}", file=sys.stderr)
            return 3
    out = res.to_json()
    out["verified"] = verify(pn, res.gates, "replay") if res.success else False
    print(json.dumps(out, indent=None if args.compact else 2))
    return 0 if res.success else 1


def cmd_bench_synth(args) -> int:
    from .bench import SYNTH_COLUMNS, bench_synthesis, write_csv, write_jsonl
    from .plotting import plot_synthesis

    cmaps = [resolve_map(c) for c in args.cmaps.split(",")]
    rows = bench_synthesis(cmaps, _ints(args.rotations), args.trials, _registry(args),
                           runs=_ints(args.runs), paulis=args.paulis.split(","), seed=args.seed)
    out = Path(args.out)
    write_csv(rows, out / "bench_synth.csv", SYNTH_COLUMNS)
    write_jsonl(rows, out / "bench_synth.jsonl")
    plot_synthesis(rows, out / "bench_synth.png")
    for r in rows:
        print(f"{r['cmap']:>4} m={r['m']:<4} {r['paulis']:<4} RL_{r['runs']:<4} {r['status']:<14} "
              f"2q/P={_fmt(r['count2q_per_pauli'])} ref={_fmt(r['ref_count2q_per_pauli'])}")
    bad = [r for r in rows if r["verified"] is False]
    return 1 if bad else 0


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.2f}"


def cmd_bench_opt(args) -> int:
    from .bench import OPT_COLUMNS, bench_optimize, format_ratio, linear_fit, write_csv, write_jsonl
    from .plotting import plot_scaling

    sizes = [(args.qubits, g) for g in _ints(args.gates)]
    rows = bench_optimize(sizes, preset(args.workflow), _registry(args), seed=args.seed)
    fit = linear_fit([r["count2q_after"] for r in rows], [r["wall_time_s"] for r in rows])
    out = Path(args.out)
    write_csv(rows, out / "bench_opt.csv", OPT_COLUMNS)
    write_jsonl(rows, out / "bench_opt.jsonl")
    summary = {
        "workflow": args.workflow,
        "fit": fit,
        "count2q_factor": format_ratio([r["count2q_ratio"] for r in rows]),
        "layers2q_factor": format_ratio([r["layers2q_ratio"] for r in rows]),
    }
    (out / "bench_opt_summary.json").write_text(json.dumps(summary, indent=2))
    plot_scaling(rows, fit, out / "bench_opt_scaling.png")
    print(json.dumps(summary))
    return 0


def cmd_optimize(args) -> int:
    from .bench import format_ratio

    try:
        circ = parse_qasm(Path(args.qasm_in).read_text())
    except (QasmError, CircuitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    device = resolve_map(args.device)
    try:
        out, report = optimize(circ, preset(args.workflow), _registry(args), device,
                               metric=args.metric, seed=args.seed)
    except MapViolation as exc:
        print(f"error: input is not routed for {device.name}: {exc}", file=sys.stderr)
        return 3
    report["count2q_factor"] = format_ratio([report["count2q_ratio"]])
    report["layers2q_factor"] = format_ratio([report["layers2q_ratio"]])
    Path(args.qasm_out).write_text(to_qasm(out))
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2))
        if args.figure:
            from .plotting import plot_ratios

            plot_ratios(report["rows"], Path(args.report).with_suffix(".png"))
    b, a = report["before"], report["after"]
    print(f"count2q {b['count2q']} -> {a['count2q']}  layers2q {b['layers2q']} -> {a['layers2q']}  "
          f"replaced {report['replacements']}/{report['blocks']} blocks  verified={report['verified']}")
    return 0 if report["verified"] else 1


def cmd_oracle(args) -> int:
    from .synthesizer import brute_force_optimal

    cmap = resolve_map(args.cmap)
    pn = _target(args, cmap)
    gates = brute_force_optimal(pn, cmap, args.max_gates)
    result = {"found": gates is not None}
    if gates is not None:
        from .circuit import CircuitIR

        result.update(metrics=metrics(gates), qasm=to_qasm(CircuitIR(pn.n, gates)),
                      verified=verify(pn, gates, "dense" if pn.n <= 4 else "replay"))
    if args.compare_runs:
        res = synthesize_with_registry(pn, cmap, _registry(args), args.compare_runs, rng=args.seed)
        result["rl"] = None if res is None else {"success": res.success, "metrics": res.metrics}
    print(json.dumps(result, indent=2))
    return 0 if gates is not None else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pnsynth", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    reg_help = f"directory of .pnw weight files (default: ${REGISTRY_ENV} or the bundled models)"

    p = sub.add_parser("train", help="curriculum PPO training")
    p.add_argument("config", help="TOML or JSON training config")
    p.add_argument("--out", default="runs/train")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_train)

    def target_args(p):
        p.add_argument("network", nargs="?", help="network JSON or QASM file")
        p.add_argument("--random", nargs=2, type=int, metavar=("N", "M"))
        p.add_argument("--paulis", choices=("ixyz", "iz"), default="ixyz")
        p.add_argument("--cmap", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--registry", help=reg_help)

    p = sub.add_parser("synth", help="synthesize one Pauli network")
    target_args(p)
    p.add_argument("--weights")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--metric", choices=("count2q", "layers2q"), default="count2q")
    p.add_argument("--compact", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench-synth", help="synthesis benchmark over random networks")
    p.add_argument("--cmaps", default="4qL,4qT")
    p.add_argument("--rotations", default="0:101:10")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--runs", default="1,10")
    p.add_argument("--paulis", default="ixyz")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--registry", help=reg_help)
    p.add_argument("--out", default="runs/bench")
    p.set_defaults(func=cmd_bench_synth)

    p = sub.add_parser("bench-opt", help="optimization timing sweep over random routed circuits")
    p.add_argument("--qubits", type=int, default=12)
    p.add_argument("--gates", default="200:2001:200")
    p.add_argument("--workflow", choices=PRESETS, default="rl_4q0_10")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--registry", help=reg_help)
    p.add_argument("--out", default="runs/bench")
    p.set_defaults(func=cmd_bench_opt)

    p = sub.add_parser("optimize", help="collect-and-resynthesize a routed QASM circuit")
    p.add_argument("qasm_in")
    p.add_argument("qasm_out")
    p.add_argument("--device", required=True, help="coupling map name (e.g. 12qL) or JSON file")
    p.add_argument("--workflow", choices=PRESETS, default="rl_4q0_10")
    p.add_argument("--metric", choices=("count2q", "layers2q"), default="count2q")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--registry", help=reg_help)
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--figure", action="store_true", help="also plot per-block counts next to the report")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("oracle", help="brute-force optimal synthesis (n <= 3)")
    target_args(p)
    p.add_argument("--max-gates", type=int, default=9)
    p.add_argument("--compare-runs", type=int, default=0, help="also run RL_n with a registered model")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CouplingMapError, WeightsFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
