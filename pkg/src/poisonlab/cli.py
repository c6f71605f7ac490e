"""Batch front-end: run sweeps and attacks, print reports, launch the service.

Every command is reproducible from its recorded flag set; seeds default to 42
and are echoed into the written artifacts. Errors exit non-zero with a
message on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import jsonio
from .data import Dataset, load_csv, standardize, stratified_subsample
from .classifier import ModelConfig, train
from .attacks import ALGORITHMS, AttackConfig, attack_result_to_dict, run_attack
from .vulnerability import (
    DbdConfig,
    default_cap,
    sweep_records,
    vulnerability_sweep,
    write_sweep_csv,
)
from .impact import build_local_impact_graph
from .projection import ProjectionConfig, tsne_embed
from .reporting import feature_report, instance_attributes, model_overview


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", required=True, help="input CSV path")
    parser.add_argument("--label-col", required=True, help="name of the label column")
    parser.add_argument("--pos", required=True, help="label value mapped to +1")
    parser.add_argument("--neg", required=True, help="label value mapped to -1")
    parser.add_argument(
        "--subsample",
        type=int,
        default=None,
        help="stratified subsample to this many rows before standardizing",
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=42,
        help="seed for subsampling, attacks, boundary probing, and projections",
    )


def _load_standardized(args: argparse.Namespace) -> Dataset:
    dataset = load_csv(
        args.dataset,
        label_column=args.label_col,
        positive_value=args.pos,
        negative_value=args.neg,
    )
    if args.subsample is not None:
        dataset = stratified_subsample(dataset, args.subsample, seed=args.seed)
    return standardize(dataset)


def cmd_sweep(args: argparse.Namespace) -> int:
    dataset = _load_standardized(args)
    model_config = ModelConfig()
    cap = args.cap if args.cap is not None else default_cap(dataset.n)
    algorithms = [args.algorithm] if args.algorithm else list(ALGORITHMS)
    attack_configs = [
        AttackConfig(algorithm=alg, budget=cap, seed=args.seed) for alg in algorithms
    ]
    dbd_config = DbdConfig(seed=args.seed)
    rows = vulnerability_sweep(
        dataset,
        model_config,
        attack_configs,
        dbd_config,
        cap=cap,
        parallelism=args.parallelism,
    )
    out = Path(args.out)
    config_echo = {
        "seed": args.seed,
        "cap": cap,
        "subsample": args.subsample,
        "attack_configs": [c.to_dict() for c in attack_configs],
        "dbd_config": dbd_config.to_dict(),
        "model_config": model_config.to_dict(),
        "dataset_fingerprint": dataset.fingerprint(),
    }
    if out.suffix.lower() == ".json":
        jsonio.write_json(out, {"config": config_echo, "records": sweep_records(rows)})
    else:
        write_sweep_csv(rows, out)
        # CSV cannot carry the flag echo, so it rides in a sidecar
        jsonio.write_json(out.with_suffix(out.suffix + ".config.json"), config_echo)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_attack(args: argparse.Namespace) -> int:
    dataset = _load_standardized(args)
    model_config = ModelConfig()
    budget = args.budget if args.budget is not None else default_cap(dataset.n)
    attack_config = AttackConfig(algorithm=args.algorithm, budget=budget, seed=args.seed)
    dbd_config = DbdConfig(seed=args.seed)
    projection_config = ProjectionConfig(seed=args.seed)

    result = run_attack(dataset, model_config, attack_config, args.target)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jsonio.write_json(out / "result.json", attack_result_to_dict(result, dataset))
    jsonio.write_json(out / "overview.json", model_overview(result, dataset).to_dict())
    jsonio.write_json(
        out / "instances.json",
        [r.to_dict() for r in instance_attributes(result, dataset, dbd_config)],
    )
    jsonio.write_json(
        out / "features.json", [r.to_dict() for r in feature_report(result, dataset)]
    )
    jsonio.write_json(
        out / "graph.json",
        build_local_impact_graph(dataset, result, args.k, model_config).to_dict(),
    )
    jsonio.write_json(
        out / "projection.json",
        tsne_embed(result.poisoned_dataset, projection_config).to_records(
            result.poisoned_dataset
        ),
    )
    status = "success" if result.success else "failure"
    print(f"{status}: {result.n_poisons} poisons for target {args.target} -> {out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    result_path = Path(args.attack_dir) / "result.json"
    if not result_path.is_file():
        raise FileNotFoundError(f"no attack result at {result_path}")
    result = jsonio.read_json(result_path)
    victim = result["victim_metrics"]
    poisoned = result["poisoned_metrics"]

    lines = [
        f"target {result['target_id']} ({result['algorithm']})",
        f"status: {'success' if result['success'] else 'failure'}",
        f"desired label: {result['desired_label']:+d}",
        f"poisons inserted: {result['n_poisons']} (rate {result['poisoning_rate']:.4f})",
        "",
        f"{'metric':<10}{'victim':>10}{'poisoned':>10}{'delta':>10}",
    ]
    for name in ("accuracy", "recall", "f1", "roc_auc"):
        v, p = victim[name], poisoned[name]
        if v is None or p is None:
            lines.append(f"{name:<10}{'n/a':>10}{'n/a':>10}{'n/a':>10}")
        else:
            lines.append(f"{name:<10}{v:>10.4f}{p:>10.4f}{p - v:>+10.4f}")
    for name in ("tn", "fn", "tp", "fp"):
        v, p = victim[name], poisoned[name]
        lines.append(f"{name:<10}{v:>10d}{p:>10d}{p - v:>+10d}")
    innocents = result["innocents"]
    lines.append("")
    if innocents:
        lines.append(
            f"innocents ({len(innocents)}): " + ", ".join(str(i) for i in innocents)
        )
    else:
        lines.append("innocents (0): none")
    print("\n".join(lines))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"--listen must look like HOST:PORT, got {args.listen!r}")
    app = create_app(args.data_dir, workers=args.workers)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poisonlab",
        description="poisoning vulnerability workbench: sweeps, attacks, reports, service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="score every instance: DBD, MCSA, risk levels")
    _add_dataset_flags(p_sweep)
    p_sweep.add_argument(
        "--algorithm",
        choices=sorted(ALGORITHMS),
        default=None,
        help="restrict the sweep to one attack algorithm (default: all)",
    )
    p_sweep.add_argument(
        "--cap", type=int, default=None, help="MCSA poison cap (default: ceil(0.25*n))"
    )
    p_sweep.add_argument(
        "--parallelism", type=int, default=1, help="worker processes for the sweep"
    )
    p_sweep.add_argument(
        "--out", required=True, help="output path; .json for JSON, anything else CSV"
    )
    p_sweep.set_defaults(handler=cmd_sweep)

    p_attack = sub.add_parser("attack", help="poison one target and write all views")
    _add_dataset_flags(p_attack)
    p_attack.add_argument("target", type=int, help="instance id to attack")
    p_attack.add_argument(
        "--algorithm", choices=sorted(ALGORITHMS), required=True, help="attack algorithm"
    )
    p_attack.add_argument(
        "--budget", type=int, default=None, help="max poisons (default: ceil(0.25*n))"
    )
    p_attack.add_argument(
        "--k", type=int, default=7, help="neighborhood size for the local impact graph"
    )
    p_attack.add_argument("--out", required=True, help="output directory")
    p_attack.set_defaults(handler=cmd_attack)

    p_report = sub.add_parser("report", help="print a text summary of an attack directory")
    p_report.add_argument("attack_dir", help="directory written by the attack command")
    p_report.set_defaults(handler=cmd_report)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument(
        "--listen",
        default=os.environ.get("POISONLAB_LISTEN", "127.0.0.1:8000"),
        help="HOST:PORT to bind",
    )
    p_serve.add_argument(
        "--data-dir",
        default=os.environ.get("POISONLAB_DATA_DIR", "./poisonlab-data"),
        help="artifact root directory",
    )
    p_serve.add_argument(
        "--workers",
        type=int,
        default=int(os.environ.get("POISONLAB_WORKERS", "4")),
        help="job worker threads",
    )
    p_serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
