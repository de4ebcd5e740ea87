"""Command line: generate | experiment | net-audit | inspect.

Exit codes: 0 all checks passed, 1 a statistical or acceptance check failed,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .construction import ConstructionParams, InvalidParameters, Realization, build_realization
from .experiments import ConfigError, RunConfig, run_experiment
from .geometry import InvalidFlat
from .net import NetParams, UnsupportedNet, build_net
from .reports import atomic_write, write_report
from .statistics import InadmissibleParameters

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="override the configured root seed")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for trial batches")
    common.add_argument("--format", choices=("json", "csv"), action="append", dest="formats",
                        help="output format; repeat for both (default: both)")
    common.add_argument("--figures", action="store_true", help="also render PNG figures next to the CSV curves")

    parser = argparse.ArgumentParser(prog="cantortubes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="build a realization and write it as JSON")
    sub.add_parser("experiment", parents=[common], help="run the experiment named in the config")
    sub.add_parser("net-audit", parents=[common], help="audit the net lemma and the strip count bound")
    inspect = sub.add_parser("inspect", help="summarize a realization or report file")
    inspect.add_argument("path")
    return parser


def _load(args) -> RunConfig:
    if args.config is None:
        if args.command != "net-audit":
            raise ConfigError("--config is required")
        cfg = RunConfig.from_dict({"experiment": {"name": "net-audit"}}, args.command)
    else:
        cfg = RunConfig.load(args.config, args.command)
    if args.command == "net-audit":
        cfg.experiment = {**cfg.experiment, "name": "net-audit"}
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = max(1, args.threads)
    if args.formats:
        cfg.formats = tuple(dict.fromkeys(args.formats))
    cfg.figures = bool(args.figures)
    cfg.out = args.out
    return cfg


def _generate(cfg: RunConfig) -> int:
    params = cfg.require_params()
    real = build_realization(params, cfg.rule, cfg.seed)
    doc = real.to_dict()
    doc["config"] = cfg.to_dict()
    name = cfg.experiment.get("output", "realization.json") if cfg.experiment else "realization.json"
    path = Path(cfg.out) / name
    atomic_write(path, json.dumps(doc, separators=(",", ":")) + "\n")
    print(f"wrote {path} (depth {real.depth}, {len(real.cubes())} cubes)")
    return EXIT_PASS


def _experiment(cfg: RunConfig) -> int:
    rep = run_experiment(cfg)
    paths = write_report(rep, Path(cfg.out), cfg.to_dict(), cfg.formats)
    if rep.experiment == "net-audit" and "export_net_level" in cfg.experiment:
        paths.append(_export_net(cfg))
    if cfg.figures:
        from .plotting import render_report

        paths += render_report(rep, Path(cfg.out))
    for name, ok in rep.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {rep.experiment}:{name}")
    for flag in rep.flags:
        print(f"note: {flag}")
    for p in paths:
        print(f"wrote {p}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _export_net(cfg: RunConfig) -> Path:
    from .calibration import MAX_LEVEL
    from .constants import c_geom_for

    opts = cfg.experiment
    d, m = int(opts.get("d", 2)), int(opts.get("m", 1))
    n = int(opts["export_net_level"])
    if (d, m) not in MAX_LEVEL:
        raise ConfigError(f"no net for (d, m) = ({d}, {m})")
    params = ConstructionParams.constant(d, 2, 2 ** (d - 1), max(n, 1))
    net = build_net(NetParams.for_level(params, n, m, opts.get("eps_net"), c_geom_for(d, m)), d, m)
    path = Path(cfg.out) / f"net_d{d}_m{m}_n{n}.json"
    atomic_write(path, json.dumps(net.to_dict(), separators=(",", ":")) + "\n")
    return path


def _inspect(path: str) -> int:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    if "levels" in doc and "params" in doc:
        real = Realization.from_dict(doc)
        p = real.params
        print(f"realization: d={p.d} depth={real.depth} rule={real.rule.kind} seed={real.seed}")
        for k in range(real.depth + 1):
            print(f"  level {k}: {len(real.cubes(k))} cubes (P_k = {p.P(k)}), side 1/{p.scale(k)}")
        return EXIT_PASS
    if "experiment" in doc:
        print(f"report: {doc['experiment']} (format {doc.get('format_version')}, {doc.get('timestamp', 'no timestamp')})")
        for name, ok in doc.get("checks", {}).items():
            print(f"  {'PASS' if ok else 'FAIL'} {name}")
        print(json.dumps(doc.get("statistics", {}), indent=2)[:4000])
        return EXIT_PASS
    raise ConfigError(f"{path} is neither a realization nor a report")


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "inspect":
            return _inspect(args.path)
        cfg = _load(args)
        if args.command == "generate":
            return _generate(cfg)
        return _experiment(cfg)
    except InvalidParameters as exc:
        rep = exc.report
        where = f" (level {rep.level})" if rep.level is not None else ""
        print(f"invalid parameters: {rep.message}{where}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, InadmissibleParameters, InvalidFlat, UnsupportedNet) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
