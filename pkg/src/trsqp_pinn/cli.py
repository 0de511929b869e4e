"""Command line entry point: ``python -m trsqp_pinn <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import harness
from .network import save_params
from .optimizers import pretrain
from .data import sample_collocation
from .pde import REACTION_DIFFUSION

_SCALAR_FIELDS = [
    f for f in dataclasses.fields(harness.RunConfig)
    if f.name not in ("stop", "pretrain_stop", "outer", "trsqp", "pretrain", "m_train",
                      "output_dir", "reference_cache")
]


def _add_config_flags(parser):
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--desk-scale", action="store_true", help="apply the reduced-size preset")
    for f in _SCALAR_FIELDS:
        kind = {"bool": _parse_bool}.get(str(f.type), None) or _type_of(f)
        parser.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=kind, default=None)
    parser.add_argument("--m-train", dest="m_train", type=int, default=None)
    parser.add_argument("--pretrain", dest="pretrain", type=_parse_bool, default=None)
    parser.add_argument("--output-dir", dest="output_dir", default=None)
    parser.add_argument("--reference-cache", dest="reference_cache", default=None)
    parser.add_argument("--max-iter", dest="max_iter", type=int, default=None,
                        help="trust-region SQP iteration cap")
    parser.add_argument("--l-max", dest="l_max", type=int, default=None,
                        help="inner L-BFGS iteration cap")
    parser.add_argument("--hessian", dest="hessian", default=None,
                        choices=["damped_bfgs", "sr1", "identity"])


def _type_of(f):
    text = str(f.type)
    if "float" in text:
        return float
    if "int" in text:
        return int
    return str


def _parse_bool(text):
    return str(text).lower() in ("1", "true", "yes", "on")


def _config_from_args(args) -> harness.RunConfig:
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        config = (harness.RunConfig.desk_scale(**raw) if args.desk_scale
                  else harness.RunConfig.from_dict(raw))
    else:
        config = harness.RunConfig.desk_scale() if args.desk_scale else harness.RunConfig()
    overrides = {}
    for name in [f.name for f in _SCALAR_FIELDS] + ["m_train", "pretrain", "output_dir",
                                                     "reference_cache"]:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.max_iter is not None:
        overrides["trsqp"] = {"max_iter": args.max_iter}
    if args.hessian is not None:
        overrides.setdefault("trsqp", {})["hessian_scheme"] = args.hessian
    if args.l_max is not None:
        overrides["stop"] = {"l_max": args.l_max}
    if config.output_dir is None and "output_dir" not in overrides:
        overrides["output_dir"] = str(harness.default_output_root() / "latest")
    return config.replace(**overrides)


def cmd_reference(args):
    config = _config_from_args(args)
    if config.pde.kind != REACTION_DIFFUSION:
        print("reference grids are only needed for reaction_diffusion", file=sys.stderr)
        return 2
    grid = harness.build_reference(config)
    out = Path(args.out or Path(config.output_dir) / "reference.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    grid.to_csv(out)
    print(out)
    return 0


def cmd_pretrain(args):
    config = _config_from_args(args)
    colloc = sample_collocation(config.m_pretrain, seed=config.seed + 2)
    from .network import init_params

    result = pretrain(config.pde, config.arch, colloc, config.pretrain_stop,
                      theta0=init_params(config.arch, config.seed))
    out = Path(args.out or Path(config.output_dir) / "pretrained.params")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_params(out, config.arch, result.theta)
    print(json.dumps({"params": str(out), "feasibility": result.value, "iters": result.n_iter,
                      "status": result.status}))
    return 0


def cmd_train(args):
    summary = harness.run_experiment(_config_from_args(args))
    summary.pop("theta", None)
    print(json.dumps(summary))
    return 0


def cmd_evaluate(args):
    report = harness.evaluate_checkpoint(_config_from_args(args), args.params)
    print(json.dumps(report.as_dict()))
    return 0


def cmd_sweep(args):
    config = _config_from_args(args)
    overrides = json.loads(Path(args.overrides).read_text())
    out_csv = Path(config.output_dir) / "summary.csv"
    Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    harness.sweep(config, overrides, workers=args.workers, summary_csv=out_csv)
    print(out_csv)
    return 0


def cmd_export_heatmap(args):
    config = _config_from_args(args)
    from .network import load_params

    arch, theta = load_params(args.params)
    harness.export_heatmap(arch, theta, config.pde, config.grid_nx, config.grid_nt, args.out)
    print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trsqp-pinn")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "reference": (cmd_reference, [("--out", {})]),
        "pretrain": (cmd_pretrain, [("--out", {})]),
        "train": (cmd_train, []),
        "evaluate": (cmd_evaluate, [("--params", {"required": True})]),
        "sweep": (cmd_sweep, [("--overrides", {"required": True,
                                               "help": "JSON list of override blocks"}),
                              ("--workers", {"type": int, "default": 1})]),
        "export-heatmap": (cmd_export_heatmap, [("--params", {"required": True}),
                                                ("--out", {"required": True})]),
    }
    for name, (func, extra) in specs.items():
        p = sub.add_parser(name)
        _add_config_flags(p)
        for flag, kwargs in extra:
            p.add_argument(flag, **kwargs)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # stage failures map to a nonzero exit; logs stay on disk
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
