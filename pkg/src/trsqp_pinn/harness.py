"""Run configuration, end-to-end experiment pipeline, metrics, and exports."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal

from .data import evaluation_grid, sample_collocation, sample_labeled
from .errors import ConfigurationError
from .losses import PinnObjective
from .network import MLPArchitecture, forward, init_params, load_params, save_params
from .optimizers import (
    OuterLoopConfig,
    StopCriterion,
    alm_train,
    penalty_train,
    pinn_train,
    pretrain,
)
from .pde import (
    REACTION_DIFFUSION,
    TRANSPORT,
    PDEProblem,
    ReferenceGrid,
    analytic_solution,
    read_grid_csv,
    reference_solve,
    write_grid_csv,
)
from .trsqp import TrSQPConfig, trsqp_train

METHODS = ("pinn", "penalty", "alm", "trsqp")
OUTPUT_ENV = "TRSQP_PINN_OUTPUT"
REL_EPS = 1e-8
SUMMARY_COLUMNS = (
    "problem",
    "coefficients",
    "method",
    "abs_err",
    "rel_err",
    "rel_l2",
    "wall_time",
    "seed",
)


@dataclass
class RunConfig:
    problem: str = TRANSPORT
    beta: float = 30.0
    alpha: float = 30.0
    tau: float = 2.0
    zeta: float = 2.0
    method: str = "trsqp"
    n_labeled: int = 1000
    m_pretrain: int = 150
    m_train: int | None = None  # 12 for transport, 7 otherwise
    grid_nx: int = 2560
    grid_nt: int = 1000
    reference_nx: int = 4096
    reference_steps: int = 10_000
    depth: int = 4
    width: int = 50
    pretrain: bool | None = None  # default: on for penalty/alm/trsqp, off for pinn
    pinn_mu: float = 1.0
    noise_std: float = 0.01
    seed: int = 0
    stop: StopCriterion = field(default_factory=StopCriterion)
    pretrain_stop: StopCriterion = field(default_factory=StopCriterion)
    outer: OuterLoopConfig = field(default_factory=OuterLoopConfig)
    trsqp: TrSQPConfig = field(default_factory=TrSQPConfig)
    output_dir: str | None = None
    reference_cache: str | None = None
    export_heatmap: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("n_labeled", "m_pretrain", "grid_nx", "grid_nt", "depth", "width"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")

    @classmethod
    def desk_scale(cls, **overrides) -> "RunConfig":
        """Reduced sizes that run in minutes on a laptop CPU."""
        base = dict(
            depth=2,
            width=20,
            grid_nx=256,
            grid_nt=100,
            reference_nx=256,
            reference_steps=2000,
            stop=StopCriterion(l_max=20),
            pretrain_stop=StopCriterion(l_max=2000),
            trsqp=TrSQPConfig(max_iter=2000),
        )
        base.update(overrides)
        return cls.from_dict(base)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        nested = {"stop": StopCriterion, "pretrain_stop": StopCriterion,
                  "outer": OuterLoopConfig, "trsqp": TrSQPConfig}
        for key, kind in nested.items():
            if isinstance(raw.get(key), dict):
                raw[key] = kind(**raw[key])
        unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **overrides) -> "RunConfig":
        merged = self.to_dict()
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        return RunConfig.from_dict(merged)

    @property
    def pde(self) -> PDEProblem:
        if self.problem == TRANSPORT:
            return PDEProblem.transport(self.beta)
        if self.problem == REACTION_DIFFUSION:
            return PDEProblem.reaction_diffusion(self.alpha, self.tau, self.zeta)
        return PDEProblem.reaction(self.alpha, self.zeta)

    @property
    def arch(self) -> MLPArchitecture:
        return MLPArchitecture(self.depth, self.width)

    @property
    def train_points(self) -> int:
        if self.m_train is not None:
            return self.m_train
        return 12 if self.problem == TRANSPORT else 7

    @property
    def uses_pretraining(self) -> bool:
        if self.pretrain is None:
            return self.method != "pinn"
        return self.pretrain


@dataclass
class ErrorReport:
    abs_err: float
    rel_err: float
    rel_l2: float
    errors: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {"abs_err": self.abs_err, "rel_err": self.rel_err, "rel_l2": self.rel_l2}


def evaluate(arch: MLPArchitecture, theta, X, T, u_true) -> ErrorReport:
    """Grid-averaged absolute and relative pointwise errors plus relative L2."""
    if u_true is None:
        raise ConfigurationError("evaluation needs reference values")
    u_true = np.asarray(u_true, dtype=float)
    pred = forward(arch, theta, X, T).reshape(u_true.shape)
    err = np.abs(pred - u_true)
    return ErrorReport(
        abs_err=float(err.mean()),
        rel_err=float(np.mean(err / np.maximum(np.abs(u_true), REL_EPS))),
        rel_l2=float(np.linalg.norm(pred - u_true) / max(np.linalg.norm(u_true), REL_EPS)),
        errors=err,
    )


def export_heatmap(arch: MLPArchitecture, theta, problem: PDEProblem, n_x: int, n_t: int, path):
    """Write the network's values on the evaluation grid as CSV."""
    X, T = evaluation_grid(n_x, n_t)
    values = forward(arch, theta, X, T).reshape(X.shape)
    write_grid_csv(path, values, {"kind": problem.kind, **problem.coefficients})
    return values


def import_heatmap(path) -> np.ndarray:
    return read_grid_csv(path)[0]


def build_reference(config: RunConfig) -> ReferenceGrid:
    """Reaction-diffusion reference on the evaluation grid (cached when configured)."""
    problem = config.pde
    cache = None
    if config.reference_cache:
        cache = Path(config.reference_cache) / (
            f"rd_a{problem.alpha}_tau{problem.tau}_z{problem.zeta}"
            f"_{config.reference_nx}x{config.grid_nt}_s{config.reference_steps}.csv"
        )
        if cache.exists():
            grid = ReferenceGrid.from_csv(cache)
            return resample_reference(grid, config.grid_nx)
    grid = reference_solve(problem, config.reference_nx, config.reference_steps, config.grid_nt)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        grid.to_csv(cache)
    return resample_reference(grid, config.grid_nx)


def resample_reference(grid: ReferenceGrid, n_x: int) -> ReferenceGrid:
    """Trigonometric interpolation of a periodic grid onto ``n_x`` points."""
    if grid.n_x == n_x:
        return grid
    values = signal.resample(grid.values, n_x, axis=0)
    return ReferenceGrid(values=values, coefficients=grid.coefficients)


def truth_on_grid(config: RunConfig):
    """``(X, T, u_true, reference)`` on the configured evaluation grid."""
    X, T = evaluation_grid(config.grid_nx, config.grid_nt)
    problem = config.pde
    if problem.kind == REACTION_DIFFUSION:
        reference = build_reference(config)
        return X, T, reference.values, reference
    return X, T, analytic_solution(problem, X, T), None


class _JsonlLog:
    def __init__(self, path):
        self.path = path
        self._fh = open(path, "a") if path is not None else None

    def __call__(self, record):
        if self._fh is not None:
            self._fh.write(json.dumps(record) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()


def default_output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def initial_parameters(config: RunConfig, log=None):
    """Random init, optionally followed by pretraining on a separate collocation set."""
    arch, problem = config.arch, config.pde
    theta = init_params(arch, config.seed)
    info = {"pretrained": False}
    if config.uses_pretraining:
        colloc = sample_collocation(config.m_pretrain, seed=config.seed + 2)
        result = pretrain(problem, arch, colloc, config.pretrain_stop, theta0=theta)
        theta = result.theta
        info = {
            "pretrained": True,
            "pretrain_iters": result.n_iter,
            "pretrain_status": result.status,
            "pretrain_feasibility": result.value,
        }
        if log is not None:
            log({"stage": "pretrain", **info})
    return theta, info


def train(config: RunConfig, theta0, objective, log=None):
    method = config.method
    if method == "pinn":
        return pinn_train(objective, theta0, config.pinn_mu, config.stop).theta
    if method == "penalty":
        return penalty_train(objective, theta0, config.outer, config.stop, log).theta
    if method == "alm":
        return alm_train(objective, theta0, config.outer, config.stop, log).theta
    out_dir = Path(config.output_dir) if config.output_dir else None

    def checkpoint(state):
        if out_dir is not None:
            save_params(out_dir / f"checkpoint_{state.k + 1:06d}.params", config.arch, state.theta)

    return trsqp_train(objective, theta0, config.trsqp, log, checkpoint).theta


def run_experiment(config: RunConfig) -> dict:
    """Sample, (pre)train, evaluate, and write artifacts into ``config.output_dir``.

    Artifacts: ``config.json``, ``iterations.jsonl``, ``params.txt``,
    ``summary.json`` and (optionally) ``heatmap.csv``.
    """
    start = time.perf_counter()
    out_dir = Path(config.output_dir) if config.output_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
    log = _JsonlLog(out_dir / "iterations.jsonl" if out_dir else None)
    try:
        problem, arch = config.pde, config.arch
        X, T, u_true, reference = truth_on_grid(config)
        data = sample_labeled(
            problem, config.n_labeled, config.noise_std, seed=config.seed + 1, reference=reference
        )
        colloc = sample_collocation(config.train_points, seed=config.seed + 3)
        theta0, pre_info = initial_parameters(config, log)
        objective = PinnObjective(problem, arch, data, colloc)
        theta = train(config, theta0, objective, log)
        report = evaluate(arch, theta, X, T, u_true)
    finally:
        log.close()
    summary = {
        "problem": problem.kind,
        "coefficients": problem.coefficients,
        "method": config.method,
        "seed": config.seed,
        **report.as_dict(),
        **pre_info,
        "final_loss": objective.loss(theta),
        "final_c_norm": float(np.linalg.norm(objective.constraints(theta))),
        "wall_time": time.perf_counter() - start,
    }
    if out_dir is not None:
        save_params(out_dir / "params.txt", arch, theta)
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        if config.export_heatmap:
            export_heatmap(arch, theta, problem, config.grid_nx, config.grid_nt, out_dir / "heatmap.csv")
    summary["theta"] = theta
    return summary


def evaluate_checkpoint(config: RunConfig, params_path) -> ErrorReport:
    arch, theta = load_params(params_path)
    X, T, u_true, _ = truth_on_grid(config)
    return evaluate(arch, theta, X, T, u_true)


def _run_for_sweep(config: RunConfig) -> dict:
    summary = run_experiment(config)
    summary.pop("theta", None)
    return summary


def sweep(base: RunConfig, overrides: list[dict], workers: int = 1, summary_csv=None) -> list[dict]:
    """Run ``base`` once per override block; returns one summary per run."""
    configs = []
    for i, block in enumerate(overrides):
        cfg = base.replace(**block)
        if base.output_dir and "output_dir" not in block:
            cfg = cfg.replace(output_dir=str(Path(base.output_dir) / f"run_{i:03d}"))
        configs.append(cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_for_sweep, configs))
    else:
        summaries = [_run_for_sweep(cfg) for cfg in configs]
    if summary_csv is not None:
        write_summary_csv(summary_csv, summaries)
    return summaries


def write_summary_csv(path, summaries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            coeffs = ";".join(f"{k}={v}" for k, v in s["coefficients"].items())
            writer.writerow([s["problem"], coeffs, s["method"], s["abs_err"], s["rel_err"],
                             s["rel_l2"], s["wall_time"], s["seed"]])
