"""Command-line entry point: ``gnn01 {sweep,predict,diag,gen,plot}``.

Exit status is 0 on success, 1 on a runtime failure (bad config, unreadable
model, I/O error) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import harness, oracle
from .models import load_model, save_model
from .numerics import Nonlinearity
from .rng import derive_rng
from .sampling import FeatureDistribution, sample_features

# ---------------------------------------------------------------------------
# config


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class SigmaConfig(_Strict):
    kind: Literal["clipped_identity", "relu", "clipped_relu", "tanh", "sigmoid", "identity"] = "clipped_identity"
    cap: float = Field(1.0, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _from_name(cls, v):
        return {"kind": v} if isinstance(v, str) else v


class FeatureConfig(_Strict):
    kind: Literal["uniform01", "normal"] = "uniform01"
    mean: float = 0.5
    stddev: float = Field(1.0, gt=0)


class GraphConfig(_Strict):
    kind: Literal["er", "sparse_er", "ba"] = "er"
    r: float = Field(0.5, ge=0, le=1)
    m: int = Field(2, ge=1)


class ClassifierConfig(_Strict):
    hidden: int | None = Field(None, ge=1)


class OutputConfig(_Strict):
    csv: str = "curves.csv"
    svg: str = "curves.svg"
    models_dir: str = "models"
    axes: Literal["linear", "log_x"] = "log_x"


class Config(_Strict):
    """Sweep configuration.  Omitted keys take the defaults below."""

    arch: Literal["gcn", "mean", "mean_plus", "sum", "sum_plus", "gat"]
    dims: list[int] = Field(min_length=2)
    sizes: list[int] | None = None
    size_cap: int = Field(5000, ge=10)
    sigma: SigmaConfig = SigmaConfig()
    pooling: Literal["mean", "sum", "max"] = "mean"
    init_range: tuple[float, float] = (-1.0, 1.0)
    classifier: ClassifierConfig = ClassifierConfig()
    features: FeatureConfig = FeatureConfig()
    graph: GraphConfig = GraphConfig()
    samples_per_size: int = Field(32, ge=1)
    num_models: int = Field(10, ge=1)
    master_seed: int = Field(0, ge=0, lt=2**64)
    eps: float = Field(0.05, gt=0, lt=0.5)
    k: int = Field(3, ge=1)
    output: OutputConfig = OutputConfig()

    @field_validator("dims")
    @classmethod
    def _positive_dims(cls, v):
        if any(d < 1 for d in v):
            raise ValueError("all dimensions must be >= 1")
        return v

    @model_validator(mode="after")
    def _fill_sizes(self):
        if self.sizes is None:
            object.__setattr__(self, "sizes", harness.log_sizes(10, self.size_cap, 12))
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be ascending")
        if self.init_range[0] >= self.init_range[1]:
            raise ValueError("init_range must satisfy lo < hi")
        if self.k > len(self.sizes):
            raise ValueError("k exceeds the number of sizes")
        return self


def _format_errors(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = "unknown key" if e["type"] == "extra_forbidden" else e["msg"]
        parts.append(f"{path}: {msg}")
    return "; ".join(parts)


def parse_config(text: str) -> Config:
    try:
        return Config.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_format_errors(e)}") from None


def render_config(cfg: Config) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2) + "\n"


def config_to_spec(cfg: Config, seed: int | None = None) -> harness.ExperimentSpec:
    f = cfg.features
    d0 = cfg.dims[0]
    features = FeatureDistribution.uniform01(d0) if f.kind == "uniform01" else FeatureDistribution.normal(
        d0, f.mean, f.stddev)
    g = cfg.graph
    return harness.ExperimentSpec(
        arch=cfg.arch,
        dims=list(cfg.dims),
        sizes=list(cfg.sizes),
        sigma=Nonlinearity(cfg.sigma.kind, cfg.sigma.cap),
        pooling=cfg.pooling,
        init_range=tuple(cfg.init_range),
        classifier_hidden=cfg.classifier.hidden,
        features=features,
        graph=harness.GraphPolicy(g.kind, g.r, g.m),
        samples_per_size=cfg.samples_per_size,
        num_models=cfg.num_models,
        master_seed=cfg.master_seed if seed is None else seed,
    )


# ---------------------------------------------------------------------------
# commands


def _mu_vector(arg: str | None, d: int) -> np.ndarray:
    if arg is None:
        return np.full(d, 0.5)
    vals = [float(x) for x in arg.split(",")]
    if len(vals) == 1:
        return np.full(d, vals[0])
    if len(vals) != d:
        raise ValueError(f"--feature-mean has {len(vals)} entries, model expects {d}")
    return np.array(vals)


def cmd_sweep(args) -> int:
    cfg = parse_config(Path(args.config).read_text())
    spec = config_to_spec(cfg, args.seed)
    out = Path(args.out)
    (out / cfg.output.models_dir).mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    cs = harness.run_sweep(spec, workers=args.threads, eps=cfg.eps, k=cfg.k)
    for i, (m, c) in enumerate(harness.build_models(spec)):
        save_model(out / cfg.output.models_dir / f"model_{i:02d}.json", m, c)
    harness.emit_csv(cs, out / cfg.output.csv)
    harness.emit_svg(cs, out / cfg.output.svg, cfg.output.axes, f"{cfg.arch}, T={spec.layers}")
    for mc in cs.curves:
        print(f"model {mc.model_id:2d}: final frac_one {mc.points[-1][1]:.3f}  verdict {mc.verdict:12s}"
              f" oracle {mc.prediction.label_text()}")
    print(f"wrote {out / cfg.output.csv} and {out / cfg.output.svg} in {time.perf_counter() - t0:.1f}s")
    return 0


def cmd_predict(args) -> int:
    m, c = load_model(args.model)
    if c is None:
        raise ValueError(f"{args.model}: model file has no classifier")
    pred = oracle.predict_class(m, c, args.r, _mu_vector(args.feature_mean, m.dims[0]), args.tol)
    print(json.dumps(pred.to_json(), indent=1))
    return 0


def cmd_diag(args) -> int:
    m, c = load_model(args.model)
    mu = _mu_vector(args.feature_mean, m.dims[0])
    if m.arch in ("sum", "sum_plus"):
        limits = oracle.limit_sum(m, args.r, mu)
    elif m.arch == "gcn":
        limits = oracle.limit_gcn(m, mu)
    elif m.arch in ("mean", "mean_plus"):
        limits = oracle.limit_mean(m, mu)
    else:
        raise ValueError("no limit oracle for attention models")
    policy = harness.GraphPolicy("er", args.r)
    g = policy.sample(args.n, derive_rng(args.seed, (harness.TAG_GRAPH, args.n, 0)))
    feats = FeatureDistribution.uniform01(m.dims[0])
    X0 = sample_features(args.n, feats, derive_rng(args.seed, (harness.TAG_FEAT, args.n, 0)))
    rep = harness.measure_deviation(m, c, g, X0, limits)
    print(json.dumps({"n": args.n, "r": args.r, "max_dev": rep.max_dev, "exact_frac": rep.exact_frac,
                      "bit": rep.bit, "limit_verdict": limits.verdict}, indent=1))
    return 0


def cmd_gen(args) -> int:
    policy = harness.GraphPolicy(args.graph, args.r, args.m)
    if args.n < policy.min_size:
        raise ValueError(f"--n must be >= {policy.min_size} for {args.graph}")
    g = policy.sample(args.n, derive_rng(args.seed, (harness.TAG_GRAPH, args.n, args.sample)))
    text = "".join(f"{u} {v}\n" for u, v in g.edges())
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def cmd_plot(args) -> int:
    sets = harness.read_csv(args.csv)
    harness.emit_svg(sets if len(sets) != 1 else sets[0], args.out, args.axes)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gnn01", description="Zero-one law experiments for random GNN classifiers.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a size sweep and write curves.csv / curves.svg")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, help="override master_seed")
    s.add_argument("--threads", type=int, default=1, help="worker processes (speed only)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("predict", help="asymptotic class of a serialized model")
    s.add_argument("--model", required=True)
    s.add_argument("--r", type=float, default=None, help="ER edge probability (needed for sum models)")
    s.add_argument("--feature-mean", default=None, help="scalar or comma list; default 0.5")
    s.add_argument("--tol", type=float, default=oracle.DEFAULT_TOL)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("diag", help="per-layer deviation from the limit on one sampled graph")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--r", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--feature-mean", default=None)
    s.set_defaults(func=cmd_diag)

    s = sub.add_parser("gen", help="emit one sampled graph as an edge list")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--graph", choices=("er", "sparse_er", "ba"), default="er")
    s.add_argument("--r", type=float, default=0.5)
    s.add_argument("--m", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sample", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("plot", help="redraw an SVG from a curves CSV")
    s.add_argument("--csv", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--axes", choices=("linear", "log_x"), default="log_x")
    s.set_defaults(func=cmd_plot)
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if getattr(args, "threads", 1) < 1:
        parser.print_usage(sys.stderr)
        print("gnn01: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"gnn01 {args.command}: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
