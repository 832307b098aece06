"""Size sweeps, convergence verdicts, deviation diagnostics and CSV/SVG output.

Random streams are keyed per task.  Model weights come from
``(TAG_MODEL, T, model_id)`` and classifier heads from ``(TAG_CLF, T, model_id)``,
so two specs that differ only in architecture share every weight block they
have in common.  Each (size, sample) instance draws its graph from
``(TAG_GRAPH, n, sample)`` and its features from ``(TAG_FEAT, n, sample)``, and
every model of a sweep is evaluated on the same instances.  A sweep is thus a
pure function of its spec, whatever the worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .models import Model, forward, forward_many, init_model
from .numerics import Classifier, Nonlinearity, init_classifier
from .oracle import LimitTrace, Prediction, predict_class
from .rng import derive_rng
from .sampling import EdgeProbPolicy, FeatureDistribution, Graph, sample_ba, sample_er, sample_features

TAG_MODEL = 1
TAG_CLF = 2
TAG_GRAPH = 3
TAG_FEAT = 4

VERDICTS = ("Zero", "One", "Undetermined")
CSV_HEADER = "arch,layers,model_id,n,samples,frac_one,pred_class,pred_margin,verdict"


@dataclass(frozen=True)
class GraphPolicy:
    """``er`` with fixed r, ``sparse_er`` with r = ln(n)/n, or ``ba`` with m attachments."""

    kind: str = "er"
    r: float = 0.5
    m: int = 2

    def __post_init__(self):
        if self.kind not in ("er", "sparse_er", "ba"):
            raise ValueError(f"unknown graph policy {self.kind!r}")
        if self.kind == "er" and not 0.0 <= self.r <= 1.0:
            raise ValueError(f"edge probability must lie in [0, 1], got {self.r}")
        if self.kind == "ba" and self.m < 1:
            raise ValueError("BA attachment count must be >= 1")

    @property
    def min_size(self) -> int:
        return {"er": 1, "sparse_er": 2, "ba": self.m + 1}[self.kind]

    @property
    def oracle_r(self) -> float | None:
        """Edge probability the limit oracle may assume, if the family has one."""
        return self.r if self.kind == "er" else None

    def sample(self, n: int, rng) -> Graph:
        if self.kind == "er":
            return sample_er(n, EdgeProbPolicy.fixed(self.r), rng)
        if self.kind == "sparse_er":
            return sample_er(n, EdgeProbPolicy.sparse_log(), rng)
        return sample_ba(n, self.m, rng)


@dataclass
class ExperimentSpec:
    arch: str
    dims: list[int]
    sizes: list[int]
    sigma: Nonlinearity = field(default_factory=Nonlinearity)
    pooling: str = "mean"
    init_range: tuple[float, float] = (-1.0, 1.0)
    classifier_hidden: int | None = None
    features: FeatureDistribution | None = None
    graph: GraphPolicy = field(default_factory=GraphPolicy)
    samples_per_size: int = 32
    num_models: int = 10
    master_seed: int = 0

    def __post_init__(self):
        self.dims = [int(d) for d in self.dims]
        self.sizes = [int(n) for n in self.sizes]
        if len(self.dims) < 2:
            raise ValueError("dims needs d(0) and at least one layer width")
        if self.features is None:
            self.features = FeatureDistribution.uniform01(self.dims[0])
        if self.features.d != self.dims[0]:
            raise ValueError(f"feature dimension {self.features.d} differs from d(0) = {self.dims[0]}")
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError("sizes must be ascending")
        if self.sizes[0] < self.graph.min_size:
            raise ValueError(f"sizes must be >= {self.graph.min_size} for graph policy {self.graph.kind}")
        if self.samples_per_size < 1:
            raise ValueError("samples_per_size must be >= 1")
        if self.num_models < 1:
            raise ValueError("num_models must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")

    @property
    def layers(self) -> int:
        return len(self.dims) - 1


def build_models(spec: ExperimentSpec) -> list[tuple[Model, Classifier]]:
    out = []
    for i in range(spec.num_models):
        rng = derive_rng(spec.master_seed, (TAG_MODEL, spec.layers, i))
        m = init_model(spec.arch, spec.dims, spec.sigma, spec.pooling, spec.init_range, rng)
        c = init_classifier(spec.dims[-1], derive_rng(spec.master_seed, (TAG_CLF, spec.layers, i)),
                            spec.classifier_hidden, spec.init_range)
        out.append((m, c))
    return out


def sample_instance(spec: ExperimentSpec, n: int, sample: int) -> tuple[Graph, np.ndarray]:
    g = spec.graph.sample(n, derive_rng(spec.master_seed, (TAG_GRAPH, n, sample)))
    X0 = sample_features(n, spec.features, derive_rng(spec.master_seed, (TAG_FEAT, n, sample)))
    return g, X0


def log_sizes(lo: int, hi: int, count: int = 12) -> list[int]:
    """``count`` log-spaced integers from lo to hi (fewer if rounding collides)."""
    if not 1 <= lo <= hi or count < 1:
        raise ValueError("need 1 <= lo <= hi and count >= 1")
    if count == 1:
        return [hi]
    raw = np.rint(np.geomspace(lo, hi, count)).astype(int)
    return sorted(set(int(x) for x in raw))


@dataclass
class ModelCurve:
    model_id: int
    prediction: Prediction
    points: list[tuple[int, float]]
    verdict: str = "Undetermined"


@dataclass
class CurveSet:
    arch: str
    layers: int
    samples: int
    curves: list[ModelCurve] = field(default_factory=list)


def detect_convergence(curve, eps: float = 0.05, k: int = 3) -> str:
    """``One`` if the last k points are all >= 1 - eps, ``Zero`` if all <= eps."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 0.5)")
    values = [p[1] if isinstance(p, (tuple, list)) else p for p in curve]
    if len(values) < k:
        raise ValueError(f"curve has {len(values)} points, fewer than k = {k}")
    tail = values[-k:]
    if all(v >= 1 - eps for v in tail):
        return "One"
    if all(v <= eps for v in tail):
        return "Zero"
    return "Undetermined"


# ---------------------------------------------------------------------------
# sweeps

_WORK: dict = {}


def _eval_instance(n: int, sample: int) -> np.ndarray:
    spec = _WORK["spec"]
    g, X0 = sample_instance(spec, n, sample)
    return np.asarray(forward_many(_WORK["models"], g, X0, _WORK["classifiers"]), dtype=np.int64)


def _init_worker(spec, models, classifiers):
    _WORK.update(spec=spec, models=models, classifiers=classifiers)


def _sampling_key(spec: ExperimentSpec):
    return (spec.graph, spec.features, tuple(spec.sizes), spec.samples_per_size, spec.master_seed)


def run_sweeps(specs: list[ExperimentSpec], workers: int = 1, eps: float = 0.05, k: int = 3,
               progress=None) -> list[CurveSet]:
    """Run several specs over one shared set of sampled instances.

    The specs must agree on everything that determines the instances (graph
    policy, features, sizes, samples, seed).  Sharing lets one aggregation pass
    per layer serve every model.  ``progress(n, sample)`` is called after each
    instance when given.
    """
    if not specs:
        return []
    key = _sampling_key(specs[0])
    if any(_sampling_key(s) != key for s in specs[1:]):
        raise ValueError("specs in one batch must share graph, features, sizes, samples and seed")
    spec0 = specs[0]
    pairs = [build_models(s) for s in specs]
    models = [m for p in pairs for m, _ in p]
    classifiers = [c for p in pairs for _, c in p]
    tasks = [(n, s) for n in spec0.sizes for s in range(spec0.samples_per_size)]

    ones = np.zeros((len(models), len(spec0.sizes)), dtype=np.int64)
    col = {n: j for j, n in enumerate(spec0.sizes)}
    if workers <= 1:
        _init_worker(spec0, models, classifiers)
        try:
            for n, s in tasks:
                ones[:, col[n]] += _eval_instance(n, s)
                if progress:
                    progress(n, s)
        finally:
            _WORK.clear()
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(spec0, models, classifiers)) as ex:
            futures = [ex.submit(_eval_instance, n, s) for n, s in tasks]
            for (n, s), fut in zip(tasks, futures):
                ones[:, col[n]] += fut.result()
                if progress:
                    progress(n, s)

    out, row = [], 0
    for spec, pair in zip(specs, pairs):
        cs = CurveSet(spec.arch, spec.layers, spec.samples_per_size)
        mu = spec.features.mean_vector()
        for i, (m, c) in enumerate(pair):
            pts = [(n, ones[row, j] / spec.samples_per_size) for j, n in enumerate(spec.sizes)]
            verdict = detect_convergence(pts, eps, min(k, len(pts)))
            if spec.graph.kind == "er":
                pred = predict_class(m, c, spec.graph.r, mu)
            else:
                pred = Prediction(None, 0.0, f"limit oracle covers fixed-r ER graphs, not {spec.graph.kind}")
            cs.curves.append(ModelCurve(i, pred, pts, verdict))
            row += 1
        out.append(cs)
    return out


def run_sweep(spec: ExperimentSpec, workers: int = 1, eps: float = 0.05, k: int = 3, progress=None) -> CurveSet:
    return run_sweeps([spec], workers, eps, k, progress)[0]


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# deviation diagnostics


@dataclass
class DeviationReport:
    max_dev: list[float]  # layers 1..T covered by the limit trace
    exact_frac: list[float] | None = None  # sum models only
    bit: int | None = None


def measure_deviation(m: Model, c: Classifier | None, g: Graph, X0, limits: LimitTrace) -> DeviationReport:
    """Per-layer max |x_v^(t) - limit_t| over nodes and components."""
    want = "z_sequence" if m.arch in ("sum", "sum_plus") else "mu_sequence"
    if m.arch == "gat" or limits.kind != want:
        raise ValueError(f"a {limits.kind} trace does not match a {m.arch} model")
    tr = forward(m, g, X0, c)
    devs, exact = [], []
    for t in range(1, len(limits.vectors)):
        diff = np.abs(tr.embeddings[t] - limits.vectors[t][:, None])
        devs.append(float(diff.max()))
        if want == "z_sequence":
            exact.append(float(np.mean(np.all(diff == 0.0, axis=0))))
    return DeviationReport(devs, exact if want == "z_sequence" else None, tr.bit)


def exact_fraction_layer1(m: Model, g: Graph, X0, z1) -> float:
    """Fraction of nodes whose layer-1 embedding equals z1 exactly."""
    X1 = forward(m, g, X0, capture=True).embeddings[1]
    return float(np.mean(np.all(X1 == np.asarray(z1)[:, None], axis=0)))


# ---------------------------------------------------------------------------
# output


def _as_list(curves) -> list[CurveSet]:
    return [curves] if isinstance(curves, CurveSet) else list(curves)


def render_csv(curves) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for cs in _as_list(curves):
        for mc in sorted(cs.curves, key=lambda c: c.model_id):
            p = mc.prediction
            for n, frac in mc.points:
                buf.write(f"{cs.arch},{cs.layers},{mc.model_id},{n},{cs.samples},{frac:.6f},"
                          f"{p.label_text()},{p.margin:.6f},{mc.verdict}\n")
    return buf.getvalue()


def emit_csv(curves, destination) -> None:
    path = Path(destination)
    try:
        path.write_text(render_csv(curves), newline="")
    except OSError as e:
        raise OSError(f"cannot write CSV to {path}: {e.strerror or e}") from e


def read_csv(source) -> list[CurveSet]:
    """Rebuild curve sets (without traces) from a file written by emit_csv."""
    path = Path(source)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or ",".join(header) != CSV_HEADER:
            raise ValueError(f"{path}: not a curves CSV (bad header)")
        sets: dict[tuple[str, int], CurveSet] = {}
        curves: dict[tuple[str, int, int], ModelCurve] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 9:
                raise ValueError(f"{path}:{lineno}: expected 9 fields, got {len(row)}")
            arch, layers, mid, n, samples, frac, pcls, pmargin, verdict = row
            key = (arch, int(layers))
            cs = sets.setdefault(key, CurveSet(arch, int(layers), int(samples)))
            ck = (arch, int(layers), int(mid))
            if ck not in curves:
                label = None if pcls == "undetermined" else int(pcls)
                curves[ck] = ModelCurve(int(mid), Prediction(label, float(pmargin)), [], verdict)
                cs.curves.append(curves[ck])
            curves[ck].points.append((int(n), float(frac)))
    return list(sets.values())


_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
            "#bcbd22", "#17becf"]

# plot frame inside the viewBox
_W, _H = 640, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 60, 130, 20, 50


def _line_style(i: int) -> tuple[str, str]:
    colour = _PALETTE[i % len(_PALETTE)]
    dash = ["", "6,3", "2,2", "8,3,2,3"][(i // len(_PALETTE)) % 4]
    return colour, dash


def render_svg(curves, axes: str = "log_x", title: str | None = None) -> str:
    if axes not in ("linear", "log_x"):
        raise ValueError(f"unknown axes mode {axes!r}")
    sets = _as_list(curves)
    series = []
    multi = len(sets) > 1
    for cs in sets:
        for mc in sorted(cs.curves, key=lambda c: c.model_id):
            label = f"T={cs.layers} model {mc.model_id}" if multi else f"model {mc.model_id}"
            # round as the CSV does so a plot from CSV matches the direct one
            series.append((label, [(n, round(f, 6)) for n, f in mc.points]))

    xs = [n for _, pts in series for n, _ in pts]
    lo, hi = (min(xs), max(xs)) if xs else (1, 10)
    fx = (lambda v: math.log10(v)) if axes == "log_x" else (lambda v: float(v))
    a, b = fx(lo), fx(hi)
    if b == a:
        a, b = a - 0.5, b + 0.5
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(n):
        return _LEFT + (fx(n) - a) / (b - a) * pw

    def py(f):
        return _TOP + (1.0 - f) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    out.append(f'<g id="axes" stroke="black" stroke-width="1">'
               f'<line x1="{_LEFT}" y1="{_TOP + ph}" x2="{_LEFT + pw}" y2="{_TOP + ph}"/>'
               f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + ph}"/></g>')
    ticks = ['<g id="ticks" font-family="sans-serif" font-size="11">']
    for f in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(f)
        ticks.append(f'<line x1="{_LEFT - 4}" y1="{y:.2f}" x2="{_LEFT}" y2="{y:.2f}" stroke="black"/>'
                     f'<text x="{_LEFT - 7}" y="{y + 4:.2f}" text-anchor="end">{f:g}</text>')
    for v in _x_ticks(lo, hi, axes):
        x = px(v)
        ticks.append(f'<line x1="{x:.2f}" y1="{_TOP + ph}" x2="{x:.2f}" y2="{_TOP + ph + 4}" stroke="black"/>'
                     f'<text x="{x:.2f}" y="{_TOP + ph + 17}" text-anchor="middle">{v:g}</text>')
    ticks.append(f'<text x="{_LEFT + pw / 2:.2f}" y="{_H - 10}" text-anchor="middle">n</text>')
    ticks.append(f'<text x="15" y="{_TOP + ph / 2:.2f}" text-anchor="middle" '
                 f'transform="rotate(-90 15 {_TOP + ph / 2:.2f})">fraction classified 1</text>')
    ticks.append("</g>")
    out.extend(ticks)

    out.append('<g id="curves" fill="none" stroke-width="1.5">')
    for i, (label, pts) in enumerate(series):
        colour, dash = _line_style(i)
        coords = " ".join(f"{px(n):.2f},{py(f):.2f}" for n, f in pts)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline stroke="{colour}"{extra} points="{coords}"><title>{escape(label)}</title></polyline>')
    out.append("</g>")

    out.append('<g id="legend" font-family="sans-serif" font-size="10">')
    lx = _W - _RIGHT + 10
    for i, (label, _) in enumerate(series):
        colour, dash = _line_style(i)
        y = _TOP + 6 + 13 * i
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 18}" y2="{y}" stroke="{colour}" stroke-width="2"{extra}/>'
                   f'<text x="{lx + 22}" y="{y + 3.5}">{escape(label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _x_ticks(lo: float, hi: float, axes: str) -> list[float]:
    if axes == "log_x":
        return [10.0**k for k in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)
                if lo <= 10.0**k <= hi] or [lo, hi]
    step = 10 ** math.floor(math.log10(max(hi - lo, 1)))
    if (hi - lo) / step < 3:
        step /= 2
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) // step) + 1)]


def emit_svg(curves, destination, axes: str = "log_x", title: str | None = None) -> None:
    path = Path(destination)
    try:
        path.write_text(render_svg(curves, axes, title))
    except OSError as e:
        raise OSError(f"cannot write SVG to {path}: {e.strerror or e}") from e
