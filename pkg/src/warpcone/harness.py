"""Experiment configs, schedule pipelines and report emission (CSV, JSON, SVG)."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from xml.sax.saxutils import escape

import numpy as np

from ._random import substream
from .actions import ActionInstance, make_action
from .exceptions import ConfigError, WarpconeError
from .expansion import estimate_alpha
from .geometry import FiniteSet, greedy_net, net_from_candidates, parse_space
from .graphs import (
    Graph,
    build_approximating_graph,
    build_lavish_graph,
    build_schreier_graph,
    max_degree,
    serialize,
)
from .partition import SampleCloud, build_voronoi_partition, measure_ratio_Q, mesh
from .spectra import cheeger_bounds, lambda2, sigma2
from .warped import build_level_set_graph

logger = logging.getLogger(__name__)

COLUMNS = (
    "step", "r", "t", "num_vertices", "num_edges", "max_degree", "Q", "mesh",
    "lambda2", "sigma2", "cheeger_lower", "cheeger_upper", "alpha_hat", "seed",
)
INT_COLUMNS = frozenset({"step", "num_vertices", "num_edges", "max_degree", "seed"})
MODES = ("approximating", "lavish", "level_set", "schreier")
OUTPUTS = ("csv", "json", "edgelist", "svg")
CANDIDATES_PER_NODE = 20


@dataclass(frozen=True)
class ExperimentConfig:
    """One schedule of pipeline runs.

    ``schedule`` holds ``r`` values (approximating and lavish modes), ``t``
    values (level_set) or group sizes (schreier).
    """

    action: str
    schedule: tuple
    seed: int
    space: str | None = None
    mode: str = "approximating"
    samples_per_cell: int = 200
    threshold: int = 1
    inflation: float = 0.0
    outputs: tuple = ("csv",)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ConfigError("seed is mandatory and must be an integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        schedule = tuple(self.schedule)
        if not schedule and self.mode == "schreier" and ":" in self.action:
            schedule = (int(self.action.partition(":")[2]),)
        if not schedule:
            raise ConfigError("schedule must be nonempty")
        try:
            vals = [float(v) for v in schedule]
        except (TypeError, ValueError):
            raise ConfigError("schedule entries must be numbers") from None
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ConfigError("schedule entries must be positive and finite")
        diffs = np.diff(vals)
        if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigError("schedule must be strictly monotone")
        if self.mode == "schreier":
            if any(v != int(v) for v in vals):
                raise ConfigError("schreier schedules are integer group sizes")
            schedule = tuple(int(v) for v in vals)
        else:
            schedule = tuple(vals)
        object.__setattr__(self, "schedule", schedule)
        if self.mode == "level_set" and min(vals) < 1:
            raise ConfigError("level-set scales t must be >= 1")
        if self.samples_per_cell < 1:
            raise ConfigError("samples_per_cell must be >= 1")
        if self.threshold < 1:
            raise ConfigError("threshold must be >= 1")
        if self.inflation < 0:
            raise ConfigError("inflation must be nonnegative")
        outputs = tuple(self.outputs)
        bad = [o for o in outputs if o not in OUTPUTS]
        if bad:
            raise ConfigError(f"unknown outputs {bad}; valid: {list(OUTPUTS)}")
        object.__setattr__(self, "outputs", outputs)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}; valid: {sorted(known)}")
        missing = sorted({"action", "seed"} - set(data))
        if missing:
            raise ConfigError(f"missing config keys {missing}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = list(self.schedule)
        d["outputs"] = list(self.outputs)
        return d


@dataclass
class ExperimentRow:
    step: int
    r: float | None = None
    t: float | None = None
    num_vertices: int | None = None
    num_edges: int | None = None
    max_degree: int | None = None
    Q: float | None = None
    mesh: float | None = None
    lambda2: float | None = None
    sigma2: float | None = None
    cheeger_lower: float | None = None
    cheeger_upper: float | None = None
    alpha_hat: float | None = None
    seed: int | None = None
    error: str | None = field(default=None, compare=False)

    def values(self) -> dict:
        return {c: getattr(self, c) for c in COLUMNS}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    graphs: dict = field(default_factory=dict, repr=False)  # step -> edge-list bytes

    def artifacts(self) -> dict:
        """File name -> bytes for every requested output."""
        out = {}
        if "csv" in self.config.outputs:
            out["experiment.csv"] = emit_csv(self.rows)
        if "json" in self.config.outputs:
            out["experiment.json"] = emit_json(self.rows, self.config)
        if "edgelist" in self.config.outputs:
            for step, data in sorted(self.graphs.items()):
                out[f"step{step:02d}.edgelist"] = data
        if "svg" in self.config.outputs:
            x = "t" if self.config.mode == "level_set" else "num_vertices"
            out["experiment.svg"] = emit_svg(self.rows, x, ["lambda2"])
        return out

    def write(self, directory) -> list:
        os.makedirs(directory, exist_ok=True)
        paths = []
        for name, data in self.artifacts().items():
            path = os.path.join(directory, name)
            with open(path, "wb") as fh:
                fh.write(data)
            paths.append(path)
        return paths


# -- pipeline ---------------------------------------------------------------------


def resolve_action(action_id: str, space_id: str | None = None) -> ActionInstance:
    """Catalog action, checked against (or, for ``identity``, placed on) ``space_id``."""
    space = parse_space(space_id) if space_id else None
    try:
        action = make_action(action_id, space)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc.args[0] if exc.args else exc)) from None
    if space is not None and action.space != space:
        raise ConfigError(f"action {action_id!r} lives on {action.space}, not {space}")
    return action


def _spectral_columns(row, graph: Graph):
    row.num_vertices = graph.n
    row.num_edges = graph.m
    row.max_degree = max_degree(graph)
    if graph.n < 2:
        return None
    spec = lambda2(graph)
    bounds = cheeger_bounds(graph, spec)
    row.lambda2 = spec.lambda2
    row.cheeger_lower = bounds.lower
    row.cheeger_upper = bounds.upper
    return spec


def _run_partition_step(action, config, r, rng, row):
    space = action.space
    net = greedy_net(space, r, CANDIDATES_PER_NODE * space.estimate_net_size(r), rng)
    cloud = SampleCloud.sample(space, config.samples_per_cell * len(net), rng)
    part = build_voronoi_partition(space, net, cloud)
    graph, tm = build_approximating_graph(action, part, config.threshold)
    if config.mode == "lavish":
        graph = build_lavish_graph(action, part, config.inflation)
    row.Q = measure_ratio_Q(part)
    row.mesh = mesh(part)
    spec = _spectral_columns(row, graph)
    row.sigma2 = sigma2(tm)
    row.alpha_hat = estimate_alpha(
        action, part, tm, None if spec is None else spec.fiedler, random_state=rng
    ).alpha_hat
    return graph, None


def _run_level_set_step(action, config, t, rng, row):
    level = build_level_set_graph(action, t, random_state=rng)
    _spectral_columns(row, level.graph)
    return level.graph, t


def _run_schreier_step(action_id, n, row):
    base = action_id.partition(":")[0]
    action = make_action(f"{base}:{n}")
    graph = build_schreier_graph(action)
    space = action.space
    net = net_from_candidates(space, space.points(), 1.0, n_probe=0)
    part = build_voronoi_partition(space, net, SampleCloud.uniform(space.points()))
    _, tm = build_approximating_graph(action, part)
    row.Q = measure_ratio_Q(part)
    row.mesh = 0.0
    spec = _spectral_columns(row, graph)
    row.sigma2 = sigma2(tm)
    row.alpha_hat = estimate_alpha(
        action, part, tm, None if spec is None else spec.fiedler, random_state=0
    ).alpha_hat
    return graph, None


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run every schedule step; one row each, failures recorded in ``row.error``.

    Each step draws from its own random stream keyed by ``(seed, step)``, so
    results do not depend on which steps ran before it.
    """
    action = None
    if config.mode != "schreier":
        action = resolve_action(config.action, config.space)
    elif config.action.partition(":")[0] not in ("schreier_cyclic", "schreier_sl2"):
        raise ConfigError("schreier mode needs a schreier_cyclic or schreier_sl2 action")
    rows, graphs = [], {}
    for step, value in enumerate(config.schedule):
        row = ExperimentRow(step=step, seed=int(config.seed))
        if config.mode == "level_set":
            row.t, row.r = float(value), 1.0 / (3.0 * value)
        elif config.mode != "schreier":
            row.r, row.t = float(value), 1.0 / (3.0 * value)
        rng = substream(config.seed, step)
        try:
            if config.mode == "level_set":
                graph, t = _run_level_set_step(action, config, value, rng, row)
            elif config.mode == "schreier":
                graph, t = _run_schreier_step(config.action, value, row)
            else:
                if isinstance(action.space, FiniteSet):
                    raise ConfigError("finite actions run in schreier mode")
                graph, t = _run_partition_step(action, config, value, rng, row)
            if "edgelist" in config.outputs:
                graphs[step] = serialize(graph, t=t)
        except ConfigError:
            raise
        except (WarpconeError, ArithmeticError, ValueError, MemoryError) as exc:
            row.error = f"{type(exc).__name__}: {exc}"
            logger.warning("step %d (%s) failed: %s", step, value, row.error)
        rows.append(row)
    result = ExperimentResult(config, rows, graphs)
    if out_dir is not None:
        result.write(out_dir)
    return result


# -- emission ---------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("boolean cell value")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def emit_csv(rows) -> bytes:
    """CSV with the fixed column header; missing values are empty fields."""
    if not rows:
        raise ValueError("no rows to emit")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.values()[c]) for c in COLUMNS])
    return buf.getvalue().encode("ascii")


def read_csv(data) -> list:
    """Inverse of :func:`emit_csv`."""
    text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else data
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        kw = {}
        for name, cell in zip(COLUMNS, rec):
            if cell == "":
                kw[name] = None
            else:
                kw[name] = int(cell) if name in INT_COLUMNS else float(cell)
        rows.append(ExperimentRow(**kw))
    return rows


def _json_value(v):
    if v is None:
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def emit_json(rows, config: ExperimentConfig | None = None) -> bytes:
    payload = {
        "config": None if config is None else config.to_dict(),
        "rows": [
            {**{c: _json_value(getattr(row, c)) for c in COLUMNS}, "error": row.error}
            for row in rows
        ],
    }
    return (json.dumps(payload, indent=2, sort_keys=False) + "\n").encode("ascii")


def _check_columns(names):
    bad = [n for n in names if n not in COLUMNS]
    if bad:
        raise ConfigError(f"unknown columns {bad}; valid columns: {', '.join(COLUMNS)}")


def emit_svg(rows, x: str, y, width: int = 640, height: int = 400) -> bytes:
    """Line chart of ``y`` (one column or a list, one polyline each) against ``x``."""
    if not rows:
        raise ValueError("no rows to plot")
    series = [y] if isinstance(y, str) else list(y)
    _check_columns([x, *series])
    margin = 60
    pts = {
        name: [(getattr(r, x), getattr(r, name)) for r in rows
               if getattr(r, x) is not None and getattr(r, name) is not None]
        for name in series
    }
    xs = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ys = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def sx(v):
        return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle">{escape(x)}</text>',
        f'<text x="15" y="{height / 2}" text-anchor="middle" '
        f'transform="rotate(-90 15 {height / 2})">{escape(", ".join(series))}</text>',
        f'<text x="{margin}" y="{height - margin + 18}" text-anchor="middle">{x0:.4g}</text>',
        f'<text x="{width - margin}" y="{height - margin + 18}" text-anchor="middle">{x1:.4g}</text>',
        f'<text x="{margin - 6}" y="{height - margin}" text-anchor="end">{y0:.4g}</text>',
        f'<text x="{margin - 6}" y="{margin}" text-anchor="end">{y1:.4g}</text>',
    ]
    for k, name in enumerate(series):
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts[name])
        out.append(
            f'<polyline class="series" data-column="{escape(name)}" points="{coords}" '
            f'fill="none" stroke="{colors[k % len(colors)]}" stroke-width="2"/>'
        )
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
