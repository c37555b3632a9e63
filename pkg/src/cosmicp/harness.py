"""Seeded multi-run benchmark of CoSM-ICP against the SVD baseline.

A plan fixes the input cloud, methods, sigma values, outlier fractions and a
master seed.  Run ``r`` draws its pose from the sampler substream ``r`` and
its outliers from an independent substream, so every record can be
regenerated from ``(master_seed, run)`` alone.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (EulerPose, Method, RegistrationConfig, apply, euler_to_transform,
                   transform_error)
from .pcd import read_pcd
from .preprocess import OutlierSpec, SamplerMode, TransformSampler, inject_outliers, voxel_grid_filter
from .registration import register
from .spatial import KdTree

CSV_COLUMNS = ("run", "method", "sigma", "outlier_fraction", "roll", "pitch", "yaw",
               "tx", "ty", "tz", "final_rmse", "rot_err_rad", "trans_err", "iters",
               "wall_ms", "status")

# mirrors the 10 / 25 / 50 percent contamination sweeps
OUTLIER_PRESETS = (0.10, 0.25, 0.50)

_OUTLIER_STREAM = 1_000_003


class InputUnreadable(OSError):
    pass


class EmptyInput(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class ExperimentPlan:
    input_path: str | None = None
    methods: tuple[Method, ...] = (Method.COSM, Method.STANDARD_SVD)
    runs: int = 100
    sampler_mode: SamplerMode = SamplerMode.GAUSSIAN
    angle_scale: float | None = None
    trans_scale: float = 10.0
    outlier_fractions: tuple[float, ...] = (0.0,)
    outlier_offset_std: float | None = None
    sigmas: tuple[float, ...] = (100.0,)
    iterations: int = 50
    master_seed: int = 0
    voxel_leaf: float | None = None
    cloud: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.methods = tuple(Method(m) for m in self.methods)
        self.sampler_mode = SamplerMode(self.sampler_mode)
        self.outlier_fractions = tuple(float(f) for f in self.outlier_fractions)
        self.sigmas = tuple(float(s) for s in self.sigmas)
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.methods:
            raise ValueError("at least one method is required")
        if not self.sigmas or any(not s > 0 for s in self.sigmas):
            raise ValueError("sigma values must be positive")
        if any(not 0.0 <= f <= 1.0 for f in self.outlier_fractions):
            raise ValueError("outlier fractions must lie in [0, 1]")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.input_path is None and self.cloud is None:
            raise ValueError("plan needs an input_path or a cloud")

    def sampler(self) -> TransformSampler:
        return TransformSampler(self.sampler_mode, self.master_seed,
                                self.angle_scale, self.trans_scale)

    def pose_for_run(self, run: int) -> EulerPose:
        """The pose of run ``run``; depends only on the master seed and ``run``."""
        return self.sampler().substream(run).sample()

    def load_target(self) -> np.ndarray:
        if self.cloud is not None:
            target = np.asarray(self.cloud, dtype=np.float64)
        else:
            try:
                target = read_pcd(self.input_path)
            except OSError as exc:
                raise InputUnreadable(f"cannot read {self.input_path}: {exc}") from exc
        if self.voxel_leaf:
            target = voxel_grid_filter(target, self.voxel_leaf)
        return target


@dataclass
class BenchmarkRecord:
    run: int
    method: str
    sigma: float
    outlier_fraction: float
    roll: float
    pitch: float
    yaw: float
    tx: float
    ty: float
    tz: float
    final_rmse: float
    rot_err_rad: float
    trans_err: float
    iters: int
    wall_ms: float
    status: str = "ok"
    rmse_trace: list[float] = field(default_factory=list)

    @property
    def pose(self) -> EulerPose:
        return EulerPose(self.roll, self.pitch, self.yaw, self.tx, self.ty, self.tz)

    def key(self):
        """Everything except wall time, for reproducibility checks."""
        d = asdict(self)
        d.pop("wall_ms")
        return d


def _run_one(plan: ExperimentPlan, target: np.ndarray, tree: KdTree, run: int):
    pose = plan.pose_for_run(run)
    truth = euler_to_transform(pose)
    clean_source = apply(truth, target)
    # registration estimates the map from source back onto the target
    expected = truth.inverse()
    out = []
    for fraction in plan.outlier_fractions:
        source = clean_source
        if fraction > 0:
            ss = np.random.SeedSequence(plan.master_seed, spawn_key=(_OUTLIER_STREAM, run))
            rng = np.random.Generator(np.random.PCG64(ss))
            source, _ = inject_outliers(
                clean_source, OutlierSpec(fraction, plan.outlier_offset_std), rng=rng)
        for method in plan.methods:
            for sigma in plan.sigmas:
                cfg = RegistrationConfig(sigma=sigma, max_iterations=plan.iterations, method=method)
                rep = register(source, target, cfg, target_tree=tree)
                rot_err, trans_err = transform_error(rep.final_transform, expected)
                out.append(BenchmarkRecord(
                    run=run, method=method.value, sigma=sigma, outlier_fraction=fraction,
                    roll=pose.roll, pitch=pose.pitch, yaw=pose.yaw,
                    tx=pose.tx, ty=pose.ty, tz=pose.tz,
                    final_rmse=rep.final_rmse, rot_err_rad=rot_err, trans_err=trans_err,
                    iters=rep.iterations, wall_ms=rep.wall_time_s * 1e3,
                    status=rep.status, rmse_trace=list(rep.rmse_trace),
                ))
    return out


def _run_chunk(plan, target, runs):
    tree = KdTree(target)
    return [rec for r in runs for rec in _run_one(plan, target, tree, r)]


def _order_key(rec: BenchmarkRecord):
    return (rec.run, rec.outlier_fraction, rec.method, rec.sigma)


def run_plan(plan: ExperimentPlan, *, workers: int = 1) -> list[BenchmarkRecord]:
    """Execute every (run, outlier fraction, method, sigma) combination.

    Records come back sorted by run, then outlier fraction, method and sigma,
    whatever the number of worker processes.
    """
    target = plan.load_target()
    runs = list(range(plan.runs))
    if workers <= 1:
        records = _run_chunk(plan, target, runs)
    else:
        chunks = [runs[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [plan] * workers, [target] * workers, chunks)
            records = [rec for part in parts for rec in part]
    return sorted(records, key=_order_key)


@dataclass
class GroupStats:
    count: int
    mean: float
    median: float
    p25: float
    p75: float


@dataclass
class AggregateSummary:
    # keyed by (method, outlier_fraction, sigma)
    stats: dict = field(default_factory=dict)
    # keyed by (other_method, outlier_fraction, sigma): fraction of runs where
    # CoSM's final RMSE is strictly smaller
    cosm_win_rate: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stats": [
                {"method": m, "outlier_fraction": f, "sigma": s, **asdict(g)}
                for (m, f, s), g in sorted(self.stats.items())
            ],
            "cosm_win_rate": [
                {"versus": m, "outlier_fraction": f, "sigma": s, "win_rate": w}
                for (m, f, s), w in sorted(self.cosm_win_rate.items())
            ],
        }


def aggregate(records: list[BenchmarkRecord]) -> AggregateSummary:
    """Mean, median and quartiles (linear interpolation) per group, plus win rates."""
    if not records:
        raise EmptyInput("aggregate needs at least one record")
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.method, rec.outlier_fraction, rec.sigma), []).append(rec)
    summary = AggregateSummary()
    for key, recs in groups.items():
        x = np.array([r.final_rmse for r in recs], dtype=np.float64)
        p25, median, p75 = np.percentile(x, [25, 50, 75], method="linear")
        summary.stats[key] = GroupStats(len(x), float(np.mean(x)), float(median),
                                        float(p25), float(p75))

    cosm = Method.COSM.value
    by_run = {(r.method, r.outlier_fraction, r.sigma, r.run): r.final_rmse for r in records}
    for (method, frac, sigma), recs in groups.items():
        if method == cosm or (cosm, frac, sigma) not in groups:
            continue
        pairs = [(by_run.get((cosm, frac, sigma, r.run)), r.final_rmse) for r in recs]
        pairs = [(mine, theirs) for mine, theirs in pairs if mine is not None]
        if pairs:
            summary.cosm_win_rate[(method, frac, sigma)] = \
                sum(mine < theirs for mine, theirs in pairs) / len(pairs)
    return summary


def export(records: list[BenchmarkRecord], summary: AggregateSummary | None = None,
           format: str = "csv", *, timing: bool = True) -> bytes:
    """Serialize records as CSV (fixed columns) or JSON (records plus summary).

    Floats use 17 significant digits.  ``timing=False`` blanks the wall-time
    column so that repeated runs produce identical bytes.
    """
    if not records:
        raise EmptyInput("export needs at least one record")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.run, r.method, _fmt(r.sigma), _fmt(r.outlier_fraction),
                _fmt(r.roll), _fmt(r.pitch), _fmt(r.yaw), _fmt(r.tx), _fmt(r.ty), _fmt(r.tz),
                _fmt(r.final_rmse), _fmt(r.rot_err_rad), _fmt(r.trans_err), r.iters,
                _fmt(r.wall_ms) if timing else "", r.status,
            ])
        return buf.getvalue().encode("ascii")
    if format == "json":
        if summary is None:
            raise ValueError("json export needs a summary")
        recs = []
        for r in records:
            d = asdict(r)
            if not timing:
                d["wall_ms"] = None
            recs.append(d)
        doc = {"records": recs, "summary": summary.to_dict()}
        return json.dumps(doc, indent=1, default=_json_default).encode("ascii")
    raise ValueError(f"unknown export format {format!r}")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


def read_records_csv(data) -> list[BenchmarkRecord]:
    """Parse a CSV produced by :func:`export` back into records."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        out.append(BenchmarkRecord(
            run=int(row["run"]), method=row["method"], sigma=float(row["sigma"]),
            outlier_fraction=float(row["outlier_fraction"]),
            roll=float(row["roll"]), pitch=float(row["pitch"]), yaw=float(row["yaw"]),
            tx=float(row["tx"]), ty=float(row["ty"]), tz=float(row["tz"]),
            final_rmse=float(row["final_rmse"]), rot_err_rad=float(row["rot_err_rad"]),
            trans_err=float(row["trans_err"]), iters=int(row["iters"]),
            wall_ms=float(row["wall_ms"]) if row["wall_ms"] else math.nan,
            status=row["status"],
        ))
    return out


def read_records_json(data) -> list[BenchmarkRecord]:
    doc = json.loads(data)
    out = []
    for d in doc["records"]:
        d = dict(d)
        if d.get("wall_ms") is None:
            d["wall_ms"] = math.nan
        out.append(BenchmarkRecord(**d))
    return out


def load_plan(path: str | os.PathLike, **overrides) -> ExperimentPlan:
    """Read a plan from JSON or from ``key = value`` lines (``#`` comments).

    List-valued keys (methods, sigmas, outlier_fractions) take comma
    separated values in the text form.
    """
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            raw[k] = v
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return plan_from_mapping(raw, base_dir=Path(path).parent)


_LIST_KEYS = {"methods": str, "sigmas": float, "outlier_fractions": float}
_SCALAR_KEYS = {"input_path": str, "runs": int, "sampler_mode": str, "angle_scale": float,
                "trans_scale": float, "outlier_offset_std": float, "iterations": int,
                "master_seed": int, "voxel_leaf": float}


def plan_from_mapping(raw: dict, base_dir: Path | None = None) -> ExperimentPlan:
    kwargs = {}
    for key, value in raw.items():
        if key in _LIST_KEYS:
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            kwargs[key] = tuple(_LIST_KEYS[key](v) for v in value)
        elif key in _SCALAR_KEYS:
            kwargs[key] = None if value in (None, "", "none") else _SCALAR_KEYS[key](value)
        else:
            raise ValueError(f"unknown plan key {key!r}")
    path = kwargs.get("input_path")
    if path and base_dir is not None and not os.path.isabs(path):
        candidate = base_dir / path
        if candidate.exists():
            kwargs["input_path"] = str(candidate)
    return ExperimentPlan(**kwargs)


def with_identity_sampler(plan: ExperimentPlan) -> ExperimentPlan:
    """Copy of ``plan`` whose sampler always yields the zero pose."""
    return replace(plan, angle_scale=0.0, trans_scale=0.0)
