"""Sweep execution, ensemble averaging, persistence, and oracle validation.

A sweep runs an ensemble of seeded circuit instances for every (lattice,
noise rate) grid point, records per-depth observables at a stride, and
aggregates means and standard errors over instances.  Both peak conventions
are recorded: the maximum of the instance-averaged curve (the primary
reported value) and the mean of per-instance maxima.

Everything is deterministic given the master seed: per-instance circuit
seeds are derived by a splittable scheme keyed on (grid index, instance
index), results are folded in instance order regardless of worker count,
and raw CSV bytes are identical for any number of workers.

Instances whose trace falls below the configured floor are flagged and
excluded from the means but still written out and counted; a hard worker
failure marks its grid point failed while the rest of the sweep proceeds.
"""

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .circuits import LatticeSpec, build_circuit
from .engine import TraceFloorError, run_circuit
from .observables import (
    DepthRecord,
    depth_record,
    record_csv_header,
    record_csv_row,
)
from .oracle import clamp_psd, evolve_exact, fidelity

__all__ = [
    "ConfigError",
    "SweepConfig",
    "GridResult",
    "SweepResult",
    "derive_instance_seed",
    "run_instance",
    "run_sweep",
    "load_sweep_result",
    "extract_s_max",
    "SMaxRow",
    "validate_against_oracle",
    "ValidationRow",
    "ValidationReport",
]

SWEEP_FORMAT = "dmps-sweep/1"
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """A sweep-config violation, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SweepConfig:
    """Grid of (lattice, noise rate) points plus execution parameters."""

    lattices: tuple
    p_values: tuple
    chi: int
    depth_max: int
    master_seed: int
    instances: int = 40
    observe_every: int = 2
    trace_floor: float = 0.5
    workers: int = 1
    blas_threads: int = 1
    output_dir: str | None = None
    schema_version: int = SCHEMA_VERSION

    def grid(self):
        return [(lat, p) for lat in self.lattices for p in self.p_values]

    def observed_depths(self):
        return [d for d in range(self.depth_max + 1)
                if d % self.observe_every == 0 or d == self.depth_max]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "lattices": [[lat.L1, lat.L2] for lat in self.lattices],
            "p_values": list(self.p_values),
            "chi": self.chi,
            "depth_max": self.depth_max,
            "master_seed": self.master_seed,
            "instances": self.instances,
            "observe_every": self.observe_every,
            "trace_floor": self.trace_floor,
            "workers": self.workers,
            "blas_threads": self.blas_threads,
            "output_dir": self.output_dir,
        }


_CONFIG_FIELDS = {
    "schema_version", "lattices", "p_values", "chi", "depth_max",
    "master_seed", "instances", "observe_every", "trace_floor", "workers",
    "blas_threads", "output_dir",
}
_REQUIRED_FIELDS = ("schema_version", "lattices", "p_values", "chi",
                    "depth_max", "master_seed")


def _require_int(doc, key, minimum):
    v = doc[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(key, f"must be an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {v}")
    return v


def config_from_dict(doc: dict) -> SweepConfig:
    """Validate a parsed config document; errors carry dotted field paths."""
    for key in doc:
        if key not in _CONFIG_FIELDS:
            raise ConfigError(key, "unknown field")
    for key in _REQUIRED_FIELDS:
        if key not in doc:
            raise ConfigError(key, "missing required field")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError("schema_version",
                          f"expected {SCHEMA_VERSION}, got {doc['schema_version']!r}")

    if not isinstance(doc["lattices"], list) or not doc["lattices"]:
        raise ConfigError("lattices", "must be a non-empty list of [L1, L2] pairs")
    lattices = []
    for i, pair in enumerate(doc["lattices"]):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError(f"lattices[{i}]", f"must be an [L1, L2] pair, got {pair!r}")
        for j, side in enumerate(pair):
            if not isinstance(side, int) or isinstance(side, bool) or side < 2:
                raise ConfigError(f"lattices[{i}][{j}]",
                                  f"must be an integer >= 2, got {side!r}")
        if pair[0] > pair[1]:
            raise ConfigError(f"lattices[{i}]", f"requires L1 <= L2, got {pair}")
        lattices.append(LatticeSpec(pair[0], pair[1]))

    if not isinstance(doc["p_values"], list) or not doc["p_values"]:
        raise ConfigError("p_values", "must be a non-empty list of noise rates")
    for i, p in enumerate(doc["p_values"]):
        if not isinstance(p, (int, float)) or isinstance(p, bool) or not 0 < p <= 1:
            raise ConfigError(f"p_values[{i}]", f"must be a number in (0, 1], got {p!r}")

    out_dir = doc.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output_dir", f"must be a string or null, got {out_dir!r}")
    floor = doc.get("trace_floor", 0.5)
    if not isinstance(floor, (int, float)) or isinstance(floor, bool) or not 0 <= floor < 1:
        raise ConfigError("trace_floor", f"must be a number in [0, 1), got {floor!r}")

    kwargs = {}
    for key, minimum in (("instances", 1), ("observe_every", 1),
                         ("workers", 1), ("blas_threads", 1)):
        if key in doc:
            kwargs[key] = _require_int(doc, key, minimum)
    return SweepConfig(
        lattices=tuple(lattices),
        p_values=tuple(float(p) for p in doc["p_values"]),
        chi=_require_int(doc, "chi", 1),
        depth_max=_require_int(doc, "depth_max", 1),
        master_seed=_require_int(doc, "master_seed", 0),
        trace_floor=float(floor),
        output_dir=out_dir,
        **kwargs,
    )


def load_config(path) -> SweepConfig:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be an object")
    return config_from_dict(doc)


def derive_instance_seed(master_seed: int, grid_index: int, instance_index: int) -> int:
    """Per-instance circuit seed, independent of execution order."""
    ss = np.random.SeedSequence(entropy=master_seed,
                                spawn_key=(0, grid_index, instance_index))
    return int(ss.generate_state(1, np.uint64)[0])


# -- single-instance execution ---------------------------------------------------


def run_instance(lattice: LatticeSpec, p: float, chi: int, depth: int, seed: int, *,
                 observe_every: int = 1, trace_floor: float = 0.5,
                 blas_threads: int = 1):
    """Run one seeded instance and return (records, final state or None, flag).

    ``flag`` is None on success or the trace-floor message when aborted;
    partial records collected before the abort are kept.
    """
    instance = build_circuit(lattice, depth, seed)
    records = []

    def observer(d, state):
        records.append(depth_record(state, d))

    with threadpool_limits(limits=blas_threads):
        try:
            state, _ = run_circuit(instance, p, chi, observe_every=observe_every,
                                   observer=observer, trace_floor=trace_floor)
            return records, state, None
        except TraceFloorError as exc:
            return records, None, str(exc)


def _sweep_job(args):
    """Worker entry point: one (grid point, instance) cell of a sweep."""
    gi, ii, L1, L2, p, chi, depth, seed, observe_every, trace_floor, blas_threads = args
    try:
        records, _, flag = run_instance(
            LatticeSpec(L1, L2), p, chi, depth, seed,
            observe_every=observe_every, trace_floor=trace_floor,
            blas_threads=blas_threads,
        )
        status = "flagged" if flag else "ok"
        return gi, ii, status, records, flag
    except Exception as exc:  # hard failure: surfaces as a failed grid point
        return gi, ii, "error", [], f"{type(exc).__name__}: {exc}"


# -- aggregation --------------------------------------------------------------------


@dataclass
class GridResult:
    """Ensemble results for one (lattice, p) grid point."""

    lattice: LatticeSpec
    p: float
    run_id: str
    depths: list
    instance_seeds: list
    records: list  # per instance: list[DepthRecord] (possibly partial)
    flagged: dict = field(default_factory=dict)  # instance index -> reason
    failed: str | None = None
    # aggregates over kept (unflagged) instances, aligned with ``depths``
    trace_mean: np.ndarray | None = None
    trace_se: np.ndarray | None = None
    purity_mean: np.ndarray | None = None
    purity_se: np.ndarray | None = None
    s2_mean: np.ndarray | None = None
    s2_se: np.ndarray | None = None
    s_max_mean: np.ndarray | None = None
    s_max_se: np.ndarray | None = None
    n_kept: int = 0
    s_max_of_mean_curve: float | None = None
    t_peak: int | None = None
    peak_bracketed: bool | None = None
    mean_of_instance_max: float | None = None

    def kept_indices(self):
        return [i for i in range(len(self.records)) if i not in self.flagged]


def _mean_se(stack: np.ndarray):
    mean = stack.mean(axis=0)
    if stack.shape[0] > 1:
        se = stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
    else:
        se = np.zeros_like(mean)
    return mean, se


def _aggregate(grid: GridResult) -> None:
    kept = grid.kept_indices()
    if grid.failed or not kept:
        if not grid.failed:
            grid.failed = "all instances flagged"
        return
    fields = {
        "trace": lambda r: r.trace,
        "purity": lambda r: r.purity,
        "s2": lambda r: r.second_renyi,
        "s_max": lambda r: r.s_max_over_cuts,
    }
    for name, get in fields.items():
        stack = np.array([[get(r) for r in grid.records[i]] for i in kept])
        mean, se = _mean_se(stack)
        setattr(grid, f"{name}_mean", mean)
        setattr(grid, f"{name}_se", se)
    grid.n_kept = len(kept)
    peak = int(np.argmax(grid.s_max_mean))  # ties resolve to the smaller depth
    grid.s_max_of_mean_curve = float(grid.s_max_mean[peak])
    grid.t_peak = int(grid.depths[peak])
    grid.peak_bracketed = peak != len(grid.depths) - 1
    grid.mean_of_instance_max = float(
        np.mean([max(r.s_max_over_cuts for r in grid.records[i]) for i in kept])
    )


@dataclass
class SweepResult:
    config: SweepConfig
    grids: list


def _p_token(p: float) -> str:
    return repr(float(p)).replace(".", "p")


def _grid_id(lattice: LatticeSpec, p: float) -> str:
    return f"{lattice.L1}x{lattice.L2}_p{_p_token(p)}"


def _run_id(config: SweepConfig, lattice: LatticeSpec, p: float) -> str:
    return (f"{_grid_id(lattice, p)}_chi{config.chi}_d{config.depth_max}"
            f"_i{config.instances}_s{config.master_seed}")


def run_sweep(config: SweepConfig, output_dir=None) -> SweepResult:
    """Execute the full grid; optionally persist CSVs and a manifest.

    Deterministic for a fixed config and master seed: results are folded by
    (grid index, instance index) no matter how many workers execute them.
    """
    t_start = time.monotonic()
    grid_points = config.grid()
    grids = []
    for gi, (lattice, p) in enumerate(grid_points):
        grids.append(GridResult(
            lattice=lattice,
            p=p,
            run_id=_run_id(config, lattice, p),
            depths=config.observed_depths(),
            instance_seeds=[derive_instance_seed(config.master_seed, gi, ii)
                            for ii in range(config.instances)],
            records=[[] for _ in range(config.instances)],
        ))

    jobs = [
        (gi, ii, grids[gi].lattice.L1, grids[gi].lattice.L2, grids[gi].p,
         config.chi, config.depth_max, grids[gi].instance_seeds[ii],
         config.observe_every, config.trace_floor, config.blas_threads)
        for gi in range(len(grid_points))
        for ii in range(config.instances)
    ]

    if config.workers == 1:
        outcomes = [_sweep_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers,
                                 mp_context=get_context("spawn")) as pool:
            outcomes = list(pool.map(_sweep_job, jobs))

    for gi, ii, status, records, message in sorted(outcomes, key=lambda o: (o[0], o[1])):
        grid = grids[gi]
        grid.records[ii] = records
        if status == "flagged":
            grid.flagged[ii] = message
        elif status == "error":
            grid.failed = f"instance {ii}: {message}"

    for grid in grids:
        _aggregate(grid)

    result = SweepResult(config=config, grids=grids)
    target = output_dir if output_dir is not None else config.output_dir
    if target is not None:
        write_sweep_result(result, target, wall_time_s=time.monotonic() - t_start)
    return result


# -- persistence -------------------------------------------------------------------


def _write_raw_csv(grid: GridResult, config: SweepConfig, path: Path) -> None:
    lines = [record_csv_header(grid.lattice.L2)]
    for ii, recs in enumerate(grid.records):
        for rec in recs:
            lines.append(record_csv_row(rec, grid.run_id, grid.instance_seeds[ii],
                                        grid.lattice, grid.p, config.chi))
    path.write_text("\n".join(lines) + "\n")


def _write_agg_csv(grid: GridResult, path: Path) -> None:
    lines = ["depth,n_kept,trace_mean,trace_se,purity_mean,purity_se,"
             "s2_mean,s2_se,s_max_mean,s_max_se"]
    for i, d in enumerate(grid.depths):
        vals = [grid.trace_mean[i], grid.trace_se[i], grid.purity_mean[i],
                grid.purity_se[i], grid.s2_mean[i], grid.s2_se[i],
                grid.s_max_mean[i], grid.s_max_se[i]]
        lines.append(f"{d},{grid.n_kept}," + ",".join(repr(float(v)) for v in vals))
    path.write_text("\n".join(lines) + "\n")


def _write_smax_csv(result: SweepResult, path: Path) -> None:
    lines = ["run_id,L1,L2,p,chi,s_max_mean_curve,t_peak,peak_bracketed,"
             "mean_of_instance_max,s_max_se_at_peak"]
    for grid in result.grids:
        if grid.failed:
            continue
        peak_i = grid.depths.index(grid.t_peak)
        lines.append(
            f"{grid.run_id},{grid.lattice.L1},{grid.lattice.L2},"
            f"{repr(float(grid.p))},{result.config.chi},"
            f"{repr(grid.s_max_of_mean_curve)},{grid.t_peak},"
            f"{int(grid.peak_bracketed)},{repr(grid.mean_of_instance_max)},"
            f"{repr(float(grid.s_max_se[peak_i]))}"
        )
    path.write_text("\n".join(lines) + "\n")


def write_sweep_result(result: SweepResult, output_dir, wall_time_s: float = 0.0) -> None:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": SWEEP_FORMAT,
        "config": result.config.to_json_dict(),
        "wall_time_s": wall_time_s,
        "grids": [],
    }
    for grid in result.grids:
        gid = _grid_id(grid.lattice, grid.p)
        raw = f"raw_{gid}.csv"
        agg = f"agg_{gid}.csv"
        _write_raw_csv(grid, result.config, out / raw)
        if not grid.failed:
            _write_agg_csv(grid, out / agg)
        manifest["grids"].append({
            "grid_id": gid,
            "run_id": grid.run_id,
            "L1": grid.lattice.L1,
            "L2": grid.lattice.L2,
            "p": grid.p,
            "instance_seeds": grid.instance_seeds,
            "flagged": {str(k): v for k, v in grid.flagged.items()},
            "failed": grid.failed,
            "raw_csv": raw,
            "agg_csv": agg if not grid.failed else None,
        })
    _write_smax_csv(result, out / "smax.csv")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def load_sweep_result(output_dir) -> SweepResult:
    """Rehydrate a persisted sweep (records, flags, aggregates) from disk."""
    out = Path(output_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    if manifest.get("format") != SWEEP_FORMAT:
        raise ValueError(f"unknown sweep format {manifest.get('format')!r}")
    config = config_from_dict(manifest["config"])
    grids = []
    for entry in manifest["grids"]:
        lattice = LatticeSpec(entry["L1"], entry["L2"])
        grid = GridResult(
            lattice=lattice,
            p=entry["p"],
            run_id=entry["run_id"],
            depths=config.observed_depths(),
            instance_seeds=list(entry["instance_seeds"]),
            records=[[] for _ in entry["instance_seeds"]],
            flagged={int(k): v for k, v in entry["flagged"].items()},
            failed=entry["failed"],
        )
        seed_to_idx = {s: i for i, s in enumerate(grid.instance_seeds)}
        lines = (out / entry["raw_csv"]).read_text().splitlines()
        n_cuts = lattice.L2 - 1
        for line in lines[1:]:
            parts = line.split(",")
            seed = int(parts[1])
            rec = DepthRecord(
                depth=int(parts[6]),
                trace=float(parts[7]),
                purity=float(parts[8]),
                second_renyi=float(parts[9]),
                s_max_over_cuts=float(parts[10]),
                argmax_cut=int(parts[11]),
                ee_per_cut=tuple(float(x) for x in parts[12:12 + n_cuts]),
                max_bond=int(parts[12 + n_cuts]),
                cum_discarded=float(parts[13 + n_cuts]),
            )
            grid.records[seed_to_idx[seed]].append(rec)
        _aggregate(grid)
        grids.append(grid)
    return SweepResult(config=config, grids=grids)


# -- peak extraction ------------------------------------------------------------------


@dataclass(frozen=True)
class SMaxRow:
    lattice: LatticeSpec
    p: float
    s_max: float
    t_peak: int
    peak_bracketed: bool
    mean_of_instance_max: float


def extract_s_max(result: SweepResult):
    """Peak of each instance-averaged curve; unbracketed peaks are flagged."""
    rows = []
    for grid in result.grids:
        if grid.failed:
            continue
        rows.append(SMaxRow(
            lattice=grid.lattice,
            p=grid.p,
            s_max=grid.s_max_of_mean_curve,
            t_peak=grid.t_peak,
            peak_bracketed=grid.peak_bracketed,
            mean_of_instance_max=grid.mean_of_instance_max,
        ))
    return rows


# -- oracle validation -----------------------------------------------------------------


@dataclass(frozen=True)
class ValidationRow:
    chi: int
    trace: float
    fidelity: float


@dataclass(frozen=True)
class ValidationReport:
    lattice: LatticeSpec
    p: float
    depth: int
    seed: int
    rows: tuple


def validate_against_oracle(lattice: LatticeSpec, p: float, depth: int, chis,
                            seed: int) -> ValidationReport:
    """Engine-vs-exact trace and fidelity as a function of bond dimension.

    Runs one seeded circuit through the chain engine at each bond cap,
    reconstructs the dense matrix, and compares with the exact Kraus
    evolution.  The reconstructed matrix is projected onto the PSD cone
    before the fidelity (strong truncation can leave small negative
    eigenvalues); the reported trace is the raw chain trace.  The
    trace-floor abort is disabled: low-chi points legitimately lose trace.
    """
    if lattice.n_qubits > 9:
        raise ValueError(f"validation capped at 9 qubits, got {lattice.n_qubits}")
    instance = build_circuit(lattice, depth, seed)
    sigma = evolve_exact(instance, p)
    rows = []
    for chi in chis:
        state, _ = run_circuit(instance, p, chi, trace_floor=0.0)
        rho = state.to_dense_matrix(max_qubits=9)
        rows.append(ValidationRow(
            chi=int(chi),
            trace=state.trace(),
            fidelity=fidelity(clamp_psd(rho), sigma.matrix),
        ))
    return ValidationReport(lattice=lattice, p=p, depth=depth, seed=seed,
                            rows=tuple(rows))
