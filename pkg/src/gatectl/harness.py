"""Experiment orchestration: seeded sweeps over evolution time T,
per-run persistence, protocol audit, and architecture ablations.

Every run gets its own directory under ``<outdir>/runs`` holding a
``record.json``, a line-delimited ``series.jsonl`` (appended during
training for crash tolerance), and the best protocol or pulse as text.
Re-running the same spec and master seed rewrites every byte
identically except the wall_time fields.  Per-run seeds are derived
from the master seed by a counter-based split over (T index,
repetition), so adding repetitions never perturbs earlier runs.
"""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .agent import TrainConfig, train
from .quantum import (
    ControlTask,
    DEFAULT_STEPS,
    TASK_BUILDERS,
    fidelity,
    log_infidelity,
    make_task,
    propagate,
)

ALGORITHMS = ("rl", "grape", "de", "ga", "brute")
DEFAULT_T_GRID = tuple(round(0.1 * k, 1) for k in range(1, 13))

DEFAULT_PARAMS = {
    "grape": {"restarts": 20, "iterations": 400},
    "de": {"population_size": 40, "iterations": 200, "f_scale": 0.7,
           "crossover_rate": 0.9, "mode": "discrete"},
    "ga": {"population_size": 50, "generations": 300, "mutation_rate": None},
    "brute": {"budget": 2 ** 24},
    "rl": {},
}


@dataclass
class ExperimentSpec:
    """One sweep: algorithm x T_grid x repetitions on a single gate."""

    gate: str
    algorithm: str
    outdir: Path
    T_grid: tuple[float, ...] = DEFAULT_T_GRID
    steps: int | None = None
    repetitions: int = 1
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gate not in TASK_BUILDERS:
            raise ValueError(f"unknown gate {self.gate!r}; expected one of {sorted(TASK_BUILDERS)}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        self.T_grid = tuple(float(t) for t in self.T_grid)
        if not self.T_grid:
            raise ValueError("T_grid must be nonempty")
        if any(t <= 0 for t in self.T_grid):
            raise ValueError(f"T_grid entries must be positive, got {self.T_grid}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.steps is None:
            self.steps = DEFAULT_STEPS[self.gate]
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        self.outdir = Path(self.outdir)

    def resolved_params(self) -> dict:
        merged = dict(DEFAULT_PARAMS[self.algorithm])
        merged.update(self.params)
        return merged

    def spec_hash(self) -> str:
        payload = {"gate": self.gate, "algorithm": self.algorithm,
                   "T_grid": list(self.T_grid), "steps": self.steps,
                   "repetitions": self.repetitions, "seed": self.seed,
                   "params": _jsonable(self.resolved_params())}
        blob = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def derive_seed(master: int, *key: int) -> int:
    """Counter-split child seed, stable under added repetitions."""
    return int(np.random.SeedSequence(master, spawn_key=tuple(key)).generate_state(1)[0])


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    return value


# -- protocol files -------------------------------------------------------

def write_protocol_file(path, task: ControlTask, protocol) -> None:
    """Text protocol: one step per line as ``step action eps_1 .. eps_m``."""
    protocol = np.asarray(protocol, dtype=np.int64)
    lines = [f"# gate {task.name} T {task.total_time:g} N {task.steps}",
             "# columns: step action " +
             " ".join(f"eps{j + 1}" for j in range(task.n_controls))]
    for step, a in enumerate(protocol):
        eps = " ".join(f"{x:g}" for x in task.action_set[a])
        lines.append(f"{step} {a} {eps}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_protocol_file(path) -> np.ndarray:
    """Action indices from a protocol file; malformed lines name their number."""
    actions = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"{path}: line {lineno}: expected 'step action ...', got {raw!r}")
        try:
            actions.append(int(parts[1]))
        except ValueError:
            raise ValueError(
                f"{path}: line {lineno}: action column is not an integer: {raw!r}"
            ) from None
    return np.array(actions, dtype=np.int64)


def write_pulse_file(path, task: ControlTask, pulse) -> None:
    pulse = np.atleast_2d(np.asarray(pulse, dtype=np.float64))
    lines = [f"# gate {task.name} T {task.total_time:g} N {task.steps}",
             "# columns: step " + " ".join(f"eps{j + 1}" for j in range(task.n_controls))]
    for step, amps in enumerate(pulse):
        # float() first: numpy scalar repr would write "np.float64(..)"
        lines.append(f"{step} " + " ".join(f"{float(x)!r}" for x in amps))
    Path(path).write_text("\n".join(lines) + "\n")


def verify_protocol(gate: str, total_time: float, steps: int, path) -> dict:
    """Independent re-simulation of a protocol file; returns {"F": .., "L": ..}."""
    task = make_task(gate, total_time, steps)
    protocol = read_protocol_file(path)
    if len(protocol) != steps:
        raise ValueError(
            f"{path}: protocol has {len(protocol)} actions, expected N={steps}"
        )
    f = fidelity(propagate(task, protocol), task.target)
    return {"F": f, "L": log_infidelity(f)}


# -- single cells ---------------------------------------------------------

class _SeriesWriter:
    """Append-only JSON-lines stream, one record per line."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w")

    def __call__(self, record: dict) -> None:
        self._fh.write(json.dumps(_jsonable(record)) + "\n")

    def close(self):
        self._fh.close()


def _rl_config(spec_gate: str, steps: int, seed: int, params: dict) -> TrainConfig:
    return TrainConfig.for_gate(spec_gate, seed=seed, **params)


def run_cell(gate: str, algorithm: str, total_time: float, steps: int,
             seed: int, params: dict, run_dir: Path) -> dict:
    """Execute one (algorithm, T, repetition) cell and persist its outputs."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    task = make_task(gate, total_time, steps)
    series_path = run_dir / "series.jsonl"
    record = {
        "algorithm": algorithm, "gate": gate, "T": total_time, "N": steps,
        "seed": seed, "status": "ok", "best_F": None, "best_L": None,
        "best_protocol": None, "best_pulse": None, "iterations": None,
        "hyperparameters": _jsonable(params), "series_file": series_path.name,
        "protocol_file": None, "wall_time_seconds": None, "error": None,
    }
    writer = _SeriesWriter(series_path)
    start = time.perf_counter()
    try:
        if algorithm == "rl":
            cfg = _rl_config(gate, steps, seed, params)
            # audit trail: record what actually ran, not the raw overrides
            record["hyperparameters"] = _jsonable(asdict(cfg))
            report = train(task, cfg, episode_callback=writer,
                           checkpoint_path=run_dir / "checkpoint.npz")
            record["best_F"] = report.best_fidelity
            record["best_L"] = report.best_log_infidelity
            record["best_protocol"] = report.best_protocol.tolist()
            record["iterations"] = report.learn_events
            write_protocol_file(run_dir / "protocol.txt", task, report.best_protocol)
            record["protocol_file"] = "protocol.txt"
        elif algorithm == "grape":
            pulse, best_f = baselines.grape_best_of(
                task, restarts=params["restarts"], iterations=params["iterations"],
                seed=seed, callback=writer)
            record["best_F"] = best_f
            record["best_L"] = log_infidelity(best_f)
            record["best_pulse"] = pulse.tolist()
            record["iterations"] = params["iterations"]
            write_pulse_file(run_dir / "pulse.txt", task, pulse)
            record["protocol_file"] = "pulse.txt"
        elif algorithm == "de":
            result, best_f = baselines.de_optimize(
                task, population_size=params["population_size"],
                iterations=params["iterations"], f_scale=params["f_scale"],
                crossover_rate=params["crossover_rate"], seed=seed,
                mode=params.get("mode", "discrete"), callback=writer)
            record["best_F"] = best_f
            record["best_L"] = log_infidelity(best_f)
            record["iterations"] = params["iterations"]
            if params.get("mode", "discrete") == "discrete":
                record["best_protocol"] = result.tolist()
                write_protocol_file(run_dir / "protocol.txt", task, result)
                record["protocol_file"] = "protocol.txt"
            else:
                record["best_pulse"] = result.tolist()
                write_pulse_file(run_dir / "pulse.txt", task, result)
                record["protocol_file"] = "pulse.txt"
        elif algorithm == "ga":
            protocol, best_f = baselines.ga_optimize(
                task, population_size=params["population_size"],
                generations=params["generations"],
                mutation_rate=params["mutation_rate"], seed=seed,
                callback=writer)
            record["best_F"] = best_f
            record["best_L"] = log_infidelity(best_f)
            record["best_protocol"] = protocol.tolist()
            record["iterations"] = params["generations"]
            write_protocol_file(run_dir / "protocol.txt", task, protocol)
            record["protocol_file"] = "protocol.txt"
        elif algorithm == "brute":
            protocol, best_f = baselines.brute_force(task, budget=params["budget"])
            record["best_F"] = best_f
            record["best_L"] = log_infidelity(best_f)
            record["best_protocol"] = protocol.tolist()
            record["iterations"] = task.n_actions ** task.steps
            write_protocol_file(run_dir / "protocol.txt", task, protocol)
            record["protocol_file"] = "protocol.txt"
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
    except Exception as exc:  # cell failures are recorded, the sweep continues
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
    finally:
        writer.close()
    record["wall_time_seconds"] = time.perf_counter() - start
    (run_dir / "record.json").write_text(json.dumps(record, indent=2) + "\n")
    return record


def _cell_job(payload: dict) -> dict:
    return run_cell(**payload)


def run(spec: ExperimentSpec, workers: int = 1) -> list[dict]:
    """Execute a full sweep; returns records sorted by (T, repetition).

    Cells are independent; with ``workers > 1`` they run in separate
    processes.  Every record is audited against an independent
    re-simulation of its reported protocol or pulse before returning.
    """
    spec.outdir.mkdir(parents=True, exist_ok=True)
    params = spec.resolved_params()
    jobs = []
    for ti, total_time in enumerate(spec.T_grid):
        for rep in range(spec.repetitions):
            run_dir = spec.outdir / "runs" / f"{spec.algorithm}_T{total_time:g}_rep{rep}"
            jobs.append({
                "gate": spec.gate, "algorithm": spec.algorithm,
                "total_time": total_time, "steps": spec.steps,
                "seed": derive_seed(spec.seed, ti, rep), "params": params,
                "run_dir": run_dir,
            })
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_cell_job, jobs))
    else:
        records = [_cell_job(job) for job in jobs]

    spec_hash = spec.spec_hash()
    for job, record in zip(jobs, records):
        record["spec_hash"] = spec_hash
        record["repetition"] = int(str(job["run_dir"]).rsplit("_rep", 1)[1])
    records.sort(key=lambda r: (r["T"], r["repetition"]))
    with open(spec.outdir / "records.jsonl", "w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    audit_records(records)
    return records


def audit_records(records: list[dict], tol: float = 1e-10) -> None:
    """Re-derive every persisted best_L from its protocol or pulse."""
    for record in records:
        if record["status"] != "ok":
            continue
        task = make_task(record["gate"], record["T"], record["N"])
        if record.get("best_protocol") is not None:
            u = propagate(task, record["best_protocol"])
        elif record.get("best_pulse") is not None:
            u = baselines.propagate_pulse(task, np.array(record["best_pulse"]))
        else:
            continue
        ell = log_infidelity(fidelity(u, task.target))
        if abs(ell - record["best_L"]) > tol:
            raise RuntimeError(
                f"audit failure: recorded best_L={record['best_L']} but "
                f"re-simulation gives {ell} for {record['algorithm']} at T={record['T']}"
            )


def load_records(outdir) -> list[dict]:
    path = Path(outdir) / "records.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"no records.jsonl under {outdir}")
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


# -- architecture ablation -------------------------------------------------

def parse_architecture(text: str) -> dict:
    """Parse "E+HxW" (encoder layers + head layers, width W), e.g. "3+4x600"."""
    try:
        layers, width = text.lower().split("x")
        enc, heads = layers.split("+")
        spec = {"encoder_layers": int(enc), "head_layers": int(heads),
                "width": int(width)}
    except ValueError:
        raise ValueError(f"bad architecture {text!r}; expected e.g. '3+4x600'") from None
    if min(spec.values()) < 1:
        raise ValueError(f"architecture values must be >= 1, got {text!r}")
    return spec


def architecture_label(arch: dict) -> str:
    return f"{{{arch['encoder_layers']}+{arch['head_layers']}, n={arch['width']}}}"


def ablation(gate: str, total_time: float, steps: int, architectures: list[str],
             outdir, seed: int = 0, **train_params) -> list[dict]:
    """Train one agent per architecture under otherwise identical settings.

    Emits one curve file per architecture (shared episode axis) plus a
    metadata record carrying its "{enc+head, n=width}" label.
    """
    outdir = Path(outdir)
    task = make_task(gate, total_time, steps)
    results = []
    for text in architectures:
        arch = parse_architecture(text)
        run_dir = outdir / "ablation" / text.replace("+", "p")
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg = TrainConfig.for_gate(
            gate, seed=seed,
            encoder_widths=(arch["width"],) * arch["encoder_layers"],
            head_widths=(arch["width"],) * arch["head_layers"],
            **train_params)
        writer = _SeriesWriter(run_dir / "series.jsonl")
        try:
            report = train(task, cfg, episode_callback=writer)
        finally:
            writer.close()
        meta = {"architecture": architecture_label(arch), "gate": gate,
                "T": total_time, "N": steps, "seed": seed,
                "episodes": cfg.episodes, "best_F": report.best_fidelity,
                "best_L": report.best_log_infidelity,
                "series_file": "series.jsonl"}
        (run_dir / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
        results.append(meta)
    return results
