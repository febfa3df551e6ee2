"""Reference solutions, error norms, convergence/efficiency studies and order fits."""

from __future__ import annotations

import csv
import hashlib
import logging
import os
import platform
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .compositions import Scheme, build_order, integrate, step_count
from .problems import LINEAR_POTENTIAL, Problem

__all__ = [
    "StudyRecord",
    "StudyTable",
    "OrderFit",
    "error_l2",
    "gray_scott_error",
    "problem_error",
    "roundoff_floor",
    "default_cache_dir",
    "reference_solution",
    "reference_uncertainty",
    "convergence_study",
    "estimate_order",
    "pre_plateau_records",
    "write_study_csv",
    "read_study_csv",
    "machine_metadata",
    "write_snapshot_csv",
    "read_snapshot_csv",
    "write_terms_csv",
    "read_terms_csv",
]

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
FLOOR_FACTOR = 10.0
CSV_HEADER = ["scheme", "order", "dt", "error", "wall_seconds", "flags"]


@dataclass(frozen=True)
class StudyRecord:
    scheme: str
    order: int
    dt: float
    error: float
    wall_seconds: float
    flags: str = ""

    @property
    def failed(self) -> bool:
        return self.flags.startswith("failed")

    @property
    def in_floor(self) -> bool:
        return "floor" in self.flags.split(";")


@dataclass
class StudyTable:
    records: list
    problem_name: str = ""
    reference_dt: float = float("nan")
    floor: float = 0.0

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: (r.scheme, -r.dt))

    def schemes(self) -> list:
        return sorted({r.scheme for r in self.records})

    def for_scheme(self, scheme: str) -> list:
        return [r for r in self.records if r.scheme == scheme]


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    residual: float
    n_points: int
    dt_range: tuple


def _check_same_shape(a, b):
    if np.shape(a) != np.shape(b):
        raise ValueError(f"grid mismatch: shapes {np.shape(a)} and {np.shape(b)}")


def error_l2(candidate, reference, dx: float) -> float:
    """``sqrt(sum |u_ref - u|^2) * dx``, with ``dx`` outside the root."""
    _check_same_shape(candidate, reference)
    diff = np.asarray(candidate) - np.asarray(reference)
    return float(np.sqrt(np.sum(np.abs(diff) ** 2)) * dx)


def gray_scott_error(candidate, reference, dx: Optional[float] = None) -> float:
    """``||u_ref - u||_2 + ||v_ref - v||_2``.

    Without ``dx`` the per-species norm is the plain Euclidean norm; with it,
    each species uses :func:`error_l2`.
    """
    _check_same_shape(candidate, reference)
    scale = 1.0 if dx is None else dx
    return sum(error_l2(c, r, scale) for c, r in zip(candidate, reference))


def problem_error(problem: Problem, candidate, reference, norm: str = "caption") -> float:
    """Error in the norm each study reports.

    ``norm="caption"``: linear-potential runs use the ``dx``-weighted l2 norm,
    Gray-Scott runs sum plain per-species 2-norms. ``norm="dx"`` weights the
    Gray-Scott species norms by ``dx`` too.
    """
    if norm not in ("caption", "dx"):
        raise ValueError(f"unknown norm variant {norm!r}")
    if problem.kind == LINEAR_POTENTIAL:
        return error_l2(candidate, reference, problem.grid.dx)
    return gray_scott_error(candidate, reference, None if norm == "caption" else problem.grid.dx)


def roundoff_floor(reference, n: int) -> float:
    """``eps * sqrt(n) * scale`` with ``scale`` the summed per-species sup norm."""
    ref = np.atleast_2d(np.asarray(reference))
    return float(EPS * np.sqrt(n) * sum(np.max(np.abs(r)) for r in ref))


def default_cache_dir() -> Path:
    env = os.environ.get("RDSPLIT_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "rdsplit"


def _cache_key(problem: Problem, t_final, scheme: Optional[Scheme], dt, method) -> str:
    parts = [problem.cache_key(), f"t_final={t_final!r}", f"method={method}"]
    if scheme is not None:
        parts.append(f"scheme={scheme.name}:" + ";".join(f"{a!r},{b!r}" for a, b in scheme.stages))
        parts.append(f"dt={dt!r}")
    return "\n".join(parts)


def _load_cached(base: Path, key_hash: str):
    meta, data = base.with_suffix(".txt"), base.with_suffix(".bin")
    if not (meta.exists() and data.exists()):
        return None
    fields = dict(line.split(" ", 1) for line in meta.read_text().splitlines() if " " in line)
    raw = data.read_bytes()
    if fields.get("keyhash") != key_hash or fields.get("sha256") != hashlib.sha256(raw).hexdigest():
        log.warning("reference cache %s failed its hash check; recomputing", base)
        return None
    shape = tuple(int(s) for s in fields["shape"].split(",") if s)
    return np.frombuffer(raw, dtype="<c16").reshape(shape).copy()


def _store_cached(base: Path, key: str, key_hash: str, values):
    base.parent.mkdir(parents=True, exist_ok=True)
    raw = np.ascontiguousarray(values, dtype="<c16").tobytes()
    meta = (f"keyhash {key_hash}\nsha256 {hashlib.sha256(raw).hexdigest()}\n"
            f"shape {','.join(map(str, np.shape(values)))}\n"
            + "".join(f"key {line}\n" for line in key.splitlines()))
    for suffix, payload, mode in ((".bin", raw, "wb"), (".txt", meta, "w")):
        tmp = base.with_suffix(suffix + ".tmp")
        with open(tmp, mode) as fh:
            fh.write(payload)
        os.replace(tmp, base.with_suffix(suffix))


def _dense_reference(problem: Problem, t_final: float):
    from scipy.linalg import expm

    from .erroranalysis import dense_operator

    if problem.kind != LINEAR_POTENTIAL:
        raise ValueError("the matrix-exponential reference needs a linear problem")
    op = dense_operator(problem.grid, problem.params.D, problem.potential_values)
    return expm(t_final * op) @ problem.initial_state()


def reference_solution(problem: Problem, t_final: Optional[float] = None, dt: Optional[float] = None,
                       scheme: Optional[Scheme] = None, method: Optional[str] = None,
                       cache_dir=None, use_cache: bool = True):
    """Reference state at ``t_final``.

    ``method`` defaults to the problem's own. ``method="composition"``
    integrates with ``scheme`` (default: order 8) at ``dt`` (default: the
    problem's reference step). ``method="expm"`` applies
    the dense matrix exponential of the semi-discrete operator (linear
    problems only). Results are cached on disk as raw little-endian complex
    doubles with a text sidecar holding the key and content hashes.
    """
    t_final = problem.t_final if t_final is None else t_final
    method = method or problem.reference_method
    if method == "composition":
        scheme = build_order(8) if scheme is None else scheme
        dt = problem.reference_dt if dt is None else dt
        step_count(dt, t_final)
    elif method == "expm":
        scheme = dt = None
    else:
        raise ValueError(f"unknown reference method {method!r}")

    key = _cache_key(problem, t_final, scheme, dt, method)
    key_hash = hashlib.sha256(key.encode()).hexdigest()
    base = Path(cache_dir or default_cache_dir()) / f"ref-{problem.name}-{key_hash[:20]}"
    if use_cache:
        cached = _load_cached(base, key_hash)
        if cached is not None:
            return cached

    start = time.perf_counter()
    if method == "expm":
        ref = _dense_reference(problem, t_final)
    else:
        ref = integrate(scheme, None, problem, dt, t_final)
    log.info("reference for %s (%s) took %.1f s", problem.name, method, time.perf_counter() - start)
    ref = np.asarray(ref, dtype=complex)
    if use_cache:
        _store_cached(base, key, key_hash, ref)
    return ref


def reference_uncertainty(problem: Problem, t_final: Optional[float] = None, dt: Optional[float] = None,
                          scheme: Optional[Scheme] = None, norm: str = "caption", **kwargs) -> float:
    """Distance between the composition reference at ``dt`` and at ``2 dt``.

    Errors measured against the reference are not trustworthy below this.
    A matrix-exponential reference has no such term and returns 0.
    """
    method = kwargs.pop("method", None) or problem.reference_method
    if method == "expm":
        return 0.0
    dt = problem.reference_dt if dt is None else dt
    ref = reference_solution(problem, t_final, dt, scheme, "composition", **kwargs)
    coarse = reference_solution(problem, t_final, 2 * dt, scheme, "composition", **kwargs)
    return problem_error(problem, coarse, ref, norm)


def _run_cell(problem, scheme, dt, t_final, reference, repeats, norm):
    try:
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            state = integrate(scheme, None, problem, dt, t_final)
            times.append(time.perf_counter() - start)
        err = problem_error(problem, state, reference, norm)
        return StudyRecord(scheme.name, scheme.nominal_order, dt, err, statistics.median(times))
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        msg = " ".join(str(exc).split())
        return StudyRecord(scheme.name, scheme.nominal_order, dt, float("nan"), float("nan"),
                           f"failed: {msg}")


def convergence_study(problem: Problem, schemes: Sequence[Scheme], dt_grid: Sequence[float],
                      t_final: Optional[float] = None, reference=None, repeats: int = 1,
                      jobs: int = 1, norm: str = "caption",
                      uncertainty: float = 0.0) -> StudyTable:
    """Error and wall-clock time of every (scheme, dt) cell.

    Timing covers only the ``integrate`` call (median over ``repeats``).
    Cells that raise are kept as failed records. ``jobs > 1`` spreads cells
    over processes; only use it when the timings do not matter.

    Records below ten times ``max(round-off floor, uncertainty)`` are
    flagged ``floor``; pass :func:`reference_uncertainty` as ``uncertainty``.
    """
    t_final = problem.t_final if t_final is None else t_final
    dt_grid = [float(dt) for dt in dt_grid]
    if any(b >= a for a, b in zip(dt_grid, dt_grid[1:])):
        raise ValueError("dt grid must be strictly decreasing")
    for dt in dt_grid:
        step_count(dt, t_final)
    if reference is None:
        reference = reference_solution(problem, t_final)
    reference = np.asarray(reference)

    cells = [(s, dt) for s in schemes for dt in dt_grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell, problem, s, dt, t_final, reference, repeats, norm)
                       for s, dt in cells]
            records = [f.result() for f in futures]
    else:
        records = [_run_cell(problem, s, dt, t_final, reference, repeats, norm) for s, dt in cells]

    floor = max(roundoff_floor(reference, problem.grid.n), uncertainty)
    records = [_flag_floor(r, floor) for r in records]
    return StudyTable(records, problem.name, problem.reference_dt or float("nan"), floor)


def _flag_floor(record: StudyRecord, floor: float) -> StudyRecord:
    if record.failed or not record.error < FLOOR_FACTOR * floor:
        return record
    flags = ";".join(f for f in (record.flags, "floor") if f)
    return StudyRecord(record.scheme, record.order, record.dt, record.error,
                       record.wall_seconds, flags)


def _usable(records, floor):
    out = []
    for r in records:
        if r.failed or r.in_floor or not np.isfinite(r.error):
            continue
        if floor and r.error < FLOOR_FACTOR * floor:
            continue
        out.append(r)
    return out


def estimate_order(table: StudyTable, scheme: str, window=None, floor: Optional[float] = None) -> OrderFit:
    """Least-squares slope of log(error) against log(dt).

    Records outside ``window = (dt_min, dt_max)``, failed records and records
    below ten times the round-off floor are dropped first; at least two must
    remain.
    """
    floor = table.floor if floor is None else floor
    records = table.for_scheme(scheme)
    if window is not None:
        lo, hi = min(window), max(window)
        records = [r for r in records if lo * (1 - 1e-12) <= r.dt <= hi * (1 + 1e-12)]
    if not records:
        raise ValueError(f"no records for {scheme!r} in window {window}")
    usable = _usable(records, floor)
    if len(usable) < 2:
        raise ValueError(f"window {window} for {scheme!r} lies in the round-off floor "
                         f"({len(usable)} usable of {len(records)} records)")
    x = np.log([r.dt for r in usable])
    y = np.log([r.error for r in usable])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return OrderFit(float(slope), float(intercept), residual, len(usable),
                    (min(r.dt for r in usable), max(r.dt for r in usable)))


def pre_plateau_records(table: StudyTable, scheme: str, floor: Optional[float] = None) -> list:
    """Records (coarse to fine) before the error stops falling.

    The run ends at the first floor-flagged record or the first halving
    step whose local slope drops below 1.
    """
    floor = table.floor if floor is None else floor
    out = []
    for r in table.for_scheme(scheme):
        if not _usable([r], floor):
            if out:
                break
            continue
        if out:
            prev = out[-1]
            local = np.log(prev.error / r.error) / np.log(prev.dt / r.dt)
            if local < 1.0:
                break
        out.append(r)
    return out


def _fmt(x) -> str:
    return repr(float(x))


def write_study_csv(table: StudyTable, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in table.records:
            w.writerow([r.scheme, r.order, _fmt(r.dt), _fmt(r.error), _fmt(r.wall_seconds), r.flags])
    os.replace(tmp, path)


def read_study_csv(path, problem_name: str = "", floor: float = 0.0) -> StudyTable:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(f"{path}: header must be {','.join(CSV_HEADER)}")
    records = [StudyRecord(s, int(o), float(dt), float(e), float(w), flags)
               for s, o, dt, e, w, flags in rows[1:]]
    return StudyTable(records, problem_name, float("nan"), floor)


def machine_metadata() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
        "processor": platform.processor() or "unknown",
        "system": platform.platform(),
        "cpus": os.cpu_count(),
    }


def _atomic_rows(path, rows):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    os.replace(tmp, path)


def write_snapshot_csv(path, times, x, states) -> None:
    """Space-time matrix of one species: header ``t,x_0,...``, one row per snapshot."""
    states = np.real(np.asarray(states))
    if states.shape != (len(times), len(x)):
        raise ValueError(f"snapshot shape {states.shape} does not match {len(times)} times x {len(x)} nodes")
    rows = [["t"] + [_fmt(xi) for xi in x]]
    rows += [[_fmt(t)] + [_fmt(v) for v in row] for t, row in zip(times, states)]
    _atomic_rows(path, rows)


def read_snapshot_csv(path):
    """Inverse of :func:`write_snapshot_csv`: ``(times, x, states)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["t"]:
        raise ValueError(f"{path}: not a snapshot matrix (header must start with 't')")
    x = np.array([float(v) for v in rows[0][1:]])
    data = np.array([[float(v) for v in row] for row in rows[1:]]).reshape(-1, x.size + 1)
    return data[:, 0], x, data[:, 1:]


def write_terms_csv(path, reports_by_D) -> None:
    """Error-term table: one row per term, one magnitude column per D."""
    Ds = list(reports_by_D)
    rows = [["term"] + [_fmt(D) for D in Ds]]
    labels = [r.term_label for r in reports_by_D[Ds[0]]]
    for i, label in enumerate(labels):
        rows.append([label] + [_fmt(reports_by_D[D][i].magnitude) for D in Ds])
    _atomic_rows(path, rows)


def read_terms_csv(path) -> dict:
    """``{D: {term_label: magnitude}}`` from :func:`write_terms_csv` output."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["term"]:
        raise ValueError(f"{path}: header must start with 'term'")
    Ds = [float(d) for d in rows[0][1:]]
    return {D: {row[0]: float(row[j + 1]) for row in rows[1:]} for j, D in enumerate(Ds)}
