"""File formats: detection datasets, event logs, generic result tables.

Everything is line-oriented text.  Floats are written with repr so that
reading them back reproduces the exact double, making every format
round-trip safe and reruns byte-identical.  Tables carry their metadata
in leading ``# key = value`` comments.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np

from .model import DETECT_CT, DETECT_SCREEN, INFECT, Parameters, PopulationState
from .simulate import EpidemicPath
from .summaries import StepPath, counting_path

SCREENING = 0
CONTACT_TRACING = 1
MODE_NAMES = ("screening", "contact_tracing")

TABLE_MAGIC = "# epiabc-table v1"
_DTYPES = {"f8": np.float64, "i8": np.int64, "u8": np.uint64, "u1": np.uint8,
           "i1": np.int8, "i4": np.int32, "b1": np.bool_}
_DTYPE_TAGS = {np.dtype(v): k for k, v in _DTYPES.items()}


@dataclass(frozen=True, eq=False)
class DetectionDataset:
    """Observed detections: times (years since origin) and modes.

    Modes are 0 (screening) or 1 (contact tracing).  Times are sorted and
    lie in [0, horizon].
    """

    times: np.ndarray
    modes: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        modes = np.asarray(self.modes, dtype=np.int8)
        order = np.argsort(times, kind="stable")
        object.__setattr__(self, "times", times[order])
        object.__setattr__(self, "modes", modes[order])
        if times.shape != modes.shape or times.ndim != 1:
            raise ValueError("times and modes must be 1-d arrays of equal length")
        if not np.all(np.isin(self.modes, (SCREENING, CONTACT_TRACING))):
            raise ValueError("modes must be 0 (screening) or 1 (contact tracing)")
        if times.size and (self.times[0] < 0 or self.times[-1] > self.horizon):
            raise ValueError("detection times must lie in [0, horizon]")

    def __len__(self) -> int:
        return self.times.size

    def counting_paths(self, t0: float = 0.0) -> tuple[StepPath, StepPath]:
        """Counting processes of the two detection modes on [t0, horizon]."""
        return (counting_path(self.times[self.modes == SCREENING],
                              t0, self.horizon),
                counting_path(self.times[self.modes == CONTACT_TRACING],
                              t0, self.horizon))


def ingest_detections(path, horizon: float | None = None) -> DetectionDataset:
    """Read a `time,mode` delimited text file into a DetectionDataset.

    Malformed rows are reported with their line number.  Unsorted input
    is sorted with a notice.  The horizon defaults to the largest time.
    """
    times = []
    modes = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "time,mode":
            raise ValueError(f"{path}: expected header 'time,mode', got {header!r}")
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                t = float(parts[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad time {parts[0]!r}") from None
            if parts[1] not in MODE_NAMES:
                raise ValueError(f"{path}:{lineno}: bad mode {parts[1]!r} "
                                 f"(expected one of {MODE_NAMES})")
            times.append(t)
            modes.append(MODE_NAMES.index(parts[1]))
    times = np.asarray(times, dtype=float)
    modes = np.asarray(modes, dtype=np.int8)
    if times.size and np.any(np.diff(times) < 0):
        warnings.warn(f"{path}: detection times were not sorted; sorting")
    if horizon is None:
        horizon = float(times.max()) if times.size else 0.0
    return DetectionDataset(times=times, modes=modes, horizon=float(horizon))


def write_detections(dataset: DetectionDataset, path) -> None:
    """Inverse of :func:`ingest_detections` (horizon not stored)."""
    with open(path, "w") as fh:
        fh.write("time,mode\n")
        for t, mode in zip(dataset.times, dataset.modes):
            fh.write(f"{float(t)!r},{MODE_NAMES[mode]}\n")


def detections_from_path(path: EpidemicPath) -> DetectionDataset:
    """Observed dataset extracted from a simulated path."""
    sel = (path.kinds == DETECT_SCREEN) | (path.kinds == DETECT_CT)
    modes = np.where(path.kinds[sel] == DETECT_SCREEN, SCREENING, CONTACT_TRACING)
    return DetectionDataset(times=path.times[sel] - path.init.t,
                            modes=modes, horizon=path.horizon - path.init.t)


def _format_cell(value, tag: str) -> str:
    if tag == "f8":
        return repr(float(value))
    if tag == "b1":
        return "1" if value else "0"
    if tag == "s":
        text = str(value)
        if " " in text or "\n" in text:
            raise ValueError(f"string cells must not contain whitespace: {text!r}")
        return text
    return str(int(value))


def write_table(path, meta: dict, columns: dict) -> None:
    """Write named columns with metadata comments; see :func:`read_table`."""
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    if arrays and any(a.shape != arrays[0].shape or a.ndim != 1 for a in arrays):
        raise ValueError("columns must be 1-d arrays of equal length")
    tags = ["s" if a.dtype.kind in "US" else _DTYPE_TAGS.get(a.dtype, "f8")
            for a in arrays]
    arrays = [a if tag != "f8" else a.astype(np.float64)
              for a, tag in zip(arrays, tags)]
    with open(path, "w") as fh:
        fh.write(TABLE_MAGIC + "\n")
        for key, value in meta.items():
            text = repr(value) if not isinstance(value, str) else value
            if "\n" in text:
                raise ValueError(f"meta value for {key!r} must be single-line")
            fh.write(f"# {key} = {text}\n")
        fh.write("# columns = " + " ".join(names) + "\n")
        fh.write("# dtypes = " + " ".join(tags) + "\n")
        n = arrays[0].size if arrays else 0
        for row in range(n):
            fh.write(" ".join(_format_cell(a[row], tag)
                              for a, tag in zip(arrays, tags)) + "\n")


def read_table(path) -> tuple[dict, dict]:
    """Read a file written by :func:`write_table` -> (meta, columns).

    Meta values come back as strings; columns come back with the dtypes
    recorded in the header.
    """
    meta = {}
    names = None
    tags = None
    rows = []
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != TABLE_MAGIC:
            raise ValueError(f"{path}: not an epiabc table")
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("# columns = "):
                names = line[len("# columns = "):].split()
            elif line.startswith("# dtypes = "):
                tags = line[len("# dtypes = "):].split()
            elif line.startswith("# "):
                key, _, value = line[2:].partition(" = ")
                meta[key.strip()] = value
            elif line:
                rows.append(line.split())
    if names is None or tags is None or len(names) != len(tags):
        raise ValueError(f"{path}: missing or inconsistent column header")
    columns = {}
    for j, (name, tag) in enumerate(zip(names, tags)):
        raw = [row[j] for row in rows]
        if tag == "s":
            columns[name] = np.array(raw, dtype=str)
        elif tag == "f8":
            columns[name] = np.array([float(v) for v in raw], dtype=np.float64)
        else:
            columns[name] = np.array([int(v) for v in raw], dtype=_DTYPES[tag])
    return meta, columns


def config_hash(meta: dict) -> str:
    """Stable short hash of a configuration mapping."""
    canon = "\n".join(f"{k}={meta[k]!r}" for k in sorted(meta))
    return hashlib.md5(canon.encode()).hexdigest()[:16]


def write_path(path: EpidemicPath, file) -> None:
    """Serialize a simulated path (event log plus its configuration)."""
    p = path.params
    init = path.init
    meta = {
        "format": "epidemic-path",
        "variant": p.variant,
        "lambda0": p.lambda0, "mu0": p.mu0, "mu1": p.mu1,
        "lambda1": p.lambda1, "lambda2": p.lambda2, "lambda3": p.lambda3, "c": p.c,
        "t0": init.t, "s0": init.S, "i0": init.I, "r10": init.R1, "r20": init.R2,
        "init_detections": ",".join(repr(float(t)) for t in init.detection_times),
        "horizon": path.horizon, "seed": path.seed, "truncated": path.truncated,
    }
    write_table(file, meta, {"time": path.times, "kind": path.kinds, "id": path.ids})


def read_path(file) -> EpidemicPath:
    """Rebuild an EpidemicPath written by :func:`write_path`.

    The per-individual arrays and final state are reconstructed from the
    event log; the result is bit-identical to the original path.
    """
    meta, cols = read_table(file)
    if meta.get("format") != "epidemic-path":
        raise ValueError(f"{file}: not an epidemic path file")
    params = Parameters(
        mu1=float(meta["mu1"]), lambda1=float(meta["lambda1"]),
        lambda2=float(meta["lambda2"]), lambda3=float(meta["lambda3"]),
        c=float(meta["c"]), lambda0=float(meta["lambda0"]),
        mu0=float(meta["mu0"]), variant=meta["variant"])
    init_det = np.array([float(v) for v in meta["init_detections"].split(",") if v])
    init = PopulationState(t=float(meta["t0"]), S=int(meta["s0"]), I=int(meta["i0"]),
                           R1=int(meta["r10"]), R2=int(meta["r20"]),
                           detection_times=init_det)
    times, kinds, ids = cols["time"], cols["kind"], cols["id"]
    truncated = meta["truncated"] == "True"
    horizon = float(meta["horizon"])

    i0 = init.I
    n_ind = i0 + int(np.sum(kinds == INFECT))
    inf_t = np.empty(n_ind)
    det_t = np.full(n_ind, np.nan)
    det_k = np.full(n_ind, -1, np.int8)
    inf_t[:i0] = init.t
    sel = kinds == INFECT
    inf_t[ids[sel]] = times[sel]
    for code, kval in ((DETECT_SCREEN, 0), (DETECT_CT, 1)):
        sel = kinds == code
        det_t[ids[sel]] = times[sel]
        det_k[ids[sel]] = kval

    t_end = float(times[-1]) if truncated and times.size else horizon
    all_det = np.concatenate((init.detection_times,
                              times[(kinds == DETECT_SCREEN) | (kinds == DETECT_CT)]))
    shell = EpidemicPath(params=params, init=init, horizon=horizon,
                         seed=int(meta["seed"]), times=times, kinds=kinds, ids=ids,
                         infection_times=inf_t, detection_times=det_t,
                         detection_kinds=det_k,
                         final=PopulationState(t=0.0, S=1, I=0),  # placeholder
                         truncated=truncated)
    S, I, R1, R2 = (int(v[0]) for v in shell.counts_at(np.array([np.inf])))
    final = PopulationState(t=t_end, S=S, I=I, R1=R1, R2=R2, detection_times=all_det)
    return EpidemicPath(params=params, init=init, horizon=horizon,
                        seed=int(meta["seed"]), times=times, kinds=kinds, ids=ids,
                        infection_times=inf_t, detection_times=det_t,
                        detection_kinds=det_k, final=final, truncated=truncated)
