"""CSV and JSON readers and writers.

Floats are written with ``repr`` so every value parses back to the same
IEEE-754 double.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, MeasurementParseError
from .particle import ParticleApproximation

TRACE_COLUMNS = ("t", "ess", "resampled", "log_evidence_increment", "post_mean", "post_var")


def fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_rows(path, header, rows):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _read_table(path, expected=None):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigurationError(f"{path}: file is empty") from None
        if expected is not None and tuple(header) != tuple(expected):
            raise ConfigurationError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MeasurementParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise MeasurementParseError(str(exc), lineno) from None
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


# particles -------------------------------------------------------------------


def write_particles(path, approx):
    header = [f"position_{j}" for j in range(approx.dim)] + ["weight"]
    rows = (
        [fmt(v) for v in pos] + [fmt(w)]
        for pos, w in zip(approx.positions, approx.weights)
    )
    return _write_rows(path, header, rows)


def read_particles(path):
    header, data = _read_table(path)
    n = len(header) - 1
    if n < 1 or header[-1] != "weight" or header[:-1] != [f"position_{j}" for j in range(n)]:
        raise ConfigurationError(f"{path}: not a particle file (header {','.join(header)})")
    with np.errstate(divide="ignore"):
        log_w = np.log(data[:, -1])
    return ParticleApproximation(data[:, :-1], log_w)


# filter trace ----------------------------------------------------------------


def write_trace(path, trace):
    dim = trace.final.dim
    if dim == 1:
        header = list(TRACE_COLUMNS)
    else:
        header = list(TRACE_COLUMNS[:4])
        header += [f"post_mean_{j}" for j in range(dim)] + [f"post_var_{j}" for j in range(dim)]
    rows = []
    for r in trace.records:
        rows.append(
            [str(r.t), fmt(r.ess), "1" if r.resampled else "0", fmt(r.log_evidence_increment)]
            + [fmt(v) for v in np.atleast_1d(r.post_mean)]
            + [fmt(v) for v in np.atleast_1d(r.post_var)]
        )
    return _write_rows(path, header, rows)


def read_trace(path):
    """Trace columns as a dict of arrays."""
    header, data = _read_table(path)
    if tuple(header[:4]) != TRACE_COLUMNS[:4]:
        raise ConfigurationError(f"{path}: not a trace file")
    out = {name: data[:, i] for i, name in enumerate(header)}
    out["t"] = out["t"].astype(int)
    out["resampled"] = out["resampled"].astype(bool)
    return out


# figure tables ---------------------------------------------------------------


def write_kde(path, estimate):
    return _write_rows(path, ["x", "density"], ([fmt(x), fmt(d)] for x, d in zip(estimate.grid, estimate.density)))


def read_kde(path):
    _, data = _read_table(path, ("x", "density"))
    return data[:, 0], data[:, 1]


def write_deviation(path, epsilons, probabilities):
    return _write_rows(path, ["epsilon", "probability"], ([fmt(e), fmt(p)] for e, p in zip(epsilons, probabilities)))


def read_deviation(path):
    _, data = _read_table(path, ("epsilon", "probability"))
    return data[:, 0], data[:, 1]


CONVERGENCE_COLUMNS = ("M", "mean", "var")


def write_convergence(path, study):
    rows = (
        [str(int(m)), fmt(mu), fmt(v)]
        for m, mu, v in zip(study.particle_counts, study.means, study.variances)
    )
    return _write_rows(path, list(CONVERGENCE_COLUMNS), rows)


def read_convergence(path):
    _, data = _read_table(path, CONVERGENCE_COLUMNS)
    return data[:, 0].astype(int), data[:, 1], data[:, 2]


def write_samples(path, samples):
    samples = np.asarray(samples, dtype=float).reshape(len(samples), -1)
    header = [f"position_{j}" for j in range(samples.shape[1])]
    return _write_rows(path, header, ([fmt(v) for v in row] for row in samples))


def write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


# measurements ----------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementSet:
    """Observation times and angles, optionally grouped into batches."""

    times: np.ndarray
    angles: np.ndarray
    batches: tuple = None

    def __len__(self):
        return self.times.size

    def observations(self):
        """``(tau, angle)`` pairs in file order."""
        return [(float(t), float(a)) for t, a in zip(self.times, self.angles)]

    def batched(self, unlabeled="row"):
        """Group observations into filter steps.

        Consecutive observations sharing a batch label form one step.
        Without labels every row is its own step (``unlabeled="row"``) or the
        whole set is one step (``unlabeled="file"``).
        """
        obs = self.observations()
        if self.batches is None:
            if unlabeled == "row":
                return [[o] for o in obs]
            if unlabeled == "file":
                return [obs]
            raise ConfigurationError(f"unlabeled must be 'row' or 'file', got {unlabeled!r}")
        groups = []
        last = object()
        for o, label in zip(obs, self.batches):
            if label != last:
                groups.append([])
                last = label
            groups[-1].append(o)
        return groups


def parse_measurements(path):
    """Read a measurement CSV with header ``t,tau_seconds[,angle_radians][,batch]``.

    A missing angle column means every angle is zero: the recorded times are
    the instants at which the pendulum passes its rest position.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"measurement file {path} does not exist")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MeasurementParseError("file is empty", 1) from None
        if header[:2] != ["t", "tau_seconds"] or not set(header[2:]) <= {"angle_radians", "batch"} or len(set(header)) != len(header):
            raise MeasurementParseError(
                f"header must be t,tau_seconds[,angle_radians][,batch], got {','.join(header)}", 1
            )
        col = {name: i for i, name in enumerate(header)}
        times, angles, batches = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise MeasurementParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                int(row[col["t"]])
                tau = float(row[col["tau_seconds"]])
                angle = float(row[col["angle_radians"]]) if "angle_radians" in col else 0.0
            except ValueError as exc:
                raise MeasurementParseError(str(exc), lineno) from None
            if not math.isfinite(tau) or tau <= 0:
                raise MeasurementParseError(f"observation time must be finite and positive, got {tau}", lineno)
            if not math.isfinite(angle):
                raise MeasurementParseError(f"angle must be finite, got {angle}", lineno)
            times.append(tau)
            angles.append(angle)
            if "batch" in col:
                batches.append(row[col["batch"]].strip())
    if not times:
        raise ConfigurationError(f"{path}: no measurements")
    return MeasurementSet(
        np.array(times), np.array(angles), tuple(batches) if "batch" in col else None
    )
