"""Benchmark harness: error-versus-time curves for the five methods.

Protocol
--------
For every method x sketch-size l x trial, the power iteration is advanced
one step at a time up to ``q_max`` and a :class:`~skpower.data_io.TrialRecord`
is emitted after each iterate.  Mirroring the usual presentation of such
comparisons, benchmark runs use a primary sketch of size ``r1 = l`` and a
Gaussian start block of size ``r2 = k``.

``time_ms`` is the cumulative wall time of the work the iteration itself
performs: sketch construction and the sketched product (attributed to the
q = 0 point), the start-block draw, each power-iteration pair, and the
stabilization QR when enabled.  The per-point factorization assembly
(orthonormalization / regression / Nystrom contraction) and the error
evaluation are excluded: they are recomputed from scratch at every reported
point and are identical across the methods being compared at a fixed target
rank, so accumulating them would only blur the comparison.

Error metrics go through :mod:`skpower.diagnostics`: the spectral residual
is estimated by seeded power iteration (relative tolerance 1e-6), the
Frobenius residual is exact, and ``rel_err`` is residual / sigma_{k+1} - 1
against the full-SVD profile of the dataset (computed once, untimed).

Every row is regenerable: :func:`replay_record` reruns the row's
(method, parameters, seed, q) combination and returns the same errors.
"""

from __future__ import annotations

import csv
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import data_io
from .data_io import TrialRecord, gen_expdecay, gen_lowrank_plus_noise, gen_polydecay
from .diagnostics import (
    SpectralProfile,
    estimated_approximation_residuals,
    estimated_projection_residuals,
)
from .linalg import orthonormalize, pinv
from .sketching import make_sketch, substream

METHODS = (
    "classical-randsvd",
    "sketched-randsvd",
    "lowrank-factorize",
    "lowrank-factorize-unsketched",
    "nystrom",
)

# methods whose per-iteration cost is a full pass over A
_CLASSICAL = {"classical-randsvd", "lowrank-factorize-unsketched"}

DEFAULT_QMAX_SKETCHED = 15
DEFAULT_QMAX_CLASSICAL = 5

_ERR_STREAM = 100  # substream tag for the residual-estimator start block


@dataclass(frozen=True)
class DatasetSpec:
    """Where a benchmark matrix comes from: a file or a synthetic recipe.

    Synthetic recipes are strings like ``polydecay:400x200:seed=7``,
    ``expdecay:300x100:rate=0.05:seed=1`` or
    ``lowrank:200x100:rank=10:noise=0.01:seed=2``; anything else is treated
    as a path (``.skpw`` binary or MatrixMarket).
    """

    source: str
    label: str

    def load(self) -> np.ndarray:
        parsed = _parse_synthetic(self.source)
        if parsed is not None:
            return parsed
        if self.source.endswith(".skpw"):
            return data_io.read_binary(self.source)
        return data_io.read_matrix_market(self.source)


def _parse_synthetic(text: str):
    match = re.match(r"^(polydecay|expdecay|lowrank):(\d+)x(\d+)(.*)$", text)
    if not match:
        return None
    name, m, n = match.group(1), int(match.group(2)), int(match.group(3))
    opts = {}
    for part in match.group(4).split(":"):
        if part:
            key, _, value = part.partition("=")
            opts[key] = value
    seed = int(opts.get("seed", 0))
    if name == "polydecay":
        return gen_polydecay(m, n, seed)
    if name == "expdecay":
        return gen_expdecay(m, n, float(opts.get("rate", 0.1)), seed)
    return gen_lowrank_plus_noise(
        m, n, int(opts.get("rank", 10)), float(opts.get("noise", 0.0)), seed
    )


def dataset_spec(source: str, label: str | None = None) -> DatasetSpec:
    if label is None:
        label = os.path.basename(source) if os.sep in source or source.endswith((".skpw", ".mtx")) else source
    return DatasetSpec(source=source, label=label)


@dataclass
class BenchConfig:
    """Everything one benchmark run needs; mirrors the flat config-file keys."""

    dataset: DatasetSpec
    methods: list[str]
    k: int
    l_values: list[int]
    eps: float = 0.5
    q_max: int | None = None  # None: 15 for sketched methods, 5 for classical
    trials: int = 20
    root_seed: int = 0
    sketch_kind: str = "countsketch"
    s: int = 1
    output_path: str = "bench.csv"
    workers: int = 1
    stabilized: bool = True

    def validate(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.q_max is not None and self.q_max < 0:
            raise ValueError("q_max must be >= 0")
        if not self.methods:
            raise ValueError("at least one method required")
        for method in self.methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        for l in self.l_values:
            if l < self.k:
                raise ValueError(f"every l must be >= k, got l={l} < k={self.k}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def q_max_for(self, method: str) -> int:
        if self.q_max is not None:
            return self.q_max
        return DEFAULT_QMAX_CLASSICAL if method in _CLASSICAL else DEFAULT_QMAX_SKETCHED


_CONFIG_KEYS = {
    "dataset",
    "label",
    "methods",
    "k",
    "l_values",
    "eps",
    "q_max",
    "trials",
    "root_seed",
    "sketch_kind",
    "s",
    "output",
    "workers",
    "stabilized",
}


def parse_config_file(path: str) -> dict:
    """Parse the flat ``key = value`` benchmark config format."""
    values: dict = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            key, sep, value = text.partition("=")
            key = key.strip()
            if not sep or key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: bad config line {line.rstrip()!r}")
            values[key] = value.strip()
    return values


def config_from_mapping(values: dict) -> BenchConfig:
    """Build a BenchConfig from string-valued config keys (file or CLI merged)."""
    if "dataset" not in values:
        raise ValueError("config needs a dataset")
    cfg = BenchConfig(
        dataset=dataset_spec(values["dataset"], values.get("label")),
        methods=[m.strip() for m in values.get("methods", "sketched-randsvd,classical-randsvd").split(",") if m.strip()],
        k=int(values.get("k", 40)),
        l_values=[int(tok) for tok in str(values.get("l_values", "")).replace(",", " ").split()],
        eps=float(values.get("eps", 0.5)),
        q_max=int(values["q_max"]) if values.get("q_max") not in (None, "") else None,
        trials=int(values.get("trials", 20)),
        root_seed=int(values.get("root_seed", 0)),
        sketch_kind=values.get("sketch_kind", "countsketch"),
        s=int(values.get("s", 1)),
        output_path=values.get("output", "bench.csv"),
        workers=int(values.get("workers", 1)),
        stabilized=str(values.get("stabilized", "true")).lower() not in ("false", "0", "no"),
    )
    if not cfg.l_values:
        raise ValueError("config needs at least one l value")
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# incremental per-method runners
# ---------------------------------------------------------------------------


class _IterateRunner:
    """Advances one power iteration at a time, accumulating algorithm time."""

    def __init__(self, a, *, method, k, l, sketch_kind, s, seed, stabilized):
        self.a = a
        self.method = method
        self.k = k
        self.l = l
        self.s = s
        self.seed = seed
        self.stabilized = stabilized
        m, n = a.shape
        self.q_done = 0
        t0 = time.perf_counter()
        if method == "nystrom":
            self.sketch = make_sketch(sketch_kind, n, l, substream(seed, 0), s=s)
            self.ctil = self.sketch.apply_right(a)
            wtil = self.sketch.apply_left_transpose(self.ctil)
            self.wtil = (wtil + wtil.T) / 2.0
            self.omega = make_sketch("gaussian", l, k, substream(seed, 1)).densify()
            self.y = self.omega
            self.r1 = l
        elif method in _CLASSICAL:
            self.atil = a
            self.omega = make_sketch("gaussian", n, k, substream(seed, 1)).densify()
            self.y = self.atil @ self.omega
            self.r1 = n
        else:
            self.sketch = make_sketch(sketch_kind, n, l, substream(seed, 0), s=s)
            self.atil = self.sketch.apply_right(a)
            self.omega = make_sketch("gaussian", l, k, substream(seed, 1)).densify()
            self.y = self.atil @ self.omega
            self.r1 = l
        self.cumulative = time.perf_counter() - t0
        if method in ("lowrank-factorize", "lowrank-factorize-unsketched"):
            # regression-stage inputs; untimed (assembly, identical across methods)
            self.s2 = make_sketch(sketch_kind, m, l, substream(seed, 2), s=s)
            self.s2a = self.s2.apply_left_transpose(a)

    def advance(self) -> None:
        t0 = time.perf_counter()
        if self.method == "nystrom":
            self.y = self.wtil @ self.y
        else:
            y = self.y
            if self.stabilized:
                y = orthonormalize(y)
            self.y = self.atil @ (self.atil.T @ y)
        self.cumulative += time.perf_counter() - t0
        self.q_done += 1

    def errors(self, profile: SpectralProfile) -> tuple[float, float, float]:
        err_seed = substream(self.seed, _ERR_STREAM, self.q_done)
        if self.method in ("classical-randsvd", "sketched-randsvd"):
            q_basis = orthonormalize(self.y)
            spec, frob = estimated_projection_residuals(self.a, q_basis, seed=err_seed)
        elif self.method == "nystrom":
            c = self.ctil @ self.y
            w = self.y.T @ (self.wtil @ self.y)
            w = (w + w.T) / 2.0
            spec, frob = estimated_approximation_residuals(
                self.a, c @ (pinv(w) @ c.T), seed=err_seed
            )
        else:
            s2y = self.s2.apply_left_transpose(self.y)
            x = pinv(s2y) @ self.s2a
            spec, frob = estimated_approximation_residuals(self.a, self.y @ x, seed=err_seed)
        rel = spec / profile.values[self.k] - 1.0
        return spec, frob, rel


def _run_series(a, profile, cfg: BenchConfig, method: str, l: int, trial: int, seed: int):
    runner = _IterateRunner(
        a,
        method=method,
        k=cfg.k,
        l=l,
        sketch_kind=cfg.sketch_kind,
        s=cfg.s,
        seed=seed,
        stabilized=cfg.stabilized,
    )
    rows = []
    for q in range(cfg.q_max_for(method) + 1):
        if q > 0:
            runner.advance()
        spec, frob, rel = runner.errors(profile)
        rows.append(
            TrialRecord(
                method=method,
                dataset=cfg.dataset.label,
                m=a.shape[0],
                n=a.shape[1],
                k=cfg.k,
                l=l,
                r1=runner.r1,
                r2=cfg.k,
                s=cfg.s if method != "classical-randsvd" and cfg.sketch_kind == "countsketch" else 0,
                q_iter=q,
                eps=cfg.eps,
                seed=seed,
                trial=trial,
                time_ms=runner.cumulative * 1e3,
                spec_err=spec,
                frob_err=frob,
                rel_err=rel,
            )
        )
    return rows


def replay_record(a, rec: TrialRecord, sketch_kind: str = "countsketch", stabilized: bool = True):
    """Rerun one recorded (method, parameters, seed, q) point; returns errors.

    The returned ``(spec_err, frob_err, rel_err)`` reproduce the recorded
    values (timings are not reproducible and are ignored).
    """
    profile = SpectralProfile.from_matrix(a)
    runner = _IterateRunner(
        a,
        method=rec.method,
        k=rec.k,
        l=rec.l,
        sketch_kind=sketch_kind,
        s=rec.s if rec.s else 1,
        seed=rec.seed,
        stabilized=stabilized,
    )
    for _ in range(rec.q_iter):
        runner.advance()
    return runner.errors(profile)


def run_benchmark(cfg: BenchConfig, csv_path: str | None = None, progress=None) -> list[TrialRecord]:
    """Run the configured benchmark; stream rows to CSV as they are produced.

    With ``workers > 1`` the independent (method, l, trial) series run in a
    thread pool (BLAS releases the GIL); rows are then appended in
    completion order, so keep ``workers = 1`` for timing runs and
    deterministic files.  Partial results are flushed if a series fails.
    """
    cfg.validate()
    path = csv_path or cfg.output_path
    a = cfg.dataset.load()
    if "nystrom" in cfg.methods:
        from .power import _check_psd

        _check_psd(a)
    profile = SpectralProfile.from_matrix(a)
    if profile.values[cfg.k] <= 0.0:
        raise ValueError(f"sigma_(k+1) vanishes for k={cfg.k}; relative error undefined")

    tasks = []
    for mi, method in enumerate(cfg.methods):
        for li, l in enumerate(cfg.l_values):
            for trial in range(cfg.trials):
                seed = substream(cfg.root_seed, mi, li, trial)
                tasks.append((method, l, trial, seed))

    records: list[TrialRecord] = []
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(data_io._RECORD_FIELDS)
        fh.flush()

        def emit(rows):
            for rec in rows:
                writer.writerow(data_io._format_record(rec))
            fh.flush()
            records.extend(rows)
            if progress is not None:
                progress(rows[-1])

        try:
            if cfg.workers == 1:
                for method, l, trial, seed in tasks:
                    emit(_run_series(a, profile, cfg, method, l, trial, seed))
            else:
                with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                    futures = [
                        pool.submit(_run_series, a, profile, cfg, method, l, trial, seed)
                        for method, l, trial, seed in tasks
                    ]
                    for future in futures:
                        emit(future.result())
        except Exception:
            fh.flush()
            raise
    return records
