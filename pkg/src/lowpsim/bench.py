"""Wall-clock comparison of fused and composed quantization, and training overhead."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numba
import numpy as np

from . import tensor as T
from .errors import EquivalenceError, UnsupportedFormatError
from .formats import BlockFloatFormat, FixedFormat, FloatFormat, NumberFormat, RoundingMode
from .quant import QuantSpec, quantize_composed, quantize_fused
from .tensor import Tensor
from .train import QuantConfig, make_separable, mlp, train

IMPLEMENTATIONS = ("fused", "composed")
DEFAULT_SIZES = tuple(2**p for p in range(10, 25))
CSV_COLUMNS = ("case-id", "format", "mode", "implementation", "elements", "threads", "median_ns", "iqr_ns")


@dataclass(frozen=True)
class BenchCase:
    format: NumberFormat
    mode: RoundingMode
    implementation: str
    tensor_elements: int
    repeats: int = 5
    warmup: int = 1
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", RoundingMode.parse(self.mode))
        if self.implementation not in IMPLEMENTATIONS:
            raise ValueError(f"implementation must be one of {IMPLEMENTATIONS}")
        if self.implementation == "composed" and isinstance(self.format, FloatFormat):
            raise UnsupportedFormatError("composed implementation cannot run floating-point formats")
        if self.repeats < 5:
            raise ValueError("repeats must be at least 5")
        if self.warmup < 1:
            raise ValueError("warmup must be at least 1")
        if self.tensor_elements < 1 or self.threads < 1:
            raise ValueError("elements and threads must be positive")

    @property
    def case_id(self) -> str:
        kind = type(self.format).__name__.replace("Format", "").lower()
        return f"{self.implementation}-{kind}-{self.mode.value}-{self.tensor_elements}-t{self.threads}"


@dataclass
class BenchResult:
    case: BenchCase
    median_ns: float
    iqr_ns: float
    times_ns: list = field(default_factory=list)


def _shape(n: int, fmt: NumberFormat) -> tuple[int, ...]:
    # block formats along a dimension need a matrix; 1024-wide rows otherwise
    if isinstance(fmt, BlockFloatFormat) and fmt.dim is not None:
        cols = 1024 if n % 1024 == 0 else n
        return (n // cols, cols) if fmt.dim <= 1 else (n,)
    return (n,)


def _input(n: int, fmt: NumberFormat, seed: int) -> Tensor:
    data = np.random.default_rng(seed).standard_normal(n).astype(np.float32)
    return Tensor(data, shape=_shape(n, fmt))


def set_threads(n: int) -> int:
    n = max(1, min(n, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def run_bench(cases: Iterable[BenchCase], seed: int = 0) -> list[BenchResult]:
    """Median and interquartile range of each case's wall time.

    Before timing, every case whose format the composed path supports is
    checked for bit-exact agreement between the two implementations.
    """
    results = []
    inputs: dict = {}
    for case in cases:
        key = (case.tensor_elements, _shape(case.tensor_elements, case.format))
        if key not in inputs:
            inputs[key] = _input(case.tensor_elements, case.format, seed)
        x = inputs[key]
        spec = QuantSpec(case.format, case.mode, seed=seed)
        fn = quantize_fused if case.implementation == "fused" else quantize_composed
        prev = numba.get_num_threads()
        set_threads(case.threads)
        try:
            with T.validation(False):
                first = fn(x, spec)
                if not isinstance(case.format, FloatFormat):
                    other = quantize_composed(x, spec) if fn is quantize_fused else quantize_fused(x, spec)
                    if not first.bit_equal(other):
                        bad = int((first.bits() != other.bits()).sum())
                        raise EquivalenceError(f"{case.case_id}: fused and composed differ in {bad} element(s)")
                for _ in range(case.warmup):
                    fn(x, spec)
                times = []
                for _ in range(case.repeats):
                    t0 = time.perf_counter_ns()
                    fn(x, spec)
                    times.append(time.perf_counter_ns() - t0)
        finally:
            numba.set_num_threads(prev)
        q1, med, q3 = np.percentile(times, [25, 50, 75])
        results.append(BenchResult(case, float(med), float(q3 - q1), times))
    return results


def default_cases(
    sizes: Sequence[int] = DEFAULT_SIZES,
    formats: Sequence[NumberFormat] = (FixedFormat(8, 4), BlockFloatFormat(8), FloatFormat(5, 2)),
    modes: Sequence[RoundingMode] = (RoundingMode.NEAREST_EVEN,),
    implementations: Sequence[str] = IMPLEMENTATIONS,
    repeats: int = 5,
    warmup: int = 1,
    threads: int = 1,
) -> list[BenchCase]:
    """Cartesian product of the arguments, silently skipping composed float cases."""
    cases = []
    for fmt in formats:
        for mode in modes:
            for impl in implementations:
                if impl == "composed" and isinstance(fmt, FloatFormat):
                    continue
                for n in sizes:
                    cases.append(BenchCase(fmt, mode, impl, n, repeats, warmup, threads))
    return cases


def write_csv(results: Iterable[BenchResult], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        c = r.case
        w.writerow(
            [c.case_id, str(c.format), c.mode.value, c.implementation, c.tensor_elements, c.threads,
             int(round(r.median_ns)), int(round(r.iqr_ns))]
        )


@dataclass
class OverheadResult:
    quantized_s: float
    baseline_s: float

    @property
    def ratio(self) -> float:
        return self.quantized_s / self.baseline_s


def run_training_overhead(
    epochs: int = 1,
    cfg: QuantConfig | None = None,
    repeats: int = 3,
    seed: int = 0,
) -> OverheadResult:
    """Median per-epoch time of quantized training vs. the fp32 baseline.

    Uses a 64-256-256-2 MLP on 4096 separable samples; ``cfg`` defaults to
    identity formats in every category.
    """
    cfg = QuantConfig.identity() if cfg is None else cfg
    data = make_separable(4096, 64, 0.5, seed=seed)
    sizes = (64, 256, 256, 2)
    train(mlp(sizes, seed), make_separable(64, 64, 0.5, seed=seed), cfg, epochs=1, batch_size=64)  # compile

    def timed(c) -> float:
        model = mlp(sizes, seed)
        t0 = time.perf_counter()
        train(model, data, c, epochs=epochs, lr=0.01, momentum=0.9, seed=seed, batch_size=128)
        return (time.perf_counter() - t0) / epochs

    # alternate so slow drift in machine load hits both sides equally
    base, quant = [], []
    for _ in range(repeats):
        base.append(timed(None))
        quant.append(timed(cfg))
    return OverheadResult(float(np.median(quant)), float(np.median(base)))
