"""Query-encoding throughput measurement.

Protocol: for each batch size, one untimed warmup pass over at least two
batches, then the wall-clock time for a full pass over the query set,
repeated and reduced by median. Tokenization is inside the timed region
on purpose; it is part of online query processing. Model loading and
file I/O are not. Absolute numbers are machine-specific; only relative
speedups between models on the same machine mean anything, which is why
results carry a hardware string and raw samples.
"""

from __future__ import annotations

import platform
import statistics
import time
from dataclasses import dataclass, field

from .encoder import EncoderModel

DEFAULT_BATCH_SIZES = (4, 8, 16, 32, 64)


@dataclass
class BenchSample:
    """Timings for one (model, batch_size) cell."""

    model: str
    batch_size: int
    query_count: int
    elapsed_s: list[float]  # one entry per repeat

    @property
    def repeats(self) -> int:
        return len(self.elapsed_s)

    @property
    def median_elapsed(self) -> float:
        return statistics.median(self.elapsed_s)

    @property
    def qps(self) -> float:
        return self.query_count / self.median_elapsed


@dataclass
class BenchResult:
    model: str
    hardware: str
    samples: list[BenchSample] = field(default_factory=list)

    @property
    def batch_sizes(self) -> tuple[int, ...]:
        return tuple(s.batch_size for s in self.samples)

    def qps_at(self, batch_size: int) -> float:
        for s in self.samples:
            if s.batch_size == batch_size:
                return s.qps
        raise KeyError(f"no sample for batch size {batch_size}")


def hardware_string() -> str:
    return f"{platform.machine()} {platform.system()} python{platform.python_version()}"


def measure_throughput(
    encoder: EncoderModel,
    queries,
    batch_sizes=DEFAULT_BATCH_SIZES,
    repeats: int = 3,
    model_name: str = "model",
) -> BenchResult:
    """Median-of-repeats queries-per-second across batch sizes."""
    queries = list(queries)
    if not queries:
        raise ValueError("throughput measurement needs a nonempty query set")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    result = BenchResult(model=model_name, hardware=hardware_string())
    for batch_size in batch_sizes:
        warmup = queries[: max(2 * batch_size, 1)]
        encoder.encode(warmup, batch_size=batch_size)
        elapsed = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            encoder.encode(queries, batch_size=batch_size)
            elapsed.append(time.perf_counter() - t0)
        result.samples.append(
            BenchSample(
                model=model_name,
                batch_size=batch_size,
                query_count=len(queries),
                elapsed_s=elapsed,
            )
        )
    return result


def compare(results: list[BenchResult], baseline: str | None = None) -> list[dict]:
    """Per-batch-size speedup of every model against the baseline.

    The baseline defaults to the first result (the teacher, by
    convention). All results must share the same batch sizes.
    """
    if not results:
        raise ValueError("compare requires at least one result")
    sizes = results[0].batch_sizes
    for r in results[1:]:
        if r.batch_sizes != sizes:
            raise ValueError(
                f"batch size sets differ: {r.model} has {r.batch_sizes}, expected {sizes}"
            )
    baseline = baseline or results[0].model
    base = next((r for r in results if r.model == baseline), None)
    if base is None:
        raise ValueError(f"baseline {baseline!r} not among results")
    rows = []
    for r in results:
        for bs in sizes:
            rows.append(
                {
                    "model": r.model,
                    "batch_size": bs,
                    "qps": r.qps_at(bs),
                    "speedup": r.qps_at(bs) / base.qps_at(bs),
                }
            )
    return rows


def bench_csv(results: list[BenchResult], path) -> None:
    """Raw repeats plus a summary row per (model, batch_size)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("model,batch_size,repeat,elapsed_s,qps,hardware\n")
        for r in results:
            for s in r.samples:
                for i, e in enumerate(s.elapsed_s):
                    f.write(
                        f"{r.model},{s.batch_size},{i},{e!r},{s.query_count / e!r},"
                        f"{r.hardware}\n"
                    )
                f.write(f"{r.model},{s.batch_size},median,{s.median_elapsed!r},{s.qps!r},{r.hardware}\n")


def speedup_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("model,batch_size,qps,speedup\n")
        for row in rows:
            f.write(f"{row['model']},{row['batch_size']},{row['qps']!r},{row['speedup']!r}\n")


def speedup_chart(rows: list[dict], width: int = 40) -> str:
    """Plain-text bars, one per (model, batch_size), scaled to max speedup."""
    if not rows:
        return ""
    top = max(row["speedup"] for row in rows)
    lines = []
    for row in rows:
        bar = "#" * max(1, round(width * row["speedup"] / top))
        lines.append(
            f"{row['model']:<24} bs={row['batch_size']:<4} {row['speedup']:>6.2f}x {bar}"
        )
    return "\n".join(lines)
