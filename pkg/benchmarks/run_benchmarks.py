#!/usr/bin/env python3
"""fastskip Decode Benchmarks.

Measures, for greedy and fast-skip decoding:
- Per-utterance decode latency (mean / median / p99)
- Throughput (utterances/sec)
- Joint network evaluations

Usage:
    python benchmarks/run_benchmarks.py                     # freshly initialized model
    python benchmarks/run_benchmarks.py runs/default/model.fskm

An untrained model's CTC head is close to uniform, so nearly every frame
triggers; pass a trained checkpoint to see the skip take effect.
"""

import json
import statistics
import sys
from dataclasses import asdict, dataclass
from typing import Dict, List

from fastskip.core.checkpoint import load_checkpoint
from fastskip.core.config import ModelConfig, SkipConfig, TaskConfig
from fastskip.core.data import Utterance, generate
from fastskip.core.decoder import fast_skip_decode, greedy_decode
from fastskip.core.model import TinyTransducer, encode


@dataclass
class BenchmarkResult:
    """Result of a benchmark run."""

    name: str
    iterations: int
    total_time: float
    mean_latency_ms: float
    median_latency_ms: float
    p99_latency_ms: float
    throughput_ops_sec: float
    joint_calls: int


def benchmark_decode(
    name: str, params: TinyTransducer, utterances: List[Utterance], cfg: SkipConfig
) -> BenchmarkResult:
    """Time the decoder alone; encoding happens before the clock starts."""
    decode = greedy_decode if name == "greedy" else fast_skip_decode
    encoded = [encode(params, u.features) for u in utterances]

    latencies = []
    joint_calls = 0
    for enc in encoded:
        trace = decode(params, enc, cfg)
        latencies.append(trace.wall_nanos / 1e6)
        joint_calls += trace.joint_calls

    total_time = sum(latencies) / 1000
    iterations = len(latencies)
    return BenchmarkResult(
        name=name,
        iterations=iterations,
        total_time=total_time,
        mean_latency_ms=statistics.mean(latencies),
        median_latency_ms=statistics.median(latencies),
        p99_latency_ms=sorted(latencies)[int(iterations * 0.99)],
        throughput_ops_sec=iterations / total_time if total_time else 0.0,
        joint_calls=joint_calls,
    )


def run_all_benchmarks(checkpoint: str = "") -> Dict[str, BenchmarkResult]:
    print("fastskip decode benchmarks")
    print("=" * 50)

    if checkpoint:
        params = load_checkpoint(checkpoint).params
    else:
        params = TinyTransducer.init(ModelConfig())
    cfg = params.config
    task = TaskConfig(
        vocab_size=cfg.vocab_size, feat_dim=cfg.feat_dim, subsample_factor=cfg.subsample
    )
    utterances = generate(task, 200, split="test").utterances
    skip = SkipConfig()

    results = {}
    for name in ("greedy", "fastskip"):
        print(f"\nBenchmarking {name} decode ({len(utterances)} utterances)...")
        result = benchmark_decode(name, params, utterances, skip)
        results[name] = result
        print(f"   Mean latency: {result.mean_latency_ms:.3f} ms")
        print(f"   P99 latency:  {result.p99_latency_ms:.3f} ms")
        print(f"   Throughput:   {result.throughput_ops_sec:.0f} utt/sec")
        print(f"   Joint calls:  {result.joint_calls}")

    greedy, fast = results["greedy"], results["fastskip"]
    print("\n" + "=" * 50)
    print("SUMMARY")
    print("=" * 50)
    if greedy.joint_calls:
        print(f"Joint-call ratio:  {fast.joint_calls / greedy.joint_calls:.3f}")
    if greedy.total_time:
        print(f"Decode-time ratio: {fast.total_time / greedy.total_time:.3f}")
    return results


def save_results(
    results: Dict[str, BenchmarkResult], filepath: str = "benchmarks/results.json"
):
    """Save benchmark results to JSON."""
    with open(filepath, "w") as f:
        json.dump({k: asdict(v) for k, v in results.items()}, f, indent=2)
    print(f"\nResults saved to {filepath}")


if __name__ == "__main__":
    results = run_all_benchmarks(sys.argv[1] if len(sys.argv) > 1 else "")
    save_results(results)
