#!/usr/bin/env python3
"""Run the security experiments and write one JSON report per line.

    python3 scripts/run_experiments.py --out results.jsonl
    python3 scripts/run_experiments.py --quick
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass

from qowf.attacks import census, non_gch_probe, random_guess_forgery


@dataclass
class ExperimentConfig:
    seed: int = 0
    forgery_sizes: tuple[int, ...] = (4, 6)
    forgery_trials: int = 10_000
    census_sizes: tuple[int, ...] = (4, 6)
    census_fl: int = 20
    probe_n: int = 4
    probe_trials: int = 1000

    @classmethod
    def quick(cls) -> "ExperimentConfig":
        return cls(forgery_trials=1000, census_sizes=(4,), census_fl=5, probe_trials=200)


def run(cfg: ExperimentConfig):
    for n in cfg.forgery_sizes:
        t = time.perf_counter()
        stats = random_guess_forgery(n, cfg.forgery_trials, cfg.seed)
        row = json.loads(stats.to_json())
        row.update(deterministic_rate=stats.deterministic_rate, left_family=stats.left_family,
                   seconds=round(time.perf_counter() - t, 2))
        yield row
    for n in cfg.census_sizes:
        t = time.perf_counter()
        images, pre = zip(*(census(n, cfg.seed + i) for i in range(cfg.census_fl)))
        yield {
            "experiment": "census",
            "n": n,
            "fl": cfg.census_fl,
            "image_set_sizes": sorted({len(r.extended) for r in images}),
            "expected_images": 2 ** (n // 2 - 1),
            "all_complete": all(r.complete for r in images),
            "min_preimages": min(p.preimages for p in pre),
            "preimage_floor": 2 ** (n // 2),
            "seconds": round(time.perf_counter() - t, 2),
        }
    report = non_gch_probe(cfg.probe_n, cfg.probe_trials, cfg.seed, inject_control=True)
    yield {**json.loads(report.to_json()), "control_pass": report.control_pass}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quick", action="store_true", help="small trial counts")
    parser.add_argument("--out", help="JSON-lines output (default stdout)")
    args = parser.parse_args(argv)
    cfg = ExperimentConfig.quick() if args.quick else ExperimentConfig()
    cfg.seed = args.seed
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        out.write(json.dumps({"config": asdict(cfg)}) + "\n")
        for row in run(cfg):
            out.write(json.dumps(row, sort_keys=True) + "\n")
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
