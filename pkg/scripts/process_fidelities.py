"""Process-tomography fidelity statistics for M3 and M3 (x) A_1/2 over many seeds."""

import argparse
from dataclasses import dataclass

import numpy as np

from cohinfo.channels import amplitude_damping, platypus, tensor
from cohinfo.tomography import process_tomography


@dataclass
class Config:
    shots: int = 100_000
    seeds: int = 20


def main(cfg: Config) -> None:
    m3 = platypus(3)
    for name, ch in (("M3", m3), ("M3 x A_1/2", tensor(m3, amplitude_damping(0.5)))):
        f = np.array([process_tomography(ch, cfg.shots, seed=s).fidelity
                      for s in range(cfg.seeds)])
        print(f"{name:11s} F = {f.mean():.4f} +- {f.std(ddof=1):.4f} "
              f"(median {np.median(f):.4f}, {cfg.seeds} seeds, {cfg.shots} shots/setting)")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--shots", type=int, default=Config.shots)
    p.add_argument("--seeds", type=int, default=Config.seeds)
    a = p.parse_args()
    main(Config(a.shots, a.seeds))
