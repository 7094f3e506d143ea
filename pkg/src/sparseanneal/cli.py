"""Command-line entry point for multi-sample experiments.

Settings come from an optional YAML config file; every flag below overrides
the corresponding config key. Exit codes: 0 on success, 1 on configuration
errors, 2 when more than 10% of the samples fail.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ExperimentFailureError, ParameterError, SparseAnnealError
from .harness import ExperimentConfig, load_config, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparseanneal",
        description="Sparse-approximation experiments: annealing, pursuit, and the exact oracle.",
    )
    parser.add_argument("--config", help="YAML experiment configuration file")
    parser.add_argument("--seed", type=int, help="base seed for per-sample derivation")
    parser.add_argument("--samples", type=int, help="number of independent samples")
    parser.add_argument("--out", help="output directory for CSV reports")
    parser.add_argument("--algo", action="append",
                        help="algorithm to run (sa, omp, oracle); repeatable")
    parser.add_argument("--rho", type=float, help="sampler sparsity rho")
    parser.add_argument("--tau", type=int, help="sweeps per schedule stage")
    parser.add_argument("--r", type=float, help="geometric schedule growth factor")
    parser.add_argument("--mu0", type=float, help="initial inverse temperature")
    parser.add_argument("--n-mu", type=int, help="number of schedule stages")
    parser.add_argument("--n", type=int, help="signal dimension N")
    parser.add_argument("--alpha", type=float, help="aspect ratio M/N")
    parser.add_argument("--rho-hat", type=float, help="planted density")
    parser.add_argument("--sigma-x2", type=float, help="planted amplitude variance")
    parser.add_argument("--sigma-xi2", type=float, help="measurement noise variance")
    parser.add_argument("--workers", type=int, help="parallel sample workers")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "base_seed": args.seed,
        "n_samples": args.samples,
        "output_dir": args.out,
        "algorithms": tuple(args.algo) if args.algo else None,
        "rho": args.rho,
        "tau": args.tau,
        "r": args.r,
        "mu0": args.mu0,
        "n_mu": args.n_mu,
        "n": args.n,
        "alpha": args.alpha,
        "rho_hat": args.rho_hat,
        "sigma_x2": args.sigma_x2,
        "sigma_xi2": args.sigma_xi2,
        "workers": args.workers,
    }
    try:
        if args.config:
            config = load_config(args.config, **overrides)
        else:
            config = ExperimentConfig(
                **{k: v for k, v in overrides.items() if v is not None}
            )
        result = run_experiment(config)
    except ExperimentFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, SparseAnnealError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for algo in config.algorithms:
        for quantity, (mean, err) in result.summary[algo].items():
            err_text = f" +/- {err:.3e}" if err is not None else ""
            print(f"{algo} {quantity}: {mean:.6g}{err_text}  (n={result.n_samples})")
    if result.output_dir is not None:
        print(f"reports written to {result.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
