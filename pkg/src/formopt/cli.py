"""Command line interface.

Subcommands cover the whole workflow: `init` a campaign from a schema and a
seed CSV, `suggest` / `record` to drive it experiment by experiment, `fit`
and `solve` as standalone steps, `analyze` for the draw-budget table,
`augment` for dataset filler, `simulate` for closed-loop runs against a
synthetic oracle, `report` for trace/chart tables, and `serve` for the HTTP
service. Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .annealer import DepthBudget, SaConfig, solve
from .augmentation import AugmentConfig, augment, eliminate
from .campaign import Campaign, init_campaign, run_simulated
from .dataset import Dataset
from .encoding import FactorSchema
from .errors import FormoptError
from .fitting import FitConfig, coarse_fine_fit, fit
from .oracles import KINDS as ORACLE_KINDS
from .oracles import make_oracle
from .qubo import QuboModel


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_fit_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("fitting")
    g.add_argument("--cost", choices=["mse", "contour_aware"], default="contour_aware")
    g.add_argument("--strategy", choices=["one_stage", "coarse_fine"],
                   default="coarse_fine")
    g.add_argument("--tau", type=float, default=100.0,
                   help="contour weight scale (response units)")
    g.add_argument("--ridge", type=float, default=1e-6)
    g.add_argument("--fit-iterations", type=int, default=5000)
    g.add_argument("--gradient-tolerance", type=float, default=1e-8)


def _add_sa_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("annealing")
    g.add_argument("--sweeps", type=int, default=2000)
    g.add_argument("--restarts", type=int, default=27)
    g.add_argument("--temp-initial", type=float, default=None)
    g.add_argument("--temp-final", type=float, default=None)
    g.add_argument("--top-k", type=int, default=5)


def _add_aug_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("augmentation")
    g.add_argument("--aug-count", type=int, default=None,
                   help="synthetic rows per fit (default n^2)")
    g.add_argument("--aug-fraction", type=float, default=0.05,
                   help="values fall in [mean*(1-f), mean)")
    g.add_argument("--aug-radius", type=int, default=3,
                   help="discard filler within this Hamming distance of real data")


def _fit_config(args) -> FitConfig:
    return FitConfig(
        cost=args.cost, tau=args.tau, strategy=args.strategy, ridge=args.ridge,
        max_iterations=args.fit_iterations,
        gradient_tolerance=args.gradient_tolerance,
    )


def _sa_config(args, seed: int = 0) -> SaConfig:
    return SaConfig(
        sweeps=args.sweeps, restarts=args.restarts,
        temp_initial=args.temp_initial, temp_final=args.temp_final,
        seed=seed, top_k=args.top_k,
    )


def _aug_config(args, seed: int = 0) -> AugmentConfig:
    return AugmentConfig(
        count=args.aug_count, below_mean_fraction=args.aug_fraction,
        elimination_radius=args.aug_radius, seed=seed,
    )


def _load_campaign(path: str) -> Campaign:
    return Campaign.from_json(Path(path).read_text())


def _store_campaign(c: Campaign, path: str):
    Path(path).write_text(c.to_json())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="formopt",
                     description="QUBO-surrogate experiment design toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", parents=[], help="create a campaign file",
                       description="Create a campaign from a schema and seed CSV.")
    p.add_argument("--schema", required=True, help="schema JSON file")
    p.add_argument("--seeds", required=True, help="seed observations CSV")
    p.add_argument("--out", required=True, help="campaign JSON to write")
    p.add_argument("--id", default="campaign")
    p.add_argument("--seed", type=int, default=0, help="campaign RNG seed")
    _add_fit_args(p)
    _add_sa_args(p)
    _add_aug_args(p)

    p = sub.add_parser("suggest", help="propose the next experiment")
    p.add_argument("--campaign", required=True)

    p = sub.add_parser("record", help="record a measured result")
    p.add_argument("--campaign", required=True)
    p.add_argument("--bits", required=True)
    p.add_argument("--ain", type=float, required=True)
    p.add_argument("--out-of-band", action="store_true",
                   help="store an unsolicited experiment")

    p = sub.add_parser("fit", help="fit a surrogate to a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--report-out", default=None)
    _add_fit_args(p)

    p = sub.add_parser("solve", help="anneal a model and print candidates")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exclude-data", default=None,
                   help="dataset CSV whose real bits are excluded")
    _add_sa_args(p)

    p = sub.add_parser("analyze", help="draw-budget table for a target depth")
    p.add_argument("--depth", type=float, required=True,
                   help="target depth m in standard deviations")
    p.add_argument("--epsilon", type=float, default=0.01,
                   help="acceptable overall failure probability")

    p = sub.add_parser("augment", help="add synthetic filler to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eliminate", action="store_true",
                   help="also prune filler near real observations")
    _add_aug_args(p)

    p = sub.add_parser("simulate", help="closed loop against a synthetic oracle")
    p.add_argument("--n", type=int, default=None, help="bit count (plain schema)")
    p.add_argument("--schema", default=None, help="schema JSON (alternative to --n)")
    p.add_argument("--oracle", choices=list(ORACLE_KINDS), default="qubo_plus_cubic")
    p.add_argument("--oracle-seed", type=int, default=0)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--seed-count", type=int, default=18,
                   help="random seed experiments drawn before the loop")
    p.add_argument("--seeds", default=None, help="seed observations CSV instead")
    p.add_argument("--seed", type=int, default=0, help="campaign RNG seed")
    p.add_argument("--id", default="simulated")
    p.add_argument("--out", default=None, help="write the final campaign JSON here")
    p.add_argument("--log-csv", default=None, help="write the trace CSV here")
    _add_fit_args(p)
    _add_sa_args(p)
    _add_aug_args(p)

    p = sub.add_parser("report", help="trace and chart tables from a campaign")
    p.add_argument("--campaign", required=True)
    p.add_argument("--log-csv", default=None, help="write the trace CSV here")
    p.add_argument("--best-csv", default=None, help="best-value trajectory table")
    p.add_argument("--error-csv", default=None, help="error metric table")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--token", default=None)
    p.add_argument("--max-fits", type=int, default=None)
    p.add_argument("--ui", default=None, help="static dashboard directory")

    return parser


# -- subcommand bodies ---------------------------------------------------------


def _cmd_init(args) -> int:
    schema = FactorSchema.from_json(Path(args.schema).read_text())
    ds = Dataset.from_csv(Path(args.seeds).read_text())
    c = init_campaign(
        schema,
        fit_config=_fit_config(args),
        sa_config=_sa_config(args),
        aug_config=_aug_config(args),
        seed_observations=[(o.bits, o.ain) for o in ds.real()],
        rng_seed=args.seed,
        id=args.id,
    )
    _store_campaign(c, args.out)
    print(f"campaign {c.id!r}: {len(c.dataset.real())} seed observations, "
          f"best {c.best[1]:g} at {c.best[0]}")
    return 0


def _cmd_suggest(args) -> int:
    c = _load_campaign(args.campaign)
    bits, estimate, source = c.suggest_next()
    _store_campaign(c, args.campaign)
    print(f"suggest {bits}  estimate {estimate:.6g}  source {source}")
    return 0


def _cmd_record(args) -> int:
    c = _load_campaign(args.campaign)
    c.record_result(args.bits, args.ain, out_of_band=args.out_of_band)
    _store_campaign(c, args.campaign)
    entry = c.log[-1]
    marker = "improved" if entry.improving else "no improvement"
    print(f"recorded {args.bits} = {args.ain:g} ({marker}); "
          f"iteration {c.iteration}, best {c.best[1]:g}")
    return 0


def _cmd_fit(args) -> int:
    ds = Dataset.from_csv(Path(args.data).read_text())
    config = _fit_config(args)
    report = coarse_fine_fit(ds, config) if config.strategy == "coarse_fine" \
        else fit(ds, config)
    Path(args.model_out).write_text(report.model.serialize())
    if args.report_out:
        Path(args.report_out).write_text(report.to_json())
    print(f"fit {len(ds)} observations: cost {report.training_cost:.6g}, "
          f"MSE% {report.mse_pct:.4g}, CAE% {report.cae_pct:.4g}, "
          f"{report.iterations_used} iterations")
    return 0


def _cmd_solve(args) -> int:
    model = QuboModel.deserialize(Path(args.model).read_text())
    exclude = frozenset()
    if args.exclude_data:
        ds = Dataset.from_csv(Path(args.exclude_data).read_text())
        exclude = frozenset(ds.bit_strings("real"))
    config = SaConfig(
        sweeps=args.sweeps, restarts=args.restarts,
        temp_initial=args.temp_initial, temp_final=args.temp_final,
        seed=args.seed, exclude=exclude, top_k=args.top_k,
    )
    result = solve(model, config)
    print(f"{'bits':<{model.n}}  estimate")
    for bits, value in result.candidates:
        print(f"{bits}  {value:.6g}")
    print(f"sampled {result.n_sampled} states: mean {result.mean_energy:.6g}, "
          f"std {result.std_energy:.6g}, best {result.best_energy:.6g}")
    return 0


def _cmd_analyze(args) -> int:
    budget = DepthBudget.compute(args.depth, args.epsilon)
    print(f"{'depth m':>14}  {budget.m:g}")
    print(f"{'per-draw fail':>14}  {budget.per_draw_failure:.4%}")
    print(f"{'epsilon':>14}  {budget.epsilon:g}")
    print(f"{'required draws':>14}  {budget.required_draws}")
    return 0


def _cmd_augment(args) -> int:
    ds = Dataset.from_csv(Path(args.data).read_text())
    schema = FactorSchema.from_json(Path(args.schema).read_text())
    out = augment(ds, schema, _aug_config(args, seed=args.seed))
    added = len(out) - len(ds)
    dropped = 0
    if args.eliminate:
        before = len(out)
        out = eliminate(out, args.aug_radius)
        dropped = before - len(out)
    Path(args.out).write_text(out.to_csv())
    print(f"augmented {added} rows" + (f", eliminated {dropped}" if args.eliminate else ""))
    return 0


def _cmd_simulate(args) -> int:
    if (args.n is None) == (args.schema is None):
        raise FormoptError("simulate needs exactly one of --n or --schema")
    schema = (FactorSchema.from_json(Path(args.schema).read_text())
              if args.schema else FactorSchema.plain_bits(args.n))
    oracle = make_oracle(args.oracle, schema.n, seed=args.oracle_seed,
                         noise_std=args.noise_std)
    seeds = None
    random_count = None
    if args.seeds:
        ds = Dataset.from_csv(Path(args.seeds).read_text())
        seeds = [(o.bits, o.ain) for o in ds.real()]
    else:
        random_count = args.seed_count
    c = init_campaign(
        schema, fit_config=_fit_config(args), sa_config=_sa_config(args),
        aug_config=_aug_config(args), seed_observations=seeds,
        random_count=random_count, oracle=oracle, rng_seed=args.seed, id=args.id,
    )
    run_simulated(c, oracle, args.budget)
    if args.out:
        _store_campaign(c, args.out)
    if args.log_csv:
        Path(args.log_csv).write_text(c.export_log_csv())
    print(f"{c.state} after {len(c.dataset.real())} experiments, "
          f"iteration {c.iteration}, best {c.best[1]:.6g} at {c.best[0]}")
    return 0


def _cmd_report(args) -> int:
    c = _load_campaign(args.campaign)
    log_csv = c.export_log_csv()
    series = c.metrics_series()
    if args.log_csv:
        Path(args.log_csv).write_text(log_csv)
    if args.best_csv:
        rows = ["Number of Experiments,Real AIN,Best AIN"] + [
            f"{e},{r!r},{b!r}" for e, r, b in
            zip(series["experiments"], series["real_ain"], series["best_ain"])
        ]
        Path(args.best_csv).write_text("\n".join(rows) + "\n")
    if args.error_csv:
        rows = ["Iteration,Number of Experiments,MSE(%),Contour-Aware MSE(%)"] + [
            f"{i},{e},{m if m is not None else ''},{ca if ca is not None else ''}"
            for i, e, m, ca in zip(series["iterations"], series["experiments"],
                                   series["mse_pct"], series["cae_pct"])
        ]
        Path(args.error_csv).write_text("\n".join(rows) + "\n")
    if not (args.log_csv or args.best_csv or args.error_csv):
        sys.stdout.write(log_csv)
    best = f"{c.best[1]:g} at {c.best[0]}" if c.best else "none"
    print(f"# campaign {c.id}: state {c.state}, iteration {c.iteration}, best {best}",
          file=sys.stderr)
    return 0


def _cmd_serve(args) -> int:  # pragma: no cover - blocks on uvicorn
    from .service import ServiceConfig, run

    config = ServiceConfig.from_env(
        data_dir=Path(args.data_dir) if args.data_dir else None,
        host=args.host, port=args.port, token=args.token,
        max_concurrent_fits=args.max_fits,
        ui_dir=Path(args.ui) if args.ui else None,
    )
    run(config)
    return 0


_COMMANDS = {
    "init": _cmd_init,
    "suggest": _cmd_suggest,
    "record": _cmd_record,
    "fit": _cmd_fit,
    "solve": _cmd_solve,
    "analyze": _cmd_analyze,
    "augment": _cmd_augment,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FormoptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
