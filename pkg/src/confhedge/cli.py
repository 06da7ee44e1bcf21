"""Command-line driver: ``confhedge {allocate,forecast,synthetic,fuzz-bounds}``.

Exit codes: 0 success, 1 I/O error, 2 invalid input or flags, 3 a regret
bound or inequality was violated.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .confhedge1 import run as run_allocation
from .confhedge2 import parse_loss, step as forecast_step
from .confidence import confidence_matrix, data_path, load_profiles
from .core import LearnerState, RoundInput
from .exceptions import ConfHedgeError, UnsupportedSchemeError, ValidationError
from .fuzz import REPORT_COLUMNS, FuzzConfig, report_rows, run_fuzz
from .mixing import FIXED_SHARE, INVERSE_T, NONE, VARIANTS, MixingScheme
from .regret import (
    BOUND_NAMES,
    RegretLedger,
    adahedge_bound,
    best_segment_experts,
    bound_values,
    check_bounds,
    prefix_ledger,
    segment_comparators,
)

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_VIOLATION = 0, 1, 2, 3


def _scheme_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mixing", default=FIXED_SHARE, choices=VARIANTS)
    p.add_argument("--alpha", default=INVERSE_T, help="'inverse-t' or a constant in (0, 1]")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confhedge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="run ConfHedge-1 on a loss stream")
    p.add_argument("--input", required=True, help="loss stream (CSV or JSONL)")
    p.add_argument("--out", required=True, help="per-round record table")
    _scheme_args(p)
    p.add_argument("--comparator", help="comparator table t,q_<name>... for a regret report")
    p.add_argument("--report", help="regret/bound report path (default: <out>.bounds.csv)")
    p.add_argument("--confidence-off", action="store_true", help="force every confidence to 1")

    p = sub.add_parser("forecast", help="run ConfHedge-2 on a forecast stream")
    p.add_argument("--input", required=True, help="forecast stream (CSV or JSONL)")
    p.add_argument("--out", required=True, help="per-round record table")
    _scheme_args(p)
    p.add_argument("--loss", default="abs", help="'abs' or 'biased:<mu1>,<mu2>'")
    p.add_argument("--profiles", help="JSON confidence-profile config evaluated on feature columns")
    p.add_argument("--crisp", action="store_true", help="zero every profile slope")
    p.add_argument(
        "--compare-crisp", action="store_true",
        help="also run with crisp profiles, writing <out>.crisp.<ext>",
    )
    p.add_argument("--confidence-off", action="store_true", help="force every confidence to 1")

    p = sub.add_parser("synthetic", help="run the rotating-leader experiment")
    p.add_argument("--fixture", default=str(data_path("rotating_leader.json")), help="synthetic spec JSON")
    p.add_argument("--out", help="ConfHedge-1 record table")
    p.add_argument("--adahedge-out", help="AdaHedge record table")
    p.add_argument("--seed", type=int, help="override the fixture seed")
    p.add_argument("--horizon", type=int, help="override the fixture horizon")

    p = sub.add_parser("fuzz-bounds", help="check the regret bounds on random trials")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="fuzz_report.csv", help="per-trial report table")
    p.add_argument("--mixing", default=FIXED_SHARE, choices=(FIXED_SHARE, "uniform-past"))
    p.add_argument("--threads", type=int, help="worker threads (capped by CONFHEDGE_THREADS)")
    p.add_argument("--max-experts", type=int, default=8)
    p.add_argument("--max-horizon", type=int, default=500)
    p.add_argument("--dump-dir", help="where to write a violating trial (default: next to --out)")
    return parser


def _with_suffix(path: str, tag: str) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}.{tag}{p.suffix}")


def _bound_report(ledger: RegretLedger, scheme: MixingScheme, full_confidence: bool):
    rows = [
        ["rounds", ledger.rounds, ""],
        ["switches", ledger.switches, ""],
        ["regret", ledger.regret, ""],
    ]
    try:
        values = bound_values(ledger, ledger.n_experts, scheme)
    except UnsupportedSchemeError:
        values = None
    if values is not None:
        holds = check_bounds(ledger, scheme)
        rows += [[b, values[b], int(holds[b])] for b in BOUND_NAMES]
    if scheme.variant == NONE and full_confidence:
        eq2 = adahedge_bound(ledger, ledger.n_experts)
        best_regret = ledger.cum_algorithm_loss - ledger.best_expert_loss
        rows += [["best_expert_regret", best_regret, ""], ["eq2", eq2, int(best_regret <= eq2 + ledger.slack)]]
    return rows, values is not None


def cmd_allocate(args) -> int:
    scheme = MixingScheme.parse(args.mixing, args.alpha)
    schema = io.stream_schema(args.input, io.LOSS_ALLOCATION)
    rounds = io.read_loss_stream(args.input, schema)
    if args.confidence_off:
        rounds = [RoundInput(r.losses, np.ones_like(r.losses)) for r in rounds]
    records, _ = run_allocation(rounds, scheme, schema.n_experts)
    io.write_round_records(args.out, records, n_experts=schema.n_experts, forecasting=False)
    print(f"rounds {len(records)}  cumulative loss {math.fsum(r.algorithm_loss for r in records)!r}")
    if not args.comparator:
        return EXIT_OK
    q = io.read_comparators(args.comparator, schema.n_experts)
    if len(q) != len(records):
        raise ValidationError(f"{args.comparator}: {len(q)} comparator rows for {len(records)} rounds")
    ledger = RegretLedger.from_records(records, q)
    full = all(np.all(r.confidences == 1) for r in rounds)
    rows, has_bounds = _bound_report(ledger, scheme, full)
    report = args.report or str(_with_suffix(args.out, "bounds"))
    io.write_table(report, ["quantity", "value", "holds"], rows)
    print(f"regret {ledger.regret!r}  switches {ledger.switches}")
    if not has_bounds:
        print(f"no regret bounds for mixing={scheme.variant}, alpha={scheme.alpha}; empirical regret only")
        return EXIT_OK
    failed = [r[0] for r in rows if r[2] == 0]
    for name, value, holds in rows[3:]:
        print(f"{name} {value!r} {'holds' if holds else 'VIOLATED'}")
    return EXIT_VIOLATION if failed else EXIT_OK


def _forecast_confidences(schema, rounds, profiles, off: bool) -> np.ndarray:
    if off:
        return np.ones((len(rounds), schema.n_experts))
    if profiles is not None:
        unknown = set(profiles) - set(schema.expert_names)
        if unknown:
            raise ValidationError(f"profiles for unknown experts: {sorted(unknown)}")
        P = confidence_matrix(profiles, schema.expert_names, [r.features for r in rounds])
        dead = np.flatnonzero(P.sum(axis=1) <= 0)
        if dead.size:
            raise ValidationError(f"zero confidence mass at t={dead[0] + 1}")
        return P
    if schema.has_confidences:
        return np.array([r.confidences for r in rounds]).reshape(len(rounds), schema.n_experts)
    return np.ones((len(rounds), schema.n_experts))


def _run_forecast(rounds, P, loss, scheme, n):
    state = LearnerState.initial(n)
    records = []
    for r, p in zip(rounds, P):
        _, record, state = forecast_step(state, r.forecasts, p, r.outcome, loss, scheme)
        records.append(record)
    return records


def cmd_forecast(args) -> int:
    scheme = MixingScheme.parse(args.mixing, args.alpha)
    loss = parse_loss(args.loss)
    if (args.compare_crisp or args.crisp) and not args.profiles:
        raise ValidationError("--crisp and --compare-crisp need --profiles")
    profiles = load_profiles(args.profiles, crisp=args.crisp) if args.profiles else None
    schema, rounds = io.read_forecast_stream(args.input)
    runs = [(args.out, profiles, "")]
    if args.compare_crisp:
        runs.append((str(_with_suffix(args.out, "crisp")), load_profiles(args.profiles, crisp=True), "crisp "))
    for out, prof, label in runs:
        P = _forecast_confidences(schema, rounds, prof, args.confidence_off)
        records = _run_forecast(rounds, P, loss, scheme, schema.n_experts)
        io.write_round_records(out, records, n_experts=schema.n_experts, forecasting=True)
        mae = math.fsum(r.aggregate_loss for r in records) / max(1, len(records))
        print(f"{label}MAE {mae!r}")
    return EXIT_OK


def cmd_synthetic(args) -> int:
    spec = io.load_synthetic_spec(args.fixture)
    if args.seed is not None or args.horizon is not None:
        spec = io.SyntheticSpec(
            spec.n_experts,
            args.horizon if args.horizon is not None else spec.horizon,
            spec.segment_means,
            spec.noise_std,
            args.seed if args.seed is not None else spec.seed,
        )
    rounds = io.generate_synthetic(spec)
    scheme = MixingScheme(FIXED_SHARE, INVERSE_T)
    records, _ = run_allocation(rounds, scheme)
    ada, _ = run_allocation(rounds, MixingScheme(NONE))
    if args.out:
        io.write_round_records(args.out, records)
    if args.adahedge_out:
        io.write_round_records(args.adahedge_out, ada)

    starts = list(spec.segment_starts)
    best = best_segment_experts(records, starts)
    q = segment_comparators(starts, best, spec.horizon, spec.n_experts)
    view = prefix_ledger(records, q)
    eq8 = bound_values(view, spec.n_experts, scheme)["eq8"]
    violated = np.flatnonzero(view.regret > eq8 + view.slack)
    expert_totals = view.expert_losses[-1]
    print("expert cumulative losses " + " ".join(repr(float(v)) for v in expert_totals))
    print(f"ConfHedge-1 fixed-share {math.fsum(r.algorithm_loss for r in records)!r}")
    print(f"AdaHedge {math.fsum(r.algorithm_loss for r in ada)!r}")
    print(f"best-segment comparator {float(view.comparator_loss[-1])!r} (experts {best})")
    print(f"regret {float(view.regret[-1])!r} eq8 bound {float(eq8[-1])!r}")
    if violated.size:
        print(f"eq8 bound VIOLATED at prefix T={violated[0] + 1}")
        return EXIT_VIOLATION
    print("eq8 bound holds at every prefix")
    return EXIT_OK


def cmd_fuzz_bounds(args) -> int:
    if args.threads is not None and args.threads < 1:
        raise ValidationError("--threads must be positive")
    config = FuzzConfig(args.trials, args.seed, args.max_experts, args.max_horizon, mixing=args.mixing)
    results = run_fuzz(config, args.threads)
    io.write_table(args.out, REPORT_COLUMNS, report_rows(results))
    bad = [r for r in results if not r.ok]
    n_rows = sum(len(r.rows) for r in results)
    print(f"{config.trials} trials, {n_rows} comparator checks, {len(bad)} trials with violations")
    if not bad:
        return EXIT_OK
    res = bad[0]
    row, q = res.first_violation()
    dump = Path(args.dump_dir) if args.dump_dir else Path(args.out).resolve().parent
    dump.mkdir(parents=True, exist_ok=True)
    stream = dump / f"trial_{res.trial.index}_losses.csv"
    comp = dump / f"trial_{res.trial.index}_comparator.csv"
    io.write_loss_stream(stream, res.trial.rounds)
    io.write_comparators(comp, q)
    print(f"violation in trial {res.trial.index} ({row['comparator']} comparator, k={row['switches']})")
    print(f"replay: confhedge allocate --input {stream} --comparator {comp} --mixing {args.mixing} --out replay.csv")
    return EXIT_VIOLATION


COMMANDS = {
    "allocate": cmd_allocate,
    "forecast": cmd_forecast,
    "synthetic": cmd_synthetic,
    "fuzz-bounds": cmd_fuzz_bounds,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, UnsupportedSchemeError, ConfHedgeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
