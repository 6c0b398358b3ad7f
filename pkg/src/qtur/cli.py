"""Command-line front end.

Subcommands: steady-state, evolve, moments, trajectories, bounds,
sweep-kur, sweep-ep, verify-cic. Models come from --model (JSON file) or
--builtin with --rates; run parameters can also be preloaded from a JSON
--config file, with explicit flags taking precedence. The exit code is 0
exactly when every asserted check passed; expected diagonal-cost
violations in sweeps are reported but do not fail the run. QTUR_THREADS
caps the worker count everywhere.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bounds as bounds_mod
from . import models as models_mod
from .counting import (
    CountingObservable,
    activity_curve,
    counting_moments,
    decompose_activity,
    entropy_production,
    entropy_production_rate,
)
from .engine import build_generator, propagate, steady_state
from .operators import validate_density
from .sweeps import (
    SweepConfig,
    format_cell,
    run_cic_suite,
    run_sweep,
    write_csv,
)
from .trajectories import (
    PathWeights,
    SeedPolicy,
    ensemble_entropies,
    estimate,
    record_observable,
    sample_ensemble,
)


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="path to a model JSON file")
    p.add_argument(
        "--builtin",
        choices=("da", "ep", "poisson"),
        help="use a built-in model (da: 4 rates, ep: 6 rates, poisson: 1 rate)",
    )
    p.add_argument("--omega-e", type=float, default=1.0, help="energy gap for built-ins")
    p.add_argument("--rates", help="comma-separated rates for the built-in model")


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with defaults for this subcommand")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--workers", type=int, default=None)


def _parse_rates(text: str | None, default):
    if text is None:
        return default
    return [float(x) for x in text.split(",") if x.strip()]


def _resolve_model(args):
    if getattr(args, "model", None):
        return models_mod.load_model(args.model)
    kind = getattr(args, "builtin", None) or "da"
    if kind == "da":
        rates = _parse_rates(args.rates, [0.5, 0.5, 0.5, 0.5])
        return models_mod.build_da_model(args.omega_e, *rates)
    if kind == "ep":
        rates = _parse_rates(args.rates, [0.5, 0.5, 0.5, 0.5, 0.5, 0.5])
        return models_mod.build_ep_model(args.omega_e, *rates)
    rates = _parse_rates(args.rates, [1.0])
    return models_mod.build_poisson_model(rates[0])


def _apply_config(args) -> None:
    if not getattr(args, "config", None):
        return
    with open(args.config) as fh:
        cfg = json.load(fh)
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)


def _initial_state(args, model):
    choice = getattr(args, "rho0", None) or "ss"
    d = model.dim
    if choice == "ss":
        return steady_state(build_generator(model, coherent=True))
    if choice == "mixed":
        return np.eye(d, dtype=complex) / d
    if choice == "ground":
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    raise SystemExit(f"unknown initial state {choice!r}")


def _weights(args, model):
    if getattr(args, "weights", None):
        w = tuple(float(x) for x in args.weights.split(","))
        if len(w) != model.n_channels:
            raise SystemExit(
                f"{len(w)} weights for {model.n_channels} channels"
            )
        return CountingObservable(w)
    if model.has_entropy_weights:
        free = [1.0] * sum(1 for m, c in enumerate(model.channels) if c.partner > m)
        return CountingObservable(
            models_mod.antisymmetric_current_weights(model, free), antisymmetric=True
        )
    return CountingObservable.total_count(model.n_channels)


def _print_matrix(label: str, m: np.ndarray) -> None:
    print(label)
    for row in m:
        print("  " + "  ".join(f"{v.real:+.12f}{v.imag:+.12f}j" for v in row))


def _cmd_steady_state(args) -> int:
    model = _resolve_model(args)
    rho = steady_state(build_generator(model, coherent=not args.incoherent))
    _print_matrix("steady state:", rho)
    check = validate_density(rho)
    print(f"validation: {check.message} (worst {check.worst:.3e})")
    a_d, a_nd = decompose_activity(model, rho)
    print(f"activity rate: {a_d + a_nd:.12g} (diag {a_d:.12g}, offdiag {a_nd:.12g})")
    if model.has_entropy_weights:
        print(f"entropy production rate: {entropy_production_rate(model, rho):.12g}")
    return 0 if check.ok else 1


def _cmd_evolve(args) -> int:
    model = _resolve_model(args)
    rho0 = _initial_state(args, model)
    gen = build_generator(model, coherent=not args.incoherent)
    rho = propagate(gen, rho0, args.t)
    _print_matrix(f"state at t={args.t}:", rho)
    return 0


def _cmd_moments(args) -> int:
    model = _resolve_model(args)
    rho0 = _initial_state(args, model)
    obs = _weights(args, model)
    if args.window:
        a, b = (float(x) for x in args.window.split(","))
        obs = obs.with_window((a, b))
    mom = counting_moments(model, rho0, obs, args.tau, coherent=not args.incoherent)
    print(f"mean: {mom.mean:.17g}")
    print(f"variance: {mom.variance:.17g}")
    print(f"second_moment: {mom.second_moment:.17g}")
    return 0


def _cmd_trajectories(args) -> int:
    model = _resolve_model(args)
    rho0 = _initial_state(args, model)
    obs = _weights(args, model)
    seed = args.seed if args.seed is not None else 0
    n = args.trajectories
    records = sample_ensemble(
        model, rho0, args.tau, n, SeedPolicy(seed),
        coherent=args.coherent, workers=args.workers,
    )
    entropies = None
    discarded = 0
    if model.has_entropy_weights:
        pw = PathWeights(model, rho0, args.tau)
        entropies, discarded = ensemble_entropies(pw, records)
    est = estimate(records, obs, entropies=entropies, n_discarded=discarded)
    print(f"trajectories: {n} (seed {seed})")
    print(f"mean: {est.mean:.12g} ± {est.stderr_mean:.3g}")
    print(f"variance: {est.variance:.12g} ± {est.stderr_variance:.3g}")
    if est.entropy_mean is not None:
        print(f"entropy per record: {est.entropy_mean:.12g} ± {est.entropy_stderr:.3g}")
    exact = counting_moments(model, rho0, obs, args.tau, coherent=True)
    print(f"exact mean: {exact.mean:.12g}   exact variance: {exact.variance:.12g}")
    if args.out:
        _dump_records(args.out, records, obs, model, rho0)
        print(f"wrote {args.out}")
    return 0


def _dump_records(path, records, obs, model, rho0) -> None:
    pw = PathWeights(model, rho0, records[0].horizon) if model.has_entropy_weights else None
    kmax = max((r.n_jumps for r in records), default=0)
    header = (
        ["run_index", "K"]
        + [f"t_{j+1}" for j in range(kmax)]
        + [f"m_{j+1}" for j in range(kmax)]
        + ["i", "i_prime", "N_value", "entropy_value"]
    )
    lines = [",".join(header)]
    for idx, rec in enumerate(records):
        times = [format_cell(t) for t, _ in rec.jumps] + [""] * (kmax - rec.n_jumps)
        chans = [str(m) for _, m in rec.jumps] + [""] * (kmax - rec.n_jumps)
        if pw is not None:
            try:
                entropy = format_cell(pw.entropy(rec))
            except Exception:
                entropy = ""
        else:
            entropy = ""
        lines.append(
            ",".join(
                [str(idx), str(rec.n_jumps)]
                + times
                + chans
                + [
                    str(rec.initial_label),
                    str(rec.final_label),
                    format_cell(record_observable(rec, obs)),
                    entropy,
                ]
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _cmd_bounds(args) -> int:
    model = _resolve_model(args)
    rho0 = _initial_state(args, model)
    obs = _weights(args, model)
    tau = args.tau
    coherent = not args.incoherent
    reports = []

    mom = counting_moments(model, rho0, obs, tau, coherent=coherent)
    curve = activity_curve(model, rho0, tau, coherent=coherent)
    gen = build_generator(model, coherent=coherent)
    rho_tau = propagate(gen, rho0, tau)
    reports.append(
        bounds_mod.kur_differential(model, rho_tau, obs, tau, curve.activity[-1], mom)
    )
    half = counting_moments(model, rho0, obs, tau / 2.0, coherent=coherent)
    if mom.mean > half.mean:
        reports.append(bounds_mod.tur_activity_integral(half, mom, curve, tau / 2.0, tau))
    reports.append(bounds_mod.survival_bound_check(model, rho0, tau))
    if model.has_entropy_weights:
        sigma = entropy_production(model, rho0, tau, coherent=coherent)
        gamma = bounds_mod.windowed_gamma(model, rho0, obs, tau, coherent=coherent)
        reports.append(
            bounds_mod.ep_tur(
                bounds_mod.InputStat.exact(mom.mean),
                bounds_mod.InputStat.exact(mom.variance),
                gamma,
                sigma,
            )
        )

    for rep in reports:
        print(json.dumps(rep.to_json()))
    if args.out:
        rows = [rep.to_csv_row() for rep in reports]
        keys = sorted({k for row in rows for k in row}, key=lambda k: (k != "name", k))
        with open(args.out, "w", newline="") as fh:
            fh.write(",".join(keys) + "\n")
            for row in rows:
                fh.write(",".join(format_cell(row.get(k)) if not isinstance(row.get(k), str) else row[k] for k in keys) + "\n")
    bad = [r for r in reports if r.satisfied is False]
    return 1 if bad else 0


def _parse_range(text: str | None, default: tuple[float, float]) -> tuple[float, float]:
    if text is None:
        return default
    lo, hi = (float(x) for x in text.split(","))
    return lo, hi


def _cmd_sweep(args, experiment: str) -> int:
    gamma = _parse_range(args.gamma_range, (0.0, 1.0))
    tau = _parse_range(args.tau_range, (0.1, 10.0))
    config = SweepConfig(
        experiment=experiment,
        n_draws=args.draws if args.draws is not None else 1000,
        seed=args.seed if args.seed is not None else 0,
        omega_e=args.omega_e,
        gamma_low=gamma[0],
        gamma_high=gamma[1],
        tau_low=tau[0],
        tau_high=tau[1],
        workers=args.workers,
    )
    result = run_sweep(config)
    print(result.summary())
    if args.out:
        write_csv(result, args.out)
        print(f"wrote {args.out}")
    return 0 if result.violations("full") == 0 else 1


def _cmd_verify_cic(args) -> int:
    model = _resolve_model(args)
    rho0 = _initial_state(args, model)
    report = run_cic_suite(
        model,
        rho0,
        args.tau,
        budget=args.trajectories,
        seed=args.seed if args.seed is not None else 0,
        workers=args.workers,
    )
    print(report.summary())
    return 0 if report.all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtur",
        description="jump statistics and uncertainty-relation checks for monitored Lindblad models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        _add_common_args(p)
        if model:
            _add_model_args(p)
            p.add_argument("--rho0", choices=("ss", "ground", "mixed"), default=None)
            p.add_argument("--incoherent", action="store_true", help="drop the Hamiltonian")
            p.add_argument("--coherent", action="store_true", help="sample with the full propagator")
        return p

    p = common(sub.add_parser("steady-state", help="solve and print the stationary state"))
    p.set_defaults(func=_cmd_steady_state)

    p = common(sub.add_parser("evolve", help="propagate an initial state"))
    p.add_argument("--t", type=float, required=True)
    p.set_defaults(func=_cmd_evolve)

    p = common(sub.add_parser("moments", help="exact counting moments"))
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--weights", help="comma-separated channel weights")
    p.add_argument("--window", help="observation window a,b")
    p.set_defaults(func=_cmd_moments)

    p = common(sub.add_parser("trajectories", help="Monte Carlo ensemble"))
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--trajectories", type=int, default=10_000)
    p.add_argument("--weights", help="comma-separated channel weights")
    p.set_defaults(func=_cmd_trajectories)

    p = common(sub.add_parser("bounds", help="evaluate the bound battery"))
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--weights", help="comma-separated channel weights")
    p.set_defaults(func=_cmd_bounds)

    for name, experiment, doc in (
        ("sweep-kur", "kur_sweep", "random activity-bound sweep"),
        ("sweep-ep", "ep_sweep", "random entropy-bound sweep"),
    ):
        p = common(sub.add_parser(name, help=doc), model=False)
        p.add_argument("--draws", type=int, default=None)
        p.add_argument("--omega-e", type=float, default=1.0)
        p.add_argument("--gamma-range", default=None, help="rate range lo,hi")
        p.add_argument("--tau-range", default=None, help="horizon range lo,hi")
        p.set_defaults(func=lambda a, e=experiment: _cmd_sweep(a, e))

    p = common(sub.add_parser("verify-cic", help="run the correspondence test battery"))
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--trajectories", type=int, default=10_000)
    p.set_defaults(func=_cmd_verify_cic)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_config(args)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
