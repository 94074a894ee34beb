"""Command line interface.

Exit codes: 0 success, 2 validation error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys

from .asymptotic import (
    compute_theta_set,
    convergence_diagnostics,
    diagnostics_csv,
    secrecy_rate_asymptotic,
    sinr_eve_asymptotic,
    sinr_user_asymptotic,
)
from .channel import build_scenario, load_scenario, save_scenario
from .downlink import power_split
from .errors import NotApplicableError, NumericalError, ValidationError
from .experiment import (
    SCHEMES,
    ExperimentSpec,
    emit_csv,
    load_experiment,
    reference_experiment,
    run_sweep,
)
from .nullspace import build_nullspace_context, nullspace_asymptotic_rate
from .power import Domain, feasibility_threshold, optimal_power, quadratic_coefficients

log = logging.getLogger("secmimo")


def parse_snr_grid(text: str) -> tuple:
    """'a:b:step' (inclusive of b) or a comma list of values in dB."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return tuple(float(round(a + i * step, 12)) for i in range(n))
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"bad SNR grid {text!r}; expected a:b:step or a comma list") from None


def parse_floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"bad number list {text!r}") from None


def _spec(args) -> ExperimentSpec:
    spec = load_experiment(args.config) if args.config else reference_experiment()
    cfg = spec.config
    changes = {}
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    changes["config"] = cfg
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if args.snr_db is not None:
        changes["snr_grid_db"] = parse_snr_grid(args.snr_db)
    if getattr(args, "p", None) is not None:
        changes["p_values"] = parse_floats(args.p)
    if getattr(args, "pe", None) is not None:
        changes["pe_values"] = parse_floats(args.pe)
    if getattr(args, "rank_tol", None) is not None:
        changes["rank_tol"] = args.rank_tol
    if args.rescramble is not None:
        changes["repetition"] = args.rescramble
    if getattr(args, "scheme", None):
        changes["schemes"] = tuple(args.scheme)
    return dataclasses.replace(spec, **changes)


def _scenario(args, spec: ExperimentSpec):
    if getattr(args, "scenario", None):
        corr, cfg = load_scenario(args.scenario)
        return corr, cfg
    return build_scenario(spec.config, repetition=spec.repetition), spec.config


def _writer(args):
    out = getattr(args, "out", None)
    if out and out != "-":
        fh = open(out, "w", newline="", encoding="utf-8")
        return fh, csv.writer(fh, lineterminator="\n")
    return None, csv.writer(sys.stdout, lineterminator="\n")


def _g(x) -> str:
    return "NA" if x is None else format(float(x), ".10g")


def cmd_scenario(args) -> None:
    spec = _spec(args)
    corr = build_scenario(spec.config, repetition=spec.repetition)
    if not args.out:
        raise ValidationError("scenario needs --out")
    save_scenario(args.out, corr, spec.config)
    print(f"wrote {args.out}: L={spec.config.L} K={spec.config.K} N_t={spec.config.N_t} seed={spec.config.seed}")


def cmd_rate_asymptotic(args) -> None:
    spec = _spec(args)
    corr, cfg = _scenario(args, spec)
    p_values = spec.p_values or (0.1,)
    fh, w = _writer(args)
    w.writerow(["snr_db", "p", "q", "p_e", "sinr_user", "sinr_eve", "secrecy_asymptotic"])
    for pe in spec.pe_values or (cfg.P_E,):
        c = cfg.replace(P_E=pe)
        th = compute_theta_set(corr, c, attacked=True)
        for snr in spec.snr_grid_db:
            g = 10 ** (snr / 10)
            for p in p_values:
                s = power_split(p, c.N_t, c.K)
                w.writerow([_g(snr), _g(s.p), _g(s.q), _g(pe), _g(sinr_user_asymptotic(th, s, g)),
                            _g(sinr_eve_asymptotic(th, s, g)), _g(secrecy_rate_asymptotic(th, s, g))])
    if fh:
        fh.close()


def cmd_rate_exact(args) -> None:
    spec = _spec(args)
    if not args.scheme:
        spec = dataclasses.replace(spec, schemes=("MF_AN_FIXED",) if spec.p_values else ("MF_AN_OPT",))
    corr, cfg = _scenario(args, spec)
    spec = dataclasses.replace(spec, config=cfg)
    rows = run_sweep(spec, corr)
    emit_csv(rows, args.out or "-")


def cmd_sweep(args) -> None:
    spec = _spec(args)
    corr, cfg = _scenario(args, spec)
    spec = dataclasses.replace(spec, config=cfg)
    rows = run_sweep(spec, corr)
    emit_csv(rows, args.out or spec.output_path or "-")


def cmd_optimize_power(args) -> None:
    spec = _spec(args)
    corr, cfg = _scenario(args, spec)
    fh, w = _writer(args)
    w.writerow(["snr_db", "p_e", "domain", "p_star", "q_star", "rate_at_star", "threshold_kind", "threshold"])
    for pe in spec.pe_values or (cfg.P_E,):
        c = cfg.replace(P_E=pe)
        th = compute_theta_set(corr, c, attacked=True)
        for snr in spec.snr_grid_db:
            g = 10 ** (snr / 10)
            ft = feasibility_threshold(quadratic_coefficients(th, g, c.N_t, c.K))
            for dom in Domain:
                r = optimal_power(th, g, c.N_t, c.K, dom)
                w.writerow([_g(snr), _g(pe), dom.value, _g(r.p_star), _g(r.q_star), _g(r.rate_at_star),
                            ft.kind.value, _g(ft.threshold)])
    if fh:
        fh.close()


def cmd_nullspace(args) -> None:
    spec = _spec(args)
    corr, cfg = _scenario(args, spec)
    fh, w = _writer(args)
    w.writerow(["snr_db", "p_e", "M", "rate_asymptotic"])
    for pe in spec.pe_values or (cfg.P_E,):
        c = cfg.replace(P_E=pe)
        try:
            ctx = build_nullspace_context(corr, c, spec.rank_tol)
        except NotApplicableError as e:
            log.warning("%s", e)
            for snr in spec.snr_grid_db:
                w.writerow([_g(snr), _g(pe), 0, "NA"])
            continue
        for snr in spec.snr_grid_db:
            w.writerow([_g(snr), _g(pe), ctx.M, _g(nullspace_asymptotic_rate(corr, c, 10 ** (snr / 10), ctx=ctx))])
    if fh:
        fh.close()


def cmd_diagnostics(args) -> None:
    spec = _spec(args)
    ladder = [int(x) for x in parse_floats(args.n_t)]
    rows = convergence_diagnostics(spec.config, ladder, args.trials or 200)
    text = diagnostics_csv(rows)
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secmimo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials=False, scheme=False, p_flag=False, pe=False, rank_tol=False, scenario=True):
        p.add_argument("--config", help="experiment JSON (default: shipped reference experiment)")
        p.add_argument("--seed", type=int)
        p.add_argument("--snr-db", help="SNR grid in dB, a:b:step or comma list")
        p.add_argument("--rescramble", type=int, metavar="REP", help="draw fresh mean AoAs for repetition REP")
        p.add_argument("--out", help="output path ('-' for stdout)")
        if scenario:
            p.add_argument("--scenario", help="load a saved scenario file instead of building one")
        if trials:
            p.add_argument("--trials", type=int)
        if scheme:
            p.add_argument("--scheme", action="append", choices=SCHEMES)
        if p_flag:
            p.add_argument("--p", help="signal power shares, comma list")
        if pe:
            p.add_argument("--pe", help="eavesdropper training powers, comma list")
        if rank_tol:
            p.add_argument("--rank-tol", type=float)
        return p

    common(sub.add_parser("scenario", help="build and save the correlation matrices"), scenario=False)
    common(sub.add_parser("rate-asymptotic", help="large-system secrecy rate"), p_flag=True, pe=True)
    common(sub.add_parser("rate-exact", help="Monte Carlo ergodic rates"),
           trials=True, scheme=True, p_flag=True, pe=True, rank_tol=True)
    common(sub.add_parser("optimize-power", help="optimal signal/AN split and feasibility threshold"), pe=True)
    common(sub.add_parser("nullspace", help="null-space design rate"), pe=True, rank_tol=True)
    common(sub.add_parser("sweep", help="run an experiment and write its CSV"),
           trials=True, scheme=True, p_flag=True, pe=True, rank_tol=True)
    d = common(sub.add_parser("diagnostics", help="convergence of the large-system limits"),
               trials=True, scenario=False)
    d.add_argument("--n-t", default="64,256,1024", help="antenna ladder, comma list")
    return parser


COMMANDS = {
    "scenario": cmd_scenario,
    "rate-asymptotic": cmd_rate_asymptotic,
    "rate-exact": cmd_rate_exact,
    "optimize-power": cmd_optimize_power,
    "nullspace": cmd_nullspace,
    "sweep": cmd_sweep,
    "diagnostics": cmd_diagnostics,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
