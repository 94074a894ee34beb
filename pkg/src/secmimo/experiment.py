"""Experiment specs, SNR/power/attack sweeps and CSV output."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .asymptotic import compute_theta_set, secrecy_rate_asymptotic
from .channel import SystemConfig, build_scenario
from .downlink import monte_carlo_forms, no_an_split, power_split, rates_from_forms
from .errors import NotApplicableError, ValidationError
from .nullspace import DEFAULT_REL_TOL, build_nullspace_context, nullspace_asymptotic_rate
from .power import optimal_power

SCHEMES = ("MF_AN_OPT", "MF_AN_FIXED", "NAIVE_MF", "NULLSPACE")
CSV_HEADER = (
    "scheme", "snr_db", "p", "q", "p_e", "rate_user_exact", "rate_eve_exact",
    "secrecy_exact", "secrecy_asymptotic", "trials", "seed",
)
NA = "NA"

log = logging.getLogger(__name__)

_number = {"type": "number"}
_posint = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "L": {"type": "integer", "minimum": 0},
        "K": _posint,
        "N_t": _posint,
        "tau": _posint,
        "m": _posint,
        "P_ul": {
            "oneOf": [
                {"type": "number", "exclusiveMinimum": 0},
                {"type": "array", "items": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}}},
            ]
        },
        "P_E": {"type": "number", "minimum": 0},
        "N0_ul": {"type": "number", "exclusiveMinimum": 0},
        "gamma": {"type": "number", "minimum": 0},
        "rho": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "sigma_as": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "eve_cross_gain": {"type": ["number", "null"], "exclusiveMinimum": 0, "maximum": 1},
        "aoa_interval": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "quad_points": {"type": ["integer", "null"], "minimum": 256},
    },
}

EXPERIMENT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["config", "snr_grid_db", "schemes", "trials"],
    "properties": {
        "config": CONFIG_SCHEMA,
        "snr_grid_db": {"type": "array", "minItems": 1, "items": _number},
        "schemes": {"type": "array", "minItems": 1, "uniqueItems": True, "items": {"enum": list(SCHEMES)}},
        "trials": _posint,
        "p_values": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "pe_values": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "output_path": {"type": "string"},
        "rank_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "repetition": {"type": "integer", "minimum": 0},
    },
}


class SchemaError(ValidationError):
    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


@dataclass(frozen=True)
class ExperimentSpec:
    config: SystemConfig
    snr_grid_db: tuple
    schemes: tuple
    trials: int
    p_values: tuple = ()
    pe_values: tuple = ()
    output_path: str | None = None
    rank_tol: float = DEFAULT_REL_TOL
    repetition: int = 0

    def __post_init__(self):
        if not self.snr_grid_db:
            raise ValidationError("snr_grid_db must be non-empty")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise ValidationError(f"unknown scheme(s) {sorted(bad)}")
        if "MF_AN_FIXED" in self.schemes:
            if not self.p_values:
                raise ValidationError("MF_AN_FIXED needs p_values")
            for p in self.p_values:
                power_split(p, self.config.N_t, self.config.K)

    @property
    def attack_powers(self) -> tuple:
        return self.pe_values or (self.config.P_E,)

    def to_dict(self) -> dict:
        d = {
            "config": self.config.to_dict(),
            "snr_grid_db": list(self.snr_grid_db),
            "schemes": list(self.schemes),
            "trials": self.trials,
            "rank_tol": self.rank_tol,
            "repetition": self.repetition,
        }
        if self.p_values:
            d["p_values"] = list(self.p_values)
        if self.pe_values:
            d["pe_values"] = list(self.pe_values)
        if self.output_path is not None:
            d["output_path"] = self.output_path
        return d


def _pointer(err: jsonschema.ValidationError) -> str:
    return "".join(f"/{p}" for p in err.absolute_path)


def parse_experiment(doc: dict) -> ExperimentSpec:
    validator = jsonschema.Draft202012Validator(EXPERIMENT_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(_pointer(err), err.message)
    return ExperimentSpec(
        config=SystemConfig.from_dict(doc["config"]),
        snr_grid_db=tuple(float(x) for x in doc["snr_grid_db"]),
        schemes=tuple(doc["schemes"]),
        trials=int(doc["trials"]),
        p_values=tuple(float(x) for x in doc.get("p_values", ())),
        pe_values=tuple(float(x) for x in doc.get("pe_values", ())),
        output_path=doc.get("output_path"),
        rank_tol=float(doc.get("rank_tol", DEFAULT_REL_TOL)),
        repetition=int(doc.get("repetition", 0)),
    )


def load_experiment(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaError("", f"invalid JSON: {e}") from None
    return parse_experiment(doc)


def reference_experiment() -> ExperimentSpec:
    """The shipped reference experiment (data/reference.json)."""
    text = resources.files("secmimo").joinpath("data/reference.json").read_text(encoding="utf-8")
    return parse_experiment(json.loads(text))


def reference_config() -> SystemConfig:
    return reference_experiment().config


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    snr_db: float
    p: float | None
    q: float | None
    p_e: float
    rate_user_exact: float | None
    rate_eve_exact: float | None
    secrecy_exact: float | None
    secrecy_asymptotic: float | None
    trials: int
    seed: int

    def sort_key(self):
        return (self.scheme, self.snr_db, self.p_e, -1.0 if self.p is None else self.p)


def run_sweep(spec: ExperimentSpec, corr=None) -> list[ResultRow]:
    """Evaluate every (scheme, SNR, p, P_E) point; one scenario shared by all points.

    Trials use common random numbers across attack powers and SNR points.
    """
    cfg0 = spec.config
    if corr is None:
        corr = build_scenario(cfg0, repetition=spec.repetition)
    N, K, seed = cfg0.N_t, cfg0.K, cfg0.seed
    rows: list[ResultRow] = []
    for pe in spec.attack_powers:
        cfg = cfg0.replace(P_E=pe)
        null_ctx = None
        if "NULLSPACE" in spec.schemes:
            try:
                null_ctx = build_nullspace_context(corr, cfg, spec.rank_tol)
            except NotApplicableError as e:
                log.warning("NULLSPACE rows marked NA: %s", e)
        thetas = compute_theta_set(corr, cfg, attacked=True)
        forms = monte_carlo_forms(corr, cfg, spec.trials, seed, True, null_ctx)
        for snr_db in spec.snr_grid_db:
            g = 10.0 ** (snr_db / 10.0)

            def row(scheme, p, q, exact, asy):
                return ResultRow(
                    scheme, snr_db, p, q, pe,
                    None if exact is None else exact.rate_user,
                    None if exact is None else exact.rate_eve,
                    None if exact is None else exact.secrecy,
                    asy, spec.trials, seed,
                )

            for scheme in spec.schemes:
                if scheme == "MF_AN_FIXED":
                    for p in spec.p_values:
                        s = power_split(p, N, K)
                        rows.append(row(scheme, s.p, s.q, rates_from_forms(forms, s.p, s.q, g),
                                        secrecy_rate_asymptotic(thetas, s, g)))
                elif scheme == "MF_AN_OPT":
                    opt = optimal_power(thetas, g, N, K)
                    s = power_split(min(opt.p_star, 1.0 / K), N, K)
                    rows.append(row(scheme, s.p, s.q, rates_from_forms(forms, s.p, s.q, g),
                                    secrecy_rate_asymptotic(thetas, s, g)))
                elif scheme == "NAIVE_MF":
                    s = no_an_split(N, K)
                    rows.append(row(scheme, s.p, s.q, rates_from_forms(forms, s.p, s.q, g),
                                    secrecy_rate_asymptotic(thetas, s, g)))
                elif scheme == "NULLSPACE":
                    if null_ctx is None:
                        rows.append(row(scheme, None, None, None, None))
                    else:
                        p = 1.0 / K
                        asy = nullspace_asymptotic_rate(corr, cfg, g, ctx=null_ctx)
                        rows.append(row(scheme, p, 0.0, rates_from_forms(forms, p, 0.0, g, nullspace=True), asy))
    rows.sort(key=ResultRow.sort_key)
    return rows


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return NA
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".10g")


def format_rows(rows: list[ResultRow]) -> list[list[str]]:
    return [[r.scheme] + [_fmt(getattr(r, c)) for c in CSV_HEADER[1:]] for r in rows]


def emit_csv(rows: list[ResultRow], path) -> None:
    """Write rows with the fixed header; '-' writes to stdout."""
    if not rows:
        raise ValidationError("no rows to write")
    rows = sorted(rows, key=ResultRow.sort_key)
    if str(path) == "-":
        import sys

        _write(sys.stdout, rows)
        return
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        _write(fh, rows)


def _write(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(format_rows(rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
