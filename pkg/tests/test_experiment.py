import dataclasses
import json
import math

import pytest

from secmimo.experiment import (
    CSV_HEADER,
    SCHEMES,
    ExperimentSpec,
    ResultRow,
    SchemaError,
    emit_csv,
    load_experiment,
    parse_experiment,
    read_csv,
    reference_experiment,
    run_sweep,
)
from secmimo.errors import ValidationError


@pytest.fixture()
def ref_doc():
    return reference_experiment().to_dict()


def test_reference_parameters():
    spec = reference_experiment()
    c = spec.config
    assert (c.L, c.K, c.N_t, c.tau, c.m) == (3, 5, 128, 10, 1)
    assert (c.N0_ul, c.rho, c.P_E) == (1.0, 0.1, 1.0)
    assert (c.powers == 1.0).all() and c.powers.shape == (4, 5)
    assert c.sigma_as == pytest.approx(math.pi / 2)
    assert spec.snr_grid_db == tuple(float(x) for x in range(-10, 11, 2))
    assert set(spec.schemes) == set(SCHEMES)
    assert spec.trials == 500


def test_pilot_shortage_rejected(ref_doc):
    ref_doc["config"]["tau"] = 3
    with pytest.raises(ValidationError, match="tau"):
        parse_experiment(ref_doc)


def test_round_trip(ref_doc, tmp_path):
    spec = parse_experiment(ref_doc)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert load_experiment(path) == spec


@pytest.mark.parametrize(
    "mutate, pointer, word",
    [
        (lambda d: d["config"].update(bogus=1), "/config", "bogus"),
        (lambda d: d.update(extra=True), "", "extra"),
        (lambda d: d.update(trials=0), "/trials", "minimum"),
        (lambda d: d.update(schemes=["MF_AN_OPT", "ZF"]), "/schemes/1", "ZF"),
        (lambda d: d["snr_grid_db"].__setitem__(0, "x"), "/snr_grid_db/0", "number"),
    ],
)
def test_schema_errors_carry_pointer(ref_doc, mutate, pointer, word):
    mutate(ref_doc)
    with pytest.raises(SchemaError) as e:
        parse_experiment(ref_doc)
    assert e.value.pointer == pointer
    assert word in str(e.value)


def test_invalid_json_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load_experiment(p)


def test_fixed_scheme_needs_p_values(ref_doc):
    ref_doc.pop("p_values")
    with pytest.raises(ValidationError, match="p_values"):
        parse_experiment(ref_doc)
    spec = reference_experiment()
    with pytest.raises(ValidationError):
        dataclasses.replace(spec, p_values=(0.5,))


def _small_spec(small_config, **kw):
    base = dict(config=small_config, snr_grid_db=(0.0,), schemes=SCHEMES, trials=1, p_values=(0.2,))
    base.update(kw)
    return ExperimentSpec(**base)


def test_one_row_per_scheme(small_config):
    rows = run_sweep(_small_spec(small_config))
    assert sorted(r.scheme for r in rows) == sorted(SCHEMES)
    assert all(r.trials == 1 and r.seed == small_config.seed for r in rows)
    for r in rows:
        for v in (r.secrecy_exact, r.secrecy_asymptotic):
            assert v is None or v >= 0


def test_nullspace_rows_marked_not_applicable(small_config, caplog, tmp_path):
    rows = run_sweep(_small_spec(small_config, schemes=("NULLSPACE", "NAIVE_MF")))
    null = [r for r in rows if r.scheme == "NULLSPACE"]
    assert len(null) == 1 and null[0].secrecy_exact is None and null[0].secrecy_asymptotic is None
    assert "NULLSPACE" in caplog.text
    out = tmp_path / "o.csv"
    emit_csv(rows, out)
    rec = [r for r in read_csv(out) if r["scheme"] == "NULLSPACE"][0]
    assert rec["secrecy_exact"] == "NA" and rec["p"] == "NA"


def test_csv_byte_identical_and_ordered(small_config, tmp_path):
    spec = _small_spec(small_config, snr_grid_db=(4.0, -2.0), trials=3, pe_values=(10.0, 1.0), p_values=(0.3, 0.1))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_sweep(spec), a)
    emit_csv(run_sweep(spec), b)
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    recs = read_csv(a)
    keys = [(r["scheme"], float(r["snr_db"]), float(r["p_e"])) for r in recs]
    assert keys == sorted(keys)


def test_csv_thread_invariance(small_config, tmp_path, monkeypatch):
    spec = _small_spec(small_config, trials=60)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_sweep(spec), a)
    monkeypatch.setenv("SECMIMO_THREADS", "4")
    emit_csv(run_sweep(spec), b)
    assert a.read_bytes() == b.read_bytes()


def test_single_row_csv(tmp_path):
    row = ResultRow("NAIVE_MF", 2.0, 0.2, 0.0, 1.0, 1.2345678901234, 0.5, 0.7345678901234, 0.7, 10, 3)
    p = tmp_path / "one.csv"
    emit_csv([row], p)
    text = p.read_text()
    assert text.count("\n") == 2
    assert "1.23456789" in text and "," in text
    rec = read_csv(p)[0]
    for name in CSV_HEADER[1:]:
        want = getattr(row, name)
        assert float(rec[name]) == pytest.approx(want, rel=1e-9)


def test_reparse_reproduces_values(small_config, tmp_path):
    rows = run_sweep(_small_spec(small_config, trials=5, schemes=("MF_AN_OPT", "MF_AN_FIXED", "NAIVE_MF")))
    p = tmp_path / "r.csv"
    emit_csv(rows, p)
    for row, rec in zip(sorted(rows, key=ResultRow.sort_key), read_csv(p)):
        assert rec["scheme"] == row.scheme
        for name in CSV_HEADER[1:]:
            assert float(rec[name]) == pytest.approx(getattr(row, name), rel=1e-9, abs=1e-300)


def test_empty_rows_rejected(tmp_path):
    with pytest.raises(ValidationError):
        emit_csv([], tmp_path / "x.csv")


def test_unwritable_path(small_config, tmp_path):
    rows = run_sweep(_small_spec(small_config, schemes=("NAIVE_MF",)))
    with pytest.raises(OSError):
        emit_csv(rows, tmp_path / "missing" / "x.csv")


def test_user_rate_monotone_in_snr(ref_corr, ref_config):
    spec = dataclasses.replace(reference_experiment(), schemes=("MF_AN_FIXED", "NAIVE_MF"), pe_values=(1.0,))
    rows = run_sweep(spec, ref_corr)
    for scheme in ("MF_AN_FIXED", "NAIVE_MF"):
        for p in {r.p for r in rows if r.scheme == scheme}:
            seq = [r.rate_user_exact for r in rows if r.scheme == scheme and r.p == p]
            inversions = sum(b < a for a, b in zip(seq, seq[1:]))
            assert inversions <= 1
