"""End-to-end CLI: subcommands, file formats, exit codes, determinism."""

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest
from referencing import Registry, Resource

from zenopt import problems
from zenopt.cli import main
from zenopt.zeno import schedule_cor3
from zenopt.qcore import RankOneUniform, TransverseField


def load_schemas():
    base = Path(__import__("zenopt").__file__).parent / "schemas"
    instance = json.loads((base / "instance.schema.json").read_text())
    record = json.loads((base / "run_record.schema.json").read_text())
    registry = Registry().with_resource(
        "instance.schema.json", Resource.from_contents(instance)
    )
    return instance, record, registry


def run_cli(*args) -> int:
    return main(list(args))


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_qaoa_record_and_schema(tmp_path):
    out = tmp_path / "run.json"
    csv_path = tmp_path / "run.csv"
    code = run_cli(
        "run-qaoa", "--generate", "4,7", "--mixer", "cg", "--layers", "1",
        "--schedule", "eta=0.1", "--restarts", "8", "--budget", "2000",
        "--seed", "1", "--jobs", "1", "--out", str(out), "--csv", str(csv_path),
    )
    assert code == 0
    record = json.loads(out.read_text())
    instance_schema, record_schema, registry = load_schemas()
    jsonschema.validate(record["instance"], instance_schema)
    jsonschema.validate(record, record_schema, registry=registry)
    assert record["metrics"]["in_constraint_prob"] >= 0.95
    assert record["config"]["schedule"] == "eta=0.1"
    rows = read_csv(csv_path)
    assert len(rows) == 1
    assert float(rows[0]["in_constraint_prob"]) == pytest.approx(
        record["metrics"]["in_constraint_prob"]
    )


def test_run_qaoa_is_deterministic(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert run_cli(
            "run-qaoa", "--generate", "4,3", "--mixer", "x", "--layers", "1",
            "--schedule", "eta=0.4", "--restarts", "6", "--budget", "1200",
            "--seed", "9", "--jobs", "1", "--out", str(out),
        ) == 0
        outs.append(json.loads(out.read_text()))
    a, b = outs
    assert a["metrics"] == b["metrics"]
    assert a["optimizer"]["best_params"] == b["optimizer"]["best_params"]


def test_manual_zero_schedule_is_unmeasured_passthrough(tmp_path):
    out = tmp_path / "run.json"
    assert run_cli(
        "run-qaoa", "--generate", "4,7", "--mixer", "x", "--layers", "1",
        "--schedule", "manual=0", "--restarts", "6", "--budget", "1500",
        "--seed", "4", "--jobs", "1", "--out", str(out),
    ) == 0
    record = json.loads(out.read_text())
    assert record["metrics"]["total_measurements"] == 0.0
    # reproduce the unmeasured state directly and compare feasible mass
    from zenopt import ansatz, experiments

    inst = problems.PortfolioInstance.from_dict(record["instance"])
    bundle = experiments.ProblemBundle.build(inst)
    params = ansatz.QaoaParams.from_flat(np.asarray(record["optimizer"]["best_params"]))
    rho = ansatz.run_qaoa_zeno(
        bundle.cost_scaled, TransverseField(4), bundle.measurement, params,
        __import__("zenopt.zeno", fromlist=["ZenoSchedule"]).ZenoSchedule.manual([0]),
        bundle.initial,
    )
    metrics = problems.evaluate_metrics(rho, inst)
    assert metrics["in_constraint_prob"] == pytest.approx(
        record["metrics"]["in_constraint_prob"], abs=1e-12
    )


def test_penalty_conflicts_with_schedule():
    assert run_cli(
        "run-qaoa", "--generate", "4,7", "--penalty", "1.0",
        "--schedule", "eta=0.1",
    ) == 2


def test_penalty_run_emits_r_penalty(tmp_path):
    out = tmp_path / "pen.json"
    assert run_cli(
        "run-qaoa", "--generate", "4,7", "--mixer", "x", "--layers", "1",
        "--penalty", "2.0", "--restarts", "6", "--budget", "1500",
        "--seed", "3", "--jobs", "1", "--out", str(out),
    ) == 0
    record = json.loads(out.read_text())
    assert "r_penalty" in record["metrics"]
    assert record["metrics"]["total_measurements"] == 0.0


def test_instance_file_round_trip(tmp_path):
    inst = problems.generate_instance(4, 5)
    path = tmp_path / "instance.json"
    path.write_text(inst.to_json())
    out = tmp_path / "run.json"
    assert run_cli(
        "run-qaoa", "--instance", str(path), "--layers", "1",
        "--schedule", "eta=0.4", "--restarts", "4", "--budget", "800",
        "--seed", "0", "--jobs", "1", "--out", str(out),
    ) == 0
    record = json.loads(out.read_text())
    assert record["instance"] == inst.to_dict()


def test_infeasible_instance_exit_code(tmp_path):
    inst = problems.PortfolioInstance(
        n=2, q=0.5, sigma=np.eye(2), mu=np.ones(2),
        constraints=(problems.LinearConstraint((1.0, 1.0), problems.Sense.GEQ, 5.0),),
    )
    path = tmp_path / "bad.json"
    path.write_text(inst.to_json())
    assert run_cli(
        "run-qaoa", "--instance", str(path), "--schedule", "eta=0.1",
        "--out", str(tmp_path / "x.json"),
    ) == 3


def test_run_lvqe(tmp_path):
    out = tmp_path / "lvqe.json"
    assert run_cli(
        "run-lvqe", "--generate", "4,7", "--layers", "1", "--measurements", "50",
        "--restarts", "6", "--budget", "3000", "--seed", "2", "--jobs", "1",
        "--out", str(out),
    ) == 0
    record = json.loads(out.read_text())
    _, record_schema, registry = load_schemas()
    jsonschema.validate(record, record_schema, registry=registry)
    assert record["metrics"]["total_measurements"] == 50.0
    assert record["metrics"]["in_constraint_prob"] > 0.5


def test_sweep_eta_csv(tmp_path):
    csv_path = tmp_path / "sweep.csv"
    assert run_cli(
        "sweep", "eta", "--generate", "4,7", "--mixer", "cg", "--layers", "1",
        "--etas", "1.6,0.2", "--restarts", "4", "--budget", "800",
        "--seed", "5", "--jobs", "1", "--csv", str(csv_path),
    ) == 0
    rows = read_csv(csv_path)
    assert [r["value1"] for r in rows] == ["0.2", "1.6"]  # sorted by grid value
    assert list(rows[0]) == [
        "sweep_var", "value1", "value2", "r", "r_penalty",
        "in_constraint_prob", "total_measurements", "seed",
    ]
    # smaller eta means at least as many measurements
    assert float(rows[0]["total_measurements"]) >= float(rows[1]["total_measurements"])


def test_sweep_transfer_from_source(tmp_path):
    out = tmp_path / "source.json"
    assert run_cli(
        "run-qaoa", "--generate", "4,7", "--mixer", "x", "--layers", "1",
        "--schedule", "eta=1.6", "--restarts", "6", "--budget", "1500",
        "--seed", "8", "--jobs", "1", "--out", str(out),
    ) == 0
    csv_path = tmp_path / "transfer.csv"
    assert run_cli(
        "sweep", "transfer", "--generate", "4,7", "--transfer-from", str(out),
        "--etas", "1.6,0.1,0.025", "--jobs", "1", "--csv", str(csv_path),
    ) == 0
    rows = read_csv(csv_path)
    assert len(rows) == 3
    by_eta = {float(r["value1"]): r for r in rows}
    # transferring to smaller eta boosts the in-constraint probability
    assert (float(by_eta[0.025]["in_constraint_prob"])
            >= float(by_eta[1.6]["in_constraint_prob"]) - 1e-9)
    # and the source-eta row reproduces the source run's metrics
    source = json.loads(out.read_text())
    assert float(by_eta[1.6]["r"]) == pytest.approx(source["metrics"]["r"], abs=1e-12)


def test_sweep_lambda_two_dim(tmp_path):
    csv_path = tmp_path / "grid.csv"
    assert run_cli(
        "sweep", "lambda", "--generate", "4,2", "--return-constraint",
        "--mixer", "cg", "--layers", "1", "--lambdas", "0.5,2.0",
        "--lambdas2", "0.5,2.0", "--restarts", "3", "--budget", "600",
        "--seed", "1", "--jobs", "1", "--csv", str(csv_path),
    ) == 0
    rows = read_csv(csv_path)
    assert len(rows) == 4
    assert {(r["value1"], r["value2"]) for r in rows} == {
        ("0.5", "0.5"), ("0.5", "2.0"), ("2.0", "0.5"), ("2.0", "2.0"),
    }


def test_sweep_layers(tmp_path):
    csv_path = tmp_path / "layers.csv"
    assert run_cli(
        "sweep", "layers", "--generate", "4,7", "--mixer", "cg",
        "--layers-grid", "1,2", "--schedule", "eta=0.4",
        "--restarts", "3", "--budget", "600", "--seed", "1", "--jobs", "1",
        "--csv", str(csv_path),
    ) == 0
    rows = read_csv(csv_path)
    assert [r["value1"] for r in rows] == ["1", "2"]
    # penalty variant, and the two modes conflict
    assert run_cli(
        "sweep", "layers", "--generate", "4,7", "--layers-grid", "1",
        "--penalty", "1.0", "--restarts", "3", "--budget", "600",
        "--seed", "1", "--jobs", "1", "--csv", str(csv_path),
    ) == 0
    assert run_cli(
        "sweep", "layers", "--generate", "4,7", "--layers-grid", "1",
        "--penalty", "1.0", "--schedule", "eta=0.4", "--csv", str(csv_path),
    ) == 2


def test_sweep_parallel_jobs_match_serial(tmp_path):
    args = [
        "sweep", "eta", "--generate", "4,7", "--mixer", "cg", "--layers", "1",
        "--etas", "1.6,0.4,0.1", "--restarts", "3", "--budget", "600", "--seed", "2",
    ]
    serial, parallel = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    assert run_cli(*args, "--jobs", "1", "--csv", str(serial)) == 0
    assert run_cli(*args, "--jobs", "2", "--csv", str(parallel)) == 0
    assert serial.read_text() == parallel.read_text()


def test_sweep_empty_grid_rejected(tmp_path):
    assert run_cli(
        "sweep", "eta", "--generate", "4,7", "--etas", "",
        "--csv", str(tmp_path / "x.csv"),
    ) == 2


def test_scaling_table(tmp_path):
    csv_path = tmp_path / "scaling.csv"
    assert run_cli(
        "scaling-table", "--num-qubits", "3", "--deltas", "0.19",
        "--betas", f"0,{math.pi / 2},{math.pi}", "--csv", str(csv_path),
    ) == 0
    rows = read_csv(csv_path)
    by_key = {(r["mixer"], float(r["beta"])): int(r["n_measurements"]) for r in rows}
    assert by_key[("x", math.pi / 2)] == 93
    assert by_key[("cg", math.pi)] == 11
    assert by_key[("x", 0.0)] == 1 and by_key[("cg", 0.0)] == 1
    # monotone non-decreasing in |beta| per mixer
    for kind in ("x", "cg"):
        vals = [v for (mk, _), v in sorted(by_key.items()) if mk == kind]
        assert vals == sorted(vals)
    # rows reproduce the closed-form rule
    mix = {"x": TransverseField(3), "cg": RankOneUniform(3)}
    for r in rows:
        assert int(r["n_measurements"]) == schedule_cor3(
            mix[r["mixer"]], float(r["beta"]), 1, float(r["delta"]))


def test_scaling_table_delta_out_of_range(tmp_path):
    assert run_cli(
        "scaling-table", "--num-qubits", "3", "--deltas", "0.3",
        "--csv", str(tmp_path / "x.csv"),
    ) == 2


# ---------------------------------------------------------------------------
# compile-oracle
# ---------------------------------------------------------------------------


def test_compile_oracle_verify_and_emit(tmp_path, capsys):
    path = tmp_path / "oracle.txt"
    assert run_cli(
        "compile-oracle", "--constraint", "2,-1,-1,0 EQ 0", "--precision", "3",
        "--qcl", "--verify", "--emit", str(path),
    ) == 0
    text = capsys.readouterr().out
    assert "verification passed" in text
    assert "1 auxiliary" in text
    # emitted file parses back to the same ops
    from zenopt.oraclesim import Circuit

    circ = Circuit.from_text(path.read_text())
    assert circ.num_qubits == 5

    assert run_cli(
        "compile-oracle", "--constraint", "1,1,1,1 LEQ 2", "--precision", "4",
        "--verify",
    ) == 0


def test_compile_oracle_rejects_all_zero_coeffs():
    assert run_cli(
        "compile-oracle", "--constraint", "0,0 EQ 0", "--precision", "3",
    ) == 2


def test_compile_oracle_rejects_overflow():
    assert run_cli(
        "compile-oracle", "--constraint", "2,-1,-1,0 EQ 0", "--precision", "2",
    ) == 2


def test_compile_oracle_detects_corrupted_circuit(tmp_path, capsys):
    path = tmp_path / "oracle.txt"
    assert run_cli(
        "compile-oracle", "--constraint", "2,-1,-1,0 EQ 0", "--precision", "3",
        "--emit", str(path),
    ) == 0
    capsys.readouterr()
    # corrupt one rotation angle
    lines = path.read_text().splitlines()
    for i, line in enumerate(lines):
        if line.startswith("CP"):
            parts = line.split()
            parts[-1] = repr(float(parts[-1]) + 0.4)
            lines[i] = " ".join(parts)
            break
    path.write_text("\n".join(lines) + "\n")
    code = run_cli(
        "compile-oracle", "--constraint", "2,-1,-1,0 EQ 0", "--precision", "3",
        "--check-file", str(path),
    )
    assert code == 4
    err = capsys.readouterr().err
    assert "verification failed" in err and "input x=" in err
