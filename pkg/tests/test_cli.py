"""Tests for config loading, the experiment runner and the command-line entry point."""

import csv
import json

import pytest

from src.cli import main
from src.config import ErrorCode, exit_code_for
from src.runner.settings import load_config
from src.utils.errors import ValidationError


def run_cli(capsys, *argv):
    """Run the CLI and return (exit code, parsed stdout JSON)."""
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_overrides_are_applied():
    config = load_config(None, {"experiment": "moments", "law.alpha": 1.2, "geometry.N_grid": [16, 64], "disorder.a": 0.5})
    assert config.law.alpha == 1.2
    assert config.geometry.n_values() == [16, 64]


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"experiment": "moments", "law": {"alpha": 1.4}, "geometry": {"N": 32}, "disorder": {"a": 0.5}}))
    config = load_config(path, {"law.alpha": 1.3, "seed": None})
    assert config.law.alpha == 1.3
    assert config.geometry.N == 32
    assert config.seed == 0


@pytest.mark.parametrize(
    "overrides,field",
    [
        ({"law.bogus": 1}, "law.bogus"),
        ({"replicas": 1}, "replicas"),
        ({"disorder.beta_hat": 500.0}, "disorder.beta_hat"),
        ({"geometry.L": 0.5}, "geometry.L"),
    ],
)
def test_invalid_fields_are_named(overrides, field):
    base = {"experiment": "moments", "geometry.N": 16, "disorder.a": 0.5}
    with pytest.raises(ValidationError) as exc:
        load_config(None, {**base, **overrides})
    assert exc.value.details["field"] == field


def test_missing_config_file(tmp_path):
    with pytest.raises(ValidationError) as exc:
        load_config(tmp_path / "absent.json", {"experiment": "moments"})
    assert exc.value.details["field"] == "config"


def test_experiment_requirements():
    with pytest.raises(ValidationError) as exc:
        load_config(None, {"experiment": "truncation-curve", "geometry.N": 16})
    assert exc.value.details["field"] == "disorder.a_grid"
    with pytest.raises(ValidationError) as exc:
        load_config(None, {"experiment": "replica-moment", "geometry.N": 16, "disorder.a": 0.5})
    assert exc.value.details["field"] == "disorder.b"
    with pytest.raises(ValidationError) as exc:
        load_config(None, {"experiment": "converge", "geometry.N_grid": [16]})
    assert exc.value.details["field"] == "disorder.a"


def test_alpha_above_two_exits_2(capsys, tmp_path):
    code, payload = run_cli(capsys, "converge", "--alpha", "2.1", "--d", "2", "--N", "16", "--a", "0.5", "--output", str(tmp_path))
    assert code == 2
    assert payload["ok"] is False
    assert payload["error"]["code"] == ErrorCode.CONFIG_INVALID


def test_supercritical_alpha_exits_2(capsys, tmp_path):
    code, payload = run_cli(capsys, "moments", "--alpha", "1.8", "--d", "3", "--N", "16", "--a", "0.5", "--output", str(tmp_path))
    assert code == 2
    assert payload["error"]["details"]["field"] == "law.alpha"


def test_moments_run_is_reproducible(capsys, tmp_path):
    out = tmp_path / "moments"
    argv = ["moments", "--N-grid", "16,64,256", "--a", "0.5", "--a-grid", "0.2,0.5,1.0", "--replicas", "20", "--output", str(out)]
    code, payload = run_cli(capsys, *argv)
    assert code == 0
    assert payload["ok"] is True
    assert payload["data"]["files"] == ["moments.csv", "xi_variance.csv"]
    assert (out / "manifest.json").exists()

    rows = read_csv(out / "moments.csv")
    assert len(rows) == 3
    assert list(rows[0])[:3] == ["experiment_id", "seed", "config_hash"]
    first = {name: (out / name).read_bytes() for name in ("moments.csv", "xi_variance.csv")}

    code, _ = run_cli(capsys, *argv)
    assert code == 0
    for name, content in first.items():
        assert (out / name).read_bytes() == content

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"] == "moments"
    assert manifest["seed"] == 0
    assert set(manifest["versions"]) >= {"numpy", "scipy", "pydantic", "python"}


def test_verify_appendix_from_config_file(capsys, tmp_path):
    out = tmp_path / "appendix"
    path = tmp_path / "appendix.json"
    path.write_text(json.dumps({
        "experiment": "verify-appendix",
        "appendix": {"ks": [1, 2], "configs_per_k": 1, "samples": 2000, "dirichlet_trials": 3},
        "output": str(out),
    }))
    code, payload = run_cli(capsys, "verify-appendix", "--config", str(path))
    assert code == 0
    assert payload["data"]["summary"]["failed"] == 0
    rows = read_csv(out / "report.csv")
    assert len(rows) == 7
    assert all(row["pass"] == "true" for row in rows)
    assert (out / "calibration.csv").exists()


def test_simulate_discrete_smoke(capsys, tmp_path):
    out = tmp_path / "discrete"
    code, payload = run_cli(capsys, "simulate-discrete", "--N", "16", "--a", "0.5", "--replicas", "4", "--output", str(out))
    assert code == 0
    rows = read_csv(out / "samples.csv")
    assert [row["replica"] for row in rows] == ["0", "1", "2", "3"]
    assert all(float(row["partition"]) > 0 for row in rows)
    assert "N=16" in payload["data"]["summary"]


def test_simulate_continuum_saves_cloud(capsys, tmp_path):
    out = tmp_path / "continuum"
    code, payload = run_cli(capsys, "simulate-continuum", "--a", "0.5", "--replicas", "4", "--output", str(out))
    assert code == 0
    assert payload["data"]["files"] == ["cloud_replica0.csv", "partitions.csv", "samples.csv"]
    rows = read_csv(out / "partitions.csv")
    assert len(rows) == 4
    assert all(row["N"] == "" and row["normalization"] == "1.0" for row in rows)


def test_high_dimension_resource_guard_exits_3(capsys, tmp_path):
    code, payload = run_cli(
        capsys, "simulate-discrete", "--alpha", "1.2", "--d", "3", "--N", "64", "--replicas", "2", "--output", str(tmp_path),
    )
    assert code == 3
    assert payload["error"]["code"] == ErrorCode.RESOURCE_GUARD


def test_exit_code_mapping():
    assert exit_code_for(ErrorCode.CONFIG_INVALID) == 2
    assert exit_code_for(ErrorCode.DOMAIN_ERROR) == 2
    assert exit_code_for(ErrorCode.UNSUPPORTED_FUNCTIONAL) == 2
    assert exit_code_for(ErrorCode.RESOURCE_GUARD) == 3
    assert exit_code_for(ErrorCode.DEGENERATE) == 4
    assert exit_code_for(ErrorCode.IO_ERROR) == 1
    assert exit_code_for(ErrorCode.INTERNAL_ERROR) == 1


@pytest.mark.slow
def test_verify_appendix_full_run(capsys, tmp_path):
    code, payload = run_cli(capsys, "verify-appendix", "--output", str(tmp_path))
    assert code == 0
    assert payload["data"]["summary"]["failed"] == 0


PARTITION_HEADER = [
    "experiment_id", "N", "d", "alpha", "a", "b", "beta_hat", "functional", "value", "normalization", "seed", "replica",
]


def test_partition_rows_carry_their_parameters(capsys, tmp_path):
    out = tmp_path / "discrete"
    code, _ = run_cli(
        capsys, "simulate-discrete", "--N-grid", "16,32", "--alpha", "1.4", "--a", "0.5", "--beta-hat", "0.8",
        "--replicas", "3", "--seed", "5", "--output", str(out),
    )
    assert code == 0
    with open(out / "partitions.csv", newline="") as fh:
        assert next(csv.reader(fh)) == PARTITION_HEADER
    rows = read_csv(out / "partitions.csv")
    assert [row["N"] for row in rows] == ["16"] * 3 + ["32"] * 3
    assert {(row["d"], row["alpha"], row["a"], row["b"], row["beta_hat"], row["seed"]) for row in rows} == {
        ("1", "1.4", "0.5", "inf", "0.8", "5"),
    }
    assert all(row["functional"] == "constant_one" and row["normalization"] == "1.0" for row in rows)
    assert all(float(row["value"]) > 0 for row in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["csv_schema_version"] == 2


def test_runs_with_different_seeds_share_a_directory(capsys, tmp_path):
    out = tmp_path / "shared"
    argv = ["simulate-discrete", "--N", "16", "--a", "0.5", "--replicas", "2", "--output", str(out)]
    assert run_cli(capsys, *argv, "--seed", "1")[0] == 0
    assert run_cli(capsys, *argv, "--seed", "2")[0] == 0
    for name in ("samples.csv", "partitions.csv"):
        rows = read_csv(out / name)
        assert len(rows) == 4
        assert sorted({row["seed"] for row in rows}) == ["1", "2"]
    before = (out / "partitions.csv").read_bytes()

    assert run_cli(capsys, *argv, "--seed", "2")[0] == 0
    assert (out / "partitions.csv").read_bytes() == before
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["runs"]) == 2
    assert {run["seed"] for run in manifest["runs"].values()} == {1, 2}


def test_foreign_csv_layout_is_not_overwritten(capsys, tmp_path):
    out = tmp_path / "foreign"
    out.mkdir()
    (out / "samples.csv").write_text("x,y\n1,2\n")
    code, payload = run_cli(capsys, "simulate-discrete", "--N", "16", "--a", "0.5", "--replicas", "2", "--output", str(out))
    assert code == 1
    assert payload["error"]["code"] == ErrorCode.IO_ERROR
    assert (out / "samples.csv").read_text() == "x,y\n1,2\n"


def test_leading_run_verb_is_accepted(capsys, tmp_path):
    code, payload = run_cli(capsys, "run", "simulate-discrete", "--N", "16", "--a", "0.5", "--replicas", "2", "--output", str(tmp_path))
    assert code == 0
    assert payload["ok"] is True


def test_converge_writes_one_row_per_N_and_statistic(capsys, tmp_path):
    out = tmp_path / "converge"
    code, payload = run_cli(
        capsys, "run", "converge", "--N-grid", "16,32,64", "--a", "0.5", "--replicas", "10", "--output", str(out),
    )
    assert code == 0
    assert payload["data"]["files"] == ["distances.csv", "pairing_distances.csv"]
    rows = read_csv(out / "distances.csv")
    for statistic in ("ks", "wasserstein1"):
        chosen = [row for row in rows if row["statistic"] == statistic]
        assert [row["N_or_a"] for row in chosen] == ["16", "32", "64"]
    assert {row["component"] for row in rows} == {"partition"}
    assert {row["component"] for row in read_csv(out / "pairing_distances.csv")} == {"pairing"}
