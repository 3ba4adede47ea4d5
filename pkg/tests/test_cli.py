"""Command-line surface: option resolution, subcommands, error contracts."""

import json
import os

import pytest

from screenaudit.cli import (
    Options,
    build_parser,
    load_config_file,
    main,
    parse_spec,
)
from screenaudit.data import Aggregation, HealthSet, ModelSpec, Preprocessing
from screenaudit.errors import ScreenAuditError
from screenaudit.report import AuditConfig, run_audit_report


class TestConfigFile:
    def test_parses_comments_blanks_and_dashes(self, tmp_path):
        path = tmp_path / "conf"
        path.write_text(
            "# a comment\n"
            "\n"
            "n-tracts = 50   # trailing comment\n"
            "spec=aggregation=additive\n"
        )
        parsed = load_config_file(str(path))
        assert parsed == {"n_tracts": "50", "spec": "aggregation=additive"}

    def test_bad_line_rejected(self, tmp_path):
        path = tmp_path / "conf"
        path.write_text("just a bare word\n")
        with pytest.raises(ScreenAuditError, match="line 1"):
            load_config_file(str(path))


class TestParseSpec:
    def test_empty_is_default(self):
        assert parse_spec(None) == ModelSpec()
        assert parse_spec("") == ModelSpec()

    def test_full_string(self):
        spec = parse_spec(
            "preprocessing=zscore,aggregation=additive,"
            "health_set=extended,threshold=0.8,weight.ozone=0.5"
        )
        assert spec.preprocessing is Preprocessing.ZSCORE
        assert spec.aggregation is Aggregation.ADDITIVE
        assert spec.health_set is HealthSet.EXTENDED
        assert spec.threshold_quantile == 0.8
        assert spec.weights == {"ozone": 0.5}

    def test_threshold_quantile_alias(self):
        assert parse_spec("threshold_quantile=0.9").threshold_quantile == 0.9

    def test_errors(self):
        with pytest.raises(ScreenAuditError, match="unknown key"):
            parse_spec("bogus=1")
        with pytest.raises(ScreenAuditError, match="bad value"):
            parse_spec("preprocessing=log")
        with pytest.raises(ScreenAuditError, match="key=value"):
            parse_spec("zscore")


def options_for(argv, monkeypatch=None, env=None, config_text=None, tmp_path=None):
    if config_text is not None:
        config = tmp_path / "conf"
        config.write_text(config_text)
        argv = argv + ["--config", str(config)]
    if env:
        for key, value in env.items():
            monkeypatch.setenv(key, value)
    return Options(build_parser().parse_args(argv))


class TestOptionResolution:
    def test_flag_beats_environment(self, monkeypatch):
        opt = options_for(
            ["score", "--tracts", "flag.csv"],
            monkeypatch, env={"SCREENAUDIT_TRACTS": "env.csv"},
        )
        assert opt.get("tracts") == "flag.csv"

    def test_environment_beats_config(self, monkeypatch, tmp_path):
        opt = options_for(
            ["score"], monkeypatch,
            env={"SCREENAUDIT_TRACTS": "env.csv"},
            config_text="tracts=config.csv\n", tmp_path=tmp_path,
        )
        assert opt.get("tracts") == "env.csv"

    def test_config_beats_default(self, tmp_path):
        opt = options_for(
            ["score"], config_text="tracts=config.csv\n", tmp_path=tmp_path
        )
        assert opt.get("tracts") == "config.csv"
        assert opt.get("spec", "fallback") == "fallback"

    def test_required_without_default_raises(self):
        opt = options_for(["score"])
        with pytest.raises(ScreenAuditError, match="--tracts"):
            opt.get("tracts", required=True)

    def test_cast_failure_names_flag(self):
        opt = options_for(["audit", "--seed", "not-a-number"])
        with pytest.raises(ScreenAuditError, match="--seed"):
            opt.get("seed", cast=int)

    def test_boolean_flag_parsing(self):
        for text, expected in (
            ("1", True), ("true", True), ("YES", True), ("on", True),
            ("0", False), ("false", False), ("off", False),
        ):
            opt = options_for(["synth", "--extended", text])
            assert opt.flag("extended") is expected
        assert options_for(["synth"]).flag("extended") is False


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """A seeded synthetic input set shared by the subcommand tests."""
    out = tmp_path_factory.mktemp("synth")
    status = main(
        [
            "synth", "--n-tracts", "400", "--seed", "77",
            "--noise-sd", "0.3", "--defects", "true", "--out", str(out),
        ]
    )
    assert status == 0
    return out


@pytest.fixture(scope="module")
def small_synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth_small")
    assert main(["synth", "--n-tracts", "80", "--seed", "5",
                 "--out", str(out)]) == 0
    return out


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


class TestSynthCommand:
    def test_outputs(self, synth_dir):
        for name in (
            "schema.json", "tracts.csv", "demographics.csv",
            "districts.csv", "projects.csv", "synth.json",
        ):
            assert (synth_dir / name).exists(), name
        payload = read_json(synth_dir / "synth.json")
        assert payload["n_tracts"] == 400
        assert payload["seed"] == 77
        assert payload["n_projects"] > 400  # district projects + defects


class TestScoreCommand:
    def test_roundtrip_and_designation_count(self, synth_dir, tmp_path):
        status = main(
            [
                "score", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--out", str(tmp_path),
            ]
        )
        assert status == 0
        payload = read_json(tmp_path / "score.json")
        assert payload["n_tracts"] == 400
        assert payload["n_scored"] == 400
        assert payload["n_designated"] == 100  # ceil(0.25 * 400)
        assert (tmp_path / "scores.csv").exists()

    def test_spec_flag_changes_model(self, synth_dir, tmp_path):
        status = main(
            [
                "score", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--spec", "aggregation=additive,threshold=0.9",
                "--out", str(tmp_path),
            ]
        )
        assert status == 0
        payload = read_json(tmp_path / "score.json")
        assert "additive" in payload["spec"]
        assert payload["n_designated"] == 40  # ceil(0.10 * 400)

    def test_env_supplies_spec(self, synth_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("SCREENAUDIT_SPEC", "aggregation=additive")
        status = main(
            [
                "score", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--out", str(tmp_path),
            ]
        )
        assert status == 0
        assert "additive" in read_json(tmp_path / "score.json")["spec"]

    def test_config_file_supplies_tracts(self, synth_dir, tmp_path):
        config = tmp_path / "conf"
        config.write_text(
            f"tracts={synth_dir / 'tracts.csv'}\n"
            f"schema={synth_dir / 'schema.json'}\n"
            f"out={tmp_path}\n"
        )
        assert main(["score", "--config", str(config)]) == 0
        assert (tmp_path / "score.json").exists()


class TestAuditCommand:
    def run_audit(self, synth_dir, out):
        return main(
            [
                "audit", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--seed", "11", "--format", "json,csv,svg",
                "--out", str(out),
            ]
        )

    def test_outputs_and_rerun_byte_identical(self, synth_dir, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert self.run_audit(synth_dir, out1) == 0
        assert self.run_audit(synth_dir, out2) == 0
        names = sorted(os.listdir(out1))
        assert names == sorted(os.listdir(out2))
        for name in (
            "audit.json", "churn.csv", "omitted_category.csv", "ranges.csv",
            "band.csv", "scores.csv", "diagnostics.csv", "band.svg",
            "churn.svg",
        ):
            assert name in names, name
        for name in names:
            a = (out1 / name).read_bytes()
            b = (out2 / name).read_bytes()
            assert a == b, f"{name} differs between reruns"
        payload = read_json(out1 / "audit.json")
        assert payload["n_scored"] == 400
        assert 0.0 <= payload["overall_sensitivity"] <= 100.0
        assert payload["band_width_p75"] is not None
        assert set(payload["churn_vs_base"]) >= {
            "zscore+multiplicative+baseline",
            "percentile_rank+additive+extended",
        }

    def test_jobs_do_not_change_outputs(self, synth_dir, tmp_path):
        out1 = tmp_path / "serial"
        out2 = tmp_path / "parallel"
        assert self.run_audit(synth_dir, out1) == 0
        assert main(
            [
                "audit", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--seed", "11", "--format", "json,csv,svg",
                "--jobs", "3", "--out", str(out2),
            ]
        ) == 0
        assert (out1 / "audit.json").read_bytes() == (out2 / "audit.json").read_bytes()


class TestRddCommand:
    def test_estimates_planted_effect(self, synth_dir, tmp_path):
        status = main(
            [
                "rdd", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--projects", str(synth_dir / "projects.csv"),
                "--bandwidth", "25", "--covariates", "none",
                "--out", str(tmp_path),
            ]
        )
        assert status == 0
        payload = read_json(tmp_path / "rdd.json")
        assert abs(payload["tau"] - 0.7) < 1.0
        assert payload["percent_ci"][0] <= payload["percent"] <= payload["percent_ci"][1]
        assert (tmp_path / "rdd_grid.csv").exists()
        assert payload["n_repair_actions"] == 2  # the planted defects

    def test_list_covariates_require_demographics(self, synth_dir, tmp_path):
        status = main(
            [
                "rdd", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--projects", str(synth_dir / "projects.csv"),
                "--bandwidth", "25", "--covariates", "poverty_share",
                "--out", str(tmp_path),
            ]
        )
        assert status == 1


class TestMatchCommand:
    def test_pooled_rows(self, synth_dir, tmp_path):
        status = main(
            [
                "match", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--projects", str(synth_dir / "projects.csv"),
                "--m", "3", "--calipers", "0.2,0.4",
                "--out", str(tmp_path),
            ]
        )
        assert status == 0
        payload = read_json(tmp_path / "match.json")
        assert payload["m"] == 3
        assert len(payload["grid"]) == 2
        assert [row["caliper"] for row in payload["grid"]] == [0.2, 0.4]
        assert (tmp_path / "match.csv").exists()


class TestAttributeCommand:
    def test_repairs_and_profile(self, synth_dir, tmp_path):
        status = main(
            [
                "attribute", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--projects", str(synth_dir / "projects.csv"),
                "--binwidth", "20", "--out", str(tmp_path),
            ]
        )
        assert status == 0
        lines = (tmp_path / "repairs.jsonl").read_text().splitlines()
        assert {json.loads(line)["project_id"] for line in lines} == {
            "PBAD0001", "PBAD0002",
        }
        assert (tmp_path / "funding.csv").exists()
        assert (tmp_path / "profile.csv").exists()
        payload = read_json(tmp_path / "attribute.json")
        assert payload["n_repair_actions"] == 2
        assert payload["total_attributed"] > 0


class TestAdversarialCommand:
    def test_maximize_direction(self, small_synth_dir, tmp_path):
        status = main(
            [
                "adversarial",
                "--tracts", str(small_synth_dir / "tracts.csv"),
                "--schema", str(small_synth_dir / "schema.json"),
                "--demographics", str(small_synth_dir / "demographics.csv"),
                "--kind", "party", "--label", "blue",
                "--direction", "maximize", "--multistart", "none",
                "--out", str(tmp_path),
            ]
        )
        assert status == 0
        payload = read_json(tmp_path / "adversarial.json")
        assert payload["direction"] == "maximize"
        assert payload["objective"] >= 0
        assert (tmp_path / "trace.csv").exists()

    def test_range_requires_party(self, small_synth_dir, tmp_path):
        status = main(
            [
                "adversarial",
                "--tracts", str(small_synth_dir / "tracts.csv"),
                "--schema", str(small_synth_dir / "schema.json"),
                "--demographics", str(small_synth_dir / "demographics.csv"),
                "--kind", "race", "--label", "groupa",
                "--direction", "range", "--out", str(tmp_path),
            ]
        )
        assert status == 1


class TestErrorContract:
    def test_missing_file_prints_json_and_exits_1(self, capsys, tmp_path):
        status = main(
            ["score", "--tracts", str(tmp_path / "missing.csv"),
             "--out", str(tmp_path)]
        )
        assert status == 1
        err = capsys.readouterr().err.strip()
        payload = json.loads(err)
        assert "message" in payload and "error" in payload

    def test_bad_spec_through_main(self, synth_dir, tmp_path, capsys):
        status = main(
            [
                "score", "--tracts", str(synth_dir / "tracts.csv"),
                "--schema", str(synth_dir / "schema.json"),
                "--spec", "bogus=1", "--out", str(tmp_path),
            ]
        )
        assert status == 1
        assert "bogus" in json.loads(capsys.readouterr().err)["message"]

    def test_audit_failure_writes_error_json(self, tmp_path):
        config = AuditConfig(
            tracts=str(tmp_path / "missing.csv"), out_dir=str(tmp_path)
        )
        assert run_audit_report(config) == 1
        payload = read_json(tmp_path / "error.json")
        assert payload["error"] == "FileNotFoundError"
