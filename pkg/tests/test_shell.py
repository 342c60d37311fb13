import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pdhlock.cli import main
from pdhlock.config import (
    ConfigError,
    load_project,
    model_from_dict,
    model_to_dict,
    project_from_dict,
    project_to_dict,
    validate_document,
)
from pdhlock.serialize import dumps_canonical
from pdhlock.transfer import (
    CavityPole,
    Delay,
    FirstOrderHighPass,
    Gain,
    Integrator,
    LowPassButterworth,
    PdLockin,
    Pid,
    Tabulated,
    bode_grid,
    compose,
)


class TestModelDocuments:
    MODELS = [
        Gain(2.5, "demo"),
        Pid(1.5, 2e3, 1.5e6),
        Pid(1.5, 0.0, None),
        Integrator(37.0),
        LowPassButterworth(8, 14e6),
        FirstOrderHighPass(25.0),
        Delay(39.6e-9),
        CavityPole(45.7e3),
        PdLockin(3, 150e6, 20e6),
        compose([Gain(2.0), CavityPole(1e5), Delay(1e-8)]),
        Tabulated(bode_grid(CavityPole(1e5), 10, 1e6, 20)),
    ]

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: type(m).__name__)
    def test_roundtrip_preserves_response(self, model):
        doc = model_to_dict(model)
        back = model_from_dict(doc)
        f = np.logspace(1.2, 5.8, 40)
        assert np.allclose(back.response(f), model.response(f), rtol=1e-12, atol=1e-300)

    def test_tabulated_from_csv_path(self, tmp_path, fixtures_dir):
        doc = {"type": "tabulated", "csv_path": "config3_alpha.csv"}
        model = model_from_dict(doc, base_dir=fixtures_dir)
        assert abs(model.at(1.06e6)) == pytest.approx(1.0, abs=0.01)

    def test_unknown_type_rejected(self):
        with pytest.raises(ConfigError):
            model_from_dict({"type": "laplace"})


class TestProjectDocuments:
    def test_serialize_parse_serialize_is_fixed_point(self, config3_doc):
        pc = project_from_dict(config3_doc)
        once = project_to_dict(pc)
        twice = project_to_dict(project_from_dict(once))
        assert dumps_canonical(once) == dumps_canonical(twice)

    def test_schema_rejects_zero_linewidth(self, config3_doc):
        doc = json.loads(json.dumps(config3_doc))
        doc["loop"]["discriminator"]["delta_nu_c_Hz"] = 0
        with pytest.raises(ConfigError) as exc:
            project_from_dict(doc)
        assert "delta_nu_c_Hz" in str(exc.value)

    def test_schema_rejects_unknown_top_level_field(self, config3_doc):
        doc = json.loads(json.dumps(config3_doc))
        doc["surprise"] = 1
        with pytest.raises(ConfigError):
            project_from_dict(doc)

    def test_missing_schema_version(self, config3_doc):
        doc = json.loads(json.dumps(config3_doc))
        del doc["schema_version"]
        with pytest.raises(ConfigError):
            project_from_dict(doc)

    def test_all_fixture_configs_load(self, fixtures_dir):
        for name in ("config1", "config2", "config3"):
            pc = load_project(fixtures_dir / f"{name}.json")
            assert pc.loop.discriminator.delta_nu_c == pytest.approx(45.7e3)

    def test_every_shipped_schema_is_valid(self):
        from importlib import resources

        from jsonschema import Draft202012Validator

        schema_dir = resources.files("pdhlock") / "schemas"
        names = [e.name for e in schema_dir.iterdir() if e.name.endswith(".schema.json")]
        assert len(names) >= 10
        for name in names:
            Draft202012Validator.check_schema(json.loads((schema_dir / name).read_text()))


class TestCanonicalJson:
    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_floats_roundtrip_exactly(self, x):
        assert json.loads(dumps_canonical({"x": x}))["x"] == x

    def test_numpy_types_become_json(self):
        doc = {"a": np.float64(1.5), "b": np.int64(3), "c": np.bool_(True),
               "d": np.array([1.0, 2.0])}
        assert json.loads(dumps_canonical(doc)) == {"a": 1.5, "b": 3, "c": True, "d": [1.0, 2.0]}

    def test_key_order_is_deterministic(self):
        a = dumps_canonical({"b": 1, "a": 2})
        b = dumps_canonical({"a": 2, "b": 1})
        assert a == b == '{"a":2,"b":1}'


class TestCli:
    def run(self, capsys, *argv):
        code = main(list(argv))
        out = capsys.readouterr().out
        return code, out

    def test_margins_json(self, capsys, fixtures_dir):
        code, out = self.run(capsys, "margins", "--config", str(fixtures_dir / "config3.json"),
                             "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["f_ug_Hz"] == pytest.approx(1.06e6, rel=0.02)
        assert doc["phi_m_deg"] == pytest.approx(54.0, abs=2.0)
        validate_document(doc, "margins_report")

    def test_margins_from_trace(self, capsys, fixtures_dir):
        code, out = self.run(capsys, "margins", "--trace",
                             str(fixtures_dir / "config3_alpha.csv"), "--json")
        assert code == 0
        assert json.loads(out)["f_ug_Hz"] == pytest.approx(1.06e6, rel=0.02)

    def test_ringdown(self, capsys, fixtures_dir):
        code, out = self.run(capsys, "ringdown", str(fixtures_dir / "ringdown.csv"), "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["parameters"]["delta_nu_c_Hz"]["value"] == pytest.approx(45.7e3, rel=0.005)
        validate_document(doc, "fit_report")

    def test_bode_identity_is_flat(self, capsys):
        code, out = self.run(capsys, "bode", "--model", "identity")
        assert code == 0
        rows = [l for l in out.splitlines() if l and not l.startswith(("#", "frequency"))]
        data = np.array([[float(c) for c in r.split(",")] for r in rows])
        assert np.allclose(data[:, 1], 0.0) and np.allclose(data[:, 2], 0.0)

    def test_closed2open_recovers_margins(self, capsys, fixtures_dir, tmp_path):
        out_csv = tmp_path / "alpha.csv"
        code, _ = self.run(capsys, "closed2open", "--trace",
                           str(fixtures_dir / "config3_closed.csv"), "-o", str(out_csv))
        assert code == 0
        code, out = self.run(capsys, "margins", "--trace", str(out_csv), "--json")
        assert json.loads(out)["f_ug_Hz"] == pytest.approx(1.06e6, rel=0.02)

    def test_budget(self, capsys, fixtures_dir):
        code, out = self.run(capsys, "budget", "--config", str(fixtures_dir / "config3.json"),
                             "--f-ref", "1.06e6", "--measured-phase", "-126", "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["sum_deg"] == pytest.approx(-125.0, abs=1.0)
        assert abs(doc["residual_deg"]) < 5.0
        validate_document(doc, "phase_budget")

    def test_psd_pipeline(self, capsys, fixtures_dir, tmp_path):
        out_csv = tmp_path / "sy1.csv"
        code, _ = self.run(
            capsys, "psd", "--sy4", str(fixtures_dir / "sy4_config3.csv"),
            "--config", str(fixtures_dir / "config3.json"),
            "--baseline", str(fixtures_dir / "pd_baseline_config3.csv"), "-o", str(out_csv),
        )
        assert code == 0
        from pdhlock.noise import read_psd_csv

        psd = read_psd_csv(out_csv)
        at5m = float(np.interp(np.log10(5e6), np.log10(psd.freqs), psd.values))
        assert at5m == pytest.approx(2e3, rel=0.10)

    def test_linewidth_model(self, capsys):
        code, out = self.run(capsys, "linewidth", "--h-minus1", "5e8", "--h0", "2e3",
                             "--f-low", "10", "--json")
        assert code == 0
        assert json.loads(out)["fwhm_Hz"] == pytest.approx(150e3, abs=10e3)

    def test_advise_cavity(self, capsys):
        code, out = self.run(capsys, "advise-cavity", "--f-ug-fast", "1e6",
                             "--f-ug-slow", "1e4", "--json")
        assert code == 0
        doc = json.loads(out)
        assert doc["delta_nu_c_min_Hz"] == pytest.approx(63.25e3, rel=1e-3)
        assert doc["delta_nu_c_max_Hz"] == pytest.approx(632.5e3, rel=1e-3)

    def test_evaluate_validates_response(self, capsys, fixtures_dir):
        code, out = self.run(capsys, "evaluate", "--config",
                             str(fixtures_dir / "config3.json"), "--json")
        assert code == 0
        doc = json.loads(out)
        validate_document(doc, "evaluate_response")
        assert doc["linewidth"]["free_running_fwhm_Hz"] == pytest.approx(150e3, abs=10e3)

    def test_missing_file_is_validation_error(self, capsys):
        code, _ = self.run(capsys, "margins", "--config", "no-such.json", "--json")
        assert code == 2

    def test_malformed_csv_is_validation_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("frequency_Hz,gain_dB,phase_deg\n10,0,0\n5,0,0\n")
        code, _ = self.run(capsys, "margins", "--trace", str(bad), "--json")
        assert code == 2

    def test_singular_conversion_is_computation_error(self, capsys, tmp_path):
        t = tmp_path / "t.csv"
        t.write_text("frequency_Hz,gain_dB,phase_deg\n10.0,0.0,0.0\n20.0,0.0,0.0\n")
        code, _ = self.run(capsys, "closed2open", "--trace", str(t))
        assert code == 3

    def test_invalid_schema_config(self, capsys, tmp_path, config3_doc):
        doc = json.loads(json.dumps(config3_doc))
        doc["loop"]["discriminator"]["delta_nu_c_Hz"] = -1
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        code, _ = self.run(capsys, "margins", "--config", str(bad), "--json")
        assert code == 2

    def test_human_output_mentions_margins(self, capsys, fixtures_dir):
        code, out = self.run(capsys, "margins", "--config", str(fixtures_dir / "config3.json"))
        assert code == 0
        assert "phase margin" in out
        assert "f_UG" in out


class TestCliServiceParity:
    """The CLI and the service must produce byte-identical JSON."""

    @pytest.fixture()
    def client(self, tmp_path):
        from fastapi.testclient import TestClient

        from pdhlock.service import create_app

        app = create_app(workdir=tmp_path / "sessions")
        return TestClient(app)

    def test_tune_bytes_identical(self, capsys, client, fixtures_dir, config3_doc, tmp_path):
        policy = {"f_max_Hz": 5e6, "points_per_decade": 40, "tune_slow": False,
                  "max_steps_per_push": 40}
        pol_file = tmp_path / "policy.json"
        pol_file.write_text(json.dumps(policy))
        code = main(["tune", "--config", str(fixtures_dir / "config3.json"),
                     "--policy", str(pol_file), "--json"])
        assert code == 0
        cli_out = capsys.readouterr().out.strip()
        r = client.post("/tune", json={"config": config3_doc, "policy": policy})
        assert r.status_code == 200
        assert r.content.decode() == cli_out

    def test_evaluate_bytes_stable(self, client, config3_doc):
        a = client.post("/evaluate", json={"config": config3_doc})
        b = client.post("/evaluate", json={"config": config3_doc})
        assert a.content == b.content


class TestUiFixtureParity:
    """The committed frontend fixtures are exactly what the CLI (and, by the
    parity test above, the service) emits for the same inputs."""

    UI_FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "fixtures"

    @pytest.mark.skipif(not UI_FIXTURES.exists(), reason="frontend fixtures not exported")
    def test_tune_fixture_matches_cli_bytes(self, capsys):
        code = main(["tune", "--config", str(self.UI_FIXTURES / "config3.json"), "--json"])
        assert code == 0
        cli_out = capsys.readouterr().out.strip()
        assert (self.UI_FIXTURES / "tune_config3.json").read_text() == cli_out

    @pytest.mark.skipif(not UI_FIXTURES.exists(), reason="frontend fixtures not exported")
    def test_evaluate_fixture_matches_service_bytes(self, tmp_path):
        from fastapi.testclient import TestClient

        from pdhlock.service import create_app

        config = json.loads((self.UI_FIXTURES / "config3.json").read_text())
        client = TestClient(create_app(workdir=tmp_path))
        r = client.post("/evaluate", json={"config": config})
        assert r.status_code == 200
        assert r.content.decode() == (self.UI_FIXTURES / "evaluate_config3.json").read_text()
