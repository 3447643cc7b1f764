import json
import shutil
import subprocess

import pytest

from tidkit.cli import exit_code, main, parse_assignments, parse_policy
from tidkit.exceptions import ConfigError, EstimationError, InconsistentEvidenceError, InvalidNetworkError
from tidkit.fixtures import aap_kb_path, mini_aap_id
from tidkit.harness import ExperimentConfig, RiskSettings, parse_report
from tidkit.netio import write_network
from tidkit.network import Network, Node, Variable
from tidkit.temporal import TemporalArcPolicy

from helpers import BIN, chain_slice


@pytest.fixture
def files(tmp_path):
    mini = tmp_path / "mini.json"
    write_network(mini, mini_aap_id())
    chain = tmp_path / "chain.json"
    write_network(chain, chain_slice())
    return tmp_path, mini, chain


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParsing:
    """Argument parsers for policies and assignments."""

    def test_assignments(self):
        assert parse_assignments(["A=present", " B = absent "]) == {"A": "present", "B": "absent"}
        with pytest.raises(ConfigError):
            parse_assignments(["A"])

    @pytest.mark.parametrize(
        "text, policy",
        [
            ("markov:2", TemporalArcPolicy.markov(2)),
            ("markov", TemporalArcPolicy.markov(1)),
            ("driving:1:App,NSAP", TemporalArcPolicy.driving(["App", "NSAP"])),
            ("observable:1", TemporalArcPolicy.observable()),
            ("custom:X>Y@1,Y>Y@2", TemporalArcPolicy.custom([("X", "Y", 1), ("Y", "Y", 2)])),
        ],
    )
    def test_policies(self, text, policy):
        assert parse_policy(text) == policy

    @pytest.mark.parametrize("text", ["markov:x", "sideways:1", "custom:X-Y", "markov:0", "driving:1"])
    def test_bad_policies(self, text):
        with pytest.raises(ConfigError):
            parse_policy(text)

    def test_exit_code_mapping(self):
        assert exit_code(InvalidNetworkError([])) == 1
        assert exit_code(InconsistentEvidenceError("x")) == 2
        assert exit_code(EstimationError("x")) == 2
        assert exit_code(ConfigError("x")) == 3
        assert exit_code(FileNotFoundError("x")) == 3


class TestCommands:
    """Subcommands run in process."""

    def test_validate_ok_and_kb(self, capsys):
        code, out, _ = run(capsys, "validate", aap_kb_path(), "--kb")
        assert code == 0 and out.startswith("ok:")

    def test_validate_reports_problems(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        net = Network([Node(Variable("a", BIN))], {"a": [[0.6, 0.6]]})
        write_network(bad, net)
        code, out, _ = run(capsys, "validate", bad)
        assert code == 1 and "row-not-normalized" in out

    def test_infer_posterior(self, capsys, files):
        _, mini, _ = files
        code, out, _ = run(capsys, "infer", mini, "-e", "V=present", "-q", "App")
        probs = json.loads(out)["App"]
        assert code == 0 and sum(probs.values()) == pytest.approx(1.0)

    def test_infer_decide(self, capsys, files):
        _, mini, _ = files
        code, out, _ = run(capsys, "infer", mini, "--decide", "-e", "RLQ-T=present", "WBC=present")
        res = json.loads(out)
        assert code == 0 and res["action"] in ("operate", "observe")

    def test_infer_errors(self, capsys, files):
        _, mini, _ = files
        assert run(capsys, "infer", mini, "-e", "V=sometimes", "-q", "App")[0] == 2
        assert run(capsys, "infer", mini, "-e", "V=present")[0] == 3
        assert run(capsys, "infer", files[0] / "missing.json", "-q", "App")[0] == 3

    def test_tailor(self, capsys, files):
        tmp, _, _ = files
        out_path = tmp / "slice.json"
        obs = ["V=present", "N=present", "RLQ-T=present", "ABS=absent", "WBC=present", "Fever=present", "Rebound=absent"]
        code, out, _ = run(capsys, "tailor", aap_kb_path(), "--obs", *obs, "-o", out_path)
        s = json.loads(out)
        assert code == 0 and (s["finding"], s["latent"], s["disease"]) == (7, 4, 2)
        code, out, _ = run(capsys, "unroll", out_path, "--slices", 3, "--bn")
        assert code == 0 and json.loads(out)["temporal_arcs"] == [13, 13]

    def test_tailor_rejects_non_finding(self, capsys):
        assert run(capsys, "tailor", aap_kb_path(), "--obs", "App=present")[0] == 2

    def test_unroll_counts(self, capsys, files):
        _, _, chain = files
        code, out, _ = run(capsys, "unroll", chain, "--slices", 2, "--policy", "markov:1", "--persistence", 0.5)
        assert code == 0 and json.loads(out) == {"nodes": 4, "arcs": 4, "temporal_arcs": [2]}

    def test_unroll_missing_transitions(self, capsys, files):
        _, _, chain = files
        assert run(capsys, "unroll", chain, "--slices", 2, "--policy", "markov:1")[0] == 3

    def test_simulate_estimate_score_select(self, capsys, files):
        tmp, _, chain = files
        cases = tmp / "cases.csv"
        code, _, _ = run(
            capsys, "simulate", chain, "-n", 200, "--seed", 4, "--slices", 3, "--policy", "markov:1",
            "--persistence", 0.7, "-o", cases,
        )
        assert code == 0 and cases.read_text().startswith("case_id,slice,variable,state")

        code, out, _ = run(capsys, "estimate", chain, "--cases", cases, "--slices", 3, "--policy", "markov:1", "--gamma", "10")
        res = json.loads(out)
        assert code == 0 and res["gamma"] == "10"

        model = tmp / "model.json"
        run(capsys, "estimate", chain, "--cases", cases, "--slices", 3, "-o", model)
        code, out, _ = run(capsys, "score", model, "--cases", cases, "--target", "X@2", "--evidence", "Y@2", "--trace")
        lines = out.splitlines()
        assert code == 0 and json.loads(lines[0])["cases"] == 200 and len(lines) == 201

        code, out, _ = run(
            capsys, "select", chain, "--cases", cases, "--slices", 3, "-c", "static=custom:", "-c", "m1=markov:1",
            "--criterion", "BIC",
        )
        assert code == 0 and out.splitlines()[-1] == "selected\tm1"

    def test_estimate_bad_gamma(self, capsys, files):
        tmp, _, chain = files
        cases = tmp / "c.csv"
        run(capsys, "simulate", chain, "-n", 20, "--seed", 1, "--slices", 2, "--policy", "markov:1", "--persistence", 0.5, "-o", cases)
        assert run(capsys, "estimate", chain, "--cases", cases, "--slices", 2, "--gamma", "1")[0] == 2

    def test_usage_errors_exit_3(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 3
        with pytest.raises(SystemExit) as err:
            main(["simulate", "x.json"])
        assert err.value.code == 3


class TestPilotCommand:
    """The pilot subcommand and its configuration handling."""

    SMALL = ["--n-slices", 3, "--cases", 200, "--eval-cases", 6, "--ri-thetas", 2, "--ri-datasets", 2, "--ri-cases", 80]

    def test_machine_output_round_trips(self, capsys, tmp_path):
        out_path = tmp_path / "report.txt"
        code, _, _ = run(capsys, "pilot", *self.SMALL, "--format", "machine", "-o", out_path)
        assert code == 0
        report = parse_report(out_path.read_text())
        assert report.criteria == ("AIC", "BIC", "RI", "LOGSCORE0")
        code, out, _ = run(capsys, "report", out_path)
        assert code == 0 and out.startswith("criterion")

    def test_config_overrides_flags(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 11, "cases": 150}))
        code, out, _ = run(capsys, "pilot", "--seed", 3, "--cases", 999, "--n-slices", 2, "--config", cfg, "--dump-config")
        d = json.loads(out)
        assert code == 0 and d["seed"] == 11 and d["cases"] == 150 and d["n_slices"] == 2

    def test_dump_config_loads_back(self, capsys, tmp_path):
        code, out, _ = run(capsys, "pilot", *self.SMALL, "--dump-config")
        path = tmp_path / "c.json"
        path.write_text(out)
        assert ExperimentConfig.load(path).risk == RiskSettings(2, 2, 80)

    def test_bad_config(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"canonical": "nobody"}))
        assert run(capsys, "pilot", "--config", cfg, "--dump-config")[0] == 3
        cfg.write_text("{not json")
        assert run(capsys, "pilot", "--config", cfg)[0] == 3


@pytest.mark.skipif(shutil.which("tidkit") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["tidkit", "validate", str(aap_kb_path())], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("ok:")
