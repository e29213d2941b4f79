import csv
import json
import subprocess
import sys

import pytest

from helpers import model_text
from setmc.cli import STATS_FIELDS, main
from setmc.counterexample import parse_trace


@pytest.fixture
def model_file(tmp_path):
    def write(name, text=None):
        path = tmp_path / f"{name}.cdve"
        path.write_text(text if text is not None else model_text(name), encoding="utf-8")
        return str(path)

    return write


def read_stats(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestCheck:
    def test_violated_with_traces(self, model_file, tmp_path, capsys):
        trace, concrete, stats = tmp_path / "t.txt", tmp_path / "c.txt", tmp_path / "s.csv"
        code = main(
            ["check", model_file("example3"), "--trace", str(trace), "--concrete-trace", str(concrete),
             "--stats", str(stats)]
        )
        assert code == 1
        out = capsys.readouterr().out
        assert out.startswith("violated: example3")
        assert "unrolled 256" in out
        assert parse_trace(trace.read_bytes()).kind == "narrowed"
        assert parse_trace(concrete.read_bytes()).unrollings == 256
        (row,) = read_stats(stats)
        assert list(row) == STATS_FIELDS
        assert (row["states"], row["verdict"]) == ("3", "violated")

    def test_holds(self, model_file):
        assert main(["check", model_file("no_subsumption")]) == 0

    def test_ltl_override_with_ap(self, model_file, capsys):
        path = model_file("example3")
        assert main(["check", path, "--ltl", "F G x1"]) == 0
        assert main(["check", path, "--ltl", "G y1", "--ap", "y1=y < 300"]) == 0
        assert main(["check", path, "--ltl", "G y1", "--ap", "y1:y < 5"]) == 1

    @pytest.mark.parametrize("mode", ["sym", "exp"])
    @pytest.mark.parametrize("algo", ["ndfs", "owcty"])
    def test_modes_agree(self, model_file, mode, algo):
        assert main(["check", model_file("example2"), "--property", "terminates", "--mode", mode, "--algorithm", algo]) == 0

    def test_json_trace(self, model_file, tmp_path):
        trace = tmp_path / "t.json"
        assert main(["check", model_file("figure1"), "--trace", str(trace), "--trace-format", "json"]) == 1
        assert json.loads(trace.read_text())["kind"] == "narrowed"

    @pytest.mark.parametrize(
        "text, prefix",
        [
            ("system e; byte x = ; process P { state s; init s; trans s -> s { }; }", "error: model:"),
            ('system e; process P { state s; init s; trans s -> s { }; } #property p { ltl "F"; }', "error: ltl:"),
        ],
    )
    def test_input_errors(self, model_file, capsys, text, prefix):
        assert main(["check", model_file("bad", text)]) == 2
        assert capsys.readouterr().out.startswith(prefix)

    def test_deadlock_policy(self, model_file, capsys):
        text = "system d; process P { state a, b; init a; trans a -> b { }; }\n"
        path = model_file("dead", text)
        args = ["check", path, "--ltl", "G F atb", "--ap", "atb=P@b"]
        assert main(args) == 2
        assert "explore:" in capsys.readouterr().out
        assert main(args + ["--self-loop-deadlocks"]) == 0

    def test_capacity_and_timeout_rows(self, model_file, tmp_path):
        stats = tmp_path / "s.csv"
        path = model_file("figure1")
        assert main(["check", path, "--max-store-bytes", "5000", "--stats", str(stats)]) == 2
        assert read_stats(stats)[0]["note"] == "capacity"
        assert main(["check", path, "--mode", "sym", "--algorithm", "owcty", "--timeout", "0.05", "--stats", str(stats)]) == 2
        assert read_stats(stats)[0]["note"] == "timeout"

    def test_missing_file(self, tmp_path):
        assert main(["check", str(tmp_path / "nope.cdve")]) == 2

    def test_bad_ap_syntax(self, model_file):
        with pytest.raises(SystemExit):
            main(["check", model_file("example3"), "--ap", "noequals"])


class TestGenAndBench:
    def test_gen_peterson(self, tmp_path):
        out = tmp_path / "p.cdve"
        assert main(["gen-peterson", "--r", "7", "-o", str(out)]) == 0
        assert "input byte l = 0..7;" in out.read_text()
        assert main(["gen-peterson", "--r", "0"]) == 2

    def test_bench_csv(self, tmp_path):
        out = tmp_path / "b.csv"
        assert main(["bench", "--r", "2,3", "--modes", "sym,exp", "-o", str(out)]) == 0
        rows = read_stats(out)
        assert [(r["r"], r["mode"]) for r in rows] == [("2", "sym"), ("2", "exp"), ("3", "sym"), ("3", "exp")]
        assert {r["verdict"] for r in rows} == {"holds"}
        assert rows[0]["states"] == rows[2]["states"]

    def test_module_entry_point(self, tmp_path):
        out = subprocess.run(
            [sys.executable, "-m", "setmc", "gen-peterson", "--r", "2"], capture_output=True, text=True, check=True
        )
        assert "system peterson_2;" in out.stdout
