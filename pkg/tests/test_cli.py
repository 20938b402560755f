import csv
import io
import itertools
import json
import math

import numpy as np
import pytest

from powerdiv import cli
from powerdiv.divergence import power_divergence


def run_cli(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def tail_by_enumeration(k, n, alpha, delta):
    """Sum multinomial weights of the types beyond delta, with exact integer coefficients."""
    q = np.full(k, 1.0 / k)
    total = 0.0
    for x in itertools.product(range(n + 1), repeat=k):
        if sum(x) != n:
            continue
        if power_divergence(np.asarray(x) / n, q, alpha) > delta:
            coef = math.factorial(n)
            for xj in x:
                coef //= math.factorial(xj)
            total += coef / k**n
    return total


TAIL_ARGS = ["tail", "--set", "alphas=[2]", "--set", "n_grid=[20]", "--set", "deltas=[0.3]",
             "--set", 'k_rule={"rule": "fixed", "k": 3}', "--set", "method=\"exact\""]


class TestRun:
    def test_exact_tail_row(self, capsys):
        code, out, _ = run_cli(TAIL_ARGS, capsys)
        assert code == 0
        rows = parse_csv(out)
        assert len(rows) == 1
        row = rows[0]
        assert row["method"] == "exact" and row["k"] == "3" and row["n"] == "20"
        assert float(row["value"]) == pytest.approx(tail_by_enumeration(3, 20, 2.0, 0.3),
                                                    abs=1e-14)

    def test_exact_tail_bit_for_bit(self, capsys):
        first = run_cli(TAIL_ARGS, capsys)[1]
        second = run_cli(TAIL_ARGS, capsys)[1]
        assert first == second

    def test_half_support_efficiency_is_one(self, capsys):
        code, out, _ = run_cli(["efficiency", "--set", 'alternative={"family": "half_support"}',
                                "--set", "alpha_pairs=[[0.5, 1.0]]",
                                "--set", 'k_rule={"rule": "power", "exponent": 0.3}',
                                "--set", "n_grid=[1000]"], capsys)
        assert code == 0
        row = parse_csv(out)[0]
        assert float(row["value"]) == pytest.approx(1.0, abs=1e-12)
        assert int(row["aux"]) == 1000

    def test_monte_carlo_fallback_warns(self, capsys):
        code, out, _ = run_cli(["tail", "--reps", "500", "--exact-budget", "10",
                                "--set", "n_grid=[30]"], capsys)
        assert code == 0
        row = parse_csv(out)[0]
        assert row["method"] == "monte_carlo" and "Monte Carlo" in row["warning"]

    @pytest.mark.parametrize("kind", ["stat", "slope", "projection"])
    def test_other_kinds_run(self, kind, capsys):
        argv = [kind, "--reps", "200", "--set", "n_grid=[10, 20]", "--set", "deltas=[0.1]",
                "--set", 'alternative={"family": "half_support"}']
        if kind != "stat":
            argv += ["--set", "alternative=null"]
        code, out, _ = run_cli(argv, capsys)
        assert code == 0
        assert len(parse_csv(out)) == 2

    def test_asymptotics(self, capsys):
        seqs = json.dumps([{"form": "power_of_n_plain", "b": 0.3},
                           {"form": "power_of_n_plain", "b": 0.6}])
        code, out, _ = run_cli(["asymptotics", "--set", f"sequences={seqs}",
                                "--set", "n_grid=[1000, 100000]"], capsys)
        assert code == 0
        values = [float(r["value"]) for r in parse_csv(out)]
        np.testing.assert_allclose(values, [1000**0.75, 100000**0.75], rtol=1e-9)


class TestErrors:
    def test_empty_grid(self, capsys):
        code, _, err = run_cli(["tail", "--set", "n_grid=[]"], capsys)
        assert code == 2 and "n_grid" in err

    def test_unknown_family_names_field(self, capsys):
        code, _, err = run_cli(["tail", "--set", 'null={"family": "zipf"}'], capsys)
        assert code == 2 and "null.family" in err

    def test_capacity(self, capsys):
        code, _, err = run_cli(["tail", "--exact-budget", "10", "--set", 'method="exact"',
                                "--set", "n_grid=[30]"], capsys)
        assert code == 3 and "required=" in err

    def test_decreasing_grid(self, capsys):
        assert run_cli(["tail", "--set", "n_grid=[20, 10]"], capsys)[0] == 2

    def test_unreadable_config(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert run_cli(["tail", "--config", str(path)], capsys)[0] == 2


class TestEmit:
    def test_empty_csv_is_header(self):
        text = cli.emit([], "csv")
        assert text == ",".join(cli.COLUMNS) + "\n"

    def test_round_trip_csv(self):
        row = cli._row("tail", alpha=2.0, n=20, k=3, delta=0.1, value=1 / 3, ci_low=-math.inf,
                       aux=math.nan, method="exact")
        back = parse_csv(cli.emit([row], "csv"))[0]
        assert float(back["value"]) == 1 / 3
        assert back["ci_low"] == "-inf" and back["aux"] == "nan"
        assert back["warning"] == ""

    def test_jsonl_rows_parse_independently(self):
        rows = [cli._row("tail", alpha=a, n=10, k=2, value=a / 7) for a in (0.5, 1.0, 2.0)]
        lines = cli.emit(rows, "jsonl").splitlines()
        assert len(lines) == 3
        for line, alpha in zip(lines, (0.5, 1.0, 2.0)):
            obj = json.loads(line)
            assert list(obj) == list(cli.COLUMNS)
            assert obj["value"] == alpha / 7

    def test_condition_flags_populated(self, capsys):
        out = run_cli(["tail", "--set", "alphas=[0.5, 1, 2, 3]"], capsys)[1]
        for row in parse_csv(out):
            for name in cli.FLAG_NAMES:
                assert row[f"cond_{name}"] in ("true", "false", "n/a")

    def test_timing_column_only_on_request(self, capsys):
        assert "runtime_ms" not in run_cli(["tail"], capsys)[1]
        assert "runtime_ms" in run_cli(["tail", "--timing"], capsys)[1].splitlines()[0]


class TestReproducibility:
    def test_monte_carlo_byte_identical(self, tmp_path, capsys):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for path in paths:
            argv = ["stat", "--seed", "17", "--reps", "300", "--workers", "2",
                    "--set", 'alternative={"family": "half_support"}',
                    "--set", "alphas=[0.5, 2]", "--set", "n_grid=[50, 100]", "--out", str(path)]
            assert run_cli(argv, capsys)[0] == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_seed_changes_output(self, capsys):
        base = ["stat", "--reps", "300", "--set", "n_grid=[50]"]
        assert run_cli(base + ["--seed", "1"], capsys)[1] != run_cli(base + ["--seed", "2"],
                                                                     capsys)[1]

    def test_output_dir_env(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
        assert run_cli(["tail", "--format", "jsonl"], capsys)[0] == 0
        assert (tmp_path / "tail.jsonl").exists()

    def test_precedence(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"kind": "tail", "seed": 5, "reps": 300, "n_grid": [7]}))
        cfg = cli.load_config("tail", str(path), {"seed": 9, "reps": None})
        assert cfg["seed"] == 9 and cfg["reps"] == 300 and cfg["n_grid"] == [7]
        assert cfg["deltas"] == cli.DEFAULTS["deltas"]

    def test_unknown_config_field(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"alphass": [1]}))
        with pytest.raises(cli.ConfigError):
            cli.load_config("tail", str(path))
