#!/usr/bin/env python3
"""
Tests for the MinWeave command line: recipes, configuration loading,
commands, exit codes and GitHub Actions mode.
"""

import io
import json
import os
import sys
import tempfile
import unittest
from pathlib import Path
from unittest.mock import MagicMock, patch

# Add parent directory to path for module import
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from MinWeave import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_USAGE,
    ConfigError,
    _resolve_seed,
    load_config,
    parse_recipe,
    run_cli,
)
from simengine import SimulationError
from topology import FlattenMethod, NetworkKind

SMALL_CONFIG = {
    "n_terminals": 16,
    "networks": ["omega", "butterfly", "mf_butterfly"],
    "workloads": [{"kind": "uniform"}],
    "rates": [0.1, 0.3],
    "seed": 3,
    "warmup_cycles": 20,
    "measure_cycles": 200,
}


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.temp_dir.cleanup)
        self.dir = Path(self.temp_dir.name)
        environ = patch.dict(os.environ, {"GITHUB_ACTIONS": "false"})
        environ.start()
        self.addCleanup(environ.stop)
        os.environ.pop("MINWEAVE_SEED", None)
        os.environ.pop("GITHUB_OUTPUT", None)

    def write_config(self, data, name="config.json"):
        path = self.dir / name
        text = data if isinstance(data, str) else json.dumps(data, indent=2)
        path.write_text(text, encoding="utf-8")
        return str(path)

    def cli(self, *argv):
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            with patch("sys.stderr", new_callable=io.StringIO):
                code = run_cli(list(argv))
        return code, stdout.getvalue()


class TestParseRecipe(unittest.TestCase):

    def test_names_and_aliases(self):
        cases = {
            "omega": (NetworkKind.OMEGA, ""),
            "MF-Butterfly": (NetworkKind.BUTTERFLY, "mf"),
            "flattened-baseline": (NetworkKind.BASELINE, "flattened"),
            "gcube": (NetworkKind.GENERALIZED_CUBE, ""),
            "mf_benes": (NetworkKind.BENES, "mf"),
            "clos": (NetworkKind.CLOS, ""),
        }
        for name, (base, transform) in cases.items():
            with self.subTest(name=name):
                recipe = parse_recipe(name)
                self.assertEqual((recipe.base, recipe.transform), (base, transform))

    def test_method_and_clos(self):
        self.assertEqual(
            parse_recipe("mf-omega", method="pairs").method, FlattenMethod.GROUPED_PAIRS
        )
        self.assertEqual(parse_recipe("mf-omega").method, FlattenMethod.ALL_INTERMEDIATE)
        self.assertEqual(parse_recipe("clos", clos=[2, 3, 2]).clos, (2, 3, 2))

    def test_errors(self):
        cases = [
            dict(kind="torus"),
            dict(kind="flattened_benes"),
            dict(kind="mf_omega", method="halves"),
            dict(kind="omega", clos=[2, 3, 2]),
            dict(kind="clos", clos=[2, 3]),
            dict(kind="omega", radix=1),
        ]
        for kwargs in cases:
            with self.subTest(**kwargs):
                with self.assertRaises(ConfigError):
                    parse_recipe(**kwargs)


class TestLoadConfig(CliTestCase):

    def test_preset(self):
        config = load_config(None, "smoke")
        self.assertEqual(config.n_terminals, 16)
        self.assertEqual(len(config.networks), 4)
        self.assertEqual(config.rates, [0.05, 0.2])

    def test_full_comparison_preset(self):
        for name in ("paper32", "study32"):
            with self.subTest(preset=name):
                config = load_config(None, name)
                self.assertEqual(config.n_terminals, 32)
                self.assertEqual(len(config.networks), 8)
                self.assertEqual(len(config.workloads), 6)
                self.assertEqual(config.rates[0], 0.05)
                self.assertEqual(config.rates[-1], 0.5)

    def test_full_comparison_preset_on_command_line(self):
        config = self.write_config({"warmup_cycles": 0, "measure_cycles": 500})
        out = self.dir / "full"
        code, _ = self.cli("histogram", "--preset", "paper32", "--config", config, "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(len(list(out.glob("histogram_*.csv"))), 6)

    def test_file_overrides_preset(self):
        path = self.write_config({"measure_cycles": 300, "seeds": [4, 5]})
        config = load_config(path, "smoke")
        self.assertEqual(config.measure_cycles, 300)
        self.assertEqual(config.seeds, [4, 5])
        self.assertEqual(len(config.networks), 4)

    def test_defaults(self):
        config = load_config(self.write_config({"networks": ["omega"], "workloads": [{}]}))
        self.assertEqual(config.n_terminals, 32)
        self.assertEqual(config.warmup_cycles, 10000)
        self.assertEqual(config.measure_cycles, 50000)
        self.assertEqual(config.single_rate, 0.05)

    def test_errors_point_at_lines(self):
        cases = {
            "syntax": ('{\n  "networks": ["omega"],\n  "rates": [0.1,]\n}', 3),
            "unknown_key": (
                '{\n  "networks": ["omega"],\n  "workloads": [{"kind": "uniform"}],\n  "speed": 3\n}',
                4,
            ),
            "bad_network": ('{\n  "networks": ["torus"],\n  "workloads": [{}]\n}', 2),
            "bad_workload": (
                '{\n  "networks": ["omega"],\n  "workloads": [{"kind": "bursty"}]\n}',
                3,
            ),
        }
        for name, (text, line) in cases.items():
            with self.subTest(case=name):
                path = self.write_config(text, f"{name}.json")
                with self.assertRaises(ConfigError) as ctx:
                    load_config(path)
                self.assertEqual(ctx.exception.line, line)
                self.assertTrue(str(ctx.exception).startswith(f"{path}:{line}: "))

    def test_missing_sources(self):
        with self.assertRaises(ConfigError):
            load_config(None)
        with self.assertRaises(ConfigError):
            load_config(None, "nonexistent")
        with self.assertRaises(ConfigError):
            load_config(str(self.dir / "missing.json"))

    def test_network_size_is_checked(self):
        path = self.write_config({"n_terminals": 12, "networks": ["omega"], "workloads": [{}]})
        with self.assertRaises(ConfigError):
            load_config(path)

    def test_trace_directory_expands(self):
        traces = self.dir / "traces"
        traces.mkdir()
        (traces / "a.trace").write_text("0,0,5,2\n3,1,2,1\n", encoding="utf-8")
        (traces / "b.trace").write_text("0,7,0,1\n", encoding="utf-8")
        (traces / "notes.txt").write_text("ignored\n", encoding="utf-8")
        path = self.write_config(
            {"n_terminals": 8, "networks": ["omega"], "workloads": [{"kind": "trace", "path": "traces"}]}
        )
        config = load_config(path)
        self.assertEqual([Path(w["path"]).name for w in config.workloads], ["a.trace", "b.trace"])


class TestSeed(CliTestCase):

    def test_environment_fallback(self):
        self.assertIsNone(_resolve_seed(None))
        with patch.dict(os.environ, {"MINWEAVE_SEED": "9"}):
            self.assertEqual(_resolve_seed(None), 9)
            self.assertEqual(_resolve_seed(2), 2)
        with patch.dict(os.environ, {"MINWEAVE_SEED": "nine"}):
            with self.assertRaises(ConfigError):
                _resolve_seed(None)


class TestCommands(CliTestCase):

    def test_usage_errors(self):
        self.assertEqual(self.cli()[0], EXIT_USAGE)
        self.assertEqual(self.cli("frobnicate")[0], EXIT_USAGE)
        self.assertEqual(self.cli("build", "omega", "--n", "many")[0], EXIT_USAGE)
        self.assertEqual(self.cli("--help")[0], EXIT_OK)

    def test_build_exports_files(self):
        out = self.dir / "topologies"
        code, stdout = self.cli("build", "mf-baseline", "--n", "16", "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("mf_baseline: N=16, 3 stages", stdout)
        for suffix in (".json", ".dot", ".graphml"):
            self.assertTrue((out / f"mf_baseline_16{suffix}").is_file())

    def test_build_omega_json(self):
        out = self.dir / "omega"
        self.assertEqual(self.cli("build", "omega", "--n", "32", "--out", str(out))[0], EXIT_OK)
        data = json.loads((out / "omega_32.json").read_text(encoding="utf-8"))
        self.assertEqual(len(data["routers"]), 80)
        self.assertEqual(len(data["stages"]), 5)

    def test_build_rejects_non_power_size(self):
        with self.assertLogs("MinWeave", level="ERROR") as logs:
            code, _ = self.cli("build", "omega", "--n", "31", "--out", str(self.dir))
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("N must be a power of radix", logs.output[0])

    def test_build_errors(self):
        for argv in (
            ("build", "torus"),
            ("build", "flattened-benes"),
            ("build", "omega", "--n", "12"),
            ("build", "clos", "--clos", "2,x,2"),
        ):
            with self.subTest(argv=argv):
                self.assertEqual(self.cli(*argv, "--out", str(self.dir))[0], EXIT_CONFIG)

    def test_build_reports_violations(self):
        report = MagicMock(ok=False, violations=["router 3 port 1 is unattached"])
        with patch("MinWeave.validate_network", return_value=report):
            with self.assertLogs("MinWeave", level="ERROR") as logs:
                code, _ = self.cli("build", "omega", "--n", "8", "--out", str(self.dir))
        self.assertEqual(code, EXIT_RUNTIME)
        self.assertIn("unattached", logs.output[0])

    def test_sweep_outputs(self):
        out = self.dir / "sweep"
        code, stdout = self.cli("sweep", "--config", self.write_config(SMALL_CONFIG), "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("omega", stdout)
        self.assertTrue((out / "sweep.csv").is_file())
        self.assertTrue((out / "saturation.csv").is_file())
        self.assertTrue((out / "curves" / "omega__uniform.csv").is_file())
        self.assertTrue((out / "plots" / "uniform.png").is_file())
        self.assertEqual(len(list((out / "points").glob("*.csv"))), 6)
        rows = (out / "improvement.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(rows), 3)
        self.assertTrue(rows[1].startswith("mf_butterfly,butterfly,uniform"))
        self.assertEqual(len((out / "sweep.csv").read_text(encoding="utf-8").splitlines()), 7)

    def test_sweep_is_deterministic(self):
        config = self.write_config(SMALL_CONFIG)
        outputs = []
        for name in ("first", "second"):
            out = self.dir / name
            self.assertEqual(self.cli("sweep", "--config", config, "--out", str(out))[0], EXIT_OK)
            outputs.append(
                {
                    path.relative_to(out): path.read_bytes()
                    for path in sorted(out.rglob("*.csv"))
                }
            )
        self.assertEqual(outputs[0], outputs[1])

    def test_parallel_sweep_matches_serial(self):
        config = self.write_config(SMALL_CONFIG)
        serial, parallel = self.dir / "serial", self.dir / "parallel"
        self.assertEqual(self.cli("sweep", "--config", config, "--out", str(serial))[0], EXIT_OK)
        self.assertEqual(
            self.cli("sweep", "--config", config, "--out", str(parallel), "--jobs", "2")[0],
            EXIT_OK,
        )
        self.assertEqual(
            (serial / "sweep.csv").read_bytes(), (parallel / "sweep.csv").read_bytes()
        )

    def test_compare_writes_tables_and_report(self):
        out = self.dir / "compare"
        code, _ = self.cli("compare", "--config", self.write_config(SMALL_CONFIG), "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        table1 = (out / "table1.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(table1), 4)
        for name in ("comparison.csv", "comparison.txt"):
            self.assertTrue((out / name).is_file())
        self.assertTrue(
            (out / "report.md").read_text(encoding="utf-8").startswith("## MinWeave report")
        )

    def test_sim_with_traces_and_seed_override(self):
        traces = self.dir / "traces"
        traces.mkdir()
        (traces / "a.trace").write_text("0,0,5,2\n3,1,2,1\n", encoding="utf-8")
        config = self.write_config(
            {
                "n_terminals": 8,
                "networks": ["omega", "benes"],
                "workloads": [{"kind": "trace", "path": "traces"}, {"kind": "uniform"}],
                "rate": 0.1,
                "warmup_cycles": 10,
                "measure_cycles": 100,
            }
        )
        out = self.dir / "sim"
        code, _ = self.cli("sim", "--config", config, "--out", str(out), "--seed", "11")
        self.assertEqual(code, EXIT_OK)
        stats = (out / "sim_stats.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(stats), 5)
        self.assertTrue(any(line.startswith("omega,trace:a,0.0,11,2,") for line in stats))
        self.assertEqual(len(list((out / "messages").glob("messages_*.csv"))), 4)

    def test_histogram_command(self):
        config = self.write_config(
            {
                "networks": ["omega"],
                "workloads": [{"kind": "hotspot", "preset": "fft_proxy"}],
                "rate": 0.2,
                "warmup_cycles": 0,
                "measure_cycles": 3000,
            }
        )
        out = self.dir / "hist"
        code, stdout = self.cli("histogram", "--config", config, "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        self.assertIn("fft_proxy:", stdout)
        lines = (out / "histogram_fft_proxy.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "node,src_count,dst_count")
        self.assertEqual(len(lines), 33)
        self.assertTrue((out / "histogram_fft_proxy.png").is_file())

    def test_config_errors_exit_with_two(self):
        bad = self.write_config('{\n  "networks": [\n}')
        self.assertEqual(self.cli("sweep", "--config", bad)[0], EXIT_CONFIG)
        self.assertEqual(self.cli("sweep", "--preset", "smoke", "--jobs", "0")[0], EXIT_CONFIG)

    def test_simulation_failure_exits_with_three(self):
        config = self.write_config(SMALL_CONFIG)
        with patch("MinWeave.execute", side_effect=SimulationError("drain budget exhausted")):
            code, _ = self.cli("sweep", "--config", config, "--out", str(self.dir / "x"))
        self.assertEqual(code, EXIT_RUNTIME)


class TestGithubMode(CliTestCase):

    def test_environment_parameters_and_report_output(self):
        output_file = self.dir / "github_output"
        env = {
            "GITHUB_ACTIONS": "true",
            "GITHUB_OUTPUT": str(output_file),
            "INPUT_COMMAND": "sweep",
            "INPUT_CONFIG": self.write_config(SMALL_CONFIG),
            "INPUT_OUT": str(self.dir / "action"),
        }
        with patch.dict(os.environ, env):
            with patch("sys.stdout", new_callable=io.StringIO) as stdout:
                code = run_cli()
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Running with parameters from environment variables.", stdout.getvalue())
        text = output_file.read_text(encoding="utf-8")
        self.assertTrue(text.startswith("report<<EOF_MINWEAVE_REPORT_4c1f0e2b\n## MinWeave report"))
        self.assertTrue(text.endswith("EOF_MINWEAVE_REPORT_4c1f0e2b\n"))
        self.assertTrue((self.dir / "action" / "sweep.csv").is_file())

    def test_environment_build(self):
        env = {
            "GITHUB_ACTIONS": "true",
            "INPUT_COMMAND": "build",
            "INPUT_NETWORK": "clos",
            "INPUT_N": "16",
            "INPUT_CLOS": "4,12,4",
            "INPUT_OUT": str(self.dir / "topo"),
        }
        with patch.dict(os.environ, env):
            with patch("sys.stdout", new_callable=io.StringIO):
                self.assertEqual(run_cli(), EXIT_OK)
        self.assertTrue((self.dir / "topo" / "clos_16.json").is_file())

    def test_environment_build_without_out_uses_topologies(self):
        self.addCleanup(os.chdir, os.getcwd())
        os.chdir(self.dir)
        env = {
            "GITHUB_ACTIONS": "true",
            "INPUT_COMMAND": "build",
            "INPUT_NETWORK": "omega",
            "INPUT_N": "8",
            "INPUT_OUT": "",
        }
        with patch.dict(os.environ, env):
            with patch("sys.stdout", new_callable=io.StringIO):
                self.assertEqual(run_cli(), EXIT_OK)
        self.assertTrue((self.dir / "topologies" / "omega_8.json").is_file())

    def test_bad_integer_input(self):
        with patch.dict(os.environ, {"GITHUB_ACTIONS": "true", "INPUT_JOBS": "lots"}):
            with patch("sys.stderr", new_callable=io.StringIO):
                self.assertEqual(run_cli(), EXIT_CONFIG)


if __name__ == "__main__":
    unittest.main()
