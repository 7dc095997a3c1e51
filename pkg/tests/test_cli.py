import csv
import io
import json
import tempfile
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from unittest import mock

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from mpmath import iv

from nilmix.api.encoding import csv_cell, jsonable
from nilmix.exceptions import EXIT_FALSIFICATION, EXIT_PRECISION, EXIT_SCHEMA
from nilmix.models import COMMANDS, ExperimentRun
from nilmix.rendering.writers import atomic_write, render_csv, sidecar_path
from nilmix.services import describe_errors

CAT = {"generators": [[[2, 1], [1, 1]]]}
T3 = {
    "generators": [
        [[0, 0, 1], [1, 0, 3], [0, 1, 0]],
        [[-2, 1, 0], [0, 1, 1], [1, 0, 1]],
    ]
}
BUMP = {"bump": {"center": [0.5, 0.5, 0.5], "radius": 0.3}}


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, config, name="config.json"):
        path = self.dir / name
        path.write_text(json.dumps(config), encoding="utf-8")
        return path

    def nilmix(self, command, config, *flags):
        path = config if isinstance(config, Path) else self.write_config(config)
        stdout = io.StringIO()
        call_command("nilmix", command, "--config", str(path), *flags, stdout=stdout)
        return stdout.getvalue().strip()


class MixExactCommandTests(CommandTestCase):
    def config(self):
        return {
            "command": "mix-exact",
            "inputs": {
                "action": CAT,
                "functions": [
                    {"dim": 2, "coeffs": [{"freq": [1, 0], "re": 1}]},
                    {"dim": 2, "coeffs": [{"freq": [-1, 0], "re": 1}]},
                ],
                "sweep": {"base": [[0], [1]], "n_max": 5},
            },
            "output": {"path": str(self.dir / "cat.csv")},
        }

    def test_cat_pair_correlations_vanish(self):
        """e(x₁)·e(-x₁∘Aⁿ) integrates to exactly zero for every n >= 1."""
        printed = self.nilmix("mix-exact", self.config())
        self.assertEqual(printed, str(self.dir / "cat.csv"))
        with open(self.dir / "cat.csv", newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual([row["n"] for row in rows], ["1", "2", "3", "4", "5"])
        for row in rows:
            self.assertEqual(row["corr_re"], "0")
            self.assertEqual(row["corr_im"], "0")
            self.assertEqual(row["radius"], "0")
            self.assertEqual(row["exact"], "true")

    def test_csv_has_crlf_records_and_sidecar(self):
        """CSV output uses CRLF records and carries the resolved config next to it."""
        self.nilmix("mix-exact", self.config())
        raw = (self.dir / "cat.csv").read_bytes()
        self.assertTrue(raw.startswith(b"index,n,shape,corr_re,corr_im,radius,exact\r\n"))
        sidecar = json.loads(sidecar_path(self.dir / "cat.csv").read_text(encoding="utf-8"))
        self.assertEqual(sidecar["command"], "mix-exact")
        self.assertEqual(sidecar["output"]["format"], "csv")
        self.assertNotIn("jobs", sidecar)

    def test_flags_override_config(self):
        """--precision and --out win over the file."""
        out = self.dir / "override.json"
        self.nilmix("mix-exact", self.config(), "--precision", "96", "--out", str(out))
        document = json.loads(out.read_text(encoding="utf-8"))
        self.assertEqual(document["config"]["precision"], 96)
        self.assertEqual(document["config"]["output"]["format"], "json")
        self.assertEqual(document["falsifications"], [])
        self.assertEqual(len(document["result"]["correlations"]), 5)

    def test_repeat_runs_are_byte_identical(self):
        """Same config, different --jobs: same bytes."""
        out = self.dir / "repeat.json"
        self.nilmix("mix-exact", self.config(), "--out", str(out), "--jobs", "1")
        first = out.read_bytes()
        self.nilmix("mix-exact", self.config(), "--out", str(out), "--jobs", "3")
        self.assertEqual(out.read_bytes(), first)


class SchemaErrorTests(CommandTestCase):
    def test_malformed_json_exits_2(self):
        """Unparseable config files fail before anything runs."""
        path = self.dir / "broken.json"
        path.write_text('{"command": "mix-exact",', encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            self.nilmix("mix-exact", path)
        self.assertEqual(ctx.exception.returncode, EXIT_SCHEMA)

    def test_missing_config_exits_2(self):
        """A config path that does not exist is a schema error."""
        with self.assertRaises(CommandError) as ctx:
            self.nilmix("spectrum", self.dir / "absent.json")
        self.assertEqual(ctx.exception.returncode, EXIT_SCHEMA)

    def test_mismatched_command_exits_2(self):
        """The config's own command must agree with the one invoked."""
        with self.assertRaises(CommandError) as ctx:
            self.nilmix("spectrum", {"command": "cocycle", "inputs": {}})
        self.assertEqual(ctx.exception.returncode, EXIT_SCHEMA)

    def test_invalid_inputs_exit_2_and_are_recorded(self):
        """A single function cannot form a correlation; the ledger keeps the failure."""
        config = {
            "inputs": {
                "action": CAT,
                "functions": [{"dim": 2, "coeffs": [{"freq": [1, 0], "re": 1}]}],
                "shapes": [[[0], [1]]],
            }
        }
        with self.assertRaises(CommandError) as ctx:
            self.nilmix("mix-exact", config)
        self.assertEqual(ctx.exception.returncode, EXIT_SCHEMA)
        self.assertIn("inputs.functions", str(ctx.exception))
        run = ExperimentRun.objects.get()
        self.assertEqual(run.exit_status, EXIT_SCHEMA)
        self.assertEqual(run.output_path, "")

    def test_non_unimodular_action_exits_2(self):
        """det = 2 is rejected at parse time."""
        config = {"inputs": {"action": {"generators": [[[2, 0], [0, 1]]]}}}
        with self.assertRaises(CommandError) as ctx:
            self.nilmix("spectrum", config)
        self.assertEqual(ctx.exception.returncode, EXIT_SCHEMA)


class InternalErrorTests(CommandTestCase):
    def run_failing(self, error):
        def handler(inputs, ctx):
            raise error

        with mock.patch.dict("nilmix.services.HANDLERS", {"spectrum": handler}):
            with self.assertRaises(CommandError) as ctx:
                self.nilmix("spectrum", {"inputs": {"action": CAT}})
        return ctx.exception

    def test_arithmetic_failure_exits_5(self):
        """An arithmetic error after validation is an internal failure, not a schema error."""
        error = self.run_failing(ZeroDivisionError("division by zero"))
        self.assertEqual(error.returncode, EXIT_PRECISION)
        self.assertIn("ZeroDivisionError", str(error))
        self.assertEqual(ExperimentRun.objects.get().exit_status, EXIT_PRECISION)

    def test_value_error_after_validation_exits_5(self):
        """Only validation errors map to status 2."""
        error = self.run_failing(ValueError("inconsistent orbit"))
        self.assertEqual(error.returncode, EXIT_PRECISION)
        self.assertNotEqual(ExperimentRun.objects.get().exit_status, EXIT_SCHEMA)


class CocycleCommandTests(CommandTestCase):
    def test_coboundary_constants_recovered(self):
        """A coboundary plus constants resolves to those constants with σ² = 0."""
        config = {
            "inputs": {
                "coboundary": {
                    "action": T3,
                    "phi": {
                        "dim": 3,
                        "coeffs": [
                            {"freq": [1, 0, 0], "re": 1, "im": 2},
                            {"freq": [-1, 0, 0], "re": 1, "im": -2},
                            {"freq": [0, 1, -1], "re": "-1/2"},
                            {"freq": [0, -1, 1], "re": "-1/2"},
                        ],
                    },
                    "constants": ["1/2", -3],
                }
            },
            "output": {"path": str(self.dir / "cocycle.json")},
        }
        self.nilmix("cocycle", config)
        document = json.loads((self.dir / "cocycle.json").read_text(encoding="utf-8"))
        report = document["result"]["report"]
        self.assertEqual(report["constants"], ["1/2", "-3"])
        self.assertEqual(report["sigma_squared"]["value"], "0")
        self.assertFalse(report["falsified"])
        self.assertEqual(ExperimentRun.objects.get().exit_status, 0)


class BoxMapCommandTests(CommandTestCase):
    def test_generated_suite_has_no_falsification(self):
        """Suite lines and a given line each resolve to a single branch."""
        out = self.dir / "boxmaps.csv"
        config = {
            "seed": 2,
            "inputs": {
                "delta": "1/20",
                "samples": 1000,
                "trials": 1,
                "suite": {"algebraic": 3, "rational": 2},
                "instances": [
                    {
                        "boxmap": {"base": [0, 0, 0], "directions": [[1, "1/3", 0]], "sides": [1000]},
                        "delta": "1/10",
                    }
                ],
            },
            "output": {"path": str(out)},
        }
        self.nilmix("boxmap-check", config)
        with open(out, newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        families = ["given"] + ["algebraic"] * 3 + ["rational"] * 2
        self.assertEqual([row["family"] for row in rows], families)
        self.assertEqual(
            [row["label"] for row in rows],
            ["obstruction"] + ["equidistributed"] * 3 + ["obstruction"] * 2,
        )
        self.assertEqual(ExperimentRun.objects.get().exit_status, 0)

    def test_boxmap_check_needs_instances_or_suite(self):
        """An empty boxmap-check config is a schema error."""
        with self.assertRaises(CommandError) as ctx:
            self.nilmix("boxmap-check", {"inputs": {"delta": "1/20"}})
        self.assertEqual(ctx.exception.returncode, EXIT_SCHEMA)


class FalsificationTests(CommandTestCase):
    def test_wrong_expectation_exits_4_and_still_writes(self):
        """f against itself is ∫f², far from (∫f)²; the run is falsified but the file exists."""
        out = self.dir / "mc.json"
        config = {
            "seed": 3,
            "inputs": {
                "heis_action": {"generators": [{"block": [[2, 1], [1, 1]]}]},
                "functions": [BUMP, BUMP],
                "cases": [{"words": [[0], [0]], "expected": "product"}],
                "samples": 20000,
            },
            "output": {"path": str(out)},
        }
        with self.assertRaises(CommandError) as ctx:
            self.nilmix("mix-mc", config)
        self.assertEqual(ctx.exception.returncode, EXIT_FALSIFICATION)
        document = json.loads(out.read_text(encoding="utf-8"))
        self.assertEqual(len(document["falsifications"]), 1)
        self.assertFalse(document["result"]["cases"][0]["within"])
        run = ExperimentRun.objects.get()
        self.assertTrue(run.falsified)
        self.assertEqual(run.output_path, str(out))

    def test_square_expectation_holds(self):
        """The same bump under the same word averages to its square integral."""
        out = self.dir / "mc.csv"
        config = {
            "seed": 3,
            "inputs": {
                "heis_action": {"generators": [{"block": [[2, 1], [1, 1]]}]},
                "functions": [BUMP, BUMP],
                "cases": [{"words": [[0], [0]], "expected": "square"}],
                "samples": 20000,
                "sigmas": 4,
            },
            "output": {"path": str(out)},
        }
        self.nilmix("mix-mc", config)
        with open(out, newline="", encoding="utf-8") as handle:
            (row,) = list(csv.DictReader(handle))
        self.assertEqual(row["within"], "true")
        self.assertIn('"radius"', row["estimate"])


class EncodingTests(SimpleTestCase):
    def test_floats_are_marked(self):
        """No bare float survives encoding."""
        data = jsonable({"x": 0.25, "q": Fraction(1, 3), "d": Decimal("1.5"), "n": 7})
        self.assertEqual(data, {"x": {"approximate": "0.25"}, "q": "1/3", "d": "1.5", "n": 7})

    def test_config_echo_keeps_floats(self):
        """Echoed configs stay as given."""
        self.assertEqual(jsonable({"center": [0.5, 0.5]}, mark_floats=False), {"center": [0.5, 0.5]})

    def test_intervals_become_enclosures(self):
        """Certified values are decimal bounds around the interval."""
        data = jsonable(iv.mpf([1, 2]))
        self.assertEqual(set(data), {"lower", "upper"})
        self.assertLessEqual(Decimal(data["lower"]), 1)
        self.assertGreaterEqual(Decimal(data["upper"]), 2)

    def test_unknown_types_rejected(self):
        """Objects without an encoding raise."""
        with self.assertRaises(TypeError):
            jsonable(object())

    def test_csv_cells(self):
        """Single-valued markers unwrap; nested data becomes compact JSON."""
        self.assertEqual(csv_cell(None), "")
        self.assertEqual(csv_cell(False), "false")
        self.assertEqual(csv_cell(Fraction(-2, 4)), "-1/2")
        self.assertEqual(csv_cell(0.5), "0.5")
        self.assertEqual(csv_cell([[0], [1]]), "[[0],[1]]")

    def test_csv_quoting(self):
        """Cells with commas are double-quoted."""
        rendered = render_csv([{"a": [1, 2], "b": "x"}], ("a", "b")).decode("utf-8")
        self.assertEqual(rendered, 'a,b\r\n"[1,2]",x\r\n')


class WriterTests(SimpleTestCase):
    def test_atomic_write_leaves_no_temporary_files(self):
        """Only the target remains after a write."""
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp) / "nested" / "out.json"
            atomic_write(target, b"{}\n")
            atomic_write(target, b"[]\n")
            self.assertEqual(target.read_bytes(), b"[]\n")
            self.assertEqual([p.name for p in target.parent.iterdir()], ["out.json"])

    def test_describe_errors_flattens_paths(self):
        """Nested DRF errors become dotted paths."""
        lines = describe_errors({"inputs": {"cases": [{"words": ["Required."]}]}, "non_field_errors": ["bad"]})
        self.assertEqual(lines, ["inputs.cases.0.words: Required.", "config: bad"])


class SchemaFileTests(SimpleTestCase):
    def test_schema_lists_every_command(self):
        """The shipped JSON schema and the CLI agree on the command set."""
        path = Path(settings.BASE_DIR) / "nilmix" / "schemas" / "experiment.schema.json"
        schema = json.loads(path.read_text(encoding="utf-8"))
        self.assertEqual(schema["properties"]["command"]["enum"], COMMANDS)

    def test_shipped_configs_name_known_commands(self):
        """Every bundled config declares a command the CLI accepts."""
        configs = sorted((Path(settings.BASE_DIR) / "configs").glob("*.json"))
        self.assertTrue(configs)
        for path in configs:
            config = json.loads(path.read_text(encoding="utf-8"))
            self.assertIn(config["command"], COMMANDS, path.name)
