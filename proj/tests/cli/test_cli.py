"""End-to-end checks of the wnsf command line.

Run with WNSF_BIN pointing at the executable and WNSF_SOURCE at the source tree.
"""

import json
import os
import pathlib
import subprocess
import tempfile
import unittest

import jsonschema
import referencing

BIN = os.environ.get("WNSF_BIN", "wnsf")
SOURCE = pathlib.Path(os.environ.get("WNSF_SOURCE", pathlib.Path(__file__).resolve().parents[2]))
CONFIGS = SOURCE / "configs"
SCHEMAS = SOURCE / "docs" / "schemas"


def run(*args, env=None, check=True):
    full_env = dict(os.environ)
    full_env.update(env or {})
    proc = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, env=full_env)
    if check and proc.returncode != 0:
        raise AssertionError(f"wnsf {' '.join(map(str, args))} exited {proc.returncode}: {proc.stderr}")
    return proc


def validator(name):
    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        schema = json.loads(path.read_text())
        resources.append((schema["$id"], referencing.Resource.from_contents(schema)))
    registry = referencing.Registry().with_resources(resources)
    schema = json.loads((SCHEMAS / name).read_text())
    cls = jsonschema.validators.validator_for(schema)
    cls.check_schema(schema)
    return cls(schema, registry=registry)


class Workspace(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = pathlib.Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write_experiment(self, name, **fields):
        path = self.tmp / name
        path.write_text(json.dumps(fields))
        return path


class Pipeline(Workspace):
    def test_simulate_fit_eval_is_deterministic(self):
        outputs = []
        for rep in range(2):
            data = self.tmp / f"d{rep}.csv"
            model = self.tmp / f"m{rep}.json"
            report = self.tmp / f"r{rep}.json"
            run("simulate", "--model", CONFIGS / "armax2_model.json", "--experiment", CONFIGS / "armax2_open.json",
                "--out", data)
            run("fit", "--data", data, "--nx", 2, "--order", 50, "--structure", 2, "--out", model, "--report", report)
            ev = run("eval", "--true", CONFIGS / "armax2_model.json", "--est", model).stdout
            outputs.append((data.read_text(), model.read_text(), report.read_text(), ev))
        self.assertEqual(outputs[0], outputs[1])
        self.assertGreater(json.loads(outputs[0][3])["fit"], 95.0)

    def test_noise_free_fit_reproduces_the_impulse_response(self):
        exp = self.write_experiment("e.json", samples=2000, seed=3, sigma_e2=0.0)
        data = self.tmp / "d.csv"
        model = self.tmp / "m.json"
        run("simulate", "--model", CONFIGS / "armax2_model.json", "--experiment", exp, "--out", data)
        # Without innovations the y-regressors are collinear; the automatic ridge keeps the fit defined.
        run("fit", "--data", data, "--nx", 2, "--order", 40, "--out", model)
        fit = json.loads(run("eval", "--true", CONFIGS / "armax2_model.json", "--est", model).stdout)["fit"]
        self.assertGreater(fit, 99.999)

    def test_order_grid_and_auto_structure(self):
        data = self.tmp / "d.csv"
        report = self.tmp / "r.json"
        run("simulate", "--model", CONFIGS / "simo3_model.json", "--experiment", CONFIGS / "simo3_open.json",
            "--out", data)
        run("fit", "--data", data, "--nx", 3, "--order-grid", "20:10:40", "--out", self.tmp / "m.json",
            "--report", report)
        doc = json.loads(report.read_text())
        self.assertEqual(len(doc["report"]["candidates"]), 3)
        self.assertEqual(doc["kronecker_index"], [1, 2])

    def test_validation_errors(self):
        data = self.tmp / "d.csv"
        run("simulate", "--model", CONFIGS / "armax2_model.json", "--experiment", CONFIGS / "armax2_open.json",
            "--out", data)
        out = json.loads(run("eval", "--data", data, "--est", CONFIGS / "armax2_model.json", "--split", 0.7).stdout)
        self.assertEqual(out["split_index"], 7000)
        # The true predictor leaves only the innovations, a small fraction of the output variance.
        self.assertGreater(out["e_validation"], 0.0)
        self.assertLess(out["e_validation"], 0.3)

    def test_baseline_and_randsys(self):
        data = self.tmp / "d.csv"
        run("simulate", "--model", CONFIGS / "armax2_model.json", "--experiment", CONFIGS / "armax2_open.json",
            "--out", data)
        est = self.tmp / "b.json"
        run("baseline", "--data", data, "--nx", 2, "--f", 20, "--out", est)
        fit = json.loads(run("eval", "--true", CONFIGS / "armax2_model.json", "--est", est).stdout)["fit"]
        self.assertGreater(fit, 90.0)
        a = run("randsys", "--nx", 4, "--ny", 2, "--nu", 1, "--seed", 7).stdout
        b = run("randsys", "--nx", 4, "--ny", 2, "--nu", 1, "--seed", 7).stdout
        self.assertEqual(a, b)
        canon = json.loads(run("randsys", "--nx", 4, "--ny", 2, "--nu", 1, "--seed", 7, "--structure", "1,3").stdout)
        self.assertEqual(canon["canonical"]["kronecker_index"], [1, 3])

    def test_montecarlo_is_independent_of_thread_count(self):
        args = ["montecarlo", "--model", CONFIGS / "armax2_model.json", "--experiment", CONFIGS / "armax2_open.json",
                "--trials", 8, "--grid-N", "600,1000", "--grid-n", "40,50"]
        one = run(*args, env={"WNSF_THREADS": "1"}).stdout
        three = run(*args, env={"WNSF_THREADS": "3"}).stdout
        self.assertEqual(one, three)
        rows = [line for line in one.splitlines() if not line.startswith("#")]
        self.assertEqual(rows[0], "N,order,parameter,truth,crlb,mse_wls,mse_ols,ratio_wls,ratio_ols,trials,failed")
        self.assertEqual(len(rows), 1 + 2 * 6)
        self.assertEqual([r.split(",")[2] for r in rows[1:7]], ["f1", "f2", "l1", "l2", "a1", "a2"])


class Errors(Workspace):
    def test_unknown_flag_prints_usage(self):
        proc = run("fit", "--bogus", check=False)
        self.assertEqual(proc.returncode, 1)
        self.assertIn("Usage", proc.stderr)

    def test_missing_subcommand(self):
        self.assertEqual(run(check=False).returncode, 1)

    def test_malformed_csv_names_line_and_field(self):
        bad = self.tmp / "bad.csv"
        bad.write_text("u1,y1\n1,2\n3,oops\n")
        proc = run("fit", "--data", bad, "--nx", 2, "--order", 10, check=False)
        self.assertEqual(proc.returncode, 1)
        self.assertIn("line 3, field 2", proc.stderr)

    def test_malformed_json_names_the_field(self):
        bad = self.tmp / "bad.json"
        bad.write_text('{"A": [[0.5]], "C": [[1]], "K": [[0]], "sigma_e2": 1}')
        proc = run("crlb", "--model", bad, "--experiment", CONFIGS / "armax2_open.json", check=False)
        self.assertEqual(proc.returncode, 1)
        self.assertIn("field 'B'", proc.stderr)

    def test_numerical_failure_exits_2(self):
        data = self.tmp / "flat.csv"
        data.write_text("u1,y1\n" + "".join(f"0,{((k * 7919) % 101) / 50 - 1}\n" for k in range(300)))
        proc = run("fit", "--data", data, "--nx", 2, "--order", 20, "--structure", 2, "--ridge", 0, check=False)
        self.assertEqual(proc.returncode, 2)
        self.assertIn("hoarx", proc.stderr)


class Schemas(Workspace):
    def test_inputs_validate(self):
        for name, schema in [("armax2_model.json", "model.schema.json"), ("simo3_model.json", "model.schema.json"),
                             ("armax2_open.json", "experiment.schema.json"),
                             ("armax2_closed.json", "experiment.schema.json"),
                             ("simo3_open.json", "experiment.schema.json")]:
            validator(schema).validate(json.loads((CONFIGS / name).read_text()))

    def test_outputs_validate(self):
        data = self.tmp / "d.csv"
        run("simulate", "--model", CONFIGS / "armax2_model.json", "--experiment", CONFIGS / "armax2_open.json",
            "--out", data)
        model = self.tmp / "m.json"
        report = self.tmp / "r.json"
        run("fit", "--data", data, "--nx", 2, "--order-grid", "30,40", "--out", model, "--report", report)
        validator("model.schema.json").validate(json.loads(model.read_text()))
        validator("fit_report.schema.json").validate(json.loads(report.read_text()))
        validator("eval.schema.json").validate(
            json.loads(run("eval", "--true", CONFIGS / "armax2_model.json", "--est", model).stdout))
        validator("eval.schema.json").validate(json.loads(run("eval", "--data", data, "--est", model).stdout))
        validator("crlb.schema.json").validate(json.loads(
            run("crlb", "--model", CONFIGS / "armax2_model.json", "--experiment", CONFIGS / "armax2_closed.json").stdout))
        bl = self.tmp / "bl.json"
        run("baseline", "--data", data, "--nx", 2, "--f", 10, "--out", self.tmp / "b.json", "--report", bl)
        validator("baseline_report.schema.json").validate(json.loads(bl.read_text()))
        for seed in (1, 2):
            validator("model.schema.json").validate(json.loads(run("randsys", "--nx", 3, "--nu", 0, "--seed", seed).stdout))
        validator("experiment.schema.json").validate({"samples": 10, "loop": {"kind": "static", "gain": [[0.5]]}})
        with self.assertRaises(jsonschema.ValidationError):
            validator("experiment.schema.json").validate({"samples": 10, "loop": {"kind": "static"}})


if __name__ == "__main__":
    unittest.main()
