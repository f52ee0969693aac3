"""End-to-end checks of the mixclust command line and its JSON outputs."""

import csv
import json
import os
import random
import subprocess
import tempfile
import unittest
from pathlib import Path

import jsonschema
from PIL import Image

BIN = os.environ["MIXCLUST_BIN"]
ROOT = Path(os.environ["MIXCLUST_ROOT"])
SCHEMAS = ROOT / "schemas"


def run(*args, cwd=None):
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, cwd=cwd)


def validate(path, schema):
    with open(path) as f:
        doc = json.load(f)
    with open(SCHEMAS / schema) as f:
        jsonschema.validate(doc, json.load(f))
    return doc


def csv_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def two_tone(path, width=40, height=30, noise=0.05, seed=3):
    rng = random.Random(seed)
    img = Image.new("RGB", (width, height))
    px = img.load()
    for y in range(height):
        for x in range(width):
            px[x, y] = (0, 0, 255) if x < width // 2 else (0, 255, 0)
    cells = [(x, y) for y in range(height) for x in range(width)]
    for x, y in rng.sample(cells, round(noise * width * height)):
        px[x, y] = (255, 255, 255)
    img.save(path)


class CliTest(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    # ---- fit ---------------------------------------------------------------

    def toy_csv(self):
        path = self.tmp / "toy.csv"
        path.write_text("x,y\n0,0\n0.2,0.1\n-0.1,0.3\n10,10\n10.3,9.8\n9.9,10.2\n")
        return path

    def test_fit_toy(self):
        res = run("fit", self.toy_csv(), "--k", 2, "--c1", 0.01, "--out", self.tmp / "out")
        self.assertEqual(res.returncode, 0, res.stderr)
        doc = validate(self.tmp / "out" / "result.json", "fit_result.schema.json")
        self.assertEqual(len(doc["params"]["components"]), 2)
        self.assertAlmostEqual(sum(doc["params"]["weights"]), 1.0, places=12)
        rows = csv_rows(self.tmp / "out" / "assignments.csv")
        self.assertEqual(rows[0], ["row", "cluster", "discriminant", "outlier", "outlier_type"])
        self.assertEqual(len(rows), 7)
        labels = [int(r[1]) for r in rows[1:]]
        self.assertEqual(set(labels), {1, 2})
        self.assertEqual(labels[0], labels[1])
        self.assertNotEqual(labels[0], labels[3])

    def test_fit_is_deterministic(self):
        outs = []
        for name in ("a", "b"):
            res = run("fit", self.toy_csv(), "--k", 2, "--beta", 0, "--restarts", 1, "--seed", 7, "--out", self.tmp / name)
            self.assertEqual(res.returncode, 0, res.stderr)
            outs.append([(self.tmp / name / f).read_bytes() for f in ("result.json", "assignments.csv")])
        self.assertEqual(outs[0], outs[1])

    def test_fit_input_errors(self):
        res = run("fit", self.tmp / "nope.csv", "--k", 2, "--out", self.tmp / "o")
        self.assertEqual(res.returncode, 2)
        self.assertIn("nope.csv", res.stderr)

        bad = self.tmp / "bad.csv"
        bad.write_text("1,2\n3,4\n5,oops\n")
        res = run("fit", bad, "--k", 2, "--out", self.tmp / "o")
        self.assertEqual(res.returncode, 2)
        self.assertIn(":3:", res.stderr)

        ragged = self.tmp / "ragged.csv"
        ragged.write_text("a,b\n1,2\n3,4,5\n")
        res = run("fit", ragged, "--k", 2, "--out", self.tmp / "o")
        self.assertEqual(res.returncode, 2)
        self.assertIn(":3:", res.stderr)

        res = run("fit", self.toy_csv(), "--k", 2, "--beta", 3, "--out", self.tmp / "o")
        self.assertEqual(res.returncode, 2)
        res = run("fit", self.toy_csv(), "--k", 2, "--bogus", 1)
        self.assertEqual(res.returncode, 2)

    def test_fit_collision_and_force(self):
        out = self.tmp / "out"
        self.assertEqual(run("fit", self.toy_csv(), "--k", 2, "--c1", 0.01, "--out", out).returncode, 0)
        self.assertEqual(run("fit", self.toy_csv(), "--k", 2, "--c1", 0.01, "--out", out).returncode, 2)
        self.assertEqual(run("fit", self.toy_csv(), "--k", 2, "--c1", 0.01, "--out", out, "--force").returncode, 0)

    def test_fit_config_file(self):
        cfg = self.tmp / "cfg.json"
        cfg.write_text(json.dumps({"beta": 0.3, "k": 2, "c1": 0.01, "seed": 4}))
        res = run("fit", self.toy_csv(), "--config", cfg, "--beta", 0.2, "--out", self.tmp / "o")
        self.assertEqual(res.returncode, 0, res.stderr)
        doc = json.loads((self.tmp / "o" / "result.json").read_text())
        self.assertEqual(doc["config"]["beta"], 0.2)  # flag wins
        self.assertEqual(doc["config"]["seed"], 4)
        self.assertEqual(doc["k"], 2)

        cfg.write_text(json.dumps({"beta": 0.3, "gamma": 1}))
        res = run("fit", self.toy_csv(), "--config", cfg, "--out", self.tmp / "o2")
        self.assertEqual(res.returncode, 2)
        self.assertIn("gamma", res.stderr)

    def test_fit_computation_failure(self):
        # five identical points cannot be split into three clusters
        same = self.tmp / "same.csv"
        same.write_text("1,1\n" * 5)
        res = run("fit", same, "--k", 3, "--restarts", 2, "--out", self.tmp / "o")
        self.assertEqual(res.returncode, 3, res.stderr)

    # ---- simulate ----------------------------------------------------------

    def test_simulate_bundled_scenario(self):
        scen = ROOT / "data" / "scenarios" / "table1_p2_I.json"
        validate(scen, "scenario.schema.json")
        res = run("simulate", scen, "--out", self.tmp / "sim")
        self.assertEqual(res.returncode, 0, res.stderr)
        lines = res.stdout.splitlines()
        self.assertTrue(any(l.startswith("p") and "beta=0.1" in l for l in lines))
        self.assertTrue(any(l.split()[:2] == ["2", "1I"] for l in lines), res.stdout)
        doc = validate(self.tmp / "sim" / "summary.json", "simulation_summary.schema.json")
        self.assertEqual(doc["scenario"]["replications"], 20)
        self.assertEqual(len(csv_rows(self.tmp / "sim" / "replications.csv")), 1 + 2 * 20)

    def scenario(self, **over):
        doc = {"n": 200, "p": 2, "k": 3, "contamination": "annulus", "contamination_level": 0.1,
               "replications": 2, "seed": 1, "methods": [{"name": "robust", "beta": 0.2, "restarts": 3}]}
        doc.update(over)
        path = self.tmp / f"scen_{len(list(self.tmp.iterdir()))}.json"
        path.write_text(json.dumps(doc))
        validate(path, "scenario.schema.json")
        return path

    def test_simulate_rows_and_seeds(self):
        res = run("simulate", self.scenario(replications=1), "--out", self.tmp / "one")
        self.assertEqual(res.returncode, 0, res.stderr)
        self.assertEqual(len(csv_rows(self.tmp / "one" / "replications.csv")), 2)

        a = run("simulate", self.scenario(seed=1), "--out", self.tmp / "s1")
        b = run("simulate", self.scenario(seed=2), "--out", self.tmp / "s2")
        self.assertEqual((a.returncode, b.returncode), (0, 0))
        ra, rb = csv_rows(self.tmp / "s1" / "replications.csv"), csv_rows(self.tmp / "s2" / "replications.csv")
        self.assertEqual(ra[0], rb[0])
        self.assertNotEqual(ra[1:], rb[1:])
        for d in ("s1", "s2"):
            validate(self.tmp / d / "summary.json", "simulation_summary.schema.json")

    def test_simulate_invalid_spec(self):
        bad = self.tmp / "bad.json"
        bad.write_text(json.dumps({"n": 100, "methods": [{"beta": 0.1}], "colour": "red"}))
        self.assertEqual(run("simulate", bad, "--out", self.tmp / "x").returncode, 2)
        bad.write_text("{not json")
        self.assertEqual(run("simulate", bad, "--out", self.tmp / "x").returncode, 2)
        bad.write_text(json.dumps({"methods": [{"beta": 0.1, "gamma": 2}]}))
        self.assertEqual(run("simulate", bad, "--out", self.tmp / "x").returncode, 2)

    # ---- influence ---------------------------------------------------------

    def test_influence_defaults(self):
        res = run("influence", "--out", self.tmp / "inf")
        self.assertEqual(res.returncode, 0, res.stderr)
        doc = validate(self.tmp / "inf" / "solution.json", "influence_solution.schema.json")
        self.assertEqual(doc["model"], {"weights": [0.5, 0.5], "means": [0.0, 5.0], "variances": [1.0, 4.0]})
        self.assertEqual(doc["c"], 5.0)
        self.assertEqual(doc["grid"], {"min": -30.0, "max": 30.0, "points": 601})
        self.assertEqual([s["beta"] for s in doc["solutions"]], [0.1, 0.2, 1.0])
        for s in doc["solutions"]:
            self.assertLess(max(abs(r) for r in s["residuals"]), 1e-8)
            rows = csv_rows(self.tmp / "inf" / s["if_csv"])
            self.assertEqual(rows[0], ["y", "IF_pi1", "IF_pi2", "IF_a", "IF_b", "IF_mu1", "IF_mu2", "IF_s1", "IF_s2"])
            self.assertEqual(len(rows), 602)
            self.assertAlmostEqual(float(rows[1][0]), -30.0)
            self.assertAlmostEqual(float(rows[-1][0]), 30.0)

    def test_influence_options(self):
        res = run("influence", "--beta", "0.5", "--grid-min", -5, "--grid-max", 5, "--grid-points", 11,
                  "--out", self.tmp / "g")
        self.assertEqual(res.returncode, 0, res.stderr)
        self.assertEqual(len(csv_rows(self.tmp / "g" / "if_beta_0.5.csv")), 12)

        res = run("influence", "--beta", "0", "--out", self.tmp / "z")
        self.assertEqual(res.returncode, 2)
        self.assertIn("unbounded", res.stderr)

        res = run("influence", "--means", "-5,5", "--variances", "1,1", "--out", self.tmp / "eq")
        self.assertEqual(res.returncode, 3)

    # ---- image -------------------------------------------------------------

    def test_image_ppm(self):
        src = self.tmp / "tone.ppm"
        two_tone(src)
        out = self.tmp / "seg.ppm"
        res = run("image", src, "--k", 2, "--beta", 0.2, "--threshold", 0.02, "--out", out)
        self.assertEqual(res.returncode, 0, res.stderr)
        doc = validate(str(out) + ".json", "image_sidecar.schema.json")
        self.assertEqual(len(doc["clusters"]), 2)
        self.assertEqual(doc["config"]["beta"], 0.2)
        self.assertEqual(doc["config"]["threshold"], 0.02)
        self.assertEqual(doc["config"]["c"], 20.0)
        self.assertEqual(doc["config"]["c1"], 0.1)
        flagged = sum(t["pixels"] for t in doc["outlier_types"])
        self.assertEqual(flagged, 60)
        self.assertEqual(sum(c["pixels"] for c in doc["clusters"]) + flagged, 40 * 30)
        rec = Image.open(out)
        self.assertEqual(rec.size, (40, 30))
        self.assertEqual(len(set(rec.get_flattened_data())), doc["palette_size"])

        res = run("image", src, "--k", 2, "--out", out)
        self.assertEqual(res.returncode, 2)
        self.assertEqual(run("image", src, "--k", 2, "--out", out, "--force").returncode, 0)

    def test_image_png_and_bad_input(self):
        src = self.tmp / "tone.png"
        two_tone(src, noise=0.0)
        res = run("image", src, "--out", self.tmp / "p.ppm")
        self.assertEqual(res.returncode, 0, res.stderr)
        doc = json.loads((self.tmp / "p.ppm.json").read_text())
        self.assertEqual(doc["outlier_types"], [])
        self.assertEqual(set(Image.open(self.tmp / "p.ppm").get_flattened_data()), {(0, 0, 255), (0, 255, 0)})

        junk = self.tmp / "junk.png"
        junk.write_bytes(b"\x89PNG\r\n\x1a\nnot really")
        self.assertEqual(run("image", junk, "--out", self.tmp / "j.ppm").returncode, 2)

    def test_help(self):
        self.assertEqual(run("--help").returncode, 0)
        self.assertEqual(run().returncode, 2)


if __name__ == "__main__":
    unittest.main(verbosity=2)
