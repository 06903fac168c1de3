"""End-to-end checks of the csdis binary: exit codes, output schemas, CSV."""

import csv
import io
import json
import os
import subprocess
import sys
import tempfile
import unittest

import jsonschema

CSDIS = sys.argv.pop(1) if len(sys.argv) > 1 else "csdis"
SCHEMAS = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "schemas")


def run(*args, env=None):
    return subprocess.run([CSDIS, *args], capture_output=True, text=True, env=env)


def schema(name):
    with open(os.path.join(SCHEMAS, name)) as f:
        return json.load(f)


class Cli(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.data = os.path.join(cls.tmp.name, "data")
        cls.report = os.path.join(cls.tmp.name, "report.json")
        p = run("generate", "--n", "24", "--seed", "1", "--out", cls.data)
        assert p.returncode == 0, p.stderr
        p = run("scenarios", "--data", cls.data, "--runs", "2", "--iob-epochs", "1", "--dc-subsample", "0",
                "--out", cls.report)
        assert p.returncode == 0, p.stderr

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_exit_codes(self):
        self.assertEqual(run("--help").returncode, 0)
        self.assertEqual(run().returncode, 2)
        self.assertEqual(run("scenarios").returncode, 2)
        self.assertEqual(run("scenarios", "--data", self.data, "--runs", "0").returncode, 2)
        self.assertEqual(run("table", "--report", self.report, "--format", "xml").returncode, 2)
        self.assertEqual(run("dc", "--a", "/nonexistent.cstd", "--b", "/nonexistent.cstd").returncode, 2)

        bad = os.path.join(self.tmp.name, "bad.cstd")
        with open(bad, "wb") as f:
            f.write(b"XXXX" + bytes(20))
        p = run("dc", "--a", bad, "--b", bad)
        self.assertEqual(p.returncode, 4)
        self.assertIn("byte 0", p.stderr)

        self.assertEqual(run("pearson", "--x", "1,1,1", "--y", "1,2,3").returncode, 3)
        flat = os.path.join(self.data, "flat.cstd")
        subprocess.run([sys.executable, "-c", f"""
import struct
with open({flat!r}, 'wb') as f:
    f.write(b'CSTD' + struct.pack('<IBBQQ', 1, 2, 2, 24, 3) + struct.pack('<72d', *([0.5] * 72)))
"""], check=True)
        self.assertEqual(run("dc", "--a", flat, "--b", os.path.join(self.data, "styles.cstd")).returncode, 3)

    def test_threads_env(self):
        env = dict(os.environ, CSDIS_THREADS="0")
        self.assertEqual(run("scenarios", "--data", self.data, env=env).returncode, 2)

    def test_report_schema(self):
        with open(self.report) as f:
            report = json.load(f)
        jsonschema.validate(report, schema("report.schema.json"))
        self.assertEqual(len(report["scenarios"]), 5)
        for s in report["scenarios"]:
            for m in s["metrics"].values():
                self.assertEqual(len(m["per_run"]), 2)

    def test_table_json_schema(self):
        p = run("table", "--report", self.report, "--format", "json")
        self.assertEqual(p.returncode, 0, p.stderr)
        jsonschema.validate(json.loads(p.stdout), schema("table.schema.json"))

    def test_table_csv(self):
        p = run("table", "--report", self.report, "--format", "csv")
        self.assertEqual(p.returncode, 0, p.stderr)
        rows = list(csv.reader(io.StringIO(p.stdout)))
        self.assertEqual(rows[0], ["metric", "direction", "gt_gt", "rand_gt", "gt_rand", "rand_rand", "gt_corr"])
        self.assertEqual([r[0] for r in rows[1:]], ["dc_cs", "dc_ic", "dc_is", "iob_ic", "iob_is"])
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        self.assertEqual(buf.getvalue(), p.stdout)

    def test_table_traces_to_report(self):
        with open(self.report) as f:
            report = json.load(f)
        table = json.loads(run("table", "--report", self.report, "--format", "json").stdout)
        by_name = {s["scenario"]: s for s in report["scenarios"]}
        for row in table["rows"]:
            for cell in row["cells"]:
                stat = by_name[cell["scenario"]]["metrics"][row["metric"]]
                self.assertEqual(cell["mean"], stat["mean"])
                runs = stat["per_run"]
                self.assertAlmostEqual(sum(runs) / len(runs), stat["mean"], places=12)

    def test_pearson_matrix(self):
        p = run("pearson", "--report", self.report)
        self.assertEqual(p.returncode, 0, p.stderr)
        rows = list(csv.reader(io.StringIO(p.stdout)))
        self.assertEqual(rows[0][0], "metric")
        names = rows[0][1:6]
        values = {r[0]: r[1:6] for r in rows[1:]}
        for i, a in enumerate(names):
            self.assertEqual(float(values[a][i]), 1.0)
            for j, b in enumerate(names):
                x, y = values[a][j], values[b][i]
                self.assertEqual(x, y)

    def test_dc_command(self):
        p = run("dc", "--a", os.path.join(self.data, "styles.cstd"), "--b", os.path.join(self.data, "styles.cstd"))
        self.assertEqual(p.returncode, 0, p.stderr)
        self.assertAlmostEqual(json.loads(p.stdout)["dcor"], 1.0, places=12)
        blocked = run("dc", "--a", os.path.join(self.data, "images.cstd"),
                      "--b", os.path.join(self.data, "styles.cstd"), "--block", "5")
        full = run("dc", "--a", os.path.join(self.data, "images.cstd"), "--b", os.path.join(self.data, "styles.cstd"))
        self.assertAlmostEqual(json.loads(blocked.stdout)["dcor"], json.loads(full.stdout)["dcor"], places=10)


if __name__ == "__main__":
    unittest.main()
