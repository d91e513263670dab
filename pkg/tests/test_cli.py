import os
import shutil
import sys
import tempfile
import unittest
from unittest import mock

sys.path.insert(0, "..")

from fixtures import synth_config, write_config, write_digit_fixture

from fedcluster.cli import cmd_compare, cmd_partition_report, cmd_run, compare_runs, main, partition_report
from fedcluster.config import SimConfig, parse_config
from fedcluster.messages import RoundOutput
from fedcluster.simulation import run_simulation
from fedcluster.util.errors import ConfigError
from fedcluster.util.metrics import read_metrics, read_summary


def read_bytes(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


class SimulationTest(unittest.TestCase):
    def test_fedavg_summary(self):
        records, summary = run_simulation(SimConfig.model_validate(synth_config(rounds=10)))
        self.assertEqual(len(records), 10)
        self.assertEqual(summary.method, "FedAvg")
        self.assertEqual(summary.total_uploads, 80)
        self.assertEqual(summary.p_trajectory, [8] * 10)
        self.assertEqual(summary.config["federation"]["policy"], "FEDAVG_ALL")

    def test_thread_count_does_not_change_records(self):
        config = SimConfig.model_validate(synth_config(policy="ADAPTIVE", rounds=15))
        one, _ = run_simulation(config, threads=1)
        three, _ = run_simulation(config, threads=3)
        self.assertEqual(one, three)


class CmdRunTest(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_writes_identical_metrics_for_the_same_seed(self):
        data = synth_config(policy="ADAPTIVE", rounds=12)
        data["controller"] = {"mode": "EXP"}
        config_path = write_config(self.dir, data)
        first, second = os.path.join(self.dir, "a"), os.path.join(self.dir, "b")

        self.assertEqual(cmd_run(config_path, out=first, threads=1), 0)
        self.assertEqual(cmd_run(config_path, out=second, threads=4), 0)

        metrics = read_bytes(os.path.join(first, "metrics.jsonl"))
        self.assertEqual(metrics, read_bytes(os.path.join(second, "metrics.jsonl")))
        self.assertEqual(len(read_metrics(os.path.join(first, "metrics.jsonl"))), 12)
        summary = read_summary(os.path.join(first, "summary.json"))
        self.assertEqual(summary.method, "Adaptive-EXP")
        self.assertIn(summary.modal_p, range(1, 9))

    def test_seed_override(self):
        config_path = write_config(self.dir, synth_config(rounds=3))
        cmd_run(config_path, out=os.path.join(self.dir, "a"), seed=1)
        cmd_run(config_path, out=os.path.join(self.dir, "b"), seed=2)
        self.assertNotEqual(
            read_bytes(os.path.join(self.dir, "a", "metrics.jsonl")),
            read_bytes(os.path.join(self.dir, "b", "metrics.jsonl")),
        )
        self.assertEqual(read_summary(os.path.join(self.dir, "b", "summary.json")).config["seed"], 2)

    def test_idx_run_with_small_cnn(self):
        paths = write_digit_fixture(self.dir)
        data = {
            "dataset": {"kind": "IDX", **paths, "test_label_filter": list(range(10))},
            "model": {"architecture": "PAPER_CNN", "conv_channels": [2, 4], "hidden_sizes": [8]},
            "federation": {"rounds": 3, "policy": "ADAPTIVE"},
        }
        out = os.path.join(self.dir, "run")
        self.assertEqual(cmd_run(write_config(self.dir, data), out=out), 0)
        records = read_metrics(os.path.join(out, "metrics.jsonl"))
        self.assertEqual([r.round for r in records], [1, 2, 3])
        # digits 8 and 9 are never predicted
        self.assertTrue(all(r.test_accuracy <= 0.8 for r in records))

    def test_progress_lines(self):
        config_path = write_config(self.dir, synth_config(rounds=2))
        self.assertEqual(cmd_run(config_path, out=os.path.join(self.dir, "run"), progress=True), 0)
        record = read_metrics(os.path.join(self.dir, "run", "metrics.jsonl"))[0]
        line = RoundOutput("FedAvg", record).get_formatted_content()
        self.assertIn("round    1", line)
        self.assertIn("r=-", line)
        self.assertIn("uploads=8", line)

    def test_threads_from_environment(self):
        config_path = write_config(self.dir, synth_config(rounds=2))
        out = os.path.join(self.dir, "run")
        with mock.patch.dict(os.environ, {"FEDCLUSTER_THREADS": "3"}):
            self.assertEqual(cmd_run(config_path, out=out), 0)
        for bad in ("four", "0", "-2"):
            with mock.patch.dict(os.environ, {"FEDCLUSTER_THREADS": bad}):
                with self.assertRaisesRegex(ConfigError, "FEDCLUSTER_THREADS"):
                    cmd_run(config_path, out=out)
                self.assertEqual(main(["run", "--config", config_path, "--out", out]), 1)
            # an explicit flag wins over the environment
            with mock.patch.dict(os.environ, {"FEDCLUSTER_THREADS": bad}):
                self.assertEqual(cmd_run(config_path, out=out, threads=2), 0)

    def test_main_reports_config_errors(self):
        data = synth_config()
        data["federation"]["k"] = 0
        self.assertEqual(main(["run", "--config", write_config(self.dir, data)]), 1)
        self.assertEqual(main(["run", "--config", os.path.join(self.dir, "missing.json")]), 1)


class CompareTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.dir = tempfile.mkdtemp()
        cls.metrics = []
        for name, data in [
            ("fedavg", synth_config(rounds=20)),
            ("fedsauc", synth_config(policy="FEDSAUC_FIXED_K", k=4, rounds=20)),
        ]:
            out = os.path.join(cls.dir, name)
            cmd_run(write_config(cls.dir, data, f"{name}.json"), out=out)
            cls.metrics.append(os.path.join(out, "metrics.jsonl"))

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.dir)

    def test_rows(self):
        rows = compare_runs(self.metrics)
        self.assertEqual([row.method for row in rows], ["FedAvg", "FedSAUC(4)"])
        # 8 uploads in each warmup round, then half of every pair
        self.assertEqual([row.transmissions for row in rows], [160, 2 * 8 + 18 * 4])
        self.assertEqual(rows[0].config_delta, [])
        self.assertTrue(any("policy" in path for path in rows[1].config_delta))
        self.assertTrue(all(0 <= row.top_accuracy <= 1 for row in rows))

    def test_single_file(self):
        self.assertEqual(len(compare_runs(self.metrics[:1])), 1)
        self.assertEqual(cmd_compare(self.metrics[:1]), 0)

    def test_empty_input_is_a_usage_error(self):
        self.assertEqual(cmd_compare([]), 2)


class PartitionReportTest(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_synth_clients_hold_one_group(self):
        classes, rows = partition_report(SimConfig.model_validate(synth_config()))
        self.assertEqual(classes, [0, 1, 2, 3])
        for client, counts in enumerate(rows):
            self.assertEqual({label for label, count in counts.items() if count}, {client // 2})

    def test_idx_pairwise_with_cap(self):
        paths = write_digit_fixture(self.dir)
        data = {
            "dataset": {"kind": "IDX", **paths, "per_client_cap": 10},
            "model": {"architecture": "LOGREG"},
        }
        config_path = write_config(self.dir, data)
        classes, rows = partition_report(parse_config(config_path))
        self.assertEqual(classes, list(range(8)))
        self.assertTrue({label for label, count in rows[0].items() if count} <= {0, 1})
        self.assertEqual([sum(counts.values()) for counts in rows], [10] * 8)
        self.assertEqual(cmd_partition_report(config_path), 0)


if __name__ == "__main__":
    unittest.main()
