import os
import shutil
import sys
import tempfile
import unittest
from collections import Counter

import numpy as np

sys.path.insert(0, "..")

from fixtures import synth_config

from fedcluster.clustering import ClusterAssignment, agglomerate, cut
from fedcluster.config import SimConfig
from fedcluster.controller import ControllerMode
from fedcluster.data import synth_generate, synth_holdout
from fedcluster.federation import (
    Client,
    FederationEngine,
    RoundRecord,
    RunSummary,
    SelectionMode,
    SelectionPolicy,
    TransmissionLedger,
    aggregate_fedavg,
    measure_transmissions,
    modal_p,
    select_half_per_cluster,
    select_one_per_cluster,
)
from fedcluster.nn import Architecture, ModelSpec
from fedcluster.simulation import build_engine, run_simulation
from fedcluster.util.errors import DataFormatError, ShapeError
from fedcluster.util.metrics import read_metrics, write_metrics

SYNTH_SEED = 11
# keeps blob means within a few units of the origin so logits do not saturate at init
SPREAD = 0.1


def planted_engine(mode, k=None, controller_mode=ControllerMode.TCP, seed=0, threads=1):
    """8 clients in 4 planted groups of 2, training a logistic regression."""
    shards = synth_generate(4, 2, dims=2, spread=SPREAD, seed=SYNTH_SEED)
    test_set = synth_holdout(4, 2, SPREAD, SYNTH_SEED)
    spec = ModelSpec(architecture=Architecture.LOGREG, input_shape=(2,), class_count=4)
    policy = SelectionPolicy(mode=mode, k=k, controller_mode=controller_mode, seed=seed)
    return FederationEngine(
        spec, [Client(shard) for shard in shards], test_set, policy, seed=seed, threads=threads
    )


def record(round_, p=8, accuracy=None, cumulative=8):
    return RoundRecord(
        round=round_,
        participants=[0],
        loss=1.0,
        p=p,
        test_accuracy=accuracy,
        uploads=1,
        cumulative_uploads=cumulative,
    )


class AggregateTest(unittest.TestCase):
    def test_weighted_mean(self):
        out = aggregate_fedavg([(np.array([1.0, 2.0]), 1), (np.array([3.0, 4.0]), 3)])
        self.assertTrue(np.allclose(out, [2.5, 3.5]))

    def test_single_upload_is_returned(self):
        params = np.array([0.1, -0.7, 3.0])
        self.assertTrue(np.allclose(aggregate_fedavg([(params, 17)]), params))

    def test_identical_uploads_are_conserved(self):
        params = np.random.default_rng(0).normal(size=50)
        out = aggregate_fedavg([(params, count) for count in (3, 10, 1, 250)])
        self.assertTrue(np.allclose(out, params, rtol=1e-12, atol=1e-12))

    def test_errors(self):
        with self.assertRaises(ShapeError):
            aggregate_fedavg([])
        with self.assertRaises(ShapeError):
            aggregate_fedavg([(np.zeros(2), 1), (np.zeros(3), 1)])


class SelectionTest(unittest.TestCase):
    def test_singletons_select_everyone(self):
        assignment = ClusterAssignment(labels=list(range(8)), p=8)
        rng = np.random.default_rng(0)
        self.assertEqual(select_one_per_cluster(assignment, rng), list(range(8)))

    def test_single_cluster_selects_one(self):
        assignment = ClusterAssignment(labels=[0] * 8, p=1)
        chosen = select_one_per_cluster(assignment, np.random.default_rng(0))
        self.assertEqual(len(chosen), 1)
        self.assertIn(chosen[0], range(8))

    def test_one_per_cluster_is_uniform(self):
        assignment = ClusterAssignment(labels=[0, 0, 1, 1, 2, 2, 3, 3], p=4)
        rng = np.random.default_rng(1)
        counts = Counter()
        draws = 10000
        for _ in range(draws):
            chosen = select_one_per_cluster(assignment, rng)
            self.assertEqual(len(chosen), 4)
            counts.update(chosen)
        for client in range(8):
            self.assertAlmostEqual(counts[client] / draws, 0.5, delta=0.02)

    def test_half_per_cluster(self):
        rng = np.random.default_rng(2)
        pairs = ClusterAssignment(labels=[0, 0, 1, 1, 2, 2, 3, 3], p=4)
        chosen = select_half_per_cluster(pairs, rng)
        self.assertEqual(len(chosen), 4)
        self.assertEqual(sorted(c // 2 for c in chosen), [0, 1, 2, 3])
        self.assertEqual(len(select_half_per_cluster(ClusterAssignment(labels=[0] * 8, p=1), rng)), 4)
        lone = ClusterAssignment(labels=[0, 1, 1], p=2)
        self.assertIn(0, select_half_per_cluster(lone, rng))

    def test_policy_labels(self):
        self.assertEqual(SelectionPolicy(mode=SelectionMode.FEDAVG_ALL).label, "FedAvg")
        self.assertEqual(SelectionPolicy(mode=SelectionMode.FEDSAUC_FIXED_K, k=4).label, "FedSAUC(4)")
        self.assertEqual(
            SelectionPolicy(controller_mode=ControllerMode.EXP).label, "Adaptive-EXP"
        )
        with self.assertRaises(ValueError):
            SelectionPolicy(mode=SelectionMode.FEDSAUC_FIXED_K)


class LedgerTest(unittest.TestCase):
    def test_cumulative(self):
        ledger = TransmissionLedger()
        self.assertEqual(measure_transmissions(ledger), 0)
        for uploads in (8, 8, 4):
            ledger.record(uploads)
        self.assertEqual(measure_transmissions(ledger), 20)


class EngineTest(unittest.TestCase):
    def test_fedavg_uploads_every_client_every_round(self):
        records = planted_engine(SelectionMode.FEDAVG_ALL).run(20)
        self.assertEqual(records[-1].cumulative_uploads, 8 * 20)
        self.assertTrue(all(r.participants == list(range(8)) for r in records))
        self.assertTrue(all(r.test_accuracy is not None for r in records))

    def test_fedsauc_transmissions(self):
        for k in (1, 2, 4):
            records = planted_engine(SelectionMode.FEDSAUC_FIXED_K, k=k).run(200)
            self.assertEqual(records[-1].cumulative_uploads, 808, f"k={k}")
            self.assertEqual([len(r.participants) for r in records[:2]], [8, 8])
            self.assertTrue(all(r.p == k for r in records[2:]))

    def test_warmup_deltas_recover_planted_groups(self):
        engine = planted_engine(SelectionMode.FEDAVG_ALL)
        engine.run(2)
        assignment = cut(agglomerate(engine._distances()), 4)
        self.assertEqual(assignment.labels, [0, 0, 1, 1, 2, 2, 3, 3])

    def test_adaptive_selects_one_client_per_cluster(self):
        records = planted_engine(SelectionMode.ADAPTIVE, controller_mode=ControllerMode.EXP).run(40)
        self.assertIsNone(records[0].reduction_ratio)
        self.assertEqual([r.p for r in records[:2]], [8, 8])
        for r in records[2:]:
            self.assertEqual(len(r.participants), r.p)
            self.assertEqual(len(r.assignment), 8)
            self.assertEqual(max(r.assignment) + 1, r.p)
            self.assertEqual(sorted({r.assignment[c] for c in r.participants}), list(range(r.p)))
        self.assertEqual(records[-1].cumulative_uploads, sum(len(r.participants) for r in records))

    def test_results_do_not_depend_on_thread_count(self):
        runs = [
            planted_engine(SelectionMode.ADAPTIVE, controller_mode=ControllerMode.SA, seed=3, threads=t).run(30)
            for t in (1, 4)
        ]
        self.assertEqual(
            [r.model_dump_json() for r in runs[0]], [r.model_dump_json() for r in runs[1]]
        )

    def test_seed_changes_the_run(self):
        a = planted_engine(SelectionMode.FEDAVG_ALL, seed=1).run(3)
        b = planted_engine(SelectionMode.FEDAVG_ALL, seed=2).run(3)
        self.assertNotEqual([r.loss for r in a], [r.loss for r in b])

    def test_eval_every(self):
        engine = planted_engine(SelectionMode.FEDAVG_ALL)
        engine.eval_every = 3
        records = engine.run(7)
        evaluated = [r.round for r in records if r.test_accuracy is not None]
        self.assertEqual(evaluated, [3, 6, 7])

    def test_rejects_bad_client_ids(self):
        engine = planted_engine(SelectionMode.FEDAVG_ALL)
        with self.assertRaises(ValueError):
            FederationEngine(
                engine.spec, engine.clients[1:], engine.test_set, SelectionPolicy(mode=SelectionMode.FEDAVG_ALL)
            )


class PlantedGroupsTest(unittest.TestCase):
    """Full 200-round runs of the configured planted-group experiment."""

    def test_baseline_transmissions(self):
        _, fedavg = run_simulation(SimConfig.model_validate(synth_config(rounds=200)))
        self.assertEqual(fedavg.total_uploads, 1600)
        for k in (4, 2, 1):
            config = synth_config(policy="FEDSAUC_FIXED_K", k=k, rounds=200)
            _, summary = run_simulation(SimConfig.model_validate(config))
            self.assertEqual(summary.total_uploads, 808, f"k={k}")

    def test_adaptive_run_keeps_planted_blocks(self):
        data = synth_config(policy="ADAPTIVE", rounds=200)
        data["controller"] = {"mode": "EXP"}
        engine = build_engine(SimConfig.model_validate(data))
        records = engine.run(200)
        self.assertEqual(records[-1].cumulative_uploads, sum(len(r.participants) for r in records))
        self.assertLess(records[-1].cumulative_uploads, 1600)
        labels = cut(agglomerate(engine._distances()), 4).labels
        self.assertEqual(labels, [0, 0, 1, 1, 2, 2, 3, 3])
        # the relative loss drop falls under w once the blobs are separated, so p returns to n
        self.assertEqual(modal_p([r.p for r in records]), 8)


class RecordsTest(unittest.TestCase):
    def test_summary(self):
        records = [
            record(1, p=8, accuracy=0.5, cumulative=8),
            record(2, p=8, accuracy=0.9, cumulative=16),
            record(3, p=4, accuracy=0.9, cumulative=20),
            record(4, p=4, accuracy=None, cumulative=24),
        ]
        summary = RunSummary.from_records("FedAvg", records)
        self.assertEqual((summary.top_accuracy, summary.top_accuracy_round), (0.9, 2))
        self.assertEqual(summary.final_accuracy, 0.9)
        self.assertEqual(summary.total_uploads, 24)
        self.assertEqual(summary.p_trajectory, [8, 8, 4, 4])
        self.assertEqual(summary.modal_p, 4)

    def test_modal_p(self):
        self.assertEqual(modal_p([8, 8, 8, 4, 4]), 8)
        self.assertEqual(modal_p([8] * 100 + [4] * 50), 4)
        self.assertEqual(modal_p([3, 5, 5, 3]), 3)

    def test_metrics_file(self):
        directory = tempfile.mkdtemp()
        try:
            path = os.path.join(directory, "metrics.jsonl")
            records = [record(1), record(2, cumulative=16)]
            write_metrics(records, path)
            self.assertEqual(read_metrics(path), records)
            write_metrics([record(2), record(1)], path)
            with self.assertRaises(DataFormatError):
                read_metrics(path)
        finally:
            shutil.rmtree(directory)


if __name__ == "__main__":
    unittest.main()
