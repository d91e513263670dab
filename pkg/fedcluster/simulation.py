import logging
import time
from typing import Callable, List, Optional

import numpy as np

from fedcluster.config import DatasetKind, SimConfig
from fedcluster.controller import ControllerConfig
from fedcluster.data import (
    ClientShard,
    LabeledDataset,
    PartitionPlan,
    filter_labels,
    load_idx,
    partition,
    synth_generate,
    synth_holdout,
)
from fedcluster.federation import (
    Client,
    FederationEngine,
    RoundRecord,
    RunSummary,
    SelectionPolicy,
    TrainingSettings,
)
from fedcluster.nn import ModelSpec
from fedcluster.util.seeding import derive_seed, stream

logger = logging.getLogger(__name__)


def _relabel(ds: LabeledDataset, mapping: dict[int, int], class_count: int) -> LabeledDataset:
    # labels outside the training map land on ids the model never predicts
    labels = np.array(
        [mapping.get(int(label), class_count + int(label)) for label in ds.labels], dtype=np.int64
    )
    return LabeledDataset(ds.inputs, labels, ds.source_index)


def _cap(ds: LabeledDataset, cap: Optional[int], seed: int, tag: str) -> LabeledDataset:
    if cap is None or len(ds) <= cap:
        return ds
    return ds.subset(np.sort(stream(seed, tag).permutation(len(ds))[:cap]))


def load_federated_data(config: SimConfig) -> tuple[list[ClientShard], LabeledDataset, ModelSpec]:
    """Builds the client shards, the held-out test set and the model spec a config describes."""
    dataset = config.dataset
    model = config.model

    if dataset.kind == DatasetKind.SYNTH:
        synth = dataset.synth
        seed = derive_seed(config.seed, "synth")
        shards = synth_generate(
            synth.n_groups,
            synth.clients_per_group,
            synth.dims,
            synth.spread,
            seed,
            samples_per_client=synth.samples_per_client,
        )
        if dataset.per_client_cap is not None:
            cap = dataset.per_client_cap
            shards = [
                ClientShard(s.client_id, s.dataset.subset(np.arange(min(s.sample_count, cap))))
                for s in shards
            ]
        test_set = synth_holdout(
            synth.n_groups, synth.dims, synth.spread, seed, synth.test_samples_per_group
        )
        input_shape, class_count = (synth.dims,), synth.n_groups
    else:
        train, mapping = filter_labels(
            load_idx(dataset.train_images, dataset.train_labels), dataset.labels, reindex=True
        )
        plan = PartitionPlan(
            n_clients=config.federation.n_clients,
            labels_per_client=[
                [mapping[label] for label in labels] for labels in config.labels_per_client()
            ],
            per_client_cap=dataset.per_client_cap,
            seed=derive_seed(config.seed, "partition"),
        )
        shards = partition(train, plan)
        test_keep = dataset.test_label_filter or dataset.labels
        test_set, _ = filter_labels(
            load_idx(dataset.test_images, dataset.test_labels), test_keep
        )
        test_set = _relabel(test_set, mapping, len(mapping))
        input_shape, class_count = train.sample_shape, len(mapping)

    test_set = _cap(test_set, dataset.test_cap, config.seed, "test")
    spec = ModelSpec(
        architecture=model.architecture,
        input_shape=input_shape,
        class_count=class_count,
        hidden_sizes=model.hidden_sizes,
        conv_channels=model.conv_channels,
    )
    return shards, test_set, spec


def build_engine(config: SimConfig, threads: Optional[int] = None) -> FederationEngine:
    shards, test_set, spec = load_federated_data(config)
    federation = config.federation
    policy = SelectionPolicy(
        mode=federation.policy,
        k=federation.k,
        controller_mode=config.controller.mode,
        warmup_rounds=federation.warmup_rounds,
        seed=derive_seed(config.seed, "select"),
    )
    controller = ControllerConfig(
        n=federation.n_clients,
        w=config.controller.w,
        hold_rounds=config.controller.hold_rounds,
        mode=config.controller.mode,
        sa_temperature=config.controller.sa_temperature,
        seed=derive_seed(config.seed, "controller"),
    )
    return FederationEngine(
        spec,
        [Client(shard) for shard in shards],
        test_set,
        policy,
        training=TrainingSettings(
            lr=config.model.lr,
            local_epochs=config.model.local_epochs,
            batch_size=config.model.batch_size,
        ),
        controller_config=controller,
        basis=federation.similarity_basis,
        linkage=federation.linkage,
        seed=config.seed,
        threads=threads or config.threads,
        rounds=federation.rounds,
        eval_every=federation.eval_every,
    )


def run_simulation(
    config: SimConfig,
    threads: Optional[int] = None,
    on_round: Optional[Callable[[RoundRecord], None]] = None,
) -> tuple[List[RoundRecord], RunSummary]:
    """
    Runs every configured round and summarises the run.

    The outcome depends only on the config (including its seed), never on `threads`.
    """
    engine = build_engine(config, threads)
    method = method_label(config)
    logger.info(
        f"Starting {method}: {engine.n} clients, {config.federation.rounds} rounds, "
        f"{engine.spec.architecture.value} with {engine.spec.param_count} parameters"
    )
    started = time.monotonic()
    records = engine.run(config.federation.rounds, on_round=on_round)
    summary = RunSummary.from_records(method, records, config.model_dump(mode="json"))
    logger.info(
        f"Finished {method} in {time.monotonic() - started:.1f}s: "
        f"top accuracy {summary.top_accuracy}, {summary.total_uploads} uploads"
    )
    return records, summary


def method_label(config: SimConfig) -> str:
    return SelectionPolicy(
        mode=config.federation.policy,
        k=config.federation.k,
        controller_mode=config.controller.mode,
        warmup_rounds=config.federation.warmup_rounds,
    ).label
