import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional

import numpy as np

from fedcluster.clustering import ClusterAssignment, Linkage, agglomerate, cut
from fedcluster.controller import AdaptiveController, ControllerConfig, LossSignal, reduction_ratio
from fedcluster.data.datasets import LabeledDataset
from fedcluster.federation.aggregation import aggregate_fedavg
from fedcluster.federation.client import Client, TrainingSettings, Upload
from fedcluster.federation.ledger import TransmissionLedger
from fedcluster.federation.records import RoundRecord
from fedcluster.federation.selection import (
    SelectionMode,
    SelectionPolicy,
    select_half_per_cluster,
    select_one_per_cluster,
)
from fedcluster.nn.model_spec import ModelSpec
from fedcluster.nn.network import ParamVector, init_params
from fedcluster.nn.training import evaluate
from fedcluster.similarity import Basis, basis_vector, distance_matrix
from fedcluster.util.seeding import derive_seed, stream

logger = logging.getLogger(__name__)


class ServerState:
    def __init__(self, global_params: ParamVector, controller: Optional[AdaptiveController] = None):
        self.global_params = global_params
        # latest upload per client, possibly stale for clients idle since
        self.cached_params: dict[int, ParamVector] = {}
        self.cached_basis: dict[int, ParamVector] = {}
        self.cached_losses: dict[int, float] = {}
        self.L_history: List[float] = []
        self.controller = controller
        self.round_index = 0
        self.ledger = TransmissionLedger()


class FederationEngine:
    def __init__(
        self,
        spec: ModelSpec,
        clients: List[Client],
        test_set: LabeledDataset,
        policy: SelectionPolicy,
        training: TrainingSettings = TrainingSettings(),
        controller_config: Optional[ControllerConfig] = None,
        basis: Basis = Basis.DELTA,
        linkage: Linkage = Linkage.AVERAGE,
        seed: int = 0,
        threads: int = 1,
        rounds: Optional[int] = None,
        eval_every: int = 1,
    ):
        """
        Simulated federated server with cluster-based client selection.

        Parameters:
            spec (ModelSpec): Architecture shared by the server and every client.
            clients (List[Client]): Participants, ids 0..n-1.
            test_set (LabeledDataset): Held-out samples for the global model's accuracy.
            policy (SelectionPolicy): How participants are chosen after warmup.
            training (TrainingSettings): Local optimiser settings.
            controller_config (ControllerConfig, optional): Cluster-count controller of the
                ADAPTIVE policy. Defaults to a controller over all clients in the policy's mode.
            basis (Basis): Vector clients are compared by. Defaults to DELTA.
            linkage (Linkage): Linkage of the agglomerative clustering. Defaults to average.
            seed (int): Master seed; every random stream is derived from it.
            threads (int): Workers for local training. Results do not depend on it.
            rounds (int, optional): Planned round count; the last round is always evaluated.
            eval_every (int): Evaluate test accuracy every k-th round.
        """
        ids = sorted(client.id for client in clients)
        if ids != list(range(len(clients))) or len(clients) < 2:
            raise ValueError(f"Clients must have ids 0..n-1 with n >= 2, got {ids}")
        self.spec = spec
        self.clients = sorted(clients, key=lambda c: c.id)
        self.n = len(clients)
        self.test_set = test_set
        self.policy = policy
        self.training = training
        self.basis = Basis(basis)
        self.linkage = Linkage(linkage)
        self.seed = seed
        self.threads = max(1, threads)
        self.rounds = rounds
        self.eval_every = max(1, eval_every)

        controller = None
        if policy.mode == SelectionMode.ADAPTIVE:
            if controller_config is None:
                controller_config = ControllerConfig(n=self.n, mode=policy.controller_mode)
            if controller_config.n != self.n:
                raise ValueError(
                    f"Controller is configured for {controller_config.n} clients, engine has {self.n}."
                )
            controller = AdaptiveController(controller_config)

        self.server = ServerState(init_params(spec, derive_seed(seed, "init")), controller)
        self.participants = list(range(self.n))
        self.p_current = self.n
        self.assignment: Optional[ClusterAssignment] = None
        self.frozen_assignment: Optional[ClusterAssignment] = None

    def _train(self, participants: List[int], round_index: int) -> List[Upload]:
        global_params = self.server.global_params

        def work(client: Client) -> Upload:
            seed = derive_seed(self.seed, "shuffle", client.id, round_index)
            return client.train(self.spec, global_params, self.training, seed)

        chosen = [self.clients[i] for i in participants]
        if self.threads == 1:
            uploads = [work(client) for client in chosen]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                futures = [executor.submit(work, client) for client in chosen]
                uploads = [future.result() for future in as_completed(futures)]
        return sorted(uploads, key=lambda u: u.client_id)

    def _distances(self) -> np.ndarray:
        vectors = [self.server.cached_basis[c] for c in range(self.n)]
        return distance_matrix(vectors)

    def _select_next(self, round_index: int, ratio: Optional[float]):
        """Participants, p and cluster labels for round `round_index + 1`."""
        everyone = list(range(self.n))
        mode = self.policy.mode
        if mode == SelectionMode.FEDAVG_ALL or round_index < self.policy.warmup_rounds:
            return everyone, self.n, None

        rng = stream(self.policy.seed, "select", round_index + 1)
        if mode == SelectionMode.FEDSAUC_FIXED_K:
            if self.frozen_assignment is None:
                k = min(self.policy.k, self.n)
                self.frozen_assignment = cut(agglomerate(self._distances(), self.linkage), k)
                logger.info(
                    f"Froze {k} clusters after round {round_index}: "
                    f"{self.frozen_assignment.clusters()}"
                )
            assignment = self.frozen_assignment
            return select_half_per_cluster(assignment, rng), assignment.p, assignment

        p = self.server.controller.update(ratio if ratio is not None else 0.0)
        assignment = cut(agglomerate(self._distances(), self.linkage), p)
        return select_one_per_cluster(assignment, rng), p, assignment

    def run_round(self) -> RoundRecord:
        server = self.server
        server.round_index += 1
        i = server.round_index
        participants = self.participants
        start_params = server.global_params

        uploads = self._train(participants, i)
        cumulative = server.ledger.record(len(uploads))
        for upload in uploads:
            server.cached_params[upload.client_id] = upload.params
            server.cached_basis[upload.client_id] = basis_vector(
                upload.params, start_params, self.basis
            )
            server.cached_losses[upload.client_id] = upload.loss

        loss = float(np.mean([u.loss for u in uploads]))
        ratio = None
        if server.L_history:
            ratio = reduction_ratio(LossSignal(L_prev=server.L_history[-1], L_cur=loss))
        server.L_history.append(loss)

        server.global_params = aggregate_fedavg([(u.params, u.sample_count) for u in uploads])

        accuracy = None
        if i % self.eval_every == 0 or i == self.rounds:
            accuracy = evaluate(self.spec, server.global_params, self.test_set)

        record = RoundRecord(
            round=i,
            participants=list(participants),
            loss=loss,
            reduction_ratio=ratio,
            p=self.p_current,
            assignment=self.assignment.labels if self.assignment else None,
            test_accuracy=accuracy,
            uploads=len(uploads),
            cumulative_uploads=cumulative,
        )
        logger.debug(
            f"Round {i}: p={record.p} participants={record.participants} loss={loss:.4f} "
            f"acc={accuracy} uploads={cumulative}"
        )

        self.participants, self.p_current, self.assignment = self._select_next(i, ratio)
        return record

    def run(
        self, rounds: int, on_round: Optional[Callable[[RoundRecord], None]] = None
    ) -> List[RoundRecord]:
        self.rounds = self.server.round_index + rounds
        records = []
        for _ in range(rounds):
            record = self.run_round()
            records.append(record)
            if on_round:
                on_round(record)
        return records
