"""Scikit-learn style wrapper: fit on circuits, sample new ones.

`QFusionGenerator` follows the estimator contract (`get_params` /
`set_params`, trailing-underscore fitted attributes, `check_is_fitted`),
so it composes with sklearn tooling the way generative estimators like
`KernelDensity` do.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import simulator
from .circuit import Circuit
from .dataset import DatasetRecord
from .model import EncoderConfig, TrainConfig, train
from .sampler import SampleResult, SamplerConfig, sample_circuits


def ensure_circuit_list(X) -> list[DatasetRecord]:
    """Validation helper: coerce circuits or records into labeled records."""
    if isinstance(X, (Circuit, DatasetRecord)):
        X = [X]
    records: list[DatasetRecord] = []
    for item in X:
        if isinstance(item, DatasetRecord):
            records.append(item)
        elif isinstance(item, Circuit):
            records.append(DatasetRecord(item, simulator.label(item)))
        else:
            raise TypeError(
                f"expected Circuit or DatasetRecord items, got {type(item).__name__}"
            )
    if not records:
        raise ValueError("X must contain at least one circuit")
    gatesets = {r.circuit.gateset_id for r in records}
    if len(gatesets) != 1:
        raise ValueError(f"all circuits must share one gate set, got {sorted(gatesets)}")
    return records


class QFusionGenerator(BaseEstimator):
    """Layerwise diffusion generator for quantum circuits.

    Parameters mirror the training and sampling configuration; all have
    desk-scale defaults. Fit on a list of `Circuit` (labels are computed)
    or `DatasetRecord` objects, then draw new circuits with `sample`.
    """

    def __init__(self, epochs=20, batch_size=32, learning_rate=1e-3,
                 diffusion_steps=32, node_embed_dim=64, wire_embed_dim=16,
                 message_rounds=2, hidden_dim=128, mode="wire_head",
                 edge_mode="constrained", max_layers=64, seed=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.diffusion_steps = diffusion_steps
        self.node_embed_dim = node_embed_dim
        self.wire_embed_dim = wire_embed_dim
        self.message_rounds = message_rounds
        self.hidden_dim = hidden_dim
        self.mode = mode
        self.edge_mode = edge_mode
        self.max_layers = max_layers
        self.seed = seed

    def fit(self, X, y=None):
        records = ensure_circuit_list(X)
        config = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            diffusion_steps=self.diffusion_steps,
            encoder=EncoderConfig(
                node_embed_dim=self.node_embed_dim,
                wire_embed_dim=self.wire_embed_dim,
                message_rounds=self.message_rounds,
                hidden_dim=self.hidden_dim,
            ),
        )
        self.model_ = train(records, config, seed=self.seed)
        self.loss_history_ = self.model_.metadata["loss_history"]
        self.n_features_in_ = 1
        return self

    def sample(self, n_samples: int = 1, num_qubits: int | None = None,
               random_state: int | None = None) -> list[Circuit]:
        """Generate circuits; invalid free-mode draws are excluded."""
        results = self.sample_results(n_samples, num_qubits, random_state)
        self.sample_validity_ = (
            sum(r.report.is_valid for r in results) / len(results) if results else 1.0
        )
        return [r.circuit for r in results if r.circuit is not None]

    def sample_results(self, n_samples: int = 1, num_qubits: int | None = None,
                       random_state: int | None = None) -> list[SampleResult]:
        check_is_fitted(self, "model_")
        config = SamplerConfig(
            mode=self.mode,
            edge_mode=self.edge_mode,
            max_layers=self.max_layers,
            num_qubits=num_qubits,
            seed=self.seed if random_state is None else int(random_state),
        )
        return sample_circuits(self.model_, config, n_samples)

    def score(self, X, y=None) -> float:
        """Negative mean label distance between X and fresh samples.

        A coarse goodness-of-fit signal: compares the mean density-matrix-sum
        label of X against the mean over `len(X)` generated circuits.
        """
        records = ensure_circuit_list(X)
        circuits = self.sample(len(records), random_state=self.seed + 1)
        if not circuits:
            return float("-inf")
        ref = np.mean([[r.label.re, r.label.im] for r in records], axis=0)
        got = np.mean([[simulator.label(c).re, simulator.label(c).im] for c in circuits], axis=0)
        return -float(np.linalg.norm(ref - got))
