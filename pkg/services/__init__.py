"""
Service layer for the State-Aliasing Lab.

This package contains the simulator, dataset, network, training, probing and
alignment logic. Nothing here depends on the command-line layer, so every
service can be tested in isolation.
"""

from services.alignment_service import alignment_report, partial_spearman
from services.checkpoint_service import Checkpoint, load_checkpoint, load_encoder, save_checkpoint
from services.dataset_service import Dataset, generate_dataset, load_dataset
from services.networks import Encoder, VisuomotorModel
from services.probe_service import rollout_eval, train_bc_probe, train_state_probe
from services.training_service import train_policy

__all__ = [
    "Checkpoint",
    "Dataset",
    "Encoder",
    "VisuomotorModel",
    "alignment_report",
    "generate_dataset",
    "load_checkpoint",
    "load_dataset",
    "load_encoder",
    "partial_spearman",
    "rollout_eval",
    "save_checkpoint",
    "train_bc_probe",
    "train_policy",
    "train_state_probe",
]
