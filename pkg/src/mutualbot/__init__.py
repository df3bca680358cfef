"""Botnet detection from shared mutual contacts, on a simulated permissioned ledger."""
from .detector import CommunityRecord, DetectorConfig, Label, classify_community, detect
from .estimators import BotnetDetector, LouvainCommunities, MutualContacts
from .experiment import ExperimentConfig, Report, analyze_flows, replay, run_experiment
from .graph import ContactMap, MutualContactsGraph, build_mcm, mutual_contacts
from .louvain import louvain, modularity
from .traffic import WorldConfig, build_world

__version__ = "0.1.0"

__all__ = [
    "BotnetDetector",
    "CommunityRecord",
    "ContactMap",
    "DetectorConfig",
    "ExperimentConfig",
    "Label",
    "LouvainCommunities",
    "MutualContacts",
    "MutualContactsGraph",
    "Report",
    "WorldConfig",
    "analyze_flows",
    "build_mcm",
    "build_world",
    "classify_community",
    "detect",
    "louvain",
    "modularity",
    "mutual_contacts",
    "replay",
    "run_experiment",
]
