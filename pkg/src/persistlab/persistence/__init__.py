"""Persistence probabilities, reduced events and decay-exponent fits."""
from .domains import DomainSpec, Layout, Shape, region_mask
from .estimate import (
    Event,
    EventEstimates,
    PersistenceEstimate,
    Refinement,
    estimate_events,
    estimate_persistence,
    refinement_pair,
    sample_domain,
    wilson,
)
from .fit import ExponentFit, InsufficientSurvivors, PsiModel, fit_exponent, fit_ladder
from .presets import PRESETS, PresetReport, Predicate, run_preset, slepian_pair_experiment

__all__ = [
    "DomainSpec", "Layout", "Shape", "region_mask",
    "Event", "EventEstimates", "PersistenceEstimate", "Refinement",
    "estimate_events", "estimate_persistence", "refinement_pair", "sample_domain", "wilson",
    "ExponentFit", "InsufficientSurvivors", "PsiModel", "fit_exponent", "fit_ladder",
    "PRESETS", "PresetReport", "Predicate", "run_preset", "slepian_pair_experiment",
]
