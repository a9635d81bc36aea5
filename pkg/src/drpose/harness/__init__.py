"""Scenario files, synthetic targets, batch runs and the command line."""
from .config import Corruption, OffsetSpec, Scenario, load_scenario, scenario_from_dict
from .models import asymmetric12, cube8, generate_model, load_camera, load_model, random_model, save_model
from .runner import RunSummary, read_iterations_csv, run, run_batch, write_iterations_csv

__all__ = [
    "Corruption", "OffsetSpec", "Scenario", "load_scenario", "scenario_from_dict",
    "asymmetric12", "cube8", "generate_model", "load_camera", "load_model", "random_model", "save_model",
    "RunSummary", "read_iterations_csv", "run", "run_batch", "write_iterations_csv",
]
