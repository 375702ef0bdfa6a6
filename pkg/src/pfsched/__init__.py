"""Proportional-fair scheduling on packing polytopes, with baselines, LP bounds and dual certificates."""

from .model import Instance, Job, Packing, Schedule, Single, Identical, Related, Unrelated, load_instance
from .pf import run_pf

__all__ = ["Instance", "Job", "Packing", "Schedule", "Single", "Identical", "Related", "Unrelated",
           "load_instance", "run_pf"]
__version__ = "0.1.0"
