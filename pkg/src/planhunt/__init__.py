"""Threat hunting over device telemetry via rule inference and top-k planning.

The pipeline: telemetry samples are normalized into fact bases, a stratified
rule program derives attack-relevant predicates, each threat hypothesis is
compiled into a planning goal, a top-k planner enumerates the cheapest attack
plans, and every plan is translated into indicator-of-compromise records.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
