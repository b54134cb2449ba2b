"""
Command modules for the State-Aliasing Lab CLI.

Each module registers its subcommand parser and a handler returning the
process exit code.
"""

from commands import (
    align,
    experiment,
    gen_data,
    probe,
    report,
    train,
    verify,
)

COMMANDS = (gen_data, train, probe, align, report, verify, experiment)

__all__ = [
    "COMMANDS",
    "align",
    "experiment",
    "gen_data",
    "probe",
    "report",
    "train",
    "verify",
]
