"""Experiment harness: configuration, sweeps, CSV reports and the CLI."""
from .config import ConfigError, SweepConfig, load_config, parse_family
from .report import HEADER, Row, SweepReport, emit
from .sweeps import (run_barrier_verify, run_harnack_sweep, run_holder_sweep, run_lemma_suite,
                     run_op_eval, run_regvar_check)
