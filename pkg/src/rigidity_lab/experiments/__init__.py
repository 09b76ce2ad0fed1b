"""Configuration, orchestration, persistence and reporting for the experiment families."""
from .config import KINDS, ExperimentConfig, make_config
from .records import Certificate, RunRecord, verify_record
from .runner import certify, run, run_suite

__all__ = ["KINDS", "ExperimentConfig", "make_config", "Certificate", "RunRecord", "verify_record",
           "certify", "run", "run_suite"]
