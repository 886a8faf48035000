"""Runs of consecutive integers sharing a divisor count.

Submodules: ``arith`` (factoring, primality, modular tools), ``bounds``
(upper bounds on run lengths), ``scan`` (sieve-based exhaustive search),
``search`` and ``quadratic`` (CRT-template search), ``records``
(certificates and the catalog of known values), ``cli``.
"""

from .arith import FactorBudget, Factorization, PartialResult, factorize, is_prime, tau
from .bounds import rule_bound
from .records import Catalog, RunCertificate, RunRecord, default_catalog, verify_certificate, verify_run
from .scan import find_runs, longest_run, sieve_tau_block
from .search import ProgressionTemplate, build_template, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "FactorBudget",
    "Factorization",
    "PartialResult",
    "factorize",
    "is_prime",
    "tau",
    "rule_bound",
    "Catalog",
    "RunCertificate",
    "RunRecord",
    "default_catalog",
    "verify_certificate",
    "verify_run",
    "find_runs",
    "longest_run",
    "sieve_tau_block",
    "ProgressionTemplate",
    "build_template",
    "run_pipeline",
]
