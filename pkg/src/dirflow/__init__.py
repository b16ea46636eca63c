"""Exact information-flow accounting for discrete four-block feedback loops."""

from .dist import (DEFAULT_TOL, DistributionError, JointTable, VariableId, Verdict,
                   cond_entropy, cond_mutual_info, entropy, is_independent, is_markov_chain,
                   marginalize, product, total_correlation)
from .generators import GeneratorConfig, canned_examples, random_system
from .measures import (ConditioningTerm, SourceTerm, directed_info, effective_delay,
                       massey_directed_info, seq_entropy, seq_mutual_info)
from .query import QuerySyntaxError, evaluate, format, parse
from .system import (CausalBlock, DelaySchedule, ExogenousSpec, SystemSpec,
                     TrajectoryDistribution, evaluation_order, prepend_zero, unroll, validate)
from .theorems import (CheckResult, SuiteReport, TheoremId, check_preconditions, check_theorem,
                       generalized_conservation, search_counterexample, theta_partition, verify_all)

__version__ = "0.1.0"
