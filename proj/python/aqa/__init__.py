"""Python interface to the question reformulation toolkit."""

from ._aqa import (
    Error,
    Experiment,
    NumericError,
    ParseError,
    Policy,
    PreconditionError,
    QueryStats,
    ReferenceEnvironment,
    StageError,
    TTest,
    exact_match,
    mutual_information,
    normalize_answer,
    query_stats,
    rank_subqueries,
    stage_names,
    stem,
    token_f1,
    tokenize,
    welch_t_test,
)

__all__ = [
    "Error",
    "Experiment",
    "NumericError",
    "ParseError",
    "Policy",
    "PreconditionError",
    "QueryStats",
    "ReferenceEnvironment",
    "StageError",
    "TTest",
    "exact_match",
    "mutual_information",
    "normalize_answer",
    "query_stats",
    "rank_subqueries",
    "stage_names",
    "stem",
    "token_f1",
    "tokenize",
    "welch_t_test",
]
