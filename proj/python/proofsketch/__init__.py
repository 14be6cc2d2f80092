"""Closure-verified answer sketches for unary rule theories."""

from ._core import (
    ConfigError,
    EmptyInput,
    Error,
    GeneratorError,
    InconsistentFacts,
    ParseError,
    SchemaError,
    ScriptExhausted,
    answer,
    canonicalize_symbol,
    closure,
    decide,
    evaluate,
    metrics,
    p95,
    parse_sketch,
    report,
)

__all__ = [
    "ConfigError",
    "EmptyInput",
    "Error",
    "GeneratorError",
    "InconsistentFacts",
    "ParseError",
    "SchemaError",
    "ScriptExhausted",
    "answer",
    "canonicalize_symbol",
    "closure",
    "decide",
    "evaluate",
    "metrics",
    "p95",
    "parse_sketch",
    "report",
]
