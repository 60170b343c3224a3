# Copyright (c) 2026 The Refinery Authors
# SPDX-License-Identifier: Apache-2.0
"""Static refinement checking between sequential tensor graphs and their
distributed implementations."""

from ._core import (  # noqa: F401
    CertificateInvalidError,
    FixtureSpecError,
    Graph,
    GraphValidationError,
    SchemaError,
    builtin_lemmas,
    canonical,
    check,
    check_fixture,
    decide_cmp,
    emit_smtlib,
    eval_fixture,
    generate_fixture,
    is_clean,
    list_fixtures,
    simplicity,
)

__all__ = [
    "CertificateInvalidError",
    "FixtureSpecError",
    "Graph",
    "GraphValidationError",
    "SchemaError",
    "builtin_lemmas",
    "canonical",
    "check",
    "check_fixture",
    "decide_cmp",
    "emit_smtlib",
    "eval_fixture",
    "generate_fixture",
    "is_clean",
    "list_fixtures",
    "simplicity",
]
