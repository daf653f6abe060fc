"""Immutable, queryable index over a repository snapshot.

Serves the five context tools the analysis loop dispatches: function
definitions, callers, code snippets, variable/member usage traces, and a
constrained structural query language. The index is syntactic: calls are
name-resolved with no alias or points-to analysis, and macro bodies stay
opaque.
"""

from .index import (
    CallSite,
    CodeIndex,
    CodeSnippet,
    FunctionDef,
    UsageSite,
    build_index,
    caller_info,
    code_info,
    func_info,
    value_info,
)
from .query import QueryResult, QuerySpec, parse_query, query_info

__all__ = [
    "CallSite", "CodeIndex", "CodeSnippet", "FunctionDef", "UsageSite",
    "build_index", "caller_info", "code_info", "func_info", "value_info",
    "QueryResult", "QuerySpec", "parse_query", "query_info",
]
