"""The R-like script language: tokenizer, parser, printer, imports and interpreter."""

from .builtins import LIBRARY, LIBRARY_PATHS
from .interpreter import Interpreter, interpret
from .lexer import Token, tokenize
from .nodes import Program
from .parser import parse, parse_file
from .printer import pretty_print
from .resolver import ResolvedProgram, resolve_imports

__all__ = ["LIBRARY", "LIBRARY_PATHS", "Interpreter", "interpret", "Token", "tokenize", "Program",
           "parse", "parse_file", "pretty_print", "ResolvedProgram", "resolve_imports"]
