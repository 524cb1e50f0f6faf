"""relq: a relational model-transformation engine."""

from .diff import DiffModel, DiffOp, apply_diff
from .engine import ExecutionReport, execute, execute_in_place, match_domain
from .metamodel import Metamodel, parse_metamodel
from .model import Element, Model, elements_of_class, key_lookup, validate_model
from .tdsl import Transformation, check_transformation, parse_transformation
from .xmi import read_model, write_model

__version__ = "0.1.0"

__all__ = [
    "DiffModel",
    "DiffOp",
    "Element",
    "ExecutionReport",
    "Metamodel",
    "Model",
    "Transformation",
    "apply_diff",
    "check_transformation",
    "elements_of_class",
    "execute",
    "execute_in_place",
    "key_lookup",
    "match_domain",
    "parse_metamodel",
    "parse_transformation",
    "read_model",
    "validate_model",
    "write_model",
]
