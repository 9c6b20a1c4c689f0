#!/usr/bin/env python3
"""
Plain-dict serialization of fuzzy systems, used in run records and for
loading rule bases from experiment configuration.
"""

from src.core.errors import InvalidInputError
from src.fuzzy.inference import FuzzyRule, FuzzySystem, FuzzyVariable, SystemKind
from src.fuzzy.membership import Defuzz, MembershipFn, TConorm, TNorm


def variable_to_dict(variable: FuzzyVariable):
    return {
        "name": variable.name,
        "universe": list(variable.universe),
        "terms": [term.to_dict() for term in variable.terms],
    }


def variable_from_dict(data):
    return FuzzyVariable(data["name"], tuple(data["universe"]),
                         tuple(MembershipFn.from_dict(term) for term in data["terms"]))


def system_to_dict(fs: FuzzySystem):
    """Serialize a fuzzy system into JSON-compatible values."""
    rules = []
    for rule in fs.rules:
        consequent = rule.consequent if isinstance(rule.consequent, int) else list(rule.consequent)
        rules.append({"antecedent": list(rule.antecedent), "consequent": consequent, "weight": rule.weight})
    return {
        "kind": fs.kind.value,
        "inputs": [variable_to_dict(v) for v in fs.inputs],
        "output": variable_to_dict(fs.output) if fs.output is not None else None,
        "rules": rules,
        "tnorm": fs.tnorm.value,
        "tconorm": fs.tconorm.value,
        "defuzz": fs.defuzz.value,
    }


def system_from_dict(data):
    """
    Rebuild a fuzzy system from system_to_dict output.

    Raises:
        InvalidInputError: If a key is missing or a value is invalid
    """
    try:
        rules = tuple(FuzzyRule(tuple(r["antecedent"]),
                                r["consequent"] if isinstance(r["consequent"], int) else tuple(r["consequent"]),
                                r.get("weight", 1.0))
                      for r in data["rules"])
        output = data.get("output")
        return FuzzySystem(
            SystemKind(data["kind"]),
            tuple(variable_from_dict(v) for v in data["inputs"]),
            rules,
            variable_from_dict(output) if output is not None else None,
            TNorm(data.get("tnorm", TNorm.PRODUCT.value)),
            TConorm(data.get("tconorm", TConorm.MAX.value)),
            Defuzz(data.get("defuzz", Defuzz.CENTROID.value)),
        )
    except KeyError as exc:
        raise InvalidInputError(f"fuzzy system is missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"invalid fuzzy system: {exc}") from None
