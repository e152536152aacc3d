# dqd_steady/core/rules/comparison.py
import math

from core.services.model import Method


def row_key(row):
    """Bias points are matched on their exact epsilon value."""
    return repr(float(row.epsilon))


def compare_methods(rows):
    """Per-epsilon |M0_weak - M0_polaron| and positivity flags of both methods."""
    weak_rows = {}
    polaron_rows = {}
    for row in rows:
        target = weak_rows if row.method is Method.WEAK else polaron_rows
        target[row_key(row)] = row

    result = {
        "points": [],
        "only_weak": sorted(set(weak_rows) - set(polaron_rows), key=float),
        "only_polaron": sorted(set(polaron_rows) - set(weak_rows), key=float),
        "max_difference": math.nan,
        "positivity_violations": {
            "weak": sum(1 for r in weak_rows.values() if r.result.positivity_violation),
            "polaron": sum(1 for r in polaron_rows.values() if r.result.positivity_violation),
        },
    }

    differences = []
    for key in sorted(set(weak_rows) & set(polaron_rows), key=float):
        weak = weak_rows[key].result
        polaron = polaron_rows[key].result
        difference = abs(weak.M0 - polaron.M0)
        result["points"].append({
            "epsilon": float(key),
            "weak": weak.M0,
            "polaron": polaron.M0,
            "difference": difference,
            "weak_positivity_violation": weak.positivity_violation,
            "polaron_positivity_violation": polaron.positivity_violation,
        })
        if math.isfinite(difference):
            differences.append(difference)

    if differences:
        result["max_difference"] = max(differences)
    return result
