"""Alternate action-name renderings seen in external plan listings.

Some published plan transcripts render these schemas under longer
underscored names; the comparator normalizes through this table so plans
can be checked against either spelling.
"""

__all__ = ["ACTION_ALIASES", "canonical_action_name"]

ACTION_ALIASES = {
    "grant_permission_for_sensors_mechanism_privilege_escalation": (
        "grant-permission-to-sensor"
    ),
    "surveillance_possible_mechanism_permission": "surveillance-via-permission",
    "surveillance_possible_mechanism_exploit": "surveillance-via-exploit",
    "pivot_exploit": "pivot-exploit",
    "financial_fraud_possible_mechanism_exploit": "fin-fraud-mechanism-exploit",
    "financial_fraud_possible_mechanism_permission": "fin-fraud-mechanism-permission",
}


def canonical_action_name(name: str) -> str:
    """Map an aliased or underscored action name onto its schema name.

    Disjunct suffixes (``~orN``) are preserved.
    """
    base, sep, suffix = name.partition("~")
    if base in ACTION_ALIASES:
        return ACTION_ALIASES[base] + sep + suffix
    return name
