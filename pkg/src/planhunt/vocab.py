"""Reserved names shared across the pipeline.

These tie the telemetry fact shapes to the rule packs and the planning layer,
so they live in one place instead of being re-declared per module.
"""

# Fact-side placeholder for a field the telemetry source did not report.
# Distinct from the rule-side anonymous variable "_", which matches anything.
WILDCARD = "wildcard"

# Single-app analysis: the subject application constant.
APP = "app"

# Event predicate: invoked(ts, syscall, pid, tid, object, mode, ret).
INVOKED = "invoked"
INVOKED_ARITY = 7
# Index of the timestamp argument, used by the strict event-ordering mode.
INVOKED_TS_ARG = 0

DECLARED_PERMISSION = "declared_permission"
DECLARED_INTENT = "declared_intent"

# Threat catalog vocabulary (planning-domain constants).
THREATS = ("surveillance", "financial_fraud")
MECHANISMS = ("permission", "exploit")

# Problem-template defaults: sensors the domain reasons about, plus the
# single account/factor pair used by the credential-theft path.
SENSORS = ("camera", "gps", "microphone", "screen")
ACCOUNT = "acct"
FACTOR = "sms_otp"

# Environment variable that points at an alternative asset directory.
ASSET_ROOT_ENV = "PLANHUNT_ASSETS"
