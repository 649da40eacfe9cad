"""Exception types. Each carries a machine-readable ``details`` dict."""

from __future__ import annotations


class BianchiError(Exception):
    code = "error"

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self), **{k: repr(v) for k, v in self.details.items()}}


class DenominatorAtP(BianchiError):
    code = "denominator_at_p"


class InvalidMonoidElement(BianchiError):
    code = "invalid_monoid_element"


class NotEuclidean(BianchiError):
    code = "not_euclidean"


class PrecisionLoss(BianchiError):
    code = "precision_loss"


class VerificationFailed(BianchiError):
    code = "verification_failed"


class NonPrincipalPower(BianchiError):
    code = "non_principal_power"


class ClassDataMissing(BianchiError):
    code = "class_data_missing"


class DivisibilityFailure(BianchiError):
    code = "divisibility_failure"


class SlopeTooLarge(BianchiError):
    code = "slope_too_large"


class UniquenessViolation(BianchiError):
    code = "uniqueness_violation"


class DomainError(BianchiError):
    code = "domain_error"


class Divergent(BianchiError):
    code = "divergent"


class CutoffInsufficient(BianchiError):
    code = "cutoff_insufficient"


class NotConvergent(BianchiError):
    code = "not_convergent"


class ConductorMismatch(BianchiError):
    code = "conductor_mismatch"


class RootOfUnityNotInL(BianchiError):
    code = "root_of_unity_not_in_L"


class InsufficientWidth(BianchiError):
    code = "insufficient_width"


class ConfigError(BianchiError):
    code = "config_error"


class SchemaError(BianchiError):
    code = "schema_error"
