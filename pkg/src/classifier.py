"""Rule-based administrated / effectively-ungoverned classifier.

A token is administrated when some privileged account holds an impactful
capability: at least one pattern finding that sits behind a privilege guard,
or a reachable SELFDESTRUCT opcode when only bytecode was analyzed. A token
with an owner but no such capability is effectively ungoverned (its
ownership is purely symbolic).
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Tuple

from src.detectors import (
    BURNING,
    CHANGE_OF_ADDRESS,
    DEPRECATION,
    MINTING,
    PATTERNS,
    SELF_DESTRUCTION,
    SOURCE_BYTECODE,
    Finding,
    PrivilegeGuard,
)

logger = logging.getLogger(__name__)

ADMINISTRATED = "administrated"
EFFECTIVELY_UNGOVERNED = "effectively-ungoverned"
UNANALYZABLE = "unanalyzable"

UNGUARDED_CAPABILITY = "UnguardedCapability"
WEIGHT_KEYS = PATTERNS + (UNGUARDED_CAPABILITY,)

# pattern name -> FeatureVector flag
PATTERN_FLAGS: Dict[str, str] = {
    SELF_DESTRUCTION: "has_self_destruction",
    DEPRECATION: "has_deprecation",
    CHANGE_OF_ADDRESS: "has_address_change",
    MINTING: "has_mint",
    BURNING: "has_burn",
}


@dataclass(frozen=True)
class FeatureVector:
    has_self_destruction: bool = False
    has_deprecation: bool = False
    has_address_change: bool = False
    has_mint: bool = False
    has_burn: bool = False
    guard_count: int = 0
    ownable: bool = False
    unguarded_dangerous_count: int = 0
    privileged_finding_count: int = 0
    bytecode_evidence: bool = False

    def flag(self, pattern: str) -> bool:
        return getattr(self, PATTERN_FLAGS[pattern])

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RiskWeights:
    """Per-capability score weights, each an integer 0-100."""

    SelfDestruction: int = 35
    Deprecation: int = 30
    Minting: int = 20
    Burning: int = 10
    ChangeOfAddress: int = 5
    UnguardedCapability: int = 10

    @classmethod
    def from_mapping(cls, overrides: Mapping[str, int]) -> "RiskWeights":
        """Build weights from a partial mapping keyed by pattern name.

        Raises:
            ValueError: On an unknown key or a value outside 0-100.
        """
        values = asdict(cls())
        for key, value in overrides.items():
            if key not in values:
                raise ValueError(f"Unknown weight '{key}'")
            if not isinstance(value, int) or not 0 <= value <= 100:
                raise ValueError(f"Weight '{key}' must be an integer 0-100, got {value!r}")
            values[key] = value
        return cls(**values)

    def for_pattern(self, pattern: str) -> int:
        return getattr(self, pattern)


@dataclass(frozen=True)
class Classification:
    verdict: str
    quadrant: Tuple[str, str]
    risk_score: int
    features: FeatureVector
    rationale: List[str] = field(default_factory=list)

    @property
    def is_administrated(self) -> bool:
        return self.verdict == ADMINISTRATED

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "quadrant": list(self.quadrant),
            "risk_score": self.risk_score,
            "features": self.features.to_dict(),
            "rationale": list(self.rationale),
        }


def featurize(findings: List[Finding], guards: List[PrivilegeGuard]) -> FeatureVector:
    """Reduce one contract's findings and guards to a FeatureVector."""
    flags = {flag: False for flag in PATTERN_FLAGS.values()}
    unguarded = 0
    privileged = 0
    bytecode = False
    for finding in findings:
        flags[PATTERN_FLAGS[finding.pattern]] = True
        if finding.source == SOURCE_BYTECODE:
            bytecode = True
            privileged += 1
        elif finding.guard is not None:
            privileged += 1
        else:
            unguarded += 1

    return FeatureVector(
        guard_count=len(guards),
        ownable=len(guards) > 0,
        unguarded_dangerous_count=unguarded,
        privileged_finding_count=privileged,
        bytecode_evidence=bytecode,
        **flags,
    )


def risk_score(features: FeatureVector, weights: RiskWeights = RiskWeights()) -> int:
    """Clamped weighted sum of capabilities present."""
    score = sum(weights.for_pattern(pattern) for pattern in PATTERNS if features.flag(pattern))
    score += weights.UnguardedCapability * features.unguarded_dangerous_count
    return max(0, min(100, score))


def classify(features: FeatureVector, weights: RiskWeights = RiskWeights()) -> Classification:
    """Decide the verdict and ownership quadrant, and explain why.

    Args:
        features: Output of featurize().
        weights: Score weights; defaults to the built-in table.

    Returns:
        Classification whose quadrant's first axis always equals the verdict.
    """
    administrated = features.privileged_finding_count > 0
    verdict = ADMINISTRATED if administrated else EFFECTIVELY_UNGOVERNED
    quadrant = (
        "administrated" if administrated else "ungoverned",
        "ownable" if features.ownable else "not-ownable",
    )

    rationale: List[str] = []
    for pattern in PATTERNS:
        if features.flag(pattern):
            rationale.append(f"{PATTERN_FLAGS[pattern]}: {pattern} capability present")
    if features.bytecode_evidence:
        rationale.append("bytecode_evidence: reachable SELFDESTRUCT opcode")
    if features.unguarded_dangerous_count:
        rationale.append(
            f"unguarded_dangerous_count: {features.unguarded_dangerous_count} capability(ies) open to any caller")
    if features.ownable:
        rationale.append(f"guard_count: {features.guard_count} privilege guard(s)")
    if not administrated:
        if features.ownable:
            rationale.append("purely symbolic ownership: guards protect no impactful capability")
        else:
            rationale.append("no privileged role")

    return Classification(verdict, quadrant, risk_score(features, weights), features, rationale)
