"""Planted defects.

Each defect is deterministic: whenever its trigger predicate holds, the
owning component writes one crash-log line and exits with code 77. Triggers
are documented here and realized at the matching branch sites in
component.py; they differ in how much cross-component state they need:

D1 needs nothing beyond one message's bytes; D2 needs the session manager to
report a non-active session (which only its own hidden hint field controls);
D3 needs limited discovery plus partial configuration assembled across the
registry and the config store, together with an ethernet-type setup.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class DefectSpec:
    defect_id: str
    component: str
    crash_site_id: int
    trigger: str


D1 = DefectSpec(
    "D1", "entry", 0x1001,
    "REGISTER whose declared TLV length exceeds the delivered bytes "
    "(parser overread) with reserved registration type 0x7f")

D2 = DefectSpec(
    "D2", "entry", 0x2002,
    "SETUP that fails validation while the session manager reports INACTIVE "
    "(manager degrades once it sees session hint 0x00ee)")

D3 = DefectSpec(
    "D3", "entry", 0x3003,
    "SETUP that fails validation with session type 0x03 while discovery is "
    "LIMITED (registry mode 0x02) and configuration is PARTIAL (config "
    "store mode 0x01)")

ALL_DEFECTS = {d.defect_id: d for d in (D1, D2, D3)}


def parse_defect_set(text: str) -> frozenset[str]:
    """Parse a comma-separated defect list ('' or 'none' disables all)."""
    text = text.strip()
    if not text or text.lower() == "none":
        return frozenset()
    ids = frozenset(part.strip().upper() for part in text.split(",") if part.strip())
    unknown = ids - set(ALL_DEFECTS)
    if unknown:
        raise ValueError(f"unknown defect ids: {sorted(unknown)}")
    return ids
