"""Referral-code classification.

Amazon product URLs carry a ``ref=`` code naming the link the visitor
followed. Only the prefix matters for the traffic channel; item-list codes
end with the 1-based position of the clicked item::

    >>> classify_referrer("pd_sim_b_1")
    (<ReferrerClass.REC_SIM: 'RecSim'>, 1)
    >>> classify_referrer("ref=sr_1_3")
    (<ReferrerClass.SEARCH_RESULT: 'SearchResult'>, 3)
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional

from .schema import ReferrerClass

# Checked in order; first match wins.
PREFIX_TABLE: tuple[tuple[str, ReferrerClass], ...] = (
    ("pd_sim", ReferrerClass.REC_SIM),
    ("sr_", ReferrerClass.SEARCH_RESULT),
    ("nb_sb", ReferrerClass.SEARCH_BOX),
    ("pd_", ReferrerClass.REC_OTHER),
)

# Classes whose codes end in an item position.
_POSITIONAL = frozenset(
    {ReferrerClass.REC_SIM, ReferrerClass.REC_OTHER, ReferrerClass.SEARCH_RESULT}
)

OFFSITE_PREFIXES = ("ext:", "http://", "https://")


def looks_offsite(code: str) -> bool:
    """Whether a raw ``ref`` value names an off-site origin rather than a code.

    Replayed logs store external referrers as ``ext:<host>`` or a full URL.
    """
    return code.strip().lower().startswith(OFFSITE_PREFIXES)


def _position(code: str) -> Optional[int]:
    tail = code.rsplit("_", 1)[-1]
    return int(tail) if tail.isdigit() else None


@lru_cache(maxsize=4096)
def classify_referrer(code: str, offsite: bool = False) -> tuple[ReferrerClass, Optional[int]]:
    """Map a referral code to its traffic channel and item position.

    Total: unrecognised input yields ``(DirectOther, None)``. ``offsite`` is set
    by the ingestion layer for off-site origins and takes precedence.
    """
    if offsite:
        return ReferrerClass.EXTERNAL, None
    code = code.strip().lower()
    if code.startswith("ref="):
        code = code[4:]
    for prefix, cls in PREFIX_TABLE:
        if code.startswith(prefix):
            return cls, (_position(code) if cls in _POSITIONAL else None)
    return ReferrerClass.DIRECT_OTHER, None


def is_direct(cls: ReferrerClass) -> bool:
    """Direct traffic is every channel except recommendation click-throughs."""
    return cls not in (ReferrerClass.REC_SIM, ReferrerClass.REC_OTHER)
