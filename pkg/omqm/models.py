import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .utils import to_jsonable


Number = Union[int, float, complex]


@dataclass(frozen=True)
class SeriesValue:
    """A truncated series or sum together with an estimate of what was left out."""

    value: Number
    tail_bound: float

    def __iter__(self):
        # Allows `value, bound = series(...)`.
        yield self.value
        yield self.tail_bound


class ClaimStatus(str, Enum):
    CONFIRMED = 'CONFIRMED'
    DISCREPANT = 'DISCREPANT'
    REPORT_ONLY = 'REPORT-ONLY'
    ERROR = 'ERROR'


@dataclass(frozen=True)
class ClaimRecord:
    """One checkable assertion with the value we computed for it.

    status is CONFIRMED iff |computed - reference| <= tolerance. A record with
    no reference is REPORT-ONLY; ERROR records a failed evaluation in-band.
    """

    id: str
    computed: Optional[Number]
    reference: Optional[Number]
    tolerance: float
    status: ClaimStatus
    note: str = ''
    details: dict = field(default_factory=dict)

    @classmethod
    def evaluate(cls, claim_id, computed, reference=None, tolerance=0.0, note='', details=None):
        if reference is None:
            status = ClaimStatus.REPORT_ONLY
        else:
            difference = abs(computed - reference)
            if isinstance(difference, float) and math.isnan(difference):
                status = ClaimStatus.DISCREPANT
            elif difference <= tolerance:
                status = ClaimStatus.CONFIRMED
            else:
                status = ClaimStatus.DISCREPANT
        return cls(claim_id, computed, reference, tolerance, status, note, dict(details or {}))

    @classmethod
    def failed(cls, claim_id, error):
        note = f'{type(error).__name__}: {error}'
        return cls(claim_id, None, None, 0.0, ClaimStatus.ERROR, note)

    @property
    def difference(self):
        if self.computed is None or self.reference is None:
            return None
        return abs(self.computed - self.reference)

    def to_dict(self):
        return to_jsonable({
            'id': self.id,
            'computed': self.computed,
            'reference': self.reference,
            'tolerance': self.tolerance,
            'status': self.status.value,
            'note': self.note,
            'details': self.details,
        })

    def format_value(self, value):
        if value is None:
            return '-'
        if isinstance(value, complex):
            if abs(value.imag) < 1e-15 * max(1.0, abs(value)):
                return f'{value.real:.10g}'
            return f'{value.real:.10g}{value.imag:+.10g}i'
        if isinstance(value, float) and not cmath.isfinite(value):
            return str(value)
        return f'{value:.10g}'
