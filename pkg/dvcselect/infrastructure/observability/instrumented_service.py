"""
Selection engine with OpenTelemetry tracing around every round.
"""

from typing import Optional

from .tracing import get_current_trace_info, record_round_metrics, trace_selection_round
from ...domain.models.selection import RoundRecord
from ...domain.services.selection_engine import SelectionEngine
from ...shared.logging import get_logger

logger = get_logger("dvcselect.tracing")


class InstrumentedSelectionEngine(SelectionEngine):
    """
    Traced selection engine.

    Each round runs inside its own span carrying the candidate count, the
    number selected, the mean DVC and the final diversity threshold.
    """

    def selection_round(self) -> Optional[RoundRecord]:
        with trace_selection_round(self.round_index, self.remaining_budget) as span:
            record = super().selection_round()
            if record is not None:
                record_round_metrics(span, record)
                trace_ids = get_current_trace_info()
                if trace_ids["trace_id"] is not None:
                    logger.debug(f"Round {record.round_index} traced as {trace_ids['trace_id']}")
            return record
