"""Hierarchical preprocessing: ordering, live capture and unit-test synthesis."""

from hlsrefactor.hier.capture import (
    CapturedCall,
    CaptureFailure,
    CoverageGap,
    capture_calls,
    capture_instrumented,
    capture_session,
)
from hlsrefactor.hier.order import WorkUnit, topo_order, work_units
from hlsrefactor.hier.testgen import UnitTest, synthesize_unit_test
from hlsrefactor.hier.typeplan import Unserializable
from hlsrefactor.hier.workitems import Stage, WorkItem, make_work_items

__all__ = [
    "CapturedCall", "CaptureFailure", "CoverageGap", "capture_calls", "capture_instrumented",
    "capture_session", "WorkUnit", "topo_order", "work_units", "UnitTest",
    "synthesize_unit_test", "Unserializable", "Stage", "WorkItem", "make_work_items",
]
