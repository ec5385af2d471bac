"""Thing Machine modeling toolkit: DSL, validator, simulator, events and corpus."""

from .core import (EventDef, FlowArc, Machine, Model, ModelBuilder, ModelStats, Stage, StageKind,
                   Store, TriggerArc, lookup_stage, model_stats)
from .diagnostics import (CODES, CorpusError, Diagnostic, EventError, ModelError, SchemaError,
                          SimError, SourceSpan, TMError)
from .diagram import to_dot
from .dsl import emit_text, from_json, parse_model, to_json
from .events import (Chronology, ChronologyResult, EventOccurrence, check_chronology,
                     detect_events)
from .fns import builtin_fns, register_fn
from .sim import Script, SimConfig, simulate
from .trace import Trace, TraceRecord, conservation_ledger
from .validate import RULES, RuleTable, check_entry_exit, check_triggers, validate

__version__ = "0.1.0"

__all__ = [
    "StageKind", "Stage", "Machine", "FlowArc", "TriggerArc", "Store", "EventDef", "Model",
    "ModelBuilder", "ModelStats", "lookup_stage", "model_stats",
    "CODES", "Diagnostic", "SourceSpan", "TMError", "ModelError", "SchemaError", "SimError",
    "EventError", "CorpusError",
    "parse_model", "emit_text", "to_json", "from_json",
    "validate", "check_entry_exit", "check_triggers", "RuleTable", "RULES",
    "simulate", "Script", "SimConfig", "builtin_fns", "register_fn",
    "Trace", "TraceRecord", "conservation_ledger",
    "detect_events", "check_chronology", "Chronology", "ChronologyResult", "EventOccurrence",
    "to_dot",
]
