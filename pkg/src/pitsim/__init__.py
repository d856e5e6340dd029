"""Marker-based crowd simulation with moshpit, circlepit and queue behaviors."""

from .behaviors import Kind, Phase, PitBehaviorState
from .dynamics import Agent, GoalProgram, Mode, MotionResult, Tag
from .engine import Command, CommandKind, FrameSnapshot, MetricsReport, SimState, init, run, step, sweep
from .errors import BehaviorBusyError, ConfigurationError, ReplayMismatchError, ScenarioError
from .markers import Marker, MarkerField, assign_ownership, generate_markers, markers_near
from .scenario import (
    AreaOfEffect,
    GlobalParams,
    PRESET_NAMES,
    ScenarioConfig,
    SpawnArea,
    load_scenario,
    preset,
    serialize,
    spawn_due,
)

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AreaOfEffect",
    "BehaviorBusyError",
    "Command",
    "CommandKind",
    "ConfigurationError",
    "FrameSnapshot",
    "GlobalParams",
    "GoalProgram",
    "Kind",
    "Marker",
    "MarkerField",
    "MetricsReport",
    "Mode",
    "MotionResult",
    "PRESET_NAMES",
    "Phase",
    "PitBehaviorState",
    "ReplayMismatchError",
    "ScenarioConfig",
    "ScenarioError",
    "SimState",
    "SpawnArea",
    "Tag",
    "assign_ownership",
    "generate_markers",
    "init",
    "load_scenario",
    "markers_near",
    "preset",
    "run",
    "serialize",
    "spawn_due",
    "step",
    "sweep",
]
