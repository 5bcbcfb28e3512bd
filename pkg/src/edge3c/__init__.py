"""Energy-minimising 3C (computation, caching, communication) D2D scheduling."""
from .model import (
    Assignment,
    Content,
    D2DGraph,
    Device,
    Scenario,
    Task,
    assignment_energy,
    check_feasible,
    noncooperation_assignment,
    subtask_times,
    validate_scenario,
    worst_case_delays,
)

__version__ = "0.1.0"
