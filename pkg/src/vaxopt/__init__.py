"""Vaccine supply chain optimization toolkit.

Composable constraint/objective builders over a small algebraic model
representation, a desk-scale exact MILP solver, uncertainty and equity
layers, and an extended-SEIR epidemic simulator with optimization coupling.
"""

from .model import (BINARY, CONTINUOUS, INTEGER, INF, LE, EQ, GE, Constraint,
                    LinExpr, Model, ModelError, Objective, VarRef, export_lp,
                    lin, parse_lp, quicksum, render_lp)
from .solve import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED,
                    AuditReport, Solution, SolverError, audit,
                    brute_force_oracle, solve_lp, solve_milp)
from .instance import (Instance, InstanceError, NetworkSets, ParameterCatalog,
                       ScenarioSet, Scenario, TimeGrid, VaccineType,
                       load_instance, save_instance, validate_instance)

__version__ = "0.1.0"
