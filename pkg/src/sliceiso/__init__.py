"""Isolation-aware placement of 5G core network slices and attack simulation."""
from .topology import (AllocationScheme, PhysicalLink, PhysicalNode, PhysicalTopology, Plane,
                       SliceRequest, VirtualLink, Vnf, commit_allocation, current_link_delay,
                       uncommit_allocation, validate_scheme)
from .solvers import (Budget, SolveResult, Status, brute_force_oracle, min_delay_route,
                      solve_exact, solve_greedy)

__version__ = "0.1.0"
