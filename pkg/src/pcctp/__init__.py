"""Exact contingent planning for partial covering tours over stochastic graphs."""
from .graph import Edge, GraphError, Node, StochasticGraph, dump_graph, load_graph
from .solver import PCCTPSolver, Policy, SizeCapError, solve

__all__ = ["Edge", "GraphError", "Node", "StochasticGraph", "dump_graph", "load_graph",
           "PCCTPSolver", "Policy", "SizeCapError", "solve"]
