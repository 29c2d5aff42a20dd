"""Exact particle simulator and verification harness for logistic branching
populations with neutral markers, checked against their Fleming-Viot scaling
limits through coalescent moment duality."""

__version__ = "0.1.0"
