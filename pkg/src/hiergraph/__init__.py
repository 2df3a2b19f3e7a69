"""Hierarchical synthesis of large attributed graphs.

A template graph of communities is sampled first, then one community graph per
template node, then the edges between every pair of connected communities.
"""

from hiergraph.graph import (
    AttributedGraph,
    GraphCorpus,
    induced_subgraph,
    largest_connected_component,
    read_corpus,
    read_graph,
    union_disjoint,
    write_corpus,
    write_graph,
)
from hiergraph.partition import Partition, louvain, modularity, partition_stats

__version__ = "0.1.0"

__all__ = [
    "AttributedGraph",
    "GraphCorpus",
    "Partition",
    "induced_subgraph",
    "largest_connected_component",
    "louvain",
    "modularity",
    "partition_stats",
    "read_corpus",
    "read_graph",
    "union_disjoint",
    "write_corpus",
    "write_graph",
]
