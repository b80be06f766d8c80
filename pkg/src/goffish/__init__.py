"""Sub-graph centric graph analytics: partitioned slice store, BSP engine,
and algorithm suite with a vertex-centric emulation mode."""

import logging
import os

from .engine import ComputeApp, EngineConfig, RunResult, run
from .model import (Graph, Partition, RemoteRef, Subgraph, neighbors,
                    subgraph_neighbors, validate_partition)
from .partitioning import (PartitionMap, build_meta_graph, build_partitions,
                           discover_subgraphs, partition_graph,
                           vertex_centric_emulation)
from .runner import result_digest, run_algorithm

__version__ = "0.1.0"

_level = os.environ.get("GOFFISH_LOG")
if _level:
    logging.basicConfig(level=getattr(logging, _level.upper(), logging.INFO))
