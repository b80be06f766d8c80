"""Exception hierarchy shared across the package."""


class GoffishError(Exception):
    """Base class for all errors raised by this package."""


class GraphParseError(GoffishError):
    """An input file (edge list, partition map) could not be parsed."""

    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class PartitioningError(GoffishError):
    """A partitioning request could not be satisfied (bad k, bad map file)."""


class StoreExistsError(GoffishError):
    """A slice store already exists at the target location (write-once)."""


class SliceCorruptionError(GoffishError):
    """A slice file failed checksum or structural validation."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class SliceNotFoundError(GoffishError):
    """The requested sub-graph or slice file is absent from the store."""


class SchemaError(GoffishError):
    """An attribute name or type does not match the declared schema."""


class ConfigError(GoffishError):
    """Runtime configuration is incomplete or inconsistent."""


class AddressingError(GoffishError):
    """A message names a sub-graph or vertex that does not exist."""


class ProtocolError(GoffishError):
    """A control-plane message arrived out of order, twice, or not at all."""


class SuperstepLimitError(GoffishError):
    """The run hit the max_supersteps safety cap without terminating."""


class ComputeError(GoffishError):
    """User compute code raised; carries partition/sub-graph/superstep context."""

    def __init__(self, partition, subgraph, superstep, cause):
        self.partition = partition
        self.subgraph = subgraph
        self.superstep = superstep
        self.cause = cause
        super().__init__(
            f"compute failed in partition {partition}, sub-graph {subgraph}, "
            f"superstep {superstep}: {cause!r}"
        )
