"""Socket worker process: loads one partition from its slice store and joins
a distributed run.

    python -m goffish.worker --config run.json --partition 1 \
        --store out/partition-1 --algorithm sssp --params '{"source": 0}'

The config file follows the engine's socket schema: {"transport": "socket",
"manager": {"host": ..., "port": ...}, "workers": [{"partition": 0,
"host": ..., "port": ...}, ...], "pool_width": ..., "message_order": ...,
"max_supersteps": ...}.
"""

import argparse
import json
import sys

from . import net, store
from .engine import EngineConfig
from .errors import ConfigError, GoffishError
from .runner import algorithm_class


def load_engine_config(data) -> EngineConfig:
    return EngineConfig(
        transport=data.get("transport", "socket"),
        pool_width=data.get("pool_width"),
        message_order=data.get("message_order", "deterministic"),
        max_supersteps=data.get("max_supersteps", 10000),
        meta_diameter=False,
        control_timeout=data.get("control_timeout", 120.0),
    )


def endpoints_from_config(data):
    endpoints = {w["partition"]: (w["host"], w["port"]) for w in data["workers"]}
    manager = (data["manager"]["host"], data["manager"]["port"])
    return endpoints, manager


def input_attributes(algorithm, params, schema):
    declared = {entry["name"] for entry in schema}
    attrs = []
    if params.get("weighted") and "weight" in declared:
        attrs.append("weight")
    if algorithm == "max-vertex" and "value" in declared:
        attrs.append("value")
    return attrs


def main(argv=None):
    parser = argparse.ArgumentParser(prog="goffish-worker", description=__doc__)
    parser.add_argument("--config", required=True, help="run config JSON file")
    parser.add_argument("--partition", type=int, required=True)
    parser.add_argument("--store", required=True, help="partition directory")
    parser.add_argument("--algorithm", required=True)
    parser.add_argument("--params", default="{}", help="algorithm kwargs, JSON")
    args = parser.parse_args(argv)

    with open(args.config, encoding="utf-8") as fh:
        config_data = json.load(fh)
    endpoints, manager_endpoint = endpoints_from_config(config_data)
    engine_config = load_engine_config(config_data)
    params = json.loads(args.params)

    cls = algorithm_class(args.algorithm)
    meta = store.read_metadata(args.store)
    if cls.requires_undirected and meta["directed"]:
        raise ConfigError(
            f"{args.algorithm} needs undirected propagation; socket workers "
            "cannot symmetrize a directed store locally — ingest the graph "
            "as undirected instead")
    attrs = input_attributes(args.algorithm, params, meta["schema"])
    partition, _ = store.load_partition(args.store, attrs)
    if partition.id != args.partition:
        raise ConfigError(f"store {args.store} holds partition {partition.id}, "
                          f"not {args.partition}")

    net.run_worker(partition, lambda: cls(**params), engine_config,
                   endpoints, manager_endpoint)


if __name__ == "__main__":
    try:
        main()
    except GoffishError as exc:
        print(f"worker error: {exc}", file=sys.stderr)
        sys.exit(1)
