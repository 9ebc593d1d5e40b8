import os
import logging

# Configure logging
logging.basicConfig(
    level=os.environ.get("DICKE_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)

__version__ = "0.1.0"

# Application configuration, overridable from the environment
config = {}
config["DIMENSION_CEILING"] = int(os.environ.get("DICKE_DIMENSION_CEILING", 2_000_000))
config["ORACLE_MAX_ATOMS"] = int(os.environ.get("DICKE_ORACLE_MAX_ATOMS", 12))
config["DENSE_THRESHOLD"] = int(os.environ.get("DICKE_DENSE_THRESHOLD", 1024))
config["DELTA_P_TOLERANCE"] = float(os.environ.get("DICKE_DELTA_P_TOLERANCE", 1e-8))


def available_workers():
    """Number of CPUs this process may run on."""
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def resolve_workers(requested=None):
    """
    Worker count for sweeps.

    DICKE_WORKERS wins over the flag; the flag wins over available parallelism.
    """
    env_value = os.environ.get("DICKE_WORKERS")
    if env_value:
        return max(1, int(env_value))
    if requested:
        return max(1, int(requested))
    return available_workers()
