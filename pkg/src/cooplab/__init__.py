"""cooplab: a self-contained lab for zero-shot cooperative-agent training."""
import os

# The workloads here are thousands of tiny-matrix ops; BLAS thread pools only
# add contention. Respect explicit user overrides.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
