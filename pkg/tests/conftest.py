import os

# keep numerics single-threaded so timing-sensitive tests measure what the
# acceptance criteria state; must run before numpy's first import
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
