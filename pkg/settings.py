"""
Runtime settings for hnoma.

Every value can be overridden through an `HNOMA_*` environment variable so
container and CI runs do not need to edit this file. Modules read these with
`getattr(settings, 'name', default)`, so removing a key falls back to the
built-in default.
"""

import os

# Paths & storage
data_location = os.getenv("HNOMA_DATA_DIR", "data")  # holds hnoma.db (ESS cache)
output_location = os.getenv("HNOMA_OUT_DIR", "out")  # default --out directory

default_workers = int(os.getenv("HNOMA_WORKERS", "1"))

# ─────────────────────────────────────────────────────────────────────────
# Equilibrium checks
# ─────────────────────────────────────────────────────────────────────────
equilibrium_tol = 1e-9
ess_eps_grid = (0.001, 0.01, 0.1, 0.3)
ess_random_mutants = 12

# ─────────────────────────────────────────────────────────────────────────
# ESS solver
# ─────────────────────────────────────────────────────────────────────────
solver_xtol = 1e-12
solver_rtol = 1e-10
solver_search_interval = (1e-9, 1.0 - 1e-9)
collapse_margin = 1e-6   # x1* + x2* >= 1 - margin -> "x3 collapsed"
region_guard = 1e-12     # guard band around the fixed-cost region boundaries

# ─────────────────────────────────────────────────────────────────────────
# Replicator dynamics
# ─────────────────────────────────────────────────────────────────────────
replicator_step_size = 0.2
replicator_drift_tol = 1e-10
replicator_max_iters = 100000
extinction_floor = 1e-15

# ─────────────────────────────────────────────────────────────────────────
# Simulation / adaptive protocols
# ─────────────────────────────────────────────────────────────────────────
sim_chunk_slots = 4096
# "conditional" (successes / attempts per action) or "literal"
# ((R / 2M) * sum of decoded signals per action). See DESIGN.md.
reward_estimator = os.getenv("HNOMA_REWARD_ESTIMATOR", "conditional")
# SU-U payoffs: "literal" time-averages every term over the B slots of a block
su_u_estimator = os.getenv("HNOMA_SU_U_ESTIMATOR", "literal")

# Sweeps reuse solved ESS points stored in data_location/hnoma.db
sweep_cache = os.getenv("HNOMA_SWEEP_CACHE", "1") not in ("0", "false", "False")
