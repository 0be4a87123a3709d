"""Global tolerances and defaults for identification, estimation and simulation."""

# ── Numerical tolerances ───────────────────────────────────────────────────────
ZERO_TOL = 1e-10          # |entry| <= this counts as an exact zero everywhere
ROW_SUM_TOL = 1e-10       # row-normalization check (A4 / A4')
COND_MAX = 1e12           # cond(I - rho W) above this → treated as an A2 failure
NEUMANN_TOL = 1e-12       # target tail bound for the truncated Neumann series
NEUMANN_MAX_TERMS = 10_000
Q1_JITTER = 1e-8          # diagonal jitter when the disturbance correlation q = 1
DEMEAN_TOL = 1e-12        # post-transform mean checks

# ── Penalization (Adaptive Elastic Net GMM) ───────────────────────────────────
PENALTY_AXIS = (0.0, 0.025, 0.05, 0.10)   # cartesian cube → 64 grid points
ADAPTIVE_EXPONENT = 2.5
BIC_FLOOR = 1e-300        # log argument floor for exact-fit runs
PRUNE_TOL = 1e-3          # W entries below this are dropped between stage-2 refits
REFINE_SEED_WEIGHT = 1e-4 # zero W entries re-enter stage-1 refinement at this weight
LASSO_ALPHA_FLOOR = 1e-3  # sklearn Lasso needs alpha > 0 for the row-wise particles
SENTINEL_OBJECTIVE = 1e10 # objective value returned when A2 fails mid-optimization
FEASIBILITY_WEIGHT = 1e6  # quadratic penalty on a negative row-sum substitution entry

# ── Particle swarm ────────────────────────────────────────────────────────────
PARTICLE_COUNT = 100
DETERMINISTIC_PARTICLES = 6
SWARM_INERTIA = 0.7
SWARM_COGNITIVE = 1.5
SWARM_SOCIAL = 1.5
SWARM_ITERATIONS = 200
SWARM_STALL_ITERATIONS = 25   # stop after this many iterations without improvement
SWARM_STALL_TOL = 1e-10
SCREEN_RHO = 0.5          # rho at which the gradient screen is evaluated
TOP_SHARE = 0.05          # particle 4 keeps the top 5% of -grad_W

# ── Local refinement ──────────────────────────────────────────────────────────
SIMPLEX_MAX_ITER = 400
SIMPLEX_MAX_DIM = 60      # simplex descent is skipped above this many free coordinates
QUASI_NEWTON_MAX_ITER = 2000
GRADIENT_TOL = 1e-10
PARAMETER_TOL = 1e-12

# ── Identification ────────────────────────────────────────────────────────────
INVERSION_RANDOM_STARTS = 20
INVERSION_RESIDUAL_TOL = 1e-9
INVERSION_MAX_N = 12
HETEROGENEOUS_BETA_TOL = 1e-6
CENTRALITY_DAMPING = 0.5  # damped Perron vector used when the network is reducible
CENTRALITY_TOL = 1e-12

# ── Simulation design ─────────────────────────────────────────────────────────
RHO_0 = 0.3
BETA_0 = 0.4
GAMMA_0 = 0.5
STRONG_WEIGHT = 0.7
STRONG_THRESHOLD = 0.3    # strong link: W > .3, weak: 0 < W <= .3
T_GRID = (5, 10, 15, 25, 50, 75, 100, 125, 150)
REPLICATIONS = 50         # desk scale (source design: 1,000)
CALIBRATION_RUNS = 50
EDGE_FREQUENCY_THRESHOLD = 0.05
MAX_A5_REDRAWS = 1_000

# ── Reduced-form OLS ──────────────────────────────────────────────────────────
OLS_MIN_EXTRA_PERIODS = 2     # enforce T >= N + 2
OLS_COMFORT_FACTOR = 10       # warn below T = 10 N

# ── Output ────────────────────────────────────────────────────────────────────
SCHEMA_VERSION = "1.0"
DEFAULT_LOG_DIR = ".sil/logs"
