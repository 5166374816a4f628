"""Named tolerances and default run parameters.

Every geometric predicate in the package reads its tolerance from here so
that a single edit changes behaviour everywhere.
"""

from dataclasses import dataclass, field, asdict

TWO_PI = 6.283185307179586

# geometry
EPS_DISC = 1e-14        # guard band inside the unit disc
EPS_ON = 1e-10          # incidence: point on a geodesic
EPS_VERTEX = 1e-9       # geodesic passing through a vertex
EPS_ANTIPODAL = 1e-9    # switch to the line form of a geodesic
EPS_CUSP = 1e-9         # vertex on the circle => cusp
EPS_DISTINCT = 1e-12    # two boundary points are distinct
NORM_TOL = 1e-10        # |a|^2 - |b|^2 = 1

# group / partition
PAIRING_TOL = 1e-9
EVEN_CORNER_TOL = 1e-8
MARKOV_TOL = 1e-9
ENDPOINT_TOL = 1e-10
CUSP_ACCUMULATION = 1e-12
BFS_GRID = 1e-6
MAX_CYCLE_STEPS = 64
MAX_BFS_RADIUS = 10


@dataclass
class ThermoConfig:
    """Knobs for the pressure and spectrum computations."""

    n_min: int = 2
    n_max: int = 14
    prune_threshold: float = 0.0
    bins: int = 2048
    beta_min: float = -4.0
    beta_max: float = 4.0
    beta_step: float = 0.05
    refine_lo: float = 0.8
    refine_hi: float = 1.2
    refine_step: float = 0.01
    quad_nodes: int = 4
    power_tol: float = 1e-10
    power_maxiter: int = 10_000
    alpha_margin: float = 0.02
    alpha_points: int = 81
    parabolic_beta_cap: float = 0.98
    extrapolation: str = "none"
    cylinder_cap: int = 60_000_000

    def __post_init__(self):
        if self.n_min < 2:
            raise ValueError("n_min must be at least 2")
        if self.bins < 1000:
            raise ValueError("transfer operator needs at least 1000 bins")
        if self.beta_step <= 0 or self.refine_step <= 0:
            raise ValueError("beta steps must be positive")
        if self.extrapolation not in ("none", "richardson"):
            raise ValueError("extrapolation must be 'none' or 'richardson'")

    def to_dict(self):
        return asdict(self)


@dataclass
class HarnessConfig:
    alphas: list = field(default_factory=list)
    n_list: list = field(default_factory=lambda: list(range(10, 31, 2)))
    samples: int = 1_000_000
    seed: int = 12345
    min_hits: int = 50
    method: str = "mc"

    def __post_init__(self):
        if self.samples < 10_000:
            raise ValueError("need at least 1e4 samples")
        if list(self.n_list) != sorted(set(self.n_list)) or min(self.n_list) < 1:
            raise ValueError("n_list must be increasing positive integers")
        if self.method not in ("mc", "cylinder", "both"):
            raise ValueError("method must be mc, cylinder or both")

    def to_dict(self):
        return asdict(self)
