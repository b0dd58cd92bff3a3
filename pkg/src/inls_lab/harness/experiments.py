"""Named experiment configurations."""

from .config import RunConfig, parse_config

P1 = """\
# modified scattering in one dimension
params.d = 1
params.alpha = 1.2
params.beta = 0.4
params.lambda = 0.5
datum.family = x_gauss
datum.theta = 0.42
datum.delta = 0.95
datum.smallness = 0.3
grid.kind = line1d
grid.extent = 40
grid.points = 4096
schedule.T_max = 1e6
schedule.t_end = 10
schedule.t_fit_max = 1e3
output.directory = runs/P1
"""

RADIAL2D = """\
# modified scattering, radial in two dimensions
params.d = 2
params.alpha = 2/3
params.beta = 1/3
params.lambda = 0.3968502629920499
datum.family = r2_gauss
datum.theta = 0.77
datum.delta = 1.6
grid.kind = radial2d
grid.extent = 16
grid.points = 1024
schedule.T_max = 1e6
schedule.t_end = 10
schedule.t_fit_max = 1e3
output.directory = runs/radial2d
"""

P3 = """\
# short-range scattering through the lens frame
params.d = 1
params.alpha = 2
params.beta = 0.5
params.lambda = 1
params.regime = short_range
datum.family = x_gauss
datum.amplitude = 1
grid.kind = line1d
grid.points = 1024
schedule.t_end = 2.5e7
schedule.checkpoints_per_decade = 4
schedule.dt = 1e-4
output.directory = runs/P3
"""

INVERSE_SQUARE = """\
# inverse-square potential on R^3, reduced to two dimensions
params.d = 2
params.alpha = 2/3
params.beta = 0
params.lambda = 0.5
params.potential_dim = 3
datum.family = r2_gauss
datum.theta = 0.77
datum.delta = 1.6
grid.kind = radial2d
grid.extent = 16
grid.points = 1024
schedule.T_max = 1e6
schedule.t_end = 10
schedule.t_fit_max = 1e3
output.directory = runs/inverse_square
"""

FREE = """\
# no nonlinearity: the constructed solution is a free wave
params.d = 1
params.alpha = 1.2
params.beta = 0.4
params.lambda = 0
datum.family = x_gauss
datum.theta = 0.42
datum.delta = 0.95
grid.kind = line1d
grid.points = 4096
output.directory = runs/free
"""

THRESHOLD = """\
# template for the beta sweep across alpha d/2 + beta = 1
params.d = 1
params.alpha = 1.2
params.beta = 0.4
params.lambda = 0.5
params.regime = auto
datum.family = x_gauss
grid.kind = line1d
grid.extent = 40
grid.points = 4096
schedule.T_max = 1e7
schedule.t_end = 1e2
schedule.t_fit_max = 1e4
schedule.steps_per_decade = 128
schedule.discriminator_tol = 0.01
output.directory = runs/threshold
"""

REGISTRY = {
    "P1": P1,
    "radial2d": RADIAL2D,
    "P3": P3,
    "inverse_square": INVERSE_SQUARE,
    "free": FREE,
    "threshold": THRESHOLD,
}


def threshold_axis(factors=(0.9, 0.95, 1.0, 1.05, 1.1), d=1, alpha=1.2):
    """beta values scaled around the critical beta = 1 - alpha d/2."""
    crit = 1 - alpha * d / 2
    return [("params.beta", [f * crit for f in factors])]


def named(name: str) -> RunConfig:
    if name not in REGISTRY:
        raise KeyError(f"unknown experiment {name!r}; known: {', '.join(REGISTRY)}")
    return parse_config(REGISTRY[name])
