"""Named experiment configurations (plain dicts in the YAML schema)."""

import copy
import math

TWO_PI = 2 * math.pi

PRESETS = {
    "kuramoto-homogeneous": {
        "model": "homogeneous",
        "grid": {"L": TWO_PI, "d": 1, "n": 128},
        "potential": {"kind": "kuramoto"},
        "kappa": 0.25,
        "time": {"dt": 1e-3, "T": 10.0, "cadence": 0.05},
        "initial": {"kind": "perturbed-uniform", "eps": 0.5},
    },
    "kuramoto-supercritical": {
        "model": "homogeneous",
        "grid": {"L": TWO_PI, "d": 1, "n": 64},
        "potential": {"kind": "kuramoto"},
        "kappa": 2.5,
        "time": {"dt": 2e-3, "T": 20.0, "cadence": 0.1},
        "initial": {"kind": "perturbed-uniform", "eps": 0.1},
    },
    "erdos-renyi": {
        "model": "graphop",
        "grid": {"L": TWO_PI, "d": 1, "n": 64},
        "potential": {"kind": "kuramoto"},
        "graphop": {"kind": "constant", "p": 0.3, "m": 64},
        "kappa": 1.0,
        "time": {"dt": 1e-3, "T": 10.0, "cadence": 0.05},
        "initial": {"kind": "perturbed-uniform", "eps": 0.5, "modulation": "ramp"},
    },
    "power-law-sub": {
        "model": "graphop",
        "grid": {"L": TWO_PI, "d": 1, "n": 64},
        "potential": {"kind": "kuramoto"},
        "graphop": {"kind": "power-law", "alpha": 0.25, "m": 128},
        "kappa_fraction": 0.8,
        "time": {"dt": 1e-3, "T": 10.0, "cadence": 0.05},
        "initial": {"kind": "perturbed-uniform", "eps": 0.5, "modulation": "ramp"},
    },
    "power-law-super": {
        "model": "graphop",
        "grid": {"L": TWO_PI, "d": 1, "n": 64},
        "potential": {"kind": "kuramoto"},
        "graphop": {"kind": "power-law", "alpha": 0.75, "m": 64},
        "kappa": 0.3,
        "time": {"dt": 2e-3, "T": 20.0, "cadence": 0.1},
        "initial": {"kind": "perturbed-uniform", "eps": 0.5, "modulation": "ramp"},
    },
    "power-law-refinement": {
        "model": "graphop",
        "graphop": {"kind": "power-law", "alpha": 0.75, "m": [32, 64, 128, 256]},
        "kappa": 0.3,
    },
    "spherical": {
        "model": "graphop",
        "grid": {"L": TWO_PI, "d": 1, "n": 64},
        "potential": {"kind": "kuramoto"},
        "graphop": {"kind": "spherical", "n_sphere": 32, "m_equator": 64},
        "kappa": 0.25,
        "time": {"dt": 5e-3, "T": 5.0, "cadence": 0.05},
        "initial": {"kind": "perturbed-uniform", "eps": 0.5, "modulation": "sphere-z"},
    },
    "sakaguchi-gaussian": {
        "model": "sakaguchi",
        "grid": {"L": TWO_PI, "d": 1, "n": 128},
        "potential": {"kind": "kuramoto"},
        "frequency": {"kind": "gaussian", "sigma": 1.0, "n_nodes": 16},
        "beta_temp": 1.0,
        "kappa": 0.2,
        "time": {"dt": 1e-3, "T": 10.0, "cadence": 0.05},
        "initial": {"kind": "perturbed-uniform", "eps": 0.5},
    },
    "particles-kuramoto": {
        "model": "particles",
        "grid": {"L": TWO_PI, "d": 1, "n": 128},
        "potential": {"kind": "kuramoto"},
        "graphop": {"kind": "complete-graph"},
        "kappa": 0.25,
        "time": {"dt": 1e-3, "T": 5.0, "cadence": 0.5},
        "initial": {"kind": "perturbed-uniform", "eps": 0.5},
        "particles": {"N": [250, 1000, 4000], "seeds": 8, "dt": 0.02, "T": 5.0},
    },
}


def get_preset(name):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])
