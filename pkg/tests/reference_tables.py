"""Published 1-D mixture results, used to exercise the aggregation pipeline.

Rows are methods, each holding d_m = 1..5 blocks of the columns
``0, 1, 2, M`` (per-class and marginal MMD, top-90% averages).
"""
from pathlib import Path

from dualproj.cli import result_filename
from dualproj.trainer import RunResult, TrainConfig

METHODS = ["projgan", "tacgan", "fcgan:reverse-kl", "p2gan"]
COLUMNS = ("0", "1", "2", "M")

MMD = {
    "bce": {
        "projgan": [0.040, 0.106, 0.273, 0.074, 0.044, 0.327, 1.246, 0.248,
                    0.060, 0.635, 1.628, 0.325, 0.073, 0.932, 3.379, 0.527,
                    0.166, 3.298, 3.903, 1.126],
        "tacgan": [0.015, 0.033, 0.100, 0.027, 0.021, 0.124, 0.529, 0.067,
                   0.020, 0.272, 0.803, 0.149, 0.027, 0.412, 1.969, 0.106,
                   0.035, 1.139, 2.160, 0.156],
        "fcgan:reverse-kl": [0.018, 0.042, 0.170, 0.031, 0.019, 0.090, 0.383, 0.047,
                             0.030, 0.193, 0.635, 0.087, 0.024, 0.575, 2.170, 0.276,
                             0.037, 0.857, 3.328, 0.287],
        "p2gan": [0.009, 0.028, 0.151, 0.026, 0.014, 0.080, 0.345, 0.046,
                  0.016, 0.160, 0.639, 0.084, 0.028, 0.237, 1.530, 0.056,
                  0.030, 0.655, 2.725, 0.261],
    },
    "hinge": {
        "projgan": [0.112, 0.267, 0.879, 0.178, 0.167, 0.725, 2.373, 0.492,
                    0.172, 1.455, 6.385, 0.969, 0.249, 4.904, 15.496, 3.368,
                    0.386, 11.002, 29.382, 7.407],
        "tacgan": [0.190, 0.474, 1.376, 0.416, 0.304, 1.635, 4.213, 1.060,
                   0.357, 3.504, 12.817, 2.531, 0.314, 6.949, 29.822, 6.425,
                   0.264, 13.905, 54.134, 11.125],
        "fcgan:reverse-kl": [0.164, 0.429, 1.484, 0.441, 0.192, 1.718, 5.084, 1.506,
                             0.174, 3.480, 15.491, 3.675, 0.138, 3.629, 19.597, 3.862,
                             0.173, 4.592, 28.753, 4.315],
        "p2gan": [0.118, 0.584, 1.696, 0.490, 0.120, 0.843, 4.486, 1.051,
                  0.152, 2.951, 12.854, 2.852, 0.192, 6.005, 22.003, 5.066,
                  0.295, 9.920, 36.080, 8.145],
    },
}

# published average ranks (BCE, hinge, overall) for the four methods above
PUBLISHED_RANKS = {
    "bce": [3.90, 2.45, 2.15, 1.50],
    "hinge": [1.80, 3.35, 2.45, 2.40],
    "overall": [2.85, 2.90, 2.30, 1.95],
}


def cell(activation, method, d_m):
    row = MMD[activation][method]
    i = 4 * (int(d_m) - 1)
    return dict(zip(COLUMNS, row[i:i + 4]))


def write_synthetic_results(directory) -> int:
    """One RunResult file per (method, activation, d_m) carrying the published MMDs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = 0
    for act in MMD:
        for method in METHODS:
            for d_m in range(1, 6):
                cfg = TrainConfig(variant=method, activation=act, d_m=float(d_m))
                mmd = cell(act, method, d_m)
                res = RunResult(config=cfg.to_dict(), config_digest=cfg.digest(), seed=0,
                                mmd=mmd, fid={"0": 0.0, "1": 0.0, "2": 0.0, "max": 0.0},
                                initial={}, history=[], lambda_trace=None,
                                histogram={}, degenerate=[])
                (directory / result_filename(cfg)).write_text(res.to_json())
                n += 1
    return n

