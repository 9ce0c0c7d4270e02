"""Synthetic scenes and brute-force reference implementations."""

from .oracles import (MAX_PATHS, oracle_band_sum, oracle_bilateral, oracle_block_stats, oracle_block_sum,
                      oracle_disparity_full, oracle_dp_enumerate_u, oracle_dp_enumerate_v, oracle_integral,
                      oracle_line_point, oracle_m0, oracle_ncc_direct)
from .scene import (DEFAULT_BETA, DEFAULT_SIZE, LaneTruth, SyntheticScene, gen_scene, random_scene_params,
                    scaled_beta, scene_suite, value_noise)

__all__ = [
    "MAX_PATHS", "oracle_band_sum", "oracle_bilateral", "oracle_block_stats", "oracle_block_sum",
    "oracle_disparity_full", "oracle_dp_enumerate_u", "oracle_dp_enumerate_v", "oracle_integral",
    "oracle_line_point", "oracle_m0", "oracle_ncc_direct", "DEFAULT_BETA", "DEFAULT_SIZE", "LaneTruth",
    "SyntheticScene", "gen_scene", "random_scene_params", "scaled_beta", "scene_suite", "value_noise",
]
