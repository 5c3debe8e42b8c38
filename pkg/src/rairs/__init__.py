"""Uplink sum-rate simulator and optimizer for a steerable-antenna base
station assisted by a reflecting surface."""

__version__ = "0.1.0"

from .scenario import ConfigError, ScenarioConfig
from .geometry import (ArrayLayout, FieldRegionReport, RotationState, boresight,
                       boresight_jacobian, fraunhofer_distance, unit_direction,
                       validate_field_regions)
from .radiation import (GainPattern, amplitude_rotation_gradient, antenna_gain,
                        gain_subgradient, irs_element_gain)
from .channel import (ChannelSet, ChannelWorkspace, GeometryRealization,
                      build_channel_set, channel_rotation_gradient,
                      direct_channel, dump_channels_csv, effective_channel,
                      generate_realization, irs_bs_channel, user_irs_channel)
from .optimizer import (FpConfig, OptimizerConfig, PgaConfig, RcgConfig, Scheme,
                        SolveReport, UplinkProblem, ao_solve, fp_beta_update,
                        gradient_check, mmse_beamformer, optimize_phases,
                        optimize_rotations, rate_rotation_gradient, rcg_inner,
                        sinr, sum_rate)
from .experiment import (AggregateRow, GapReport, SweepRow, SweepSpec,
                         SweepVariable, aggregate_rows, run_sweep,
                         summarize_gaps, write_aggregate_csv, write_rows_csv)
