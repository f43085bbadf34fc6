"""Latency-optimal resource allocation for a double-IRS wireless-powered
IoT uplink with covertness constraints and train-mobility effects."""

from .doppler import (CoherenceModel, DopplerContext, cascaded_doppler_spread,
                      direct_doppler, effective_rate_factor, mitigate_phases,
                      total_doppler)
from .downlink import (BetaCoefficients, BetaResult, ball_quadratic_min,
                       beta_coefficients, dca_coefficients, dca_energy_beams,
                       optimize_beta, optimize_theta1)
from .exceptions import (ConfigError, ContractError, DomainError,
                         ExperimentError, InfeasibleInstanceError,
                         SdpInfeasibleError, ValidationError)
from .harness import (DEFAULT_TRAIN_GRID, ExperimentSpec, ResultTable,
                      aggregate, compare_benchmarks, emit_csv, run_experiment)
from .linkmetrics import (DownlinkDecision, LatencyReport, UplinkDecision,
                          effective_channels, harvested_power, leakage, mse,
                          mse_all, sinr_and_capacity,
                          upload_latency_objective)
from .outerloop import (BcdOptions, BcdSolution, BcdWarmStart,
                        RatioMultipliers, TraceRecord, bcd_solve,
                        init_multipliers, mse_weights,
                        newton_update_multipliers, optimal_volume_split,
                        psi_residual)
from .scenario import (ArrayGeometry, ChannelSet, SystemConfig, TrainState,
                       array_response, build_channel_set, load_config,
                       path_loss)
from .sdp import AdmmState, SdpSolution, solve_constrained_sdp
from .uplink import (GammaResult, RoundingResult, SdrProblem, build_sdr_problem,
                     mmse_decoder, optimize_gamma, recover_phases, solve_sdp)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
