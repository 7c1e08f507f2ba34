"""Flight-pause model of human mobility with corrections for informative data collection."""
from .exposure import (BoundingBox, ExposureReport, Hotspot, center_and_bound, evaluate_exposure,
                       exposure_time, sample_hotspot)
from .imputation import (BridgeSpec, GapPlan, ImputationMethod, ImputationSet, bridge_flights_ffbs,
                         impute_gaps, sample_gap_plan)
from .inference import (FitMode, FitResult, brute_force_gap_log_likelihood, fit,
                        mnar_adjusted_log_likelihood, naive_mar_log_likelihood,
                        stationary_flight_marginal, two_state_nstep)
from .mechanisms import (CompositeGap, FullObservation, GeometricGaps, MovementTriggered, OnOff,
                         UnscheduledGap, generate_z, mask_trajectory)
from .model import (DEFAULT_INIT, FLIGHT, PAUSE, Increment, IncrementType, InitialIncrementSpec,
                    InvalidMotionError, Motion, Theta, complete_data_log_likelihood, simulate_motion,
                    validate_motion)
from .pipeline import RunConfig, mini_config, run_pipeline
from .trajectory import (BlockStats, ExtractionResult, ObservedTrajectory, Trajectory,
                         effective_sample_size, extract_increments, motion_to_trajectory)

__version__ = "0.1.0"
