from .config import (ALPHA_HIGH, ALPHA_LOW, PHI_LEVELS, RHO_LEVELS, ConfigError, EnvConfig,
                     Scenario, desk_config)
from .formulas import (channel_model, criticality_index, fly_and_energy, local_compute,
                       transmission, uav_compute)
from .scenario import desk_scenario, load_scenario, make_env, scenario_traces
from .wban import (Action, CriticalityChain, EnvState, EpisodeFinished, StepOutcome, TaskSpec,
                   WBANEnv, decode_action, slot_outcome, state_vector, step_criticality)
