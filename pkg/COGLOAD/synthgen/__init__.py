from .subject import (SubjectProfile, LatentLoad, InterventionEffects, SCAFFOLD_KINDS, CHALLENGE_KINDS,
                      intervention_offset, latent_target, latent_step, relax, nback_phase)
from .eeg import BandMixModel, EegGenerator, gen_eeg, PINK_A, PINK_B
from .trainee import TaskStep, STEP_CATALOGUE, ErrorModel, Trainee, error_probability, required_actions, task_step
from .phases import PhaseSimulator, make_load_classification
from .scenario import POLICIES, ScenarioConfig, run_scenario, time_in_band
