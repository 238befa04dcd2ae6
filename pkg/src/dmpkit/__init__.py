"""dmpkit: learn, correct and execute dynamical movement primitives, and
detect contact transients in joint-torque streams."""

from .control import Gains, coupled_step, delay_margin, velocity_filter
from .correction import CorrectionInput, find_split, merge_and_refit, smooth_prefix
from .dmp import Dmp, DmpState, basis_activations, fit, forcing, rollout, step
from .rnn import RnnModel, TrainConfig, forward, gradients, loss, train
from .sim import NoiseConfig, Perturbation, run_scenario
from .trajectory import Trajectory, read_csv, write_csv
from .transients import detect_stream, sweep_window, synth_transients

__version__ = "0.1.0"
