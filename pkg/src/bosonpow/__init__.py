"""Boson-sampling proof-of-work: numerics, protocol simulator and economics."""

from .binning import (AccuracyParams, BinnedDistribution, ModeBinning, estimated_mode_binned, exact_mode_binned,
                      required_samples_mode, required_samples_state)
from .chain import Chain, verify_chain
from .consensus import Ledger, Phase, Round, ValidationSettings, announce_block, append_record
from .errors import BosonPowError
from .linalg import haar_unitary, hafnian_exact, permanent_exact, permanent_gurvits
from .params import ParameterSet
from .sampler import InputSpec, exact_distribution, sample

__version__ = "0.1.0"
