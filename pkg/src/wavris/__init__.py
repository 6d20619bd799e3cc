"""Simulation and optimization of wave-controlled reconfigurable intelligent surfaces."""
from .bias_wave import (BiasLineConfig, BiasMode, BiasWaveConfig, effective_bias, element_positions,
                        fit_modes, instantaneous_wave)
from .cell_model import (CellResonatorParams, CouplingKernel, PhaseProfile, UnitCellModel, VaractorParams,
                         apply_coupling, capacitance, ideal_reflection, reflection)
from .channels import (ChannelSet, ChannelSpec, LinkBudget, PathSet, RisGeometry, link_snr,
                       sample_channel, sample_channels, steering_vector)
from .optimize import (OptimizationResult, OptimizerConfig, estimate_cascaded, ideal_profile,
                       optimize_modes)

__version__ = "0.1.0"
