"""Binary image denoising with restricted Boltzmann machines and penalized QUBOs."""

__version__ = "0.1.0"

from .baselines import (GaussianFilterDenoiser, GibbsDenoiser, GraphCutDenoiser,
                        MedianFilterDenoiser)
from .core import BinaryImage, QuboMatrix, hamming, overlap, qubo_energy
from .denoise import (DenoiseConfig, DenoiseResult, QuboDenoiser, build_denoise_qubo, denoise,
                      optimal_rho, robust_rho)
from .noise import NoiseSpec, SaltAndPepperNoise, apply_noise
from .rbm import RBM, RbmParams, TrainConfig, rbm_to_qubo, train_cd

__all__ = [
    "BinaryImage", "QuboMatrix", "hamming", "overlap", "qubo_energy",
    "RBM", "RbmParams", "TrainConfig", "rbm_to_qubo", "train_cd",
    "NoiseSpec", "SaltAndPepperNoise", "apply_noise",
    "DenoiseConfig", "DenoiseResult", "QuboDenoiser", "build_denoise_qubo", "denoise",
    "optimal_rho", "robust_rho",
    "MedianFilterDenoiser", "GaussianFilterDenoiser", "GraphCutDenoiser", "GibbsDenoiser",
]
