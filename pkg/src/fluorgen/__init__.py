"""Fluorophore inverse-design toolkit.

Subpackages:
    tensor      dense float64 tensors with tape-based reverse-mode autodiff
    chem        SMILES subset parsing, molecular graphs, fingerprints, splits
    autoencoder graph-to-sequence autoencoder with beam-search decoding
    prediction  dual-branch property predictors and oracle calibration
    diffusion   latent denoising diffusion with prompt conditioning
    guidance    gradient-guided denoising and design loss library
    evolve      many-objective evolutionary molecular optimization
    permeate    membrane permeability post-processing
    cli         operational command-line surface
"""

__version__ = "0.1.0"
