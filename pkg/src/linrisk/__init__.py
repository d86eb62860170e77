"""Sharp risk formulas for linearized two-layer networks, with Monte Carlo checks.

Submodules
----------
gaussian_design   ridge regression on Gaussian / Rademacher designs
det_equiv         deterministic equivalents, effective ranks, benign-overfitting bounds
latent_space      closed-form risk of the latent space model
function_space    Hermite / Gegenbauer machinery, activations and targets
kernel_krr        kernel ridge regression on the sphere
feature_models    random-feature and neural-tangent models
mean_field        mean-field particle dynamics and the single-neuron experiment
excli             experiment command line interface
"""

__version__ = "0.1.0"
