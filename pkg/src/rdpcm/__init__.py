"""Water-filling rate-distortion analysis for stationary Gaussian sources,
with simulators that realize the optimum by prediction: a predictive
quantization test channel, entropy-coded dithered lattice quantization,
and the dual noise-prediction equalizer for ISI channels."""

__version__ = "0.1.0"
