# Gaussian discriminant models, MLP baseline and model files
