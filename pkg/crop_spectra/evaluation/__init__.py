# Cross-validation, grid search and report writers
