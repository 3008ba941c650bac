"""
Experiment configuration, model persistence, file emission and command implementations
"""
