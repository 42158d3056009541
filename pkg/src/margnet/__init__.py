"""Amortised inference for binary Bayesian networks.

A feed-forward marginaliser is trained on masked samples from the model
prior and then drives importance sampling, either as a one-shot estimate,
an independent per-node proposal, or a sequential proposal re-conditioned
after every draw.
"""
__version__ = "0.1.0"
