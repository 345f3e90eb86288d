"""Gaussian process priors for unmix"""
