"""Optimization and training loops for unmix"""
